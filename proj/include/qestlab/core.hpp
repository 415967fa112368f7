#pragma once

#include <utility>
#include <vector>

#include "qestlab/errors.hpp"
#include "qestlab/linalg.hpp"

namespace qestlab {

// Construction tolerances. Violations up to *_reject are repaired
// (symmetrization / clipping / renormalization); anything beyond is rejected.
inline constexpr double kTolHerm = 1e-12;
inline constexpr double kTolPsd = 1e-10;
inline constexpr double kTolReject = 1e-8;

/// Bounded Hermitian operator on a finite-dimensional space.
/// Symmetrized at construction; rejects inputs further than 1e-8 from Hermitian.
class HermitianOperator {
  public:
    explicit HermitianOperator(Cmat entries);

    int dim() const { return static_cast<int>(m_.rows()); }
    const Cmat& matrix() const { return m_; }
    double trace() const { return m_.trace().real(); }

  private:
    Cmat m_;
};

/// Density operator: Hermitian, unit trace, PSD. Eigenvalues in [-1e-8, 0)
/// are clipped to zero and the operator renormalized; worse is rejected.
class DensityOperator {
  public:
    explicit DensityOperator(Cmat entries);

    int dim() const { return static_cast<int>(m_.rows()); }
    const Cmat& matrix() const { return m_; }
    double min_eigenvalue() const { return herm_eigenvalues(m_).minCoeff(); }

    static DensityOperator maximally_mixed(int d);
    static DensityOperator pure(const Cvec& ket);

  private:
    Cmat m_;
};

/// Finite-outcome positive operator valued measure.
class Povm {
  public:
    /// Labels default to 0..k-1.
    explicit Povm(std::vector<Cmat> elements, std::vector<int> labels = {});

    int dim() const { return static_cast<int>(elements_[0].rows()); }
    int n_outcomes() const { return static_cast<int>(elements_.size()); }
    const Cmat& element(int i) const { return elements_[i]; }
    int label(int i) const { return labels_[i]; }

    /// Two-outcome projective measurement of the Bloch axis n (labels 0 = +, 1 = -).
    static Povm projective_axis(double nx, double ny, double nz);
    /// Projectors onto the eigenvectors of a Hermitian observable.
    static Povm eigenbasis(const HermitianOperator& obs);
    /// Uniformly weighted x/y/z projector pairs: 6 outcomes, ordered
    /// (x+, x-, y+, y-, z+, z-).
    static Povm pauli_6();

  private:
    std::vector<Cmat> elements_;
    std::vector<int> labels_;
};

/// CPTP map in Kraus form.
class KrausChannel {
  public:
    KrausChannel(int input_dim, int output_dim, std::vector<Cmat> kraus_ops);

    int input_dim() const { return in_; }
    int output_dim() const { return out_; }
    const std::vector<Cmat>& kraus() const { return ops_; }

    Cmat apply(const Cmat& rho) const;
    DensityOperator apply(const DensityOperator& rho) const;

    static KrausChannel identity(int d);
    /// Channel reconstructed from a PSD Choi matrix (trace = input dim).
    static KrausChannel from_choi(const Cmat& choi, int input_dim, int output_dim);

  private:
    int in_, out_;
    std::vector<Cmat> ops_;
};

/// Finite-outcome instrument: one CP branch (list of Kraus operators) per
/// outcome; the branches jointly satisfy sum K^dag K = 1.
class Instrument {
  public:
    struct Branch {
        int label;
        std::vector<Cmat> kraus;
    };

    explicit Instrument(std::vector<Branch> branches);

    int dim() const { return static_cast<int>(branches_[0].kraus[0].rows()); }
    int n_outcomes() const { return static_cast<int>(branches_.size()); }
    const Branch& branch(int i) const { return branches_[i]; }

    /// Unnormalized branch action sum_k K rho K^dag.
    Cmat apply_branch(int i, const Cmat& rho) const;
    /// Non-selective action (sum over all branches).
    Cmat apply_all(const Cmat& rho) const;
    /// POVM induced by the instrument: element_i = sum_k K^dag K.
    Povm induced_povm() const;

    /// Lueders instrument of a POVM: one branch per element, K = sqrt(M).
    static Instrument lueders(const Povm& m);

  private:
    std::vector<Branch> branches_;
};

/// Kronecker product of two square operators.
Cmat tensor(const Cmat& a, const Cmat& b);
HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b);
DensityOperator tensor(const DensityOperator& a, const DensityOperator& b);

/// Partial trace of an operator on a tensor product of subsystems with the
/// given dimensions, keeping the subsystems listed in `keep` (ascending).
Cmat partial_trace(const Cmat& op, const std::vector<int>& dims, const std::vector<int>& keep);
HermitianOperator partial_trace(const HermitianOperator& op, const std::vector<int>& dims,
                                const std::vector<int>& keep);

/// Outcome distribution p(w) = tr(rho M_w), clipped at zero and renormalized.
Rvec outcome_distribution(const DensityOperator& rho, const Povm& m);

/// Probability of branch `index` and the normalized a-posteriori state.
/// Raises ZeroProbabilityBranch when the branch probability is below 1e-14.
std::pair<double, DensityOperator> posterior_state(const DensityOperator& rho,
                                                   const Instrument& inst, int index);

/// Choi matrix sum_{jk} |j><k| (x) Lambda(|j><k|); unnormalized (trace = input dim).
HermitianOperator choi(const KrausChannel& ch);

} // namespace qestlab
