#pragma once

#include <optional>
#include <vector>

#include "qestlab/models.hpp"

namespace qestlab {

struct FisherMatrix {
    Rmat matrix;                  // m x m, symmetric PSD
    enum class Kind { classical, sld } kind;
};

/// Per-outcome logarithmic derivative vectors l(w) in R^m; outcomes with
/// probability below the support threshold are flagged.
struct LogDerivative {
    std::vector<Rvec> values;     // aligned with the POVM outcomes
    std::vector<bool> off_support;
};

/// Measurement plus outcome -> R^m map. `values` is aligned with the POVM
/// outcome order. value_bound, when set, bounds the diameter of the range.
struct Estimator {
    Povm povm;
    std::vector<Rvec> values;
    std::optional<double> value_bound;

    Estimator(Povm m, std::vector<Rvec> vals, std::optional<double> bound = std::nullopt);
};

struct EstimationReport {
    Rvec theta;
    Rmat mse;          // = variance + bias bias^T (exact in enumeration mode)
    Rmat variance;
    Rvec bias;
    Rmat b_matrix;     // B^i_j = d_j E[T^i]
    double weighted_cost = 0.0; // Tr(G mse)
    long n = 1;
    long trials = 0;   // 0 in exact-enumeration mode
    Rmat stderr_mse;   // per-entry MC standard error (zero when exact)
};

/// Finite outcome law of a measurement under the model: probabilities,
/// their parameter derivatives, and the estimator values. This is the
/// common currency between the POVM-based and schedule-based paths.
struct DiscreteLaw {
    Rvec probs;                   // size K
    Rmat dprobs;                  // m x K
    std::vector<Rvec> values;     // K entries in R^m
};

DiscreteLaw law_of(const Estimator& est, const StateModel& model, const Rvec& theta);

/// Symmetric logarithmic derivative: eigenbasis pseudo-solve of
/// d_i rho = (L rho + rho L)/2 with blocked directions set to zero.
HermitianOperator sld(const StateModel& model, const Rvec& theta, int i);

/// SLD quantum Fisher information J_ij = Re tr(rho L_i L_j).
FisherMatrix qfi_sld(const StateModel& model, const Rvec& theta);

/// Classical Fisher information of the POVM outcome statistics.
FisherMatrix classical_fisher(const StateModel& model, const Rvec& theta, const Povm& m);

LogDerivative log_derivative(const StateModel& model, const Rvec& theta, const Povm& m);

/// The minimum-variance locally unbiased estimator at theta for a fixed POVM:
/// T^j(w) = theta^j + sum_i (J^-1)^{ji} l_i(w).
Estimator locally_unbiased_estimator(const StateModel& model, const Rvec& theta, const Povm& m);

/// Affine correction T' = B^-1 (T - E_theta0[T]) + theta0 making an estimator
/// locally unbiased at theta0.
Estimator rebias_estimator(const Estimator& est, const StateModel& model, const Rvec& theta0);

/// Pointwise truncation: T'(w) = T(w) if ||T(w) - theta|| <= L, else theta.
Estimator truncate_estimator(const Estimator& est, const Rvec& theta, double L);

/// Exact-enumeration moments of an estimator at theta with weight G.
EstimationReport evaluate_exact(const Estimator& est, const StateModel& model, const Rvec& theta,
                                const Rmat& g);

/// Law-level core used by both the POVM path and the adaptive-schedule path.
EstimationReport evaluate_law(const DiscreteLaw& law, const Rvec& theta, const Rmat& g);
std::vector<Rvec> rebias_values(const DiscreteLaw& law, const Rvec& theta0);

} // namespace qestlab
