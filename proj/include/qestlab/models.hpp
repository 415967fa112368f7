#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qestlab/core.hpp"

namespace qestlab {

/// Open box region in R^m. Queries are clipped to [lo+margin, hi-margin].
struct ParameterRegion {
    int m = 1;
    std::vector<std::pair<double, double>> box; // per-coordinate (lo, hi)
    double margin = 1e-3;

    bool contains(const Rvec& theta) const;
    Rvec clip(Rvec theta) const;
    Rvec center() const;
};

/// Parametrized family theta -> rho_theta with an optional analytic
/// derivative closure; central finite differences otherwise.
struct StateModel {
    ParameterRegion region;
    std::function<DensityOperator(const Rvec&)> state_fn;
    std::function<HermitianOperator(const Rvec&, int)> derivative_fn; // may be empty
    double fd_step = 1e-5;
    // Builtins expose the inverse Bloch map for preliminary tomography:
    // empirical Bloch vector -> theta-hat (unclipped). Empty for general models.
    std::function<Rvec(const Eigen::Vector3d&)> bloch_project;
    std::string name = "custom";
};

/// Parametrized channel family theta -> Lambda_theta with a derivative
/// oracle on the Choi representation.
struct ChannelModel {
    ParameterRegion region;
    std::function<KrausChannel(const Rvec&)> channel_fn;
    std::function<HermitianOperator(const Rvec&, int)> dchoi_fn; // may be empty
    double fd_step = 1e-5;
    std::string name = "custom";

    HermitianOperator choi_at(const Rvec& theta) const;
    HermitianOperator dchoi_at(const Rvec& theta, int i) const;
};

struct RegularityDiagnostics {
    double a1_estimate = 0.0;              // grid max of ||d rho||_1 and ||dd rho||_1
    std::vector<bool> m2_ok;               // per coordinate, AND-reduced over the grid
    double a2_estimate = 0.0;              // margin of the grid to the region boundary
    double b1_estimate = 0.0;              // Tr of the identity weight (= m)
    double a4n_estimate = std::numeric_limits<double>::quiet_NaN(); // estimator range, if known
    double d2_estimate = std::numeric_limits<double>::quiet_NaN();  // 4th-moment constant, if known
    std::string notes;
};

using AnyModel = std::variant<StateModel, ChannelModel>;

/// Built-in families. Names: qubit-z, qubit-phase (param r), bloch-equator,
/// depolarizing, phase-unitary, product (via product_model).
AnyModel builtin_model(const std::string& name, const std::vector<double>& params = {});
StateModel builtin_state_model(const std::string& name, const std::vector<double>& params = {});
ChannelModel builtin_channel_model(const std::string& name,
                                   const std::vector<double>& params = {});

/// Tensor product of two state models over a shared parameter.
StateModel product_model(const StateModel& a, const StateModel& b);

/// State model interpolated from states given on a 1-d theta grid
/// (piecewise linear in theta; derivatives by finite difference).
StateModel grid_state_model(const std::vector<double>& thetas,
                            const std::vector<DensityOperator>& states, double margin = 1e-3);

/// State model from matrix-valued polynomial coefficients:
/// rho(theta) = sum_k coeffs[k] theta^k (1-d parameter; derivatives by
/// finite difference, like every user-supplied model).
StateModel poly_state_model(const std::vector<Cmat>& coeffs, ParameterRegion region);

/// d rho / d theta_i: analytic closure if present, else central difference.
/// The result is Hermitian and traceless within 1e-8.
HermitianOperator derivative(const StateModel& model, const Rvec& theta, int i);

/// Mixture regularization rho -> (1-eps) rho + eps sigma; derivatives scale
/// by (1-eps). sigma must be strictly positive.
StateModel regularize_model(const StateModel& model, double eps, const DensityOperator& sigma);

/// True iff the kernel-kernel block of d_i rho in rho's eigenbasis vanishes
/// (so a symmetric logarithmic derivative exists for coordinate i).
bool check_m2(const StateModel& model, const Rvec& theta, int i);

/// Numeric regularity summary over a finite grid of parameter points.
RegularityDiagnostics estimate_regularity(const StateModel& model,
                                          const std::vector<Rvec>& grid);
/// Channel variant: grid max of Choi-derivative trace norms.
RegularityDiagnostics estimate_regularity(const ChannelModel& model,
                                          const std::vector<Rvec>& grid);

} // namespace qestlab
