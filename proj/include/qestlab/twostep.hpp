#pragma once

#include <functional>

#include "qestlab/fisher.hpp"
#include "qestlab/rng.hpp"

namespace qestlab {

/// First-stage tomography: an informationally adequate POVM plus a
/// projection of raw outcome frequencies into the parameter region.
struct PreliminaryEstimator {
    Povm povm;
    std::function<Rvec(const Rvec&)> project_fn; // frequencies -> theta-hat in region

    PreliminaryEstimator(Povm p, std::function<Rvec(const Rvec&)> proj,
                         const StateModel& model);
};

struct TwoStepConfig {
    long n = 2;                   // total samples
    long n1 = 1;                  // block size
    std::function<Estimator(const Rvec&)> lue_factory; // theta0 -> single-copy estimator
    std::optional<PreliminaryEstimator> preliminary;   // default built per model
    std::uint64_t seed = 0;
};

struct McResult {
    EstimationReport report;
    std::vector<Rvec> per_trial_estimates;
    double ks_stat = std::numeric_limits<double>::quiet_NaN();
    long n0 = 0, n1 = 0, n2 = 0;
    long flagged_trials = 0;
    double n_weighted_cost = 0.0;        // n Tr(G mse)
    double n_weighted_cost_stderr = 0.0; // MC standard error of the above
};

/// Split n samples into a preliminary stage n0 and n2 blocks of n1 samples,
/// with n0 at least ceil(n2^(3/4)) and n2 as large as feasible.
std::pair<long, long> allocate(long n, long n1);

/// Default preliminary stage for the model: 6-outcome Pauli POVM with
/// least-squares Bloch readout for qubit models (clipped into the region).
PreliminaryEstimator preliminary_tomography(const StateModel& model);
/// General-model variant: user-supplied POVM, grid-refined least squares.
PreliminaryEstimator preliminary_tomography(const StateModel& model, const Povm& povm);

/// Default single-copy locally unbiased family: measure the SLD eigenbasis
/// at theta0 (single-parameter models).
std::function<Estimator(const Rvec&)> default_lue_factory(const StateModel& model);

/// One trial of the two-step estimator; `flagged` is set when the factory
/// failed at theta0 and the preliminary estimate itself was returned.
Rvec run_two_step(const StateModel& model, const Rvec& theta_true, const TwoStepConfig& cfg,
                  Rng& rng, bool* flagged = nullptr);

McResult monte_carlo(const StateModel& model, const Rvec& theta_true, const TwoStepConfig& cfg,
                     long trials, const Rmat& g, int workers = 0);

/// Kolmogorov-Smirnov statistic of sqrt(n) V^(-1/2) (T - theta) against the
/// standard normal, with V the single-copy inverse quantum Fisher information.
double normality_ks(const McResult& mc, const StateModel& model, const Rvec& theta,
                    const Rmat& g);

} // namespace qestlab
