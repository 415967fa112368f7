#pragma once

#include <functional>
#include <vector>

#include "qestlab/fisher.hpp"

namespace qestlab {

/// Round-based semi-classical measurement plan: in round r, sample kappa is
/// measured by an instrument chosen from the data of the completed rounds.
/// `history` is the flat label list of rounds 1..r-1 in round-major,
/// sample-minor order (so round-1 choices are history-independent by
/// construction), with r and kappa 0-based.
struct AdaptiveSchedule {
    int n_samples = 1;
    int rounds = 1;
    std::function<Instrument(int r, int kappa, const std::vector<int>& history)> choose_fn;
};

/// Exhaustive joint outcome law of a schedule under a per-sample state
/// assignment. Path labels are stored round-major, sample-minor.
struct OutcomeTree {
    struct Path {
        std::vector<int> labels;
        double prob;
    };
    int n_samples = 0;
    int rounds = 0;
    std::vector<Path> paths;
};

/// Estimator whose measurement is an adaptive schedule; values are a pure
/// function of the full label path.
struct ScheduleEstimator {
    AdaptiveSchedule schedule;
    std::function<Rvec(const std::vector<int>&)> value_fn;
};

/// Per-sample local-operation component: a POVM on the single sample with a
/// zero-mean value table (the F_kappa of the de-adaptivized estimator).
struct LoComponent {
    Povm povm;
    std::vector<Rvec> values;
};

struct FakeEnsembleReport {
    Rmat v_input;      // V_theta0 of the input estimator
    Rmat v_reduced;    // sum_kappa V_theta0[F_kappa]
    Rmat b_matrix;     // B[S] under the fake-ensemble assignment
    double psd_gap;    // min eigenvalue of v_input - v_reduced
    double max_f_mean; // max_kappa |E_theta0[F_kappa]|
    double max_cross;  // max |E[f_{r,k} f_{r',k'}^T]| over distinct (r,k)
};

struct FakeEnsembleReduction {
    std::vector<LoComponent> components;
    FakeEnsembleReport report;
};

/// Composite instrument of `first` followed by a data-dependent `followup`.
/// Outcome labels enumerate the (first, followup) pairs lexicographically.
Instrument compose_adaptive(const Instrument& first,
                            const std::function<Instrument(int)>& followup);

/// Exact joint law under the given per-sample states (path cap 10^6).
OutcomeTree enumerate_schedule(const AdaptiveSchedule& schedule,
                               const std::vector<DensityOperator>& states);

/// Outcome law of a schedule-based estimator with analytic probability
/// derivatives; plugs into the fisher-module law routines.
DiscreteLaw schedule_law(const ScheduleEstimator& est, const StateModel& model,
                         const Rvec& theta);

/// Locally-unbiasing affine correction for schedule estimators.
ScheduleEstimator rebias_schedule_estimator(const ScheduleEstimator& est, const StateModel& model,
                                            const Rvec& theta0);

/// Finite-difference residual of the Leibniz rule at (r, kappa):
/// d_i E_theta[T] - d_i E_theta E_theta0[T | B_{r,k}] - d_i E_theta0 E_theta[T | B_{r,k}],
/// maximized over coordinates. Derivatives use central differences (h = 1e-4)
/// over exact enumeration.
double leibniz_check(const ScheduleEstimator& est, const StateModel& model, const Rvec& theta0,
                     int r, int kappa);

/// De-adaptivization of a locally unbiased schedule estimator into per-sample
/// components F_kappa measured on fake ensembles frozen at theta0.
FakeEnsembleReduction fake_ensemble_reduce(const ScheduleEstimator& est, const StateModel& model,
                                           const Rvec& theta0);

/// Uniform single-sample randomization T' = n F_x + theta0 of a list of
/// zero-mean components; the returned estimator acts on one sample.
Estimator randomize_single_sample(const std::vector<LoComponent>& components, const Rvec& theta0,
                                  int n);

} // namespace qestlab
