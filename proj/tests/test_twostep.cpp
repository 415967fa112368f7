#include <doctest.h>

#include <cmath>

#include "qestlab/stats.hpp"
#include "qestlab/twostep.hpp"
#include "testutil.hpp"

using namespace qestlab;
using namespace qestlab::testutil;

namespace {
Rvec vec1(double x) {
    Rvec v(1);
    v[0] = x;
    return v;
}
const Rmat g1 = Rmat::Identity(1, 1);

long pre_floor(long n2) { return static_cast<long>(std::ceil(std::pow(n2, 0.75) - 1e-9)); }
} // namespace

TEST_CASE("allocation") {
    CHECK(allocate(2, 1) == std::pair<long, long>(1, 1));
    CHECK(allocate(10, 2) == std::pair<long, long>(4, 3));
    CHECK(allocate(4096, 1) == std::pair<long, long>(468, 3628));
    CHECK_THROWS_AS(allocate(1, 1), Infeasible);

    // Exhaustive property check against a brute-force oracle.
    for (long n1 : {1L, 2L, 4L}) {
        for (long n = 1 + n1; n <= 10000; n = (n < 64 ? n + 1 : n + 97)) {
            const auto [n0, n2] = allocate(n, n1);
            CHECK(n0 + n1 * n2 == n);
            CHECK(pre_floor(n2) <= n0);
            CHECK(n0 >= 1);
            // n2 is the largest feasible block count.
            CHECK(pre_floor(n2 + 1) + n1 * (n2 + 1) > n);
            long best = 0;
            for (long cand = 1; cand * n1 < n; ++cand)
                if (pre_floor(cand) + n1 * cand <= n) best = cand;
            CHECK(best == n2);
        }
    }
}

TEST_CASE("preliminary tomography") {
    const StateModel qz = builtin_state_model("qubit-z");
    const PreliminaryEstimator pre = preliminary_tomography(qz);

    // Frequencies implying Bloch-z 0.35 read out directly.
    Rvec freq(6);
    const double bz = 0.35;
    freq << 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, (1 + bz) / 6, (1 - bz) / 6;
    CHECK(pre.project_fn(freq)[0] == doctest::Approx(0.35).epsilon(1e-12));

    // Finite-sample overshoot clips to the region margin.
    freq << 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, (1 + 1.2) / 6, (1 - 1.2) / 6;
    CHECK(pre.project_fn(freq)[0] == doctest::Approx(0.999).epsilon(1e-12));

    // Exact expected frequencies are a fixed point for the 2-parameter model.
    const StateModel be = builtin_state_model("bloch-equator");
    Rvec theta(2);
    theta << 0.2, 0.1;
    const PreliminaryEstimator pre2 = preliminary_tomography(be);
    const Rvec exact = outcome_distribution(be.state_fn(theta), pre2.povm);
    const Rvec back = pre2.project_fn(exact);
    CHECK((back - theta).norm() < 1e-12);

    // A POVM blind to the parameter fails identifiability.
    StateModel qz2 = qz;
    CHECK_THROWS_AS(preliminary_tomography(qz2, Povm::projective_axis(1, 0, 0)),
                    IdentifiabilityFailure);

    // Models without a closed-form Bloch readout fall back to grid-refined
    // least squares; exact frequencies still recover theta.
    StateModel anon = qz;
    anon.bloch_project = nullptr;
    const PreliminaryEstimator pre_anon = preliminary_tomography(anon);
    const Rvec exact_anon = outcome_distribution(anon.state_fn(vec1(0.27)), pre_anon.povm);
    CHECK(pre_anon.project_fn(exact_anon)[0] == doctest::Approx(0.27).epsilon(1e-6));

    // User-POVM variant with probability-space least squares.
    const PreliminaryEstimator pre_user = preliminary_tomography(qz, Povm::pauli_6());
    const Rvec exact_user = outcome_distribution(qz.state_fn(vec1(-0.42)), pre_user.povm);
    CHECK(pre_user.project_fn(exact_user)[0] == doctest::Approx(-0.42).epsilon(1e-6));
}

TEST_CASE("two-step single trials") {
    const StateModel qz = builtin_state_model("qubit-z");
    TwoStepConfig cfg;
    cfg.n = 64;
    cfg.n1 = 1;
    cfg.seed = 7;
    cfg.preliminary = preliminary_tomography(qz);
    cfg.lue_factory = default_lue_factory(qz);

    // The default factory measures sigma_z and assigns values +/-1, so each
    // trial's estimate is a mean of n2 signs: n2 * T must be an integer of
    // matching parity.
    const auto [n0, n2] = allocate(cfg.n, cfg.n1);
    for (long t = 0; t < 50; ++t) {
        Rng rng = Rng::stream(cfg.seed, t);
        const Rvec est = run_two_step(qz, vec1(0.3), cfg, rng);
        const double scaled = est[0] * static_cast<double>(n2);
        CHECK(std::abs(scaled - std::llround(scaled)) < 1e-9);
        CHECK((std::llround(scaled) - n2) % 2 == 0);
    }

    // Degenerate block estimator: estimate equals theta0 exactly.
    TwoStepConfig degenerate = cfg;
    degenerate.n = 2;
    degenerate.lue_factory = [](const Rvec& theta0) {
        return Estimator(Povm({identity_c(2)}), {theta0});
    };
    Rng rng(3);
    const Rvec est = run_two_step(qz, vec1(0.3), degenerate, rng);
    Rng rng2(3);
    Rvec freq = Rvec::Zero(6);
    {
        const Rvec p = outcome_distribution(qz.state_fn(vec1(0.3)), degenerate.preliminary->povm);
        freq[rng2.categorical(p)] += 1.0;
    }
    CHECK(est[0] == doctest::Approx(degenerate.preliminary->project_fn(freq)[0]).epsilon(1e-15));

    // Determinism: seed 42 at n = 4096 reproduces the estimate bit for bit.
    TwoStepConfig big = cfg;
    big.n = 4096;
    big.seed = 42;
    Rng a = Rng::stream(big.seed, 5), b = Rng::stream(big.seed, 5);
    CHECK(run_two_step(qz, vec1(0.3), big, a)[0] == run_two_step(qz, vec1(0.3), big, b)[0]);
}

TEST_CASE("monte carlo engine") {
    const StateModel qz = builtin_state_model("qubit-z");
    TwoStepConfig cfg;
    cfg.n = 4096;
    cfg.n1 = 1;
    cfg.seed = 11;

    McResult mc = monte_carlo(qz, vec1(0.3), cfg, 400, g1);
    CHECK(std::abs(mc.n_weighted_cost - 0.91) < std::max(3.0 * mc.n_weighted_cost_stderr, 0.08));
    CHECK(mc.flagged_trials == 0);

    McResult origin = monte_carlo(qz, vec1(0.0), cfg, 400, g1);
    CHECK(std::abs(origin.n_weighted_cost - 1.0) <
          std::max(3.0 * origin.n_weighted_cost_stderr, 0.1));

    // trials = 2 produces a report with a large stderr, no error.
    const McResult tiny = monte_carlo(qz, vec1(0.3), cfg, 2, g1);
    CHECK(tiny.report.trials == 2);
    CHECK(std::isfinite(tiny.n_weighted_cost_stderr));

    // A factory failure falls back to theta0 and flags the trial instead of
    // aborting the run.
    TwoStepConfig flaky = cfg;
    flaky.n = 64;
    flaky.lue_factory = [&](const Rvec& theta0) -> Estimator {
        if (theta0[0] > 0.0) throw SingularFisher("injected failure");
        return default_lue_factory(qz)(theta0);
    };
    const McResult flagged = monte_carlo(qz, vec1(0.3), flaky, 50, g1);
    CHECK(flagged.flagged_trials > 0);
    CHECK(flagged.report.trials == 50);
}

TEST_CASE("monte carlo determinism across worker counts") {
    const StateModel qz = builtin_state_model("qubit-z");
    TwoStepConfig cfg;
    cfg.n = 256;
    cfg.n1 = 1;
    cfg.seed = 99;
    const McResult one = monte_carlo(qz, vec1(0.3), cfg, 100, g1, 1);
    const McResult three = monte_carlo(qz, vec1(0.3), cfg, 100, g1, 3);
    CHECK(one.n_weighted_cost == three.n_weighted_cost);
    CHECK(one.report.bias[0] == three.report.bias[0]);
    for (long t = 0; t < 100; ++t)
        CHECK(one.per_trial_estimates[t][0] == three.per_trial_estimates[t][0]);
}

TEST_CASE("block sizes above one") {
    const StateModel qz = builtin_state_model("qubit-z");
    for (long n1 : {2L, 4L}) {
        TwoStepConfig cfg;
        cfg.n = 1024;
        cfg.n1 = n1;
        cfg.seed = 21 + n1;
        const McResult mc = monte_carlo(qz, vec1(0.3), cfg, 300, g1);
        CHECK(mc.n1 == n1);
        CHECK(mc.n0 + n1 * mc.n2 == 1024);
        CHECK(std::abs(mc.n_weighted_cost - 0.91) <
              std::max(4.0 * mc.n_weighted_cost_stderr, 0.12));
    }
}

TEST_CASE("two-step on a tabulated user model") {
    // The z family supplied as a state grid: no closed-form Bloch readout,
    // finite-difference derivatives, generic least-squares preliminary.
    std::vector<double> thetas;
    std::vector<DensityOperator> states;
    for (double t = -0.9; t <= 0.9 + 1e-9; t += 0.05) {
        thetas.push_back(t);
        states.push_back(qubit_z_state(t));
    }
    const StateModel grid = grid_state_model(thetas, states);
    TwoStepConfig cfg;
    cfg.n = 256;
    cfg.n1 = 1;
    cfg.seed = 31;
    const McResult mc = monte_carlo(grid, vec1(0.3), cfg, 100, g1);
    CHECK(std::abs(mc.n_weighted_cost - 0.91) <
          std::max(4.0 * mc.n_weighted_cost_stderr, 0.2));
    CHECK(mc.flagged_trials == 0);
}

TEST_CASE("asymptotic unbiasedness and optimality trend") {
    const StateModel qz = builtin_state_model("qubit-z");
    const long trials = 400;
    double prev_cost = std::numeric_limits<double>::infinity();
    double prev_stderr = 0.0;
    for (long n : {256L, 1024L, 4096L}) {
        TwoStepConfig cfg;
        cfg.n = n;
        cfg.n1 = 1;
        cfg.seed = 1234;
        const McResult mc = monte_carlo(qz, vec1(0.3), cfg, trials, g1);
        const double bias_bound =
            5.0 / std::sqrt(static_cast<double>(trials * n)) + 10.0 / static_cast<double>(n);
        CHECK(std::abs(mc.report.bias[0]) <= bias_bound);
        // Non-increasing within 2 stderr.
        CHECK(mc.n_weighted_cost <= prev_cost + 2.0 * (mc.n_weighted_cost_stderr + prev_stderr));
        prev_cost = mc.n_weighted_cost;
        prev_stderr = mc.n_weighted_cost_stderr;
    }
}

TEST_CASE("normality diagnostics") {
    const StateModel qz = builtin_state_model("qubit-z");

    // Calibration: exact standard-normal quantiles injected as estimates.
    McResult fake;
    fake.report.theta = vec1(0.3);
    fake.report.n = 4096;
    const double v = 1.0 - 0.09;
    for (int i = 1; i <= 2000; ++i) {
        const double q = normal_quantile((i - 0.5) / 2000.0);
        fake.per_trial_estimates.push_back(vec1(0.3 + q * std::sqrt(v / 4096.0)));
    }
    CHECK(normality_ks(fake, qz, vec1(0.3), g1) < 0.02);

    // Constant estimates: point mass against the normal gives 0.5.
    McResult constant;
    constant.report.theta = vec1(0.3);
    constant.report.n = 4096;
    constant.per_trial_estimates.assign(100, vec1(0.3));
    CHECK(normality_ks(constant, qz, vec1(0.3), g1) == doctest::Approx(0.5).epsilon(1e-12));
}
