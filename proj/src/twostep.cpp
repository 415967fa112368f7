#include "qestlab/twostep.hpp"

#include <cmath>
#include <thread>

#include "qestlab/stats.hpp"

namespace qestlab {

namespace {

long preliminary_floor(long n2) {
    return static_cast<long>(std::ceil(std::pow(static_cast<double>(n2), 0.75) - 1e-9));
}

/// Gram rank of the scores {tr d_i rho M_w} must equal m for the
/// frequencies to identify theta near the region center.
void check_identifiability(const StateModel& model, const Povm& povm) {
    const int m = model.region.m;
    const Rvec theta = model.region.center();
    Rmat scores(m, povm.n_outcomes());
    for (int i = 0; i < m; ++i) {
        const Cmat drho = derivative(model, theta, i).matrix();
        for (int w = 0; w < povm.n_outcomes(); ++w)
            scores(i, w) = (drho * povm.element(w)).trace().real();
    }
    Eigen::FullPivLU<Rmat> lu(scores * scores.transpose());
    lu.setThreshold(1e-8);
    if (lu.rank() < m)
        throw IdentifiabilityFailure("preliminary POVM does not identify the parameters");
}

} // namespace

PreliminaryEstimator::PreliminaryEstimator(Povm p, std::function<Rvec(const Rvec&)> proj,
                                           const StateModel& model)
    : povm(std::move(p)), project_fn(std::move(proj)) {
    check_identifiability(model, povm);
}

std::pair<long, long> allocate(long n, long n1) {
    if (n1 < 1) throw InvalidConfig("allocate: n1 must be >= 1");
    if (n < 1 + n1) throw Infeasible("allocate: not enough samples for both stages");
    long lo = 1, hi = (n - 1) / n1;
    if (preliminary_floor(lo) + n1 * lo > n)
        throw Infeasible("allocate: no feasible block count");
    while (lo < hi) { // largest n2 with ceil(n2^(3/4)) + n1 n2 <= n
        const long mid = (lo + hi + 1) / 2;
        if (preliminary_floor(mid) + n1 * mid <= n)
            lo = mid;
        else
            hi = mid - 1;
    }
    const long n2 = lo;
    return {n - n1 * n2, n2};
}

PreliminaryEstimator preliminary_tomography(const StateModel& model) {
    const DensityOperator probe = model.state_fn(model.region.center());
    if (probe.dim() != 2)
        throw InvalidConfig("preliminary_tomography: default stage covers qubit models; "
                            "supply a POVM for higher dimensions");
    Povm povm = Povm::pauli_6();
    const ParameterRegion region = model.region;
    auto bloch_project = model.bloch_project;
    StateModel model_copy = model;
    auto project = [region, bloch_project, model_copy](const Rvec& freq) -> Rvec {
        // p(a+) - p(a-) = r_a / 3 for the uniformly weighted axis pairs.
        Eigen::Vector3d bloch(3.0 * (freq[0] - freq[1]), 3.0 * (freq[2] - freq[3]),
                              3.0 * (freq[4] - freq[5]));
        if (bloch_project) return region.clip(bloch_project(bloch));
        // Least squares against the model Bloch vector on a refined grid.
        auto bloch_of = [&model_copy](const Rvec& th) {
            const Cmat rho = model_copy.state_fn(th).matrix();
            return Eigen::Vector3d((rho * pauli_x()).trace().real(),
                                   (rho * pauli_y()).trace().real(),
                                   (rho * pauli_z()).trace().real());
        };
        const int m = region.m;
        Rvec best = region.center();
        double best_err = (bloch_of(best) - bloch).squaredNorm();
        Rvec width(m);
        for (int i = 0; i < m; ++i) width[i] = region.box[i].second - region.box[i].first;
        Rvec center = region.center();
        const int pts = 9;
        for (int round_ = 0; round_ < 12; ++round_) {
            std::vector<int> idx(m, 0);
            const long total = static_cast<long>(std::pow(pts, m));
            for (long t = 0; t < total; ++t) {
                long tt = t;
                Rvec cand(m);
                for (int i = 0; i < m; ++i) {
                    const int k = static_cast<int>(tt % pts);
                    tt /= pts;
                    cand[i] = center[i] + width[i] * (k - (pts - 1) / 2.0) / (pts - 1);
                }
                cand = region.clip(cand);
                const double err = (bloch_of(cand) - bloch).squaredNorm();
                if (err < best_err) { best_err = err; best = cand; }
            }
            center = best;
            width *= 2.0 / (pts - 1);
        }
        return region.clip(best);
    };
    return PreliminaryEstimator(std::move(povm), std::move(project), model);
}

PreliminaryEstimator preliminary_tomography(const StateModel& model, const Povm& povm) {
    const ParameterRegion region = model.region;
    StateModel model_copy = model;
    Povm povm_copy = povm;
    auto project = [region, model_copy, povm_copy](const Rvec& freq) -> Rvec {
        auto probs_of = [&](const Rvec& th) {
            return outcome_distribution(model_copy.state_fn(th), povm_copy);
        };
        const int m = region.m;
        Rvec best = region.center();
        double best_err = (probs_of(best) - freq).squaredNorm();
        Rvec width(m), center = region.center();
        for (int i = 0; i < m; ++i) width[i] = region.box[i].second - region.box[i].first;
        const int pts = 9;
        for (int round_ = 0; round_ < 12; ++round_) {
            const long total = static_cast<long>(std::pow(pts, m));
            for (long t = 0; t < total; ++t) {
                long tt = t;
                Rvec cand(m);
                for (int i = 0; i < m; ++i) {
                    const int k = static_cast<int>(tt % pts);
                    tt /= pts;
                    cand[i] = center[i] + width[i] * (k - (pts - 1) / 2.0) / (pts - 1);
                }
                cand = region.clip(cand);
                const double err = (probs_of(cand) - freq).squaredNorm();
                if (err < best_err) { best_err = err; best = cand; }
            }
            center = best;
            width *= 2.0 / (pts - 1);
        }
        return region.clip(best);
    };
    return PreliminaryEstimator(povm, std::move(project), model);
}

std::function<Estimator(const Rvec&)> default_lue_factory(const StateModel& model) {
    if (model.region.m != 1)
        throw MultiparameterUnsupported(
            "default_lue_factory: built-in factory covers single-parameter models");
    StateModel m = model;
    return [m](const Rvec& theta0) {
        const Povm basis = Povm::eigenbasis(sld(m, theta0, 0));
        return locally_unbiased_estimator(m, theta0, basis);
    };
}

Rvec run_two_step(const StateModel& model, const Rvec& theta_true, const TwoStepConfig& cfg,
                  Rng& rng, bool* flagged) {
    if (flagged) *flagged = false;
    if (!cfg.lue_factory) throw InvalidConfig("run_two_step: lue_factory required");
    const auto [n0, n2] = allocate(cfg.n, cfg.n1);
    const PreliminaryEstimator& pre =
        cfg.preliminary ? *cfg.preliminary
                        : throw InvalidConfig("run_two_step: preliminary estimator required");

    // Stage 1: relative frequencies of the preliminary POVM.
    const Rvec p_pre = outcome_distribution(model.state_fn(theta_true), pre.povm);
    Rvec freq = Rvec::Zero(p_pre.size());
    for (long s = 0; s < n0; ++s) freq[rng.categorical(p_pre)] += 1.0;
    freq /= static_cast<double>(n0);
    const Rvec theta0 = pre.project_fn(freq);

    // Stage 2: n2 blocks of n1 copies measured by the locally unbiased
    // estimator at theta0; block values are per-copy averages.
    Estimator est = [&]() -> Estimator {
        try {
            return cfg.lue_factory(theta0);
        } catch (const Error&) {
            if (flagged) *flagged = true;
            return Estimator(Povm({identity_c(model.state_fn(theta0).dim())}), {theta0});
        }
    }();
    const Rvec p_block = outcome_distribution(model.state_fn(theta_true), est.povm);
    Rvec sum = Rvec::Zero(model.region.m);
    for (long b = 0; b < n2; ++b) {
        Rvec block = Rvec::Zero(model.region.m);
        for (long c = 0; c < cfg.n1; ++c) block += est.values[rng.categorical(p_block)];
        sum += block / static_cast<double>(cfg.n1);
    }
    return sum / static_cast<double>(n2);
}

McResult monte_carlo(const StateModel& model, const Rvec& theta_true, const TwoStepConfig& cfg,
                     long trials, const Rmat& g, int workers) {
    if (trials < 2) throw InvalidConfig("monte_carlo: trials must be >= 2");
    TwoStepConfig local = cfg;
    if (!local.preliminary) local.preliminary = preliminary_tomography(model);
    if (!local.lue_factory) local.lue_factory = default_lue_factory(model);

    const auto [n0, n2] = allocate(local.n, local.n1);
    const int m = model.region.m;
    McResult mc;
    mc.n0 = n0;
    mc.n1 = local.n1;
    mc.n2 = n2;
    mc.per_trial_estimates.assign(trials, Rvec::Zero(m));
    std::vector<char> flags(trials, 0);

    // Per-trial streams derived from (seed, trial): the estimate of trial t
    // does not depend on the worker layout.
    auto run_range = [&](long lo, long hi) {
        for (long t = lo; t < hi; ++t) {
            Rng rng = Rng::stream(local.seed, static_cast<std::uint64_t>(t));
            bool flagged = false;
            mc.per_trial_estimates[t] = run_two_step(model, theta_true, local, rng, &flagged);
            flags[t] = flagged ? 1 : 0;
        }
    };
    int nw = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
    nw = static_cast<int>(std::max<long>(1, std::min<long>(nw, trials)));
    if (nw == 1) {
        run_range(0, trials);
    } else {
        std::vector<std::thread> pool;
        const long chunk = (trials + nw - 1) / nw;
        for (int w = 0; w < nw; ++w)
            pool.emplace_back(run_range, w * chunk, std::min(trials, (w + 1) * chunk));
        for (auto& th : pool) th.join();
    }
    for (char f : flags) mc.flagged_trials += f;

    EstimationReport& rep = mc.report;
    rep.theta = theta_true;
    rep.n = local.n;
    rep.trials = trials;
    rep.mse = Rmat::Zero(m, m);
    rep.bias = Rvec::Zero(m);
    Rvec mean = Rvec::Zero(m);
    for (const auto& est : mc.per_trial_estimates) mean += est;
    mean /= static_cast<double>(trials);
    Rmat mse2 = Rmat::Zero(m, m); // running sums for per-entry stderr
    // Scaled cost per estimation-stage sample, (n1 n2) Tr G MSE; the
    // tomography prefix n0 = n2^(3/4) is o(n) overhead and excluded.
    const double n_eff = static_cast<double>(local.n1 * n2);
    std::vector<double> cost(trials);
    for (long t = 0; t < trials; ++t) {
        const Rvec dev = mc.per_trial_estimates[t] - theta_true;
        const Rmat outer = dev * dev.transpose();
        rep.mse += outer;
        mse2 += outer.cwiseProduct(outer);
        cost[t] = n_eff * dev.dot(g * dev);
    }
    rep.mse /= static_cast<double>(trials);
    mse2 /= static_cast<double>(trials);
    rep.bias = mean - theta_true;
    rep.variance = rep.mse - rep.bias * rep.bias.transpose();
    rep.b_matrix = Rmat::Identity(m, m) * std::numeric_limits<double>::quiet_NaN();
    rep.weighted_cost = (g * rep.mse).trace();
    rep.stderr_mse =
        ((mse2 - rep.mse.cwiseProduct(rep.mse)) / static_cast<double>(trials)).cwiseMax(0.0)
            .cwiseSqrt();

    double cmean = 0.0;
    for (double c : cost) cmean += c;
    cmean /= static_cast<double>(trials);
    double cvar = 0.0;
    for (double c : cost) cvar += (c - cmean) * (c - cmean);
    cvar /= static_cast<double>(trials);
    mc.n_weighted_cost = cmean;
    mc.n_weighted_cost_stderr = std::sqrt(cvar / static_cast<double>(trials));
    return mc;
}

double normality_ks(const McResult& mc, const StateModel& model, const Rvec& theta,
                    const Rmat&) {
    if (model.region.m != 1)
        throw MultiparameterUnsupported("normality_ks: single-parameter models only");
    if (mc.per_trial_estimates.empty())
        throw InvalidConfig("normality_ks: per-trial estimates not retained");
    const double v = 1.0 / qfi_sld(model, theta).matrix(0, 0);
    const double scale = std::sqrt(static_cast<double>(mc.report.n) / v);
    std::vector<double> z;
    z.reserve(mc.per_trial_estimates.size());
    for (const auto& t : mc.per_trial_estimates) z.push_back(scale * (t[0] - theta[0]));
    return ks_statistic_normal(std::move(z));
}

} // namespace qestlab
