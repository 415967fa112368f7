#include "qestlab/channel_est.hpp"

#include <cmath>

namespace qestlab {

namespace {

std::vector<Rvec> l1_vertices(const Rvec& theta0, double eps) {
    std::vector<Rvec> v;
    for (Eigen::Index i = 0; i < theta0.size(); ++i) {
        Rvec p = theta0, m = theta0;
        p[i] += eps;
        m[i] -= eps;
        v.push_back(p);
        v.push_back(m);
    }
    return v;
}

} // namespace

Rvec scheme_outcome_law(const InterleavedScheme& scheme, const ChannelModel& cm,
                        const Rvec& theta) {
    const KrausChannel lambda = cm.channel_fn(theta);
    if (lambda.input_dim() != scheme.system_dim || lambda.output_dim() != scheme.system_dim)
        throw DimensionMismatch("scheme_outcome_law: channel does not fit the system slot");
    const int total = scheme.input_state.dim();
    if (total % scheme.system_dim != 0)
        throw DimensionMismatch("scheme_outcome_law: input is not system (x) ancilla");
    const int anc = total / scheme.system_dim;

    auto apply_on_system = [&](const KrausChannel& ch, const Cmat& rho) {
        Cmat out = Cmat::Zero(rho.rows(), rho.cols());
        for (const auto& k : ch.kraus()) {
            const Cmat kk = kron(k, identity_c(anc));
            out += kk * rho * kk.adjoint();
        }
        return out;
    };

    Cmat rho = scheme.input_state.matrix();
    rho = apply_on_system(lambda, rho);
    for (const auto& xi : scheme.interleavers) {
        if (xi.input_dim() != total || xi.output_dim() != total)
            throw DimensionMismatch("scheme_outcome_law: interleaver dimension mismatch");
        rho = xi.apply(rho);
        rho = apply_on_system(lambda, rho);
    }
    return outcome_distribution(DensityOperator(rho), scheme.final_povm);
}

Rvec ExtremeDecomposition::weights(const Rvec& theta) const {
    const int m = static_cast<int>(theta0.size());
    Rvec w(2 * m);
    for (int i = 0; i < m; ++i) {
        const double delta = theta[i] - theta0[i];
        w[2 * i] = 1.0 / (2.0 * m) + delta / (2.0 * eps);
        w[2 * i + 1] = 1.0 / (2.0 * m) - delta / (2.0 * eps);
    }
    return w;
}

ProbeStrategy parse_strategy(const std::string& name) {
    if (name == "product-probe") return ProbeStrategy::product_probe;
    if (name == "ghz-probe") return ProbeStrategy::ghz_probe;
    if (name == "sequential-feedback") return ProbeStrategy::sequential_feedback;
    throw InvalidConfig("unknown strategy: " + name);
}

bool interiority_check(const ChannelModel& cm, const Rvec& theta, double eps) {
    if (!cm.region.contains(theta))
        throw OutOfRegion("interiority_check: theta outside the region");
    const Cmat c0 = cm.choi_at(theta).matrix();
    std::vector<Cmat> dc;
    for (int i = 0; i < cm.region.m; ++i) dc.push_back(cm.dchoi_at(theta, i).matrix());
    for (const auto& u : l1_vertices(Rvec::Zero(cm.region.m), eps)) {
        Cmat c = c0;
        for (int i = 0; i < cm.region.m; ++i) c += u[i] * dc[i];
        if (min_eigenvalue(c) < -1e-10) return false;
    }
    return true;
}

ExtremeDecomposition extreme_decomposition(const ChannelModel& cm, const Rvec& theta0,
                                           double eps) {
    if (!interiority_check(cm, theta0, eps))
        throw NotInterior("extreme_decomposition: linearized family leaves the CP cone");
    ExtremeDecomposition ed;
    ed.theta0 = theta0;
    ed.eps = eps;
    ed.vertices = l1_vertices(theta0, eps);
    const Cmat c0 = cm.choi_at(theta0).matrix();
    const KrausChannel probe_shape = cm.channel_fn(theta0);
    for (int i = 0; i < cm.region.m; ++i) {
        const Cmat dc = cm.dchoi_at(theta0, i).matrix();
        ed.components.push_back(KrausChannel::from_choi(c0 + eps * dc, probe_shape.input_dim(),
                                                        probe_shape.output_dim()));
        ed.components.push_back(KrausChannel::from_choi(c0 - eps * dc, probe_shape.input_dim(),
                                                        probe_shape.output_dim()));
    }
    return ed;
}

FisherMatrix multinomial_fisher(const ExtremeDecomposition& ed, const Rvec& theta) {
    const int m = static_cast<int>(ed.theta0.size());
    const Rvec w = ed.weights(theta);
    if (w.minCoeff() <= 1e-12)
        throw BoundaryWeight("multinomial_fisher: weight at or below zero");
    Rmat j = Rmat::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        const double d = 1.0 / (2.0 * ed.eps); // |d_i p| at the two i-vertices
        j(i, i) += d * d * (1.0 / w[2 * i] + 1.0 / w[2 * i + 1]);
    }
    return {j, FisherMatrix::Kind::classical};
}

namespace {

struct Moments {
    double mse;
    double stderr_n_mse;
};

Moments mse_over_trials(const std::vector<double>& sq_err, long n) {
    double mean = 0.0;
    for (double e : sq_err) mean += e;
    mean /= static_cast<double>(sq_err.size());
    double var = 0.0;
    for (double e : sq_err) var += (e - mean) * (e - mean);
    var /= static_cast<double>(sq_err.size());
    return {mean, static_cast<double>(n) * std::sqrt(var / static_cast<double>(sq_err.size()))};
}

double depolarizing_outcome_prob(double p) { return 0.5 * p; } // P(flip) on |0> probe

double product_probe_depolarizing(double p_true, long n, Rng& rng) {
    const long k = rng.binomial(n, depolarizing_outcome_prob(p_true));
    return 2.0 * static_cast<double>(k) / static_cast<double>(n);
}

constexpr double kPhaseLo = 1e-3;
constexpr double kPhaseHi = M_PI - 1e-3;

/// Phase readout from x-basis product probes: on (0, pi) the cosine is
/// injective, so arccos of the smoothed frequency identifies theta.
double product_probe_phase(double theta_true, long n, Rng& rng) {
    const long k = rng.binomial(n, 0.5 * (1.0 + std::cos(theta_true)));
    const double c = 2.0 * (static_cast<double>(k) + 0.5) / (static_cast<double>(n) + 1.0) - 1.0;
    return std::clamp(std::acos(std::clamp(c, -1.0, 1.0)), kPhaseLo, kPhaseHi);
}

/// Candidate of the arccos inversion at GHZ order `order` nearest to `center`,
/// preferring candidates inside the parameter interval.
double nearest_phase_candidate(double alpha, long order, double center) {
    double best = center, best_dist = std::numeric_limits<double>::infinity();
    for (const bool inside_only : {true, false}) {
        for (const double base : {alpha, -alpha}) {
            const double k0 =
                std::round((center * static_cast<double>(order) - base) / (2.0 * M_PI));
            for (double k : {k0 - 1.0, k0, k0 + 1.0}) {
                const double cand = (base + 2.0 * M_PI * k) / static_cast<double>(order);
                if (inside_only && (cand < kPhaseLo || cand > kPhaseHi)) continue;
                const double dist = std::abs(cand - center);
                if (dist < best_dist) {
                    best_dist = dist;
                    best = cand;
                }
            }
        }
        if (best_dist < std::numeric_limits<double>::infinity()) break;
    }
    return best;
}

/// Dyadic cascade of entangled-probe stages ending at order n: each stage
/// inverts the (1 +/- cos(M theta))/2 law through arccos, windowed around the
/// running center (final window half-width ~ pi/(2n)).
double ghz_probe_phase(double theta_true, long n, long final_shots, Rng& rng) {
    const long n_pre = static_cast<long>(std::ceil(std::sqrt(static_cast<double>(n))));
    double center = product_probe_phase(theta_true, n_pre, rng);
    std::vector<long> orders;
    for (long m = 1; m < n; m *= 2) orders.push_back(m);
    orders.push_back(n);
    for (std::size_t s = 0; s < orders.size(); ++s) {
        const long order = orders[s];
        const long shots = (s + 1 == orders.size()) ? final_shots : 32;
        const double p_plus = 0.5 * (1.0 + std::cos(order * theta_true));
        const long k = rng.binomial(shots, p_plus);
        double c = 2.0 * static_cast<double>(k) / static_cast<double>(shots) - 1.0;
        c = std::clamp(c, -1.0, 1.0);
        center = std::clamp(nearest_phase_candidate(std::acos(c), order, center), kPhaseLo,
                            kPhaseHi);
    }
    return center;
}

double seq_feedback_depolarizing(double p_true, long n, Rng& rng) {
    const long n_pre = static_cast<long>(std::ceil(std::sqrt(static_cast<double>(n))));
    const double p0 =
        std::clamp(product_probe_depolarizing(p_true, n_pre, rng), 1e-3, 1.0 - 1e-3);
    const long n_main = n - n_pre;
    const double q0 = depolarizing_outcome_prob(p0);
    const double fisher = 0.25 / (q0 * (1.0 - q0));
    const long k = rng.binomial(n_main, depolarizing_outcome_prob(p_true));
    // locally unbiased correction at p0: T = p0 + mean(l)/J
    const double l1 = 0.5 / q0, l0 = -0.5 / (1.0 - q0);
    const double mean_l =
        (k * l1 + (n_main - k) * l0) / static_cast<double>(n_main);
    return p0 + mean_l / fisher;
}

double seq_feedback_phase(double theta_true, long n, Rng& rng) {
    const long n_pre = static_cast<long>(std::ceil(std::sqrt(static_cast<double>(n))));
    const double t0 = product_probe_phase(theta_true, n_pre, rng);
    const long n_main = n - n_pre;
    // Measure the equatorial axis orthogonal to the estimate: p(+) = (1 + sin(theta - t0))/2.
    const double p_plus = 0.5 * (1.0 + std::sin(theta_true - t0));
    const long k = rng.binomial(n_main, p_plus);
    const double mean_pm =
        (2.0 * static_cast<double>(k) - static_cast<double>(n_main)) / static_cast<double>(n_main);
    return t0 + std::asin(std::clamp(mean_pm, -1.0, 1.0));
}

} // namespace

std::vector<ScalingRow> scaling_experiment(const ChannelModel& cm, const Rvec& theta,
                                           ProbeStrategy strategy,
                                           const std::vector<long>& n_list, long trials,
                                           std::uint64_t seed, long ghz_shots) {
    if (n_list.empty()) throw InvalidConfig("scaling_experiment: empty n list");
    if (trials < 2) throw InvalidConfig("scaling_experiment: trials must be >= 2");
    const bool depol = cm.name == "depolarizing";
    const bool phase = cm.name == "phase-unitary";
    if (!depol && !phase)
        throw StrategyUnsupported("scaling_experiment: family " + cm.name + " not supported");
    if (strategy == ProbeStrategy::ghz_probe && !phase)
        throw StrategyUnsupported("ghz-probe requires the phase-unitary family");

    const double truth = theta[0];
    std::vector<ScalingRow> rows;
    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
        const long n = n_list[ni];
        if (n < 2) throw InvalidConfig("scaling_experiment: n must be >= 2");
        std::vector<double> sq_err(trials);
        for (long t = 0; t < trials; ++t) {
            Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(ni) * 0x100000ULL +
                                            static_cast<std::uint64_t>(t));
            double est = 0.0;
            switch (strategy) {
                case ProbeStrategy::product_probe:
                    est = depol ? product_probe_depolarizing(truth, n, rng)
                                : product_probe_phase(truth, n, rng);
                    break;
                case ProbeStrategy::ghz_probe:
                    est = ghz_probe_phase(truth, n, ghz_shots, rng);
                    break;
                case ProbeStrategy::sequential_feedback:
                    est = depol ? seq_feedback_depolarizing(truth, n, rng)
                                : seq_feedback_phase(truth, n, rng);
                    break;
            }
            sq_err[t] = (est - truth) * (est - truth);
        }
        const Moments mom = mse_over_trials(sq_err, n);
        rows.push_back({n, trials, mom.mse, static_cast<double>(n) * mom.mse,
                        static_cast<double>(n) * static_cast<double>(n) * mom.mse,
                        mom.stderr_n_mse});
    }
    return rows;
}

} // namespace qestlab
