#include "qestlab/locc.hpp"

#include <cmath>

namespace qestlab {

IdentifiabilityProjector identifiability_projector(const StateModel& model, const Rvec& theta) {
    if (!model.region.contains(theta))
        throw OutOfRegion("identifiability_projector: theta outside the region");
    const int m = model.region.m;
    std::vector<Cmat> d;
    d.reserve(m);
    for (int i = 0; i < m; ++i) d.push_back(derivative(model, theta, i).matrix());
    Rmat gram(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
            gram(i, j) = (d[i] * d[j]).trace().real();
            gram(j, i) = gram(i, j);
        }
    return {sym_range_projector(gram)};
}

double locc_variance_bound(const Rmat& va, const Rmat& vb, const Rmat& pa, const Rmat& pb,
                           const Rmat& g) {
    const Rmat info = pa * sym_pinv(va) * pa + pb * sym_pinv(vb) * pb;
    const Rmat support = sym_range_projector(0.5 * (info + info.transpose()));
    // Directions weighted by G must be estimable by at least one party.
    const Rmat leak = (Rmat::Identity(info.rows(), info.cols()) - support) * g *
                      (Rmat::Identity(info.rows(), info.cols()) - support);
    if (max_abs(leak) > 1e-10)
        throw UnidentifiableDirection(
            "locc_variance_bound: G weights a direction no party can estimate");
    return (g * sym_pinv(info)).trace();
}

LoSearchResult brute_force_lo_search(const ProductModel& pm, const Rvec& theta, const Rmat& g,
                                     int grid_points) {
    if (grid_points < 1) throw InvalidGrid("brute_force_lo_search: empty axis grid");
    if (pm.model_a.region.m > 2)
        throw InvalidConfig("brute_force_lo_search: m <= 2 supported");

    // Hemisphere of projective axes: polar in [0, pi), azimuth in [0, pi).
    std::vector<Eigen::Vector3d> axes;
    axes.reserve(static_cast<std::size_t>(grid_points) * grid_points);
    for (int i = 0; i < grid_points; ++i) {
        const double polar = M_PI * i / grid_points;
        for (int j = 0; j < grid_points; ++j) {
            const double azim = M_PI * j / grid_points;
            axes.emplace_back(std::sin(polar) * std::cos(azim),
                              std::sin(polar) * std::sin(azim), std::cos(polar));
        }
    }

    const int mdim = pm.model_a.region.m;
    auto fishers_of = [&](const StateModel& model) {
        std::vector<Rmat> out;
        out.reserve(axes.size());
        for (const auto& ax : axes) {
            const Povm povm = Povm::projective_axis(ax.x(), ax.y(), ax.z());
            try {
                out.push_back(classical_fisher(model, theta, povm).matrix);
            } catch (const SingularSupport&) {
                // Axis hits a zero-probability outcome with nonzero score
                // (rank-deficient party state); excluded from the search.
                out.push_back(Rmat::Zero(mdim, mdim));
            }
        }
        return out;
    };
    const std::vector<Rmat> ja = fishers_of(pm.model_a);
    const std::vector<Rmat> jb = fishers_of(pm.model_b);

    const Rmat eye = Rmat::Identity(mdim, mdim);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_a = 0, best_b = 0;
    for (std::size_t a = 0; a < axes.size(); ++a)
        for (std::size_t b = 0; b < axes.size(); ++b) {
            const Rmat info = ja[a] + jb[b];
            // Skip axis pairs that cannot estimate every G-weighted direction.
            const Rmat support = sym_range_projector(info);
            if (max_abs((eye - support) * g * (eye - support)) > 1e-10) continue;
            const double cost = (g * sym_pinv(info)).trace();
            if (cost < best - 1e-15) {
                best = cost;
                best_a = a;
                best_b = b;
            }
        }
    if (!std::isfinite(best))
        throw UnidentifiableDirection("brute_force_lo_search: no axis pair identifies G");
    return {best, axes[best_a], axes[best_b],
            Povm::projective_axis(axes[best_a].x(), axes[best_a].y(), axes[best_a].z()),
            Povm::projective_axis(axes[best_b].x(), axes[best_b].y(), axes[best_b].z())};
}

} // namespace qestlab
