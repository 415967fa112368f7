#pragma once

#include "qestlab/fisher.hpp"

namespace qestlab {

/// Bipartite product family rho_theta = rho^a_theta (x) rho^b_theta over a
/// shared parameter.
struct ProductModel {
    StateModel model_a;
    StateModel model_b;

    StateModel joint() const { return product_model(model_a, model_b); }
};

/// Symmetric idempotent m x m matrix projecting out the directions along
/// which a party's state family is flat.
struct IdentifiabilityProjector {
    Rmat matrix;
};

/// Projector onto the orthogonal complement of {v : sum_i v^i d_i rho = 0},
/// built from the Gram matrix G_ij = tr(d_i rho d_j rho).
IdentifiabilityProjector identifiability_projector(const StateModel& model, const Rvec& theta);

/// Combined-variance lower bound
/// Tr G (Pa pinv(Va) Pa + Pb pinv(Vb) Pb)^-1 with Moore-Penrose inverses.
/// Raises UnidentifiableDirection when G weights a direction annihilated by
/// both projectors.
double locc_variance_bound(const Rmat& va, const Rmat& vb, const Rmat& pa, const Rmat& pb,
                           const Rmat& g);

struct LoSearchResult {
    double best_cost;
    Eigen::Vector3d axis_a;
    Eigen::Vector3d axis_b;
    Povm povm_a;
    Povm povm_b;
};

/// Brute-force search over per-party projective measurement axes (polar x
/// azimuth grid, `grid_points` per angle). For each axis pair the optimally
/// weighted sum of per-party locally unbiased components is costed exactly.
LoSearchResult brute_force_lo_search(const ProductModel& pm, const Rvec& theta, const Rmat& g,
                                     int grid_points = 36);

} // namespace qestlab
