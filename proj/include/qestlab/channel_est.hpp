#pragma once

#include <string>
#include <vector>

#include "qestlab/fisher.hpp"
#include "qestlab/rng.hpp"

namespace qestlab {

/// An n-use estimation scheme for a channel family: a (possibly entangled)
/// input on system (x) ancilla, interleaving operations applied between the
/// channel uses, a final POVM, and the outcome -> estimate map.
struct InterleavedScheme {
    DensityOperator input_state;          // on H (x) K
    std::vector<KrausChannel> interleavers; // n-1 maps on H' (x) K -> H (x) K
    Povm final_povm;                      // on H' (x) K
    std::function<Rvec(int)> estimate_fn; // outcome index -> estimate
    int system_dim = 2;                   // dim H (= dim H' here)

    long uses() const { return static_cast<long>(interleavers.size()) + 1; }
};

/// Outcome distribution of an interleaved scheme under Lambda_theta:
/// final_povm measured on prod_k (Lambda (x) I) Xi_k applied to the input.
Rvec scheme_outcome_law(const InterleavedScheme& scheme, const ChannelModel& cm,
                        const Rvec& theta);

/// Affine local surrogate of a channel family around theta0: vertices of the
/// l1 ball of radius eps, the CP components at the vertices, and the affine
/// weight function reproducing the linearized family as a mixture.
struct ExtremeDecomposition {
    Rvec theta0;
    double eps = 0.0;
    std::vector<Rvec> vertices;            // theta0 +/- eps e_i (2m points)
    std::vector<KrausChannel> components;  // Lambda at each vertex
    Rvec weights(const Rvec& theta) const; // affine, uniform at theta0
};

struct ScalingRow {
    long n;
    long trials;
    double mse;
    double n_mse;
    double n2_mse;
    double stderr_n_mse;
};

enum class ProbeStrategy { product_probe, ghz_probe, sequential_feedback };
ProbeStrategy parse_strategy(const std::string& name);

/// True iff Lambda_theta + sum_i u^i dLambda_theta is completely positive at
/// every vertex u of the l1 ball of radius eps (sufficient by convexity of
/// the PSD cone along affine segments).
bool interiority_check(const ChannelModel& cm, const Rvec& theta, double eps);

/// Vertex decomposition of the linearized family; requires interiority.
ExtremeDecomposition extreme_decomposition(const ChannelModel& cm, const Rvec& theta0,
                                           double eps);

/// Fisher information of the multinomial weight family at theta
/// (the weights are affine, so the score is exact).
FisherMatrix multinomial_fisher(const ExtremeDecomposition& ed, const Rvec& theta);

/// Monte Carlo MSE of an n-use estimation strategy per entry of n_list.
/// product-probe: independent single uses; ghz-probe (phase-unitary):
/// entangled probe of order n simulated in its invariant subspace;
/// sequential-feedback: product probes with a two-step theta0 update.
std::vector<ScalingRow> scaling_experiment(const ChannelModel& cm, const Rvec& theta,
                                           ProbeStrategy strategy,
                                           const std::vector<long>& n_list, long trials,
                                           std::uint64_t seed, long ghz_shots = 200);

} // namespace qestlab
