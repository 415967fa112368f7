#include <doctest.h>

#include "qestlab/locc.hpp"
#include "testutil.hpp"

using namespace qestlab;
using namespace qestlab::testutil;

namespace {

Rvec vec1(double x) {
    Rvec v(1);
    v[0] = x;
    return v;
}

StateModel constant_qubit_model() {
    StateModel m;
    m.region = {1, {{-1.0, 1.0}}, 1e-3};
    m.state_fn = [](const Rvec&) { return DensityOperator::maximally_mixed(2); };
    m.derivative_fn = [](const Rvec&, int) {
        return HermitianOperator(Cmat::Zero(2, 2));
    };
    m.name = "constant";
    return m;
}

StateModel first_coordinate_only_model() {
    StateModel m;
    m.region = {2, {{-1.0, 1.0}, {-1.0, 1.0}}, 1e-3};
    m.state_fn = [](const Rvec& th) {
        return DensityOperator(0.5 * (identity_c(2) + th[0] * pauli_z()));
    };
    m.derivative_fn = [](const Rvec&, int i) {
        const Cmat d = i == 0 ? Cmat(0.5 * pauli_z()) : Cmat(Cmat::Zero(2, 2));
        return HermitianOperator(d);
    };
    m.name = "first-only";
    return m;
}

} // namespace

TEST_CASE("identifiability projectors") {
    const StateModel qz = builtin_state_model("qubit-z");
    CHECK(identifiability_projector(qz, vec1(0.3)).matrix(0, 0) ==
          doctest::Approx(1.0).epsilon(1e-12));

    const StateModel part = first_coordinate_only_model();
    Rvec theta2(2);
    theta2 << 0.3, 0.1;
    Rmat pi = identifiability_projector(part, theta2).matrix;
    CHECK(pi(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(pi(1, 1)) < 1e-10);
    CHECK(std::abs(pi(0, 1)) < 1e-10);

    const StateModel be = builtin_state_model("bloch-equator");
    Rvec eq(2);
    eq << 0.2, 0.1;
    CHECK(max_abs(identifiability_projector(be, eq).matrix - Rmat::Identity(2, 2)) < 1e-10);

    // Projector correctness: Pi v = 0 iff the derivative combination vanishes.
    Rng rng(51);
    for (int t = 0; t < 100; ++t) {
        Rvec v(2);
        v << 2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0;
        const Cmat comb = v[0] * derivative(part, theta2, 0).matrix() +
                          v[1] * derivative(part, theta2, 1).matrix();
        const bool proj_zero = (pi * v).norm() < 1e-9;
        const bool deriv_zero = trace_norm(comb) < 1e-9;
        CHECK(proj_zero == deriv_zero);
    }
}

TEST_CASE("combined variance bound") {
    const Rmat one = Rmat::Identity(1, 1);
    Rmat v(1, 1);
    v << 0.91;
    CHECK(locc_variance_bound(v, v, one, one, one) == doctest::Approx(0.455).epsilon(1e-12));

    Rmat pa = Rmat::Zero(2, 2), pb = Rmat::Zero(2, 2);
    pa(0, 0) = 1.0;
    pb(1, 1) = 1.0;
    const Rmat i2 = Rmat::Identity(2, 2);
    CHECK(locc_variance_bound(i2, i2, pa, pb, i2) == doctest::Approx(2.0).epsilon(1e-12));

    CHECK_THROWS_AS(locc_variance_bound(one, one, Rmat::Zero(1, 1), Rmat::Zero(1, 1), one),
                    UnidentifiableDirection);

    // Scaling covariance: c G scales the bound by c exactly.
    CHECK(locc_variance_bound(v, v, one, one, 3.0 * one) ==
          doctest::Approx(3.0 * 0.455).epsilon(1e-14));
}

TEST_CASE("brute-force local search") {
    const Rmat g = Rmat::Identity(1, 1);
    const Rvec theta = vec1(0.3);
    const ProductModel identical{builtin_state_model("qubit-z"), builtin_state_model("qubit-z")};

    const LoSearchResult res = brute_force_lo_search(identical, theta, g, 36);
    CHECK(std::abs(res.best_cost - 0.455) < 5e-3);

    // Never beats the bound built from the per-party inverse QFI.
    const Rmat va = sym_pinv(qfi_sld(identical.model_a, theta).matrix);
    const double bound = locc_variance_bound(va, va, g, g, g);
    CHECK(res.best_cost >= bound - 1e-9);
    CHECK(res.best_cost <= bound * 1.05);

    // Degenerate reduction: one party carries no information.
    const ProductModel lopsided{builtin_state_model("qubit-z"), constant_qubit_model()};
    const LoSearchResult solo = brute_force_lo_search(lopsided, theta, g, 12);
    CHECK(solo.best_cost == doctest::Approx(0.91).epsilon(1e-9));

    CHECK_THROWS_AS(brute_force_lo_search(identical, theta, g, 0), InvalidGrid);
}

TEST_CASE("two-parameter search") {
    const StateModel be = builtin_state_model("bloch-equator");
    Rvec theta(2);
    theta << 0.2, 0.1;
    const Rmat g2 = Rmat::Identity(2, 2);
    const ProductModel pm{be, be};
    const LoSearchResult res = brute_force_lo_search(pm, theta, g2, 12);
    // Dominance against the bound at the per-party inverse quantum Fisher.
    const Rmat va = sym_pinv(qfi_sld(be, theta).matrix);
    const Rmat pa = identifiability_projector(be, theta).matrix;
    const double bound = locc_variance_bound(va, va, pa, pa, g2);
    CHECK(res.best_cost >= bound - 1e-9);
    CHECK(std::isfinite(res.best_cost));
    // A single projective axis per party is rank one, so the two parties
    // must split the two directions; the cost stays within a small factor.
    CHECK(res.best_cost < 10.0 * bound);
}

TEST_CASE("search dominance on random instances") {
    const Rmat g = Rmat::Identity(1, 1);
    for (double t : {0.1, 0.45, 0.7}) {
        const Rvec theta = vec1(t);
        const ProductModel pm{builtin_state_model("qubit-z"), builtin_state_model("qubit-z")};
        const LoSearchResult res = brute_force_lo_search(pm, theta, g, 12);
        const Rmat va = sym_pinv(qfi_sld(pm.model_a, theta).matrix);
        const Rmat pa = identifiability_projector(pm.model_a, theta).matrix;
        CHECK(res.best_cost >= locc_variance_bound(va, va, pa, pa, g) - 1e-9);
    }
}
