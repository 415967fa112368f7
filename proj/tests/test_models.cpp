#include <doctest.h>

#include "qestlab/models.hpp"
#include "testutil.hpp"

using namespace qestlab;
using namespace qestlab::testutil;

namespace {
Rvec vec1(double x) {
    Rvec v(1);
    v[0] = x;
    return v;
}
} // namespace

TEST_CASE("built-in models") {
    const StateModel qz = builtin_state_model("qubit-z");
    CHECK(max_abs(qz.state_fn(vec1(0.0)).matrix() - identity_c(2) / 2.0) < 1e-14);

    Cmat expect = Cmat::Zero(2, 2);
    expect(0, 0) = 0.65;
    expect(1, 1) = 0.35;
    CHECK(max_abs(qz.state_fn(vec1(0.3)).matrix() - expect) < 1e-14);

    const ChannelModel depol = builtin_channel_model("depolarizing");
    Rng rng(3);
    const DensityOperator probe = random_density(2, rng);
    CHECK(max_abs(depol.channel_fn(vec1(1.0)).apply(probe.matrix()) - identity_c(2) / 2.0) <
          1e-12);

    CHECK_THROWS_AS(builtin_state_model("no-such-model"), InvalidConfig);
    CHECK_THROWS_AS(builtin_state_model("qubit-phase", {2.5}), InvalidConfig);
}

TEST_CASE("derivatives") {
    const StateModel qz = builtin_state_model("qubit-z");
    CHECK(max_abs(derivative(qz, vec1(0.123), 0).matrix() - 0.5 * pauli_z()) < 1e-14);

    const StateModel be = builtin_state_model("bloch-equator");
    Rvec origin = Rvec::Zero(2);
    CHECK(max_abs(derivative(be, origin, 1).matrix() - 0.5 * pauli_y()) < 1e-14);

    const StateModel qp = builtin_state_model("qubit-phase", {1.0});
    CHECK(max_abs(derivative(qp, vec1(0.0), 0).matrix() - 0.5 * pauli_y()) < 1e-14);

    CHECK_THROWS_AS(derivative(qz, vec1(1.5), 0), OutOfRegion);
}

TEST_CASE("analytic derivatives agree with finite differences") {
    Rng rng(5);
    for (const char* name : {"qubit-z", "qubit-phase", "bloch-equator"}) {
        StateModel model = builtin_state_model(name, {0.8});
        for (int t = 0; t < 10; ++t) {
            Rvec theta(model.region.m);
            for (int i = 0; i < model.region.m; ++i) {
                const auto [lo, hi] = model.region.box[i];
                theta[i] = lo + 0.1 * (hi - lo) + 0.8 * (hi - lo) * rng.uniform();
            }
            if (model.name == "bloch-equator") theta *= 0.5; // stay inside the ball
            for (int i = 0; i < model.region.m; ++i) {
                const Cmat analytic = derivative(model, theta, i).matrix();
                StateModel fd = model;
                fd.derivative_fn = nullptr;
                CHECK(max_abs(analytic - derivative(fd, theta, i).matrix()) < 1e-8);
            }
        }
    }
}

TEST_CASE("regularized models") {
    const StateModel qp = builtin_state_model("qubit-phase", {1.0});
    const DensityOperator mixed = DensityOperator::maximally_mixed(2);

    // eps -> 0 limit leaves the model unchanged.
    const StateModel tiny = regularize_model(qp, 1e-12, mixed);
    CHECK(max_abs(tiny.state_fn(vec1(0.4)).matrix() - qp.state_fn(vec1(0.4)).matrix()) < 1e-11);

    const StateModel reg = regularize_model(qp, 0.1, mixed);
    Rvec ev = herm_eigenvalues(reg.state_fn(vec1(0.0)).matrix());
    CHECK(ev[0] == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(ev[1] == doctest::Approx(0.95).epsilon(1e-12));

    const StateModel qz = builtin_state_model("qubit-z");
    const StateModel regz = regularize_model(qz, 0.1, mixed);
    CHECK(max_abs(derivative(regz, vec1(0.2), 0).matrix() - 0.45 * pauli_z()) < 1e-14);

    // Strictly positive everywhere, so (M.2) holds at every grid point.
    for (double t : {-0.9, -0.3, 0.3, 0.9}) CHECK(check_m2(regz, vec1(t), 0));

    Cmat zero_state = Cmat::Zero(2, 2);
    zero_state(0, 0) = 1.0;
    CHECK_THROWS_AS(regularize_model(qz, 0.1, DensityOperator(zero_state)), StateNotPositive);
}

TEST_CASE("kernel-block diagnostics") {
    const StateModel qz = builtin_state_model("qubit-z");
    CHECK(check_m2(qz, vec1(0.3), 0));

    const StateModel qp = builtin_state_model("qubit-phase", {1.0});
    CHECK(check_m2(qp, vec1(0.0), 0)); // pure-state model still solvable

    // Boundary model rho = diag(1 - t, t) at t = 0: kernel block entry 1.
    StateModel boundary;
    boundary.region = {1, {{-0.5, 1.0}}, 0.0};
    boundary.state_fn = [](const Rvec& th) {
        Cmat m = Cmat::Zero(2, 2);
        m(0, 0) = 1.0 - th[0];
        m(1, 1) = th[0];
        return DensityOperator(m);
    };
    boundary.derivative_fn = [](const Rvec&, int) {
        Cmat d = Cmat::Zero(2, 2);
        d(0, 0) = -1.0;
        d(1, 1) = 1.0;
        return HermitianOperator(d);
    };
    CHECK_FALSE(check_m2(boundary, vec1(0.0), 0));
}

TEST_CASE("regularity estimates") {
    const StateModel qz = builtin_state_model("qubit-z");
    std::vector<Rvec> grid;
    for (double t = -0.5; t <= 0.5 + 1e-12; t += 0.1) grid.push_back(vec1(t));
    const RegularityDiagnostics diag = estimate_regularity(qz, grid);
    CHECK(diag.a1_estimate == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(diag.m2_ok[0]);

    const ChannelModel depol = builtin_channel_model("depolarizing");
    std::vector<Rvec> pgrid;
    for (double p = 0.1; p <= 0.9 + 1e-12; p += 0.1) pgrid.push_back(vec1(p));
    const RegularityDiagnostics cdiag = estimate_regularity(depol, pgrid);
    CHECK(cdiag.a1_estimate > 0.0);
    CHECK(cdiag.a1_estimate < 10.0);

    CHECK_THROWS_AS(estimate_regularity(qz, {}), InvalidGrid);
}

TEST_CASE("polynomial user models") {
    // rho(t) = I/2 + t sigma_z/2 as a degree-1 matrix polynomial.
    const std::vector<Cmat> coeffs = {0.5 * identity_c(2), 0.5 * pauli_z()};
    const StateModel poly = poly_state_model(coeffs, {1, {{-1.0, 1.0}}, 1e-3});
    CHECK(max_abs(poly.state_fn(vec1(0.3)).matrix() - qubit_z_state(0.3).matrix()) < 1e-14);
    CHECK(max_abs(derivative(poly, vec1(0.3), 0).matrix() - 0.5 * pauli_z()) < 1e-9);
    CHECK_THROWS_AS(poly_state_model({}, {1, {{-1.0, 1.0}}, 1e-3}), InvalidConfig);
}

TEST_CASE("grid-based user models") {
    std::vector<double> thetas;
    std::vector<DensityOperator> states;
    for (double t = -0.8; t <= 0.8 + 1e-12; t += 0.05) {
        thetas.push_back(t);
        states.push_back(qubit_z_state(t));
    }
    const StateModel grid = grid_state_model(thetas, states);
    CHECK(max_abs(grid.state_fn(vec1(0.3)).matrix() - qubit_z_state(0.3).matrix()) < 1e-12);
    // FD derivative of the interpolant matches the analytic family.
    CHECK(max_abs(derivative(grid, vec1(0.325), 0).matrix() - 0.5 * pauli_z()) < 1e-6);
}
