#include "qestlab/models.hpp"

#include <cmath>

namespace qestlab {

bool ParameterRegion::contains(const Rvec& theta) const {
    if (theta.size() != m) return false;
    for (int i = 0; i < m; ++i)
        if (theta[i] <= box[i].first || theta[i] >= box[i].second) return false;
    return true;
}

Rvec ParameterRegion::clip(Rvec theta) const {
    for (int i = 0; i < m; ++i) {
        theta[i] = std::max(theta[i], box[i].first + margin);
        theta[i] = std::min(theta[i], box[i].second - margin);
    }
    return theta;
}

Rvec ParameterRegion::center() const {
    Rvec c(m);
    for (int i = 0; i < m; ++i) c[i] = 0.5 * (box[i].first + box[i].second);
    return c;
}

HermitianOperator ChannelModel::choi_at(const Rvec& theta) const {
    return choi(channel_fn(theta));
}

HermitianOperator ChannelModel::dchoi_at(const Rvec& theta, int i) const {
    if (dchoi_fn) return dchoi_fn(theta, i);
    Rvec tp = theta, tm = theta;
    tp[i] += fd_step;
    tm[i] -= fd_step;
    return HermitianOperator((choi_at(tp).matrix() - choi_at(tm).matrix()) / (2.0 * fd_step));
}

namespace {

Rvec vec1(double x) {
    Rvec v(1);
    v[0] = x;
    return v;
}

StateModel make_qubit_z() {
    StateModel m;
    m.region = {1, {{-1.0, 1.0}}, 1e-3};
    m.state_fn = [](const Rvec& th) {
        return DensityOperator(0.5 * (identity_c(2) + th[0] * pauli_z()));
    };
    m.derivative_fn = [](const Rvec&, int) { return HermitianOperator(0.5 * pauli_z()); };
    m.bloch_project = [](const Eigen::Vector3d& b) { return vec1(b.z()); };
    m.name = "qubit-z";
    return m;
}

StateModel make_qubit_phase(double r) {
    if (!(r > 0.0 && r <= 1.0)) throw InvalidConfig("qubit-phase: need 0 < r <= 1");
    StateModel m;
    m.region = {1, {{-M_PI, M_PI}}, 1e-3};
    m.state_fn = [r](const Rvec& th) {
        const double t = th[0];
        return DensityOperator(
            0.5 * (identity_c(2) + r * std::cos(t) * pauli_x() + r * std::sin(t) * pauli_y()));
    };
    m.derivative_fn = [r](const Rvec& th, int) {
        const double t = th[0];
        return HermitianOperator(0.5 * r * (-std::sin(t) * pauli_x() + std::cos(t) * pauli_y()));
    };
    m.bloch_project = [](const Eigen::Vector3d& b) { return vec1(std::atan2(b.y(), b.x())); };
    m.name = "qubit-phase";
    return m;
}

StateModel make_bloch_equator() {
    StateModel m;
    // Inscribed box of the open unit disc ||theta|| < 1.
    m.region = {2, {{-0.7, 0.7}, {-0.7, 0.7}}, 1e-3};
    m.state_fn = [](const Rvec& th) {
        double x = th[0], y = th[1];
        const double n = std::hypot(x, y);
        if (n >= 1.0) { // radial clip just inside the Bloch ball
            x *= (1.0 - 1e-9) / n;
            y *= (1.0 - 1e-9) / n;
        }
        return DensityOperator(0.5 * (identity_c(2) + x * pauli_x() + y * pauli_y()));
    };
    m.derivative_fn = [](const Rvec&, int i) {
        return HermitianOperator(0.5 * (i == 0 ? pauli_x() : pauli_y()));
    };
    m.bloch_project = [](const Eigen::Vector3d& b) {
        Rvec v(2);
        v << b.x(), b.y();
        const double n = v.norm();
        if (n >= 1.0) v *= (1.0 - 1e-3) / n;
        return v;
    };
    m.name = "bloch-equator";
    return m;
}

ChannelModel make_depolarizing() {
    ChannelModel m;
    m.region = {1, {{0.0, 1.0}}, 1e-3};
    m.channel_fn = [](const Rvec& th) {
        const double p = th[0];
        if (p < 0.0 || p > 1.0) throw OutOfRegion("depolarizing: p outside [0,1]");
        std::vector<Cmat> ops = {std::sqrt(1.0 - 0.75 * p) * identity_c(2),
                                 std::sqrt(0.25 * p) * pauli_x(),
                                 std::sqrt(0.25 * p) * pauli_y(),
                                 std::sqrt(0.25 * p) * pauli_z()};
        return KrausChannel(2, 2, std::move(ops));
    };
    // Choi is affine in p: (1-p) Choi_id + p Choi_dep.
    m.dchoi_fn = [](const Rvec&, int) {
        Cmat w(4, 1);
        w << 1, 0, 0, 1;
        Cmat choi_id = w * w.adjoint();
        Cmat choi_dep = 0.5 * Cmat::Identity(4, 4);
        return HermitianOperator(choi_dep - choi_id);
    };
    m.name = "depolarizing";
    return m;
}

ChannelModel make_phase_unitary() {
    ChannelModel m;
    // Open interval (0, pi): cos(theta) is injective there, so product-probe
    // readouts and the entangled-probe arccos inversion are unambiguous.
    m.region = {1, {{0.0, M_PI}}, 1e-3};
    m.channel_fn = [](const Rvec& th) {
        Cmat u = Cmat::Zero(2, 2);
        u(0, 0) = 1.0;
        u(1, 1) = std::exp(Complex(0.0, th[0]));
        return KrausChannel(2, 2, {u});
    };
    m.dchoi_fn = [](const Rvec& th, int) {
        // Choi = |w><w| with w = (1, 0, 0, e^{i theta}); dChoi = |dw><w| + |w><dw|.
        Cvec w(4), dw(4);
        w << 1, 0, 0, std::exp(Complex(0.0, th[0]));
        dw << 0, 0, 0, Complex(0.0, 1.0) * std::exp(Complex(0.0, th[0]));
        return HermitianOperator(dw * w.adjoint() + w * dw.adjoint());
    };
    m.name = "phase-unitary";
    return m;
}

} // namespace

StateModel builtin_state_model(const std::string& name, const std::vector<double>& params) {
    if (name == "qubit-z") return make_qubit_z();
    if (name == "qubit-phase") return make_qubit_phase(params.empty() ? 1.0 : params[0]);
    if (name == "bloch-equator") return make_bloch_equator();
    throw InvalidConfig("unknown state model: " + name);
}

ChannelModel builtin_channel_model(const std::string& name, const std::vector<double>&) {
    if (name == "depolarizing") return make_depolarizing();
    if (name == "phase-unitary") return make_phase_unitary();
    throw InvalidConfig("unknown channel model: " + name);
}

AnyModel builtin_model(const std::string& name, const std::vector<double>& params) {
    if (name == "depolarizing" || name == "phase-unitary")
        return builtin_channel_model(name, params);
    return builtin_state_model(name, params);
}

StateModel product_model(const StateModel& a, const StateModel& b) {
    if (a.region.m != b.region.m)
        throw InvalidConfig("product_model: parameter counts differ");
    StateModel m;
    m.region = a.region;
    for (int i = 0; i < m.region.m; ++i) {
        m.region.box[i].first = std::max(a.region.box[i].first, b.region.box[i].first);
        m.region.box[i].second = std::min(a.region.box[i].second, b.region.box[i].second);
    }
    m.state_fn = [a, b](const Rvec& th) { return tensor(a.state_fn(th), b.state_fn(th)); };
    m.derivative_fn = [a, b](const Rvec& th, int i) {
        const Cmat da = derivative(a, th, i).matrix();
        const Cmat db = derivative(b, th, i).matrix();
        return HermitianOperator(kron(da, b.state_fn(th).matrix()) +
                                 kron(a.state_fn(th).matrix(), db));
    };
    m.name = a.name + "(x)" + b.name;
    return m;
}

StateModel grid_state_model(const std::vector<double>& thetas,
                            const std::vector<DensityOperator>& states, double margin) {
    if (thetas.size() != states.size() || thetas.size() < 2)
        throw InvalidConfig("grid_state_model: need at least two grid states");
    for (std::size_t i = 1; i < thetas.size(); ++i)
        if (thetas[i] <= thetas[i - 1])
            throw InvalidConfig("grid_state_model: thetas must be increasing");
    StateModel m;
    m.region = {1, {{thetas.front(), thetas.back()}}, margin};
    m.state_fn = [thetas, states](const Rvec& th) {
        const double t = std::clamp(th[0], thetas.front(), thetas.back());
        std::size_t k = 1;
        while (k + 1 < thetas.size() && thetas[k] < t) ++k;
        const double w = (t - thetas[k - 1]) / (thetas[k] - thetas[k - 1]);
        return DensityOperator((1.0 - w) * states[k - 1].matrix() + w * states[k].matrix());
    };
    m.name = "grid";
    return m;
}

StateModel poly_state_model(const std::vector<Cmat>& coeffs, ParameterRegion region) {
    if (coeffs.empty()) throw InvalidConfig("poly_state_model: no coefficients");
    if (region.m != 1) throw InvalidConfig("poly_state_model: 1-d parameter only");
    StateModel m;
    m.region = std::move(region);
    m.state_fn = [coeffs](const Rvec& th) {
        Cmat acc = coeffs.back();
        for (auto it = coeffs.rbegin() + 1; it != coeffs.rend(); ++it)
            acc = acc * th[0] + *it;
        return DensityOperator(acc);
    };
    m.name = "poly";
    return m;
}

HermitianOperator derivative(const StateModel& model, const Rvec& theta, int i) {
    if (!model.region.contains(theta))
        throw OutOfRegion("derivative: theta outside the parameter region");
    HermitianOperator d = [&] {
        if (model.derivative_fn) return model.derivative_fn(theta, i);
        Rvec tp = theta, tm = theta;
        tp[i] += model.fd_step;
        tm[i] -= model.fd_step;
        return HermitianOperator(
            (model.state_fn(tp).matrix() - model.state_fn(tm).matrix()) / (2.0 * model.fd_step));
    }();
    if (std::abs(d.trace()) > 1e-8)
        throw InvalidOperator("derivative: not traceless (family not trace preserving?)");
    return d;
}

StateModel regularize_model(const StateModel& model, double eps, const DensityOperator& sigma) {
    if (!(eps > 0.0 && eps < 1.0)) throw InvalidConfig("regularize_model: need 0 < eps < 1");
    if (sigma.min_eigenvalue() <= 0.0)
        throw StateNotPositive("regularize_model: sigma must be strictly positive");
    StateModel out = model;
    const Cmat sig = sigma.matrix();
    auto base_state = model.state_fn;
    out.state_fn = [base_state, eps, sig](const Rvec& th) {
        return DensityOperator((1.0 - eps) * base_state(th).matrix() + eps * sig);
    };
    StateModel base = model;
    out.derivative_fn = [base, eps](const Rvec& th, int i) {
        return HermitianOperator((1.0 - eps) * derivative(base, th, i).matrix());
    };
    out.bloch_project = nullptr; // Bloch map of the base model no longer applies
    out.name = model.name + "+reg";
    return out;
}

bool check_m2(const StateModel& model, const Rvec& theta, int i) {
    if (!model.region.contains(theta))
        throw OutOfRegion("check_m2: theta outside the parameter region");
    const Cmat rho = model.state_fn(theta).matrix();
    const Cmat drho = derivative(model, theta, i).matrix();
    Eigen::SelfAdjointEigenSolver<Cmat> es(rho);
    const Rvec ev = es.eigenvalues();
    const double cut = 1e-10 * std::max(ev.maxCoeff(), 1e-300);
    const Cmat d_eig = es.eigenvectors().adjoint() * drho * es.eigenvectors();
    for (Eigen::Index j = 0; j < ev.size(); ++j)
        for (Eigen::Index k = 0; k < ev.size(); ++k)
            if (ev[j] < cut && ev[k] < cut && std::abs(d_eig(j, k)) >= 1e-8) return false;
    return true;
}

RegularityDiagnostics estimate_regularity(const StateModel& model,
                                          const std::vector<Rvec>& grid) {
    if (grid.empty()) throw InvalidGrid("estimate_regularity: empty grid");
    RegularityDiagnostics diag;
    const int m = model.region.m;
    diag.m2_ok.assign(m, true);
    diag.b1_estimate = static_cast<double>(m);
    diag.a2_estimate = std::numeric_limits<double>::infinity();
    const double h = 1e-4; // second derivatives; looser step avoids cancellation

    for (const auto& theta : grid) {
        if (!model.region.contains(theta))
            throw InvalidGrid("estimate_regularity: grid point outside the region");
        for (int i = 0; i < m; ++i) {
            diag.a1_estimate = std::max(diag.a1_estimate,
                                        trace_norm(derivative(model, theta, i).matrix()));
            for (int j = 0; j < m; ++j) {
                Rvec tp = theta, tm = theta;
                tp[j] += h;
                tm[j] -= h;
                if (!model.region.contains(tp) || !model.region.contains(tm)) continue;
                const Cmat dd = (derivative(model, tp, i).matrix() -
                                 derivative(model, tm, i).matrix()) / (2.0 * h);
                diag.a1_estimate = std::max(diag.a1_estimate, trace_norm(dd));
            }
            diag.m2_ok[i] = diag.m2_ok[i] && check_m2(model, theta, i);
        }
        for (int i = 0; i < m; ++i) {
            diag.a2_estimate = std::min(diag.a2_estimate, theta[i] - model.region.box[i].first);
            diag.a2_estimate = std::min(diag.a2_estimate, model.region.box[i].second - theta[i]);
        }
    }
    diag.notes = "a1 over " + std::to_string(grid.size()) + " grid points; a4n/d2 unset";
    return diag;
}

RegularityDiagnostics estimate_regularity(const ChannelModel& model,
                                          const std::vector<Rvec>& grid) {
    if (grid.empty()) throw InvalidGrid("estimate_regularity: empty grid");
    RegularityDiagnostics diag;
    const int m = model.region.m;
    diag.b1_estimate = static_cast<double>(m);
    diag.a2_estimate = std::numeric_limits<double>::infinity();
    const double h = 1e-4;
    for (const auto& theta : grid) {
        if (!model.region.contains(theta))
            throw InvalidGrid("estimate_regularity: grid point outside the region");
        for (int i = 0; i < m; ++i) {
            diag.a1_estimate = std::max(diag.a1_estimate,
                                        trace_norm(model.dchoi_at(theta, i).matrix()));
            for (int j = 0; j < m; ++j) {
                Rvec tp = theta, tm = theta;
                tp[j] += h;
                tm[j] -= h;
                if (!model.region.contains(tp) || !model.region.contains(tm)) continue;
                const Cmat dd = (model.dchoi_at(tp, i).matrix() -
                                 model.dchoi_at(tm, i).matrix()) / (2.0 * h);
                diag.a1_estimate = std::max(diag.a1_estimate, trace_norm(dd));
            }
        }
        for (int i = 0; i < m; ++i) {
            diag.a2_estimate = std::min(diag.a2_estimate, theta[i] - model.region.box[i].first);
            diag.a2_estimate = std::min(diag.a2_estimate, model.region.box[i].second - theta[i]);
        }
    }
    diag.notes = "Choi-derivative norms over " + std::to_string(grid.size()) + " grid points";
    return diag;
}

} // namespace qestlab
