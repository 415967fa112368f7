#include "qestlab/fisher.hpp"

#include <cmath>

namespace qestlab {

namespace {
constexpr double kSupportTol = 1e-14;
constexpr double kScoreTol = 1e-12;
constexpr double kCondGate = 1e12;
} // namespace

Estimator::Estimator(Povm m, std::vector<Rvec> vals, std::optional<double> bound)
    : povm(std::move(m)), values(std::move(vals)), value_bound(bound) {
    if (static_cast<int>(values.size()) != povm.n_outcomes())
        throw DimensionMismatch("Estimator: one value per POVM outcome required");
    if (value_bound) {
        for (std::size_t a = 0; a < values.size(); ++a)
            for (std::size_t b = a + 1; b < values.size(); ++b)
                if ((values[a] - values[b]).norm() > *value_bound + 1e-12)
                    throw InvalidConfig("Estimator: range diameter exceeds value_bound");
    }
}

DiscreteLaw law_of(const Estimator& est, const StateModel& model, const Rvec& theta) {
    const int m = model.region.m;
    const int k = est.povm.n_outcomes();
    const DensityOperator rho = model.state_fn(theta);
    DiscreteLaw law;
    law.probs = outcome_distribution(rho, est.povm);
    law.dprobs = Rmat(m, k);
    for (int i = 0; i < m; ++i) {
        const Cmat drho = derivative(model, theta, i).matrix();
        for (int w = 0; w < k; ++w)
            law.dprobs(i, w) = (drho * est.povm.element(w)).trace().real();
    }
    law.values = est.values;
    return law;
}

HermitianOperator sld(const StateModel& model, const Rvec& theta, int i) {
    const Cmat rho = model.state_fn(theta).matrix();
    const Cmat drho = derivative(model, theta, i).matrix();
    Eigen::SelfAdjointEigenSolver<Cmat> es(rho);
    const Rvec& ev = es.eigenvalues();
    const Cmat d_eig = es.eigenvectors().adjoint() * drho * es.eigenvectors();

    Cmat l_eig = Cmat::Zero(ev.size(), ev.size());
    for (Eigen::Index j = 0; j < ev.size(); ++j)
        for (Eigen::Index k = 0; k < ev.size(); ++k) {
            const double denom = ev[j] + ev[k];
            if (denom > 1e-10)
                l_eig(j, k) = 2.0 * d_eig(j, k) / denom;
            else if (std::abs(d_eig(j, k)) >= 1e-8)
                throw M2Violated("sld: kernel-block obstruction for coordinate " +
                                 std::to_string(i));
        }
    const Cmat l = es.eigenvectors() * l_eig * es.eigenvectors().adjoint();
    if (max_abs(0.5 * (l * rho + rho * l) - drho) > 1e-8)
        throw M2Violated("sld: Lyapunov residual too large");
    return HermitianOperator(l);
}

FisherMatrix qfi_sld(const StateModel& model, const Rvec& theta) {
    const int m = model.region.m;
    const Cmat rho = model.state_fn(theta).matrix();
    std::vector<Cmat> l;
    l.reserve(m);
    for (int i = 0; i < m; ++i) l.push_back(sld(model, theta, i).matrix());
    Rmat j(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = a; b < m; ++b) {
            j(a, b) = (rho * l[a] * l[b]).trace().real();
            j(b, a) = j(a, b);
        }
    return {j, FisherMatrix::Kind::sld};
}

FisherMatrix classical_fisher(const StateModel& model, const Rvec& theta, const Povm& m) {
    const int mm = model.region.m;
    const LogDerivative l = log_derivative(model, theta, m);
    const Rvec p = outcome_distribution(model.state_fn(theta), m);
    Rmat j = Rmat::Zero(mm, mm);
    for (int w = 0; w < m.n_outcomes(); ++w) {
        if (l.off_support[w]) continue;
        j += p[w] * l.values[w] * l.values[w].transpose();
    }
    return {0.5 * (j + j.transpose()), FisherMatrix::Kind::classical};
}

LogDerivative log_derivative(const StateModel& model, const Rvec& theta, const Povm& m) {
    const int mm = model.region.m;
    const DensityOperator rho = model.state_fn(theta);
    const Rvec p = outcome_distribution(rho, m);
    std::vector<Cmat> drho;
    for (int i = 0; i < mm; ++i) drho.push_back(derivative(model, theta, i).matrix());

    LogDerivative out;
    out.values.assign(m.n_outcomes(), Rvec::Zero(mm));
    out.off_support.assign(m.n_outcomes(), false);
    for (int w = 0; w < m.n_outcomes(); ++w) {
        Rvec score(mm);
        for (int i = 0; i < mm; ++i) score[i] = (drho[i] * m.element(w)).trace().real();
        if (p[w] < kSupportTol) {
            if (score.cwiseAbs().maxCoeff() >= kScoreTol)
                throw SingularSupport(
                    "log_derivative: zero-probability outcome carries nonzero score");
            out.off_support[w] = true;
            continue;
        }
        out.values[w] = score / p[w];
    }
    return out;
}

Estimator locally_unbiased_estimator(const StateModel& model, const Rvec& theta, const Povm& m) {
    const FisherMatrix j = classical_fisher(model, theta, m);
    if (sym_cond(j.matrix) >= kCondGate)
        throw SingularFisher("locally_unbiased_estimator: POVM uninformative along a direction");
    const Rmat jinv = j.matrix.inverse();
    const LogDerivative l = log_derivative(model, theta, m);
    std::vector<Rvec> values;
    values.reserve(m.n_outcomes());
    for (int w = 0; w < m.n_outcomes(); ++w) values.push_back(theta + jinv * l.values[w]);
    return Estimator(m, std::move(values));
}

std::vector<Rvec> rebias_values(const DiscreteLaw& law, const Rvec& theta0) {
    const int m = static_cast<int>(theta0.size());
    const int k = static_cast<int>(law.values.size());
    Rvec mean = Rvec::Zero(m);
    Rmat b = Rmat::Zero(m, m);
    for (int w = 0; w < k; ++w) {
        mean += law.probs[w] * law.values[w];
        b += law.dprobs.col(w) * law.values[w].transpose(); // b(j, i) = d_j E[T^i]
    }
    Rmat b_mat = b.transpose(); // B^i_j
    if (sym_cond(b_mat.transpose() * b_mat) >= kCondGate * kCondGate)
        throw SingularB("rebias: B matrix singular");
    const Rmat binv = b_mat.inverse();
    std::vector<Rvec> out;
    out.reserve(k);
    for (int w = 0; w < k; ++w) out.push_back(binv * (law.values[w] - mean) + theta0);
    return out;
}

Estimator rebias_estimator(const Estimator& est, const StateModel& model, const Rvec& theta0) {
    return Estimator(est.povm, rebias_values(law_of(est, model, theta0), theta0));
}

Estimator truncate_estimator(const Estimator& est, const Rvec& theta, double L) {
    if (!(L > 0.0)) throw InvalidConfig("truncate_estimator: L must be positive");
    std::vector<Rvec> values;
    values.reserve(est.values.size());
    for (const auto& v : est.values)
        values.push_back((v - theta).norm() <= L ? v : theta);
    return Estimator(est.povm, std::move(values), 2.0 * L);
}

EstimationReport evaluate_law(const DiscreteLaw& law, const Rvec& theta, const Rmat& g) {
    const int m = static_cast<int>(theta.size());
    const int k = static_cast<int>(law.values.size());
    EstimationReport rep;
    rep.theta = theta;
    rep.mse = Rmat::Zero(m, m);
    rep.bias = Rvec::Zero(m);
    rep.b_matrix = Rmat::Zero(m, m);
    for (int w = 0; w < k; ++w) {
        const Rvec dev = law.values[w] - theta;
        rep.mse += law.probs[w] * dev * dev.transpose();
        rep.bias += law.probs[w] * dev;
        rep.b_matrix += law.values[w] * law.dprobs.col(w).transpose();
    }
    rep.variance = rep.mse - rep.bias * rep.bias.transpose();
    rep.weighted_cost = (g * rep.mse).trace();
    rep.stderr_mse = Rmat::Zero(m, m);
    return rep;
}

EstimationReport evaluate_exact(const Estimator& est, const StateModel& model, const Rvec& theta,
                                const Rmat& g) {
    return evaluate_law(law_of(est, model, theta), theta, g);
}

} // namespace qestlab
