#include "qestlab/core.hpp"

#include <cmath>

namespace qestlab {

HermitianOperator::HermitianOperator(Cmat entries) {
    if (entries.rows() != entries.cols())
        throw DimensionMismatch("HermitianOperator: matrix must be square");
    const double herm_err = max_abs(entries - entries.adjoint());
    if (herm_err > kTolReject)
        throw InvalidOperator("HermitianOperator: non-Hermitian beyond repair tolerance");
    m_ = hermitize(std::move(entries));
}

DensityOperator::DensityOperator(Cmat entries) {
    if (entries.rows() != entries.cols())
        throw DimensionMismatch("DensityOperator: matrix must be square");
    if (max_abs(entries - entries.adjoint()) > kTolReject)
        throw InvalidOperator("DensityOperator: non-Hermitian beyond repair tolerance");
    Cmat h = hermitize(std::move(entries));
    const double tr = h.trace().real();
    if (std::abs(tr - 1.0) > kTolReject)
        throw InvalidOperator("DensityOperator: trace deviates from 1 beyond repair tolerance");
    h /= tr;

    Eigen::SelfAdjointEigenSolver<Cmat> es(h);
    const double min_ev = es.eigenvalues().minCoeff();
    if (min_ev < -kTolReject)
        throw InvalidOperator("DensityOperator: negative eigenvalue beyond repair tolerance");
    if (min_ev < 0.0) {
        Rvec ev = es.eigenvalues().cwiseMax(0.0);
        h = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
        h /= h.trace().real();
    }
    m_ = std::move(h);
}

DensityOperator DensityOperator::maximally_mixed(int d) {
    return DensityOperator(Cmat::Identity(d, d) / static_cast<double>(d));
}

DensityOperator DensityOperator::pure(const Cvec& ket) {
    Cvec v = ket / ket.norm();
    return DensityOperator(v * v.adjoint());
}

Povm::Povm(std::vector<Cmat> elements, std::vector<int> labels)
    : elements_(std::move(elements)), labels_(std::move(labels)) {
    if (elements_.empty()) throw InvalidOperator("Povm: no elements");
    const auto d = elements_[0].rows();
    Cmat sum = Cmat::Zero(d, d);
    for (auto& e : elements_) {
        if (e.rows() != d || e.cols() != d)
            throw DimensionMismatch("Povm: inconsistent element dimensions");
        e = hermitize(e);
        if (min_eigenvalue(e) < -kTolPsd)
            throw InvalidOperator("Povm: element not PSD");
        sum += e;
    }
    if (max_abs(sum - Cmat::Identity(d, d)) > kTolPsd)
        throw InvalidOperator("Povm: elements do not resolve the identity");
    if (labels_.empty()) {
        labels_.resize(elements_.size());
        for (std::size_t i = 0; i < elements_.size(); ++i) labels_[i] = static_cast<int>(i);
    }
    if (labels_.size() != elements_.size())
        throw InvalidOperator("Povm: label/element count mismatch");
}

Povm Povm::projective_axis(double nx, double ny, double nz) {
    const double norm = std::sqrt(nx * nx + ny * ny + nz * nz);
    Cmat n_sigma = pauli_axis(nx / norm, ny / norm, nz / norm);
    Cmat plus = 0.5 * (identity_c(2) + n_sigma);
    Cmat minus = 0.5 * (identity_c(2) - n_sigma);
    return Povm({plus, minus});
}

Povm Povm::eigenbasis(const HermitianOperator& obs) {
    Eigen::SelfAdjointEigenSolver<Cmat> es(obs.matrix());
    std::vector<Cmat> el;
    for (int i = 0; i < obs.dim(); ++i) {
        Cvec v = es.eigenvectors().col(i);
        el.push_back(v * v.adjoint());
    }
    return Povm(std::move(el));
}

Povm Povm::pauli_6() {
    std::vector<Cmat> el;
    const Cmat axes[3] = {pauli_x(), pauli_y(), pauli_z()};
    for (const auto& s : axes) {
        el.push_back((identity_c(2) + s) / 6.0);
        el.push_back((identity_c(2) - s) / 6.0);
    }
    return Povm(std::move(el));
}

KrausChannel::KrausChannel(int input_dim, int output_dim, std::vector<Cmat> kraus_ops)
    : in_(input_dim), out_(output_dim), ops_(std::move(kraus_ops)) {
    if (ops_.empty()) throw InvalidOperator("KrausChannel: no Kraus operators");
    Cmat sum = Cmat::Zero(in_, in_);
    for (const auto& k : ops_) {
        if (k.rows() != out_ || k.cols() != in_)
            throw DimensionMismatch("KrausChannel: Kraus operator has wrong shape");
        sum += k.adjoint() * k;
    }
    if (max_abs(sum - Cmat::Identity(in_, in_)) > kTolPsd)
        throw InvalidOperator("KrausChannel: not trace-preserving");
}

Cmat KrausChannel::apply(const Cmat& rho) const {
    Cmat out = Cmat::Zero(out_, out_);
    for (const auto& k : ops_) out += k * rho * k.adjoint();
    return out;
}

DensityOperator KrausChannel::apply(const DensityOperator& rho) const {
    return DensityOperator(apply(rho.matrix()));
}

KrausChannel KrausChannel::identity(int d) {
    return KrausChannel(d, d, {Cmat::Identity(d, d)});
}

KrausChannel KrausChannel::from_choi(const Cmat& c, int input_dim, int output_dim) {
    Eigen::SelfAdjointEigenSolver<Cmat> es(hermitize(c));
    std::vector<Cmat> ops;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double ev = es.eigenvalues()[i];
        if (ev < -kTolPsd) throw InvalidOperator("from_choi: Choi matrix not PSD");
        if (ev <= kTolPsd) continue;
        // Choi column convention: vector entries indexed (j_in, j_out).
        Cmat k(output_dim, input_dim);
        for (int j = 0; j < input_dim; ++j)
            for (int l = 0; l < output_dim; ++l)
                k(l, j) = std::sqrt(ev) * es.eigenvectors()(j * output_dim + l, i);
        ops.push_back(std::move(k));
    }
    return KrausChannel(input_dim, output_dim, std::move(ops));
}

Instrument::Instrument(std::vector<Branch> branches) : branches_(std::move(branches)) {
    if (branches_.empty()) throw InvalidOperator("Instrument: no branches");
    const auto d = branches_[0].kraus.at(0).rows();
    Cmat sum = Cmat::Zero(d, d);
    for (const auto& b : branches_)
        for (const auto& k : b.kraus) {
            if (k.rows() != d || k.cols() != d)
                throw DimensionMismatch("Instrument: Kraus operator has wrong shape");
            sum += k.adjoint() * k;
        }
    if (max_abs(sum - Cmat::Identity(d, d)) > kTolPsd)
        throw InvalidOperator("Instrument: branches do not sum to a channel");
}

Cmat Instrument::apply_branch(int i, const Cmat& rho) const {
    const auto& b = branches_[i];
    Cmat out = Cmat::Zero(rho.rows(), rho.cols());
    for (const auto& k : b.kraus) out += k * rho * k.adjoint();
    return out;
}

Cmat Instrument::apply_all(const Cmat& rho) const {
    Cmat out = Cmat::Zero(rho.rows(), rho.cols());
    for (int i = 0; i < n_outcomes(); ++i) out += apply_branch(i, rho);
    return out;
}

Povm Instrument::induced_povm() const {
    std::vector<Cmat> el;
    std::vector<int> labels;
    const int d = dim();
    for (const auto& b : branches_) {
        Cmat e = Cmat::Zero(d, d);
        for (const auto& k : b.kraus) e += k.adjoint() * k;
        el.push_back(std::move(e));
        labels.push_back(b.label);
    }
    return Povm(std::move(el), std::move(labels));
}

Instrument Instrument::lueders(const Povm& m) {
    std::vector<Branch> branches;
    for (int i = 0; i < m.n_outcomes(); ++i)
        branches.push_back({m.label(i), {herm_sqrt(m.element(i))}});
    return Instrument(std::move(branches));
}

Cmat tensor(const Cmat& a, const Cmat& b) {
    if (a.rows() != a.cols() || b.rows() != b.cols())
        throw DimensionMismatch("tensor: operands must be square");
    return kron(a, b);
}

HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b) {
    return HermitianOperator(kron(a.matrix(), b.matrix()));
}

DensityOperator tensor(const DensityOperator& a, const DensityOperator& b) {
    return DensityOperator(kron(a.matrix(), b.matrix()));
}

Cmat partial_trace(const Cmat& op, const std::vector<int>& dims, const std::vector<int>& keep) {
    long total = 1;
    for (int d : dims) total *= d;
    if (total != op.rows() || op.rows() != op.cols())
        throw DimensionMismatch("partial_trace: dims do not factor the operator");

    long keep_dim = 1;
    for (int k : keep) keep_dim *= dims.at(k);
    const int n = static_cast<int>(dims.size());

    std::vector<char> kept(n, 0);
    for (int k : keep) kept[k] = 1;

    // Row-major multi-index strides.
    std::vector<long> stride(n, 1);
    for (int i = n - 2; i >= 0; --i) stride[i] = stride[i + 1] * dims[i + 1];

    std::vector<long> keep_stride(n, 0);
    long s = 1;
    for (int i = n - 1; i >= 0; --i)
        if (kept[i]) { keep_stride[i] = s; s *= dims[i]; }

    Cmat out = Cmat::Zero(keep_dim, keep_dim);
    std::vector<int> idx_r(n, 0), idx_c(n, 0);
    for (long r = 0; r < total; ++r) {
        long rr = r;
        for (int i = 0; i < n; ++i) { idx_r[i] = static_cast<int>(rr / stride[i]); rr %= stride[i]; }
        for (long c = 0; c < total; ++c) {
            long cc = c;
            bool diag_traced = true;
            for (int i = 0; i < n; ++i) {
                idx_c[i] = static_cast<int>(cc / stride[i]);
                cc %= stride[i];
                if (!kept[i] && idx_c[i] != idx_r[i]) { diag_traced = false; break; }
            }
            if (!diag_traced) continue;
            long ro = 0, co = 0;
            for (int i = 0; i < n; ++i)
                if (kept[i]) { ro += idx_r[i] * keep_stride[i]; co += idx_c[i] * keep_stride[i]; }
            out(ro, co) += op(r, c);
        }
    }
    return out;
}

HermitianOperator partial_trace(const HermitianOperator& op, const std::vector<int>& dims,
                                const std::vector<int>& keep) {
    return HermitianOperator(partial_trace(op.matrix(), dims, keep));
}

Rvec outcome_distribution(const DensityOperator& rho, const Povm& m) {
    if (rho.dim() != m.dim())
        throw DimensionMismatch("outcome_distribution: state/POVM dimension mismatch");
    Rvec p(m.n_outcomes());
    for (int i = 0; i < m.n_outcomes(); ++i) {
        double v = (rho.matrix() * m.element(i)).trace().real();
        if (v < 0.0) {
            if (v < -kTolHerm)
                throw InvalidOperator("outcome_distribution: negative probability");
            v = 0.0;
        }
        p[i] = v;
    }
    p /= p.sum();
    return p;
}

std::pair<double, DensityOperator> posterior_state(const DensityOperator& rho,
                                                   const Instrument& inst, int index) {
    if (rho.dim() != inst.dim())
        throw DimensionMismatch("posterior_state: state/instrument dimension mismatch");
    Cmat branch = inst.apply_branch(index, rho.matrix());
    const double p = branch.trace().real();
    if (p < 1e-14)
        throw ZeroProbabilityBranch("posterior_state: conditioning on a null event");
    return {p, DensityOperator(branch / p)};
}

HermitianOperator choi(const KrausChannel& ch) {
    const int din = ch.input_dim(), dout = ch.output_dim();
    Cmat c = Cmat::Zero(din * dout, din * dout);
    for (const auto& k : ch.kraus()) {
        // vec(K) in the (j_in, j_out) index convention used by from_choi.
        Cvec v(din * dout);
        for (int j = 0; j < din; ++j)
            for (int l = 0; l < dout; ++l) v(j * dout + l) = k(l, j);
        c += v * v.adjoint();
    }
    return HermitianOperator(c);
}

} // namespace qestlab
