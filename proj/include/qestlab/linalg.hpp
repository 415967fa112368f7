#pragma once

#include <Eigen/Dense>
#include <complex>

namespace qestlab {

using Complex = std::complex<double>;
using Cmat = Eigen::MatrixXcd;
using Cvec = Eigen::VectorXcd;
using Rmat = Eigen::MatrixXd;
using Rvec = Eigen::VectorXd;

inline Cmat hermitize(const Cmat& a) { return 0.5 * (a + a.adjoint()); }

template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& a) {
    return a.cwiseAbs().maxCoeff();
}

/// Trace norm of a (not necessarily Hermitian) matrix: sum of singular values.
inline double trace_norm(const Cmat& a) {
    Eigen::JacobiSVD<Cmat> svd(a);
    return svd.singularValues().sum();
}

/// Eigenvalues of a Hermitian matrix, ascending.
inline Rvec herm_eigenvalues(const Cmat& a) {
    Eigen::SelfAdjointEigenSolver<Cmat> es(hermitize(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

inline double min_eigenvalue(const Cmat& a) { return herm_eigenvalues(a).minCoeff(); }

/// Moore-Penrose pseudo-inverse of a real symmetric matrix with relative
/// singular-value cutoff (eigenvalues below cutoff*max are dropped).
inline Rmat sym_pinv(const Rmat& a, double rel_cutoff = 1e-10) {
    Eigen::SelfAdjointEigenSolver<Rmat> es(0.5 * (a + a.transpose()));
    const Rvec ev = es.eigenvalues();
    const double cut = rel_cutoff * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    Rvec inv = Rvec::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (std::abs(ev[i]) > cut) inv[i] = 1.0 / ev[i];
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

/// Projector onto the span of eigenvectors of a real symmetric matrix whose
/// eigenvalue exceeds rel_cutoff * lambda_max.
inline Rmat sym_range_projector(const Rmat& a, double rel_cutoff = 1e-10) {
    Eigen::SelfAdjointEigenSolver<Rmat> es(0.5 * (a + a.transpose()));
    const Rvec ev = es.eigenvalues();
    const double cut = rel_cutoff * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    Rmat p = Rmat::Zero(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] > cut) p += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose();
    return p;
}

/// Condition number of a real symmetric matrix (|lambda|_max / |lambda|_min).
inline double sym_cond(const Rmat& a) {
    const Rvec ev = Eigen::SelfAdjointEigenSolver<Rmat>(0.5 * (a + a.transpose())).eigenvalues();
    const double lo = ev.cwiseAbs().minCoeff();
    const double hi = ev.cwiseAbs().maxCoeff();
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

/// Principal square root of a PSD Hermitian matrix (small negative
/// round-off eigenvalues are clipped to zero).
inline Cmat herm_sqrt(const Cmat& a) {
    Eigen::SelfAdjointEigenSolver<Cmat> es(hermitize(a));
    Rvec ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
}

inline Cmat kron(const Cmat& a, const Cmat& b) {
    Cmat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Pauli matrices and friends.
inline Cmat pauli_x() { Cmat m(2, 2); m << 0, 1, 1, 0; return m; }
inline Cmat pauli_y() { Cmat m(2, 2); m << 0, Complex(0, -1), Complex(0, 1), 0; return m; }
inline Cmat pauli_z() { Cmat m(2, 2); m << 1, 0, 0, -1; return m; }
inline Cmat identity_c(int d) { return Cmat::Identity(d, d); }

/// n . sigma for a unit Bloch vector n.
inline Cmat pauli_axis(double nx, double ny, double nz) {
    return nx * pauli_x() + ny * pauli_y() + nz * pauli_z();
}

} // namespace qestlab
