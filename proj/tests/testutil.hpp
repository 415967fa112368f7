#pragma once

#include <doctest.h>

#include "qestlab/core.hpp"
#include "qestlab/rng.hpp"

namespace qestlab::testutil {

inline Cmat random_complex(int rows, int cols, Rng& rng) {
    Cmat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            m(r, c) = Complex(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
    return m;
}

/// Ginibre-style random full-rank density operator.
inline DensityOperator random_density(int d, Rng& rng) {
    const Cmat g = random_complex(d, d, rng);
    Cmat rho = g * g.adjoint() + 0.01 * Cmat::Identity(d, d);
    rho /= rho.trace().real();
    return DensityOperator(rho);
}

/// Random POVM: PSD elements normalized to resolve the identity.
inline Povm random_povm(int d, int outcomes, Rng& rng) {
    std::vector<Cmat> raw;
    Cmat sum = Cmat::Zero(d, d);
    for (int i = 0; i < outcomes; ++i) {
        const Cmat g = random_complex(d, d, rng);
        raw.push_back(g * g.adjoint() + 0.05 * Cmat::Identity(d, d));
        sum += raw.back();
    }
    Eigen::SelfAdjointEigenSolver<Cmat> es(sum);
    const Cmat inv_sqrt = es.eigenvectors() *
                          es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal().toDenseMatrix() *
                          es.eigenvectors().adjoint();
    for (auto& e : raw) e = inv_sqrt * e * inv_sqrt;
    return Povm(std::move(raw));
}

/// Random CPTP channel from a Haar-ish isometry (QR of a Gaussian block).
inline KrausChannel random_channel(int d, int kraus_count, Rng& rng) {
    const Cmat g = random_complex(d * kraus_count, d, rng);
    const Eigen::HouseholderQR<Cmat> qr(g);
    Cmat q = qr.householderQ() * Cmat::Identity(d * kraus_count, d);
    std::vector<Cmat> ops;
    for (int k = 0; k < kraus_count; ++k) ops.push_back(q.block(k * d, 0, d, d));
    return KrausChannel(d, d, std::move(ops));
}

inline DensityOperator qubit_z_state(double theta) {
    return DensityOperator(0.5 * (identity_c(2) + theta * pauli_z()));
}

} // namespace qestlab::testutil
