#pragma once

#include <cstdint>
#include <vector>

#include "qestlab/linalg.hpp"

namespace qestlab {

/// Deterministic 64-bit generator (xoshiro-style splitmix core).
/// Every stochastic routine takes one of these; per-trial streams are derived
/// as a pure function of (seed, stream index) so results do not depend on
/// scheduling or worker count.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Stream derived from (seed, index); independent of draws made on *this.
    static Rng stream(std::uint64_t seed, std::uint64_t index) {
        return Rng(mix(seed ^ mix(index + 0x51ed2701ULL)));
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Sample an index from a probability vector by CDF inversion.
    int categorical(const Rvec& p) {
        const double u = uniform();
        double acc = 0.0;
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            acc += p[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(p.size()) - 1;
    }

    int bernoulli(double p) { return uniform() < p ? 1 : 0; }

    /// Binomial(k; n, p) by direct summation (fine at desk scale).
    long binomial(long n, double p) {
        long k = 0;
        for (long i = 0; i < n; ++i) k += bernoulli(p);
        return k;
    }

  private:
    std::uint64_t state_;
};

} // namespace qestlab
