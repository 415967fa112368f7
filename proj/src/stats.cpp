#include "qestlab/stats.hpp"

#include <algorithm>
#include <cmath>

#include "qestlab/errors.hpp"

namespace qestlab {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (p <= 0.0 || p >= 1.0) throw InvalidConfig("normal_quantile: p must be in (0,1)");
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double ks_statistic_normal(std::vector<double> sample) {
    if (sample.empty()) throw InvalidConfig("ks_statistic_normal: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double cdf = normal_cdf(sample[i]);
        d = std::max(d, (static_cast<double>(i) + 1.0) / n - cdf);
        d = std::max(d, cdf - static_cast<double>(i) / n);
    }
    return d;
}

double chi2_sf(double x, int dof) {
    if (dof < 1) throw InvalidConfig("chi2_sf: dof must be >= 1");
    if (x <= 0.0) return 1.0;
    // Q(x; 1) and Q(x; 2) closed forms, then Q(x; k+2) = Q(x; k) + t_k with
    // t_k = (x/2)^(k/2) e^(-x/2) / Gamma(k/2 + 1).
    double q, term;
    int k;
    if (dof % 2 == 1) {
        q = std::erfc(std::sqrt(x / 2.0));
        term = std::sqrt(2.0 * x / M_PI) * std::exp(-x / 2.0);
        k = 1;
    } else {
        q = std::exp(-x / 2.0);
        term = x / 2.0 * std::exp(-x / 2.0);
        k = 2;
    }
    while (k + 2 <= dof) {
        q += term;
        k += 2;
        term *= x / static_cast<double>(k);
    }
    return std::min(1.0, q);
}

double chi2_gof_pvalue(const std::vector<long>& counts, const std::vector<double>& probs,
                       long total) {
    if (counts.size() != probs.size() || counts.empty())
        throw InvalidConfig("chi2_gof_pvalue: size mismatch");
    // Pool cells with expectation below 5 into the largest cell.
    std::size_t pool = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[pool]) pool = i;
    double chi2 = 0.0;
    int cells = 0;
    long pooled_count = 0;
    double pooled_prob = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double expect = probs[i] * static_cast<double>(total);
        if (i != pool && expect >= 5.0) {
            chi2 += (counts[i] - expect) * (counts[i] - expect) / expect;
            ++cells;
        } else {
            pooled_count += counts[i];
            pooled_prob += probs[i];
        }
    }
    const double pooled_expect = pooled_prob * static_cast<double>(total);
    if (pooled_expect > 0.0) {
        chi2 += (pooled_count - pooled_expect) * (pooled_count - pooled_expect) / pooled_expect;
        ++cells;
    }
    if (cells < 2) return 1.0;
    return chi2_sf(chi2, cells - 1);
}

} // namespace qestlab
