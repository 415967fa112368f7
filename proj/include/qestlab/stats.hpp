#pragma once

#include <vector>

namespace qestlab {

/// Standard normal CDF.
double normal_cdf(double x);

/// Inverse standard normal CDF (bisection on normal_cdf; test/diagnostic use).
double normal_quantile(double p);

/// Two-sided Kolmogorov-Smirnov statistic of a sample against the standard
/// normal CDF: sup_x |F_n(x) - Phi(x)| including both one-sided gaps.
double ks_statistic_normal(std::vector<double> sample);

/// Upper tail probability of the chi-squared distribution with k dof,
/// via the exact recurrence from the k=1 and k=2 closed forms.
double chi2_sf(double x, int dof);

/// Pearson chi-squared goodness-of-fit p-value for observed counts against
/// expected probabilities (cells with negligible expectation are pooled).
double chi2_gof_pvalue(const std::vector<long>& counts, const std::vector<double>& probs,
                       long total);

} // namespace qestlab
