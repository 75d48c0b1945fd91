#pragma once

#include <span>
#include <vector>

namespace insider::stats {

double mean(std::span<const double> v);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_sd(std::span<const double> v);

/// Linear interpolation between order statistics: h = (n - 1) q.
double quantile(std::span<const double> v, double q);
double quantile_sorted(std::span<const double> sorted, double q);
double median(std::span<const double> v);

/// Clip values outside the [lower_q, upper_q] empirical quantiles.
std::vector<double> winsorize(std::span<const double> v, double lower_q = 0.01, double upper_q = 0.99);

/// I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double dof);

struct WelchResult {
  double t = 0.0;
  double p = 1.0;
  double dof = 0.0;
};

/// Unequal-variance two-sample t test with a two-sided p value.
WelchResult welch_t(std::span<const double> a, std::span<const double> b);

}  // namespace insider::stats
