#pragma once

#include <cstddef>
#include <span>
#include <utility>

namespace retypelab::stats {

double mean(std::span<const double> xs);

/// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
double sample_sd(std::span<const double> xs);

/// Coefficient of variation sd/mean over the whole span.
double coefficient_of_variation(std::span<const double> xs);

/// Regularized incomplete beta function I_x(a, b).
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided Student-t critical value: P(|T| <= t) = level for df degrees
/// of freedom (e.g. level 0.95, df 29 -> 2.04523).
double t_critical(int df, double level);

/// 95% confidence interval of the mean using Student-t with n-1 df.
std::pair<double, double> ci95(std::span<const double> xs);

}  // namespace retypelab::stats
