#include "retypelab/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace retypelab::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double coefficient_of_variation(std::span<const double> xs) {
  double m = mean(xs);
  if (m == 0.0) throw std::domain_error("coefficient of variation undefined for zero mean");
  return sample_sd(xs) / m;
}

namespace {

// Continued-fraction evaluation of the incomplete beta (Lentz's method).
double beta_cf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double eps = 1e-15;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

namespace {

// P(T <= t) for Student-t with df degrees of freedom.
double t_cdf(double t, int df) {
  double v = static_cast<double>(df);
  double x = v / (v + t * t);
  double tail = 0.5 * regularized_incomplete_beta(v / 2.0, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

}  // namespace

double t_critical(int df, double level) {
  if (df < 1) throw std::invalid_argument("t_critical: df must be >= 1");
  if (level <= 0.0 || level >= 1.0) throw std::invalid_argument("t_critical: level in (0,1)");
  double target = 0.5 + level / 2.0;
  double lo = 0.0, hi = 1.0;
  while (t_cdf(hi, df) < target) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (t_cdf(mid, df) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::pair<double, double> ci95(std::span<const double> xs) {
  double m = mean(xs);
  if (xs.size() < 2) return {m, m};
  double sd = sample_sd(xs);
  double half = t_critical(static_cast<int>(xs.size()) - 1, 0.95) * sd /
                std::sqrt(static_cast<double>(xs.size()));
  return {m - half, m + half};
}

}  // namespace retypelab::stats
