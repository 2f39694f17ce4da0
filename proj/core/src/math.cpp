#include "fpirt/math.hpp"

#include <algorithm>

namespace fpirt {

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return kNegInf;
  const double m = *std::max_element(xs.begin(), xs.end());
  if (m == kNegInf) return kNegInf;
  if (m == kInf) return kInf;
  CompensatedSum s;
  for (double x : xs) s.add(std::exp(x - m));
  return m + std::log(s.value());
}

double log_diff_inv_logit(double upper, double lower) {
  if (upper == kInf) return log1m_inv_logit(lower);
  if (lower == kNegInf) return log_inv_logit(upper);
  return log_inv_logit(upper) + log1m_inv_logit(lower) + log1m_exp(lower - upper);
}

DiffGradient log_diff_inv_logit_gradient(double upper, double lower) {
  DiffGradient g;
  if (upper == kInf) {
    g.d_lower = -inv_logit(lower);
    return g;
  }
  if (lower == kNegInf) {
    g.d_upper = 1.0 - inv_logit(upper);
    return g;
  }
  const double r = 1.0 / std::expm1(upper - lower);
  g.d_upper = (1.0 - inv_logit(upper)) + r;
  g.d_lower = -inv_logit(lower) - r;
  return g;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double log_normal_cdf(double x) {
  if (x == kInf) return 0.0;
  if (x == kNegInf) return kNegInf;
  if (x > 5.0) return std::log1p(-0.5 * std::erfc(x / std::sqrt(2.0)));
  if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::sqrt(2.0)));
  // Mills-ratio asymptotic series; erfc underflows below about -37.
  const double x2 = 1.0 / (x * x);
  const double series =
      1.0 - x2 * (1.0 - 3.0 * x2 * (1.0 - 5.0 * x2 * (1.0 - 7.0 * x2)));
  return log_normal_pdf_std(x) - std::log(-x) + std::log(series);
}

double log_diff_normal_cdf(double upper, double lower) {
  if (upper == kInf) return log_normal_cdf(-lower);
  if (lower == kNegInf) return log_normal_cdf(upper);
  if (lower > 0.0) {
    const double hi = log_normal_cdf(-lower);
    return hi + log1m_exp(log_normal_cdf(-upper) - hi);
  }
  const double hi = log_normal_cdf(upper);
  return hi + log1m_exp(log_normal_cdf(lower) - hi);
}

DiffGradient log_diff_normal_cdf_gradient(double upper, double lower) {
  const double lp = log_diff_normal_cdf(upper, lower);
  DiffGradient g;
  if (upper != kInf) g.d_upper = std::exp(log_normal_pdf_std(upper) - lp);
  if (lower != kNegInf) g.d_lower = -std::exp(log_normal_pdf_std(lower) - lp);
  return g;
}

double order_invariant_sum(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end());
  CompensatedSum s;
  for (double t : terms) s += t;
  return s.value();
}

}  // namespace fpirt
