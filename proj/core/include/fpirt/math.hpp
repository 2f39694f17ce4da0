#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace fpirt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogSqrtTwoPi = 0.91893853320467274178;
inline constexpr double kPi = 3.14159265358979323846;

inline double inv_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 / (1 + exp(-x))) without overflow in either tail.
inline double log_inv_logit(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

inline double log1m_inv_logit(double x) { return log_inv_logit(-x); }

/// log(1 - exp(a)) for a <= 0.
inline double log1m_exp(double a) {
  if (a > -0.6931471805599453) return std::log(-std::expm1(a));
  return std::log1p(-std::exp(a));
}

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a > b) return a + std::log1p(std::exp(b - a));
  return b + std::log1p(std::exp(a - b));
}

double log_sum_exp(std::span<const double> xs);

/// log(inv_logit(upper) - inv_logit(lower)) for upper > lower; either end may be infinite.
/// Uses inv_logit(a) - inv_logit(b) = inv_logit(a) * inv_logit(-b) * (1 - exp(b - a)),
/// which stays accurate when both values sit in the same tail.
double log_diff_inv_logit(double upper, double lower);

/// Partial derivatives of log_diff_inv_logit with respect to (upper, lower).
struct DiffGradient {
  double d_upper = 0.0;
  double d_lower = 0.0;
};
DiffGradient log_diff_inv_logit_gradient(double upper, double lower);

inline double log_normal_pdf_std(double x) { return -0.5 * x * x - kLogSqrtTwoPi; }

double normal_cdf(double x);
double log_normal_cdf(double x);

/// log(Phi(upper) - Phi(lower)) for upper > lower, switching to the complementary
/// tail when both arguments are positive.
double log_diff_normal_cdf(double upper, double lower);
DiffGradient log_diff_normal_cdf_gradient(double upper, double lower);

/// Neumaier compensated accumulator; result is independent of platform FMA contraction.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Compensated sum of the terms in ascending order: the result depends only on
/// the multiset of values, not their order.
double order_invariant_sum(std::vector<double> terms);

}  // namespace fpirt
