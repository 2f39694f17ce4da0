#include "fpirt/priors.hpp"

#include <cmath>
#include <type_traits>
#include <string>
#include <vector>

#include "fpirt/errors.hpp"
#include "fpirt/math.hpp"

namespace fpirt {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(what) + " must be positive and finite");
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string(what) + " must be finite");
}

}  // namespace

double normal_lpdf(double x, double mu, double sigma) {
  require_finite(x, "normal variate");
  require_positive(sigma, "normal scale");
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrtTwoPi;
}

double normal_lpdf_dx(double x, double mu, double sigma) { return -(x - mu) / (sigma * sigma); }

double normal_lpdf_dsigma(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return (z * z - 1.0) / sigma;
}

double half_cauchy_lpdf(double x, double scale) {
  require_positive(scale, "half-Cauchy scale");
  if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("half-Cauchy variate must be non-negative");
  const double r = x / scale;
  return std::log(2.0 / (kPi * scale)) - std::log1p(r * r);
}

double half_cauchy_lpdf_dx(double x, double scale) { return -2.0 * x / (scale * scale + x * x); }

double lognormal_lpdf(double x, double mu, double sigma) {
  require_positive(sigma, "lognormal scale");
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("lognormal variate must be positive");
  const double lx = std::log(x);
  const double z = (lx - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrtTwoPi - lx;
}

double lognormal_lpdf_dx(double x, double mu, double sigma) {
  return -((std::log(x) - mu) / (sigma * sigma) + 1.0) / x;
}

double lkj_log_normalizer(double eta, std::size_t K) {
  require_positive(eta, "LKJ shape");
  // Lewandowski, Kurowicka & Joe (2009): product over the K-1 partial-correlation layers.
  double total = 0.0;
  for (std::size_t i = 1; i < K; ++i) {
    const double kk = static_cast<double>(K - i);
    const double beta_arg = eta + (kk - 1.0) / 2.0;
    const double lbeta = 2.0 * std::lgamma(beta_arg) - std::lgamma(2.0 * beta_arg);
    total += (2.0 * eta - 2.0 + kk) * kk * std::log(2.0) + kk * lbeta;
  }
  return total;
}

namespace {

void check_factor(std::span<const double> L, std::size_t K) {
  if (L.size() != K * K) throw ShapeError("Cholesky factor must have K*K entries");
  for (std::size_t i = 0; i < K; ++i) {
    if (!(L[i * K + i] > 0.0)) throw DomainError("Cholesky factor needs a positive diagonal");
    double row = 0.0;
    for (std::size_t j = 0; j <= i; ++j) row += L[i * K + j] * L[i * K + j];
    if (std::fabs(row - 1.0) > 1e-8) throw DomainError("correlation Cholesky rows must have unit norm");
  }
}

}  // namespace

double lkj_cholesky_lpdf(std::span<const double> L, std::size_t K, double eta) {
  check_factor(L, K);
  double lp = -lkj_log_normalizer(eta, K);
  for (std::size_t k = 1; k < K; ++k) {
    // 0-based row k corresponds to exponent K - (k+1) + 2 eta - 2.
    const double power = static_cast<double>(K) - static_cast<double>(k + 1) + 2.0 * eta - 2.0;
    lp += power * std::log(L[k * K + k]);
  }
  return lp;
}

void lkj_cholesky_lpdf_grad(std::span<const double> L, std::size_t K, double eta, std::span<double> grad) {
  for (std::size_t k = 1; k < K; ++k) {
    const double power = static_cast<double>(K) - static_cast<double>(k + 1) + 2.0 * eta - 2.0;
    grad[k * K + k] += power / L[k * K + k];
  }
}

double mvn_cholesky_lpdf(std::span<const double> x, std::span<const double> mu,
                         std::span<const double> sigma, std::span<const double> L) {
  const std::size_t K = x.size();
  if (mu.size() != K || sigma.size() != K || L.size() != K * K) {
    throw ShapeError("mvn_cholesky_lpdf: dimension mismatch");
  }
  double lp = -static_cast<double>(K) * kLogSqrtTwoPi;
  std::vector<double> v(K);
  for (std::size_t i = 0; i < K; ++i) {
    require_positive(sigma[i], "MVN scale");
    if (!(L[i * K + i] > 0.0)) throw DomainError("Cholesky factor needs a positive diagonal");
    double acc = (x[i] - mu[i]) / sigma[i];
    for (std::size_t j = 0; j < i; ++j) acc -= L[i * K + j] * v[j];
    v[i] = acc / L[i * K + i];
    lp -= 0.5 * v[i] * v[i] + std::log(sigma[i]) + std::log(L[i * K + i]);
  }
  return lp;
}

double prior_logpdf(const Prior& prior, std::span<const double> value) {
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, NormalPrior>) {
          if (value.size() != 1) throw ShapeError("normal prior takes a scalar");
          return normal_lpdf(value[0], p.mu, p.sigma);
        } else if constexpr (std::is_same_v<P, HalfCauchyPrior>) {
          if (value.size() != 1) throw ShapeError("half-Cauchy prior takes a scalar");
          return half_cauchy_lpdf(value[0], p.scale);
        } else if constexpr (std::is_same_v<P, LkjCholeskyPrior>) {
          const auto K = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(value.size()))));
          return lkj_cholesky_lpdf(value, K, p.eta);
        } else {
          return mvn_cholesky_lpdf(value, p.mu, p.sigma, p.L);
        }
      },
      prior);
}

}  // namespace fpirt
