#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

namespace fpirt {

// Normalised log densities and their derivatives. Each throws DomainError
// outside the support or for invalid hyperparameters.

double normal_lpdf(double x, double mu, double sigma);
/// d/dx and d/dsigma of normal_lpdf.
double normal_lpdf_dx(double x, double mu, double sigma);
double normal_lpdf_dsigma(double x, double mu, double sigma);

/// Density of |X| for X ~ Cauchy(0, scale), x >= 0.
double half_cauchy_lpdf(double x, double scale);
double half_cauchy_lpdf_dx(double x, double scale);

/// LogNormal(mu, sigma) density of x > 0.
double lognormal_lpdf(double x, double mu, double sigma);
double lognormal_lpdf_dx(double x, double mu, double sigma);

/// log of the LKJ normalising constant c_K(eta): the integral of det(R)^(eta-1)
/// over K x K correlation matrices.
double lkj_log_normalizer(double eta, std::size_t K);

/// LKJ(eta) density of a correlation Cholesky factor (K*K row-major),
/// including the Jacobian from R = L L' to the free entries of L.
double lkj_cholesky_lpdf(std::span<const double> L, std::size_t K, double eta);
/// Adds d/dL of lkj_cholesky_lpdf into grad (only diagonal entries are nonzero).
void lkj_cholesky_lpdf_grad(std::span<const double> L, std::size_t K, double eta,
                            std::span<double> grad);

/// Multivariate normal with covariance diag(sigma) L L' diag(sigma).
double mvn_cholesky_lpdf(std::span<const double> x, std::span<const double> mu,
                         std::span<const double> sigma, std::span<const double> L);

struct NormalPrior {
  double mu = 0.0;
  double sigma = 1.0;
};
struct HalfCauchyPrior {
  double scale = 2.5;
};
struct LkjCholeskyPrior {
  double eta = 1.0;
};
struct MvnCholeskyPrior {
  std::vector<double> mu;
  std::vector<double> sigma;
  std::vector<double> L;  ///< K*K row-major correlation Cholesky factor
};
using Prior = std::variant<NormalPrior, HalfCauchyPrior, LkjCholeskyPrior, MvnCholeskyPrior>;

/// Scalar priors read value[0]; LKJ reads a K*K factor; MVN reads a K-vector.
double prior_logpdf(const Prior& prior, std::span<const double> value);

}  // namespace fpirt
