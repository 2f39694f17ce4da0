#include "fpirt/ordinal.hpp"

#include <cmath>
#include <string>

#include "fpirt/errors.hpp"
#include "fpirt/math.hpp"

namespace fpirt {

void require_increasing(std::span<const double> gamma) {
  for (std::size_t k = 0; k < gamma.size(); ++k) {
    if (!std::isfinite(gamma[k])) throw DomainError("cutpoints must be finite");
    if (k > 0 && !(gamma[k] > gamma[k - 1])) throw DomainError("cutpoints must be strictly increasing");
  }
}

namespace {

void check_category(std::span<const double> gamma, int c) {
  if (c < 1 || static_cast<std::size_t>(c) > gamma.size() + 1) {
    throw DomainError("category " + std::to_string(c) + " is out of range");
  }
}

}  // namespace

double ordered_logit_logprob(double eta, std::span<const double> gamma, int c) {
  return ordered_logit_logprob_grad(eta, gamma, c, nullptr, {});
}

double ordered_logit_logprob_grad(double eta, std::span<const double> gamma, int c, double* d_eta,
                                  std::span<double> d_gamma) {
  require_increasing(gamma);
  check_category(gamma, c);
  const auto K = gamma.size();
  const auto ci = static_cast<std::size_t>(c);
  const double upper = ci <= K ? gamma[ci - 1] - eta : kInf;
  const double lower = ci >= 2 ? gamma[ci - 2] - eta : kNegInf;
  const double lp = log_diff_inv_logit(upper, lower);
  if (d_eta != nullptr || !d_gamma.empty()) {
    const DiffGradient g = log_diff_inv_logit_gradient(upper, lower);
    if (d_eta != nullptr) *d_eta += -(g.d_upper + g.d_lower);
    if (!d_gamma.empty()) {
      if (ci <= K) d_gamma[ci - 1] += g.d_upper;
      if (ci >= 2) d_gamma[ci - 2] += g.d_lower;
    }
  }
  return lp;
}

std::vector<double> ordered_logit_probs(double eta, std::span<const double> gamma) {
  std::vector<double> p(gamma.size() + 1);
  for (std::size_t c = 0; c < p.size(); ++c) p[c] = std::exp(ordered_logit_logprob(eta, gamma, static_cast<int>(c + 1)));
  return p;
}

double ordered_probit_logprob(double mu, double sqrt_tau, std::span<const double> gamma, int c) {
  require_increasing(gamma);
  check_category(gamma, c);
  const auto ci = static_cast<std::size_t>(c);
  const double upper = ci <= gamma.size() ? (gamma[ci - 1] - mu) * sqrt_tau : kInf;
  const double lower = ci >= 2 ? (gamma[ci - 2] - mu) * sqrt_tau : kNegInf;
  return log_diff_normal_cdf(upper, lower);
}

}  // namespace fpirt
