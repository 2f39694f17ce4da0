#pragma once

#include <span>
#include <vector>

namespace fpirt {

// Cumulative-logit (ordered logistic) category model with K cutpoints and
// K+1 categories numbered 1..K+1:
//   P(X <= c) = inv_logit(gamma_c - eta).

/// Throws DomainError unless gamma is strictly increasing and finite.
void require_increasing(std::span<const double> gamma);

/// log P(X = c | eta, gamma), c in 1..gamma.size()+1.
double ordered_logit_logprob(double eta, std::span<const double> gamma, int c);

/// Same value; adds d/d eta into *d_eta and d/d gamma into d_gamma (may be empty).
double ordered_logit_logprob_grad(double eta, std::span<const double> gamma, int c, double* d_eta,
                                  std::span<double> d_gamma);

/// All K+1 category probabilities.
std::vector<double> ordered_logit_probs(double eta, std::span<const double> gamma);

/// Same model with a probit link: P(X <= c) = Phi((gamma_c - mu) * sqrt(tau)).
double ordered_probit_logprob(double mu, double sqrt_tau, std::span<const double> gamma, int c);

}  // namespace fpirt
