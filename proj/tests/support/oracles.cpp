#include "oracles.hpp"

#include <cmath>
#include <numeric>

namespace fpirt::oracle {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double rasch_loglik(const std::vector<double>& theta, const std::vector<double>& b, const Grid& y) {
  double prod = 1.0;
  for (std::size_t i = 0; i < y.rows; ++i) {
    for (std::size_t j = 0; j < y.cols; ++j) {
      const int v = y.at(i, j);
      if (v < 0) continue;
      const double p = sigmoid(theta[i] - b[j]);
      prod *= v == 1 ? p : 1.0 - p;
    }
  }
  return std::log(prod);
}

double ordered_logit_prob(double eta, const std::vector<double>& gamma, int c) {
  const int K = static_cast<int>(gamma.size());
  const double upper = c == K + 1 ? 1.0 : sigmoid(gamma[c - 1] - eta);
  const double lower = c == 1 ? 0.0 : sigmoid(gamma[c - 2] - eta);
  return upper - lower;
}

double joint_loglik(const std::vector<double>& theta, const std::vector<double>& b, double g,
                    const std::vector<double>& h, const std::vector<double>& f, const std::vector<double>& gamma,
                    const Grid& y, const Grid& x) {
  double prod = 1.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < x.cols; ++j) {
      const int c = x.at(i, j);
      if (c < 0) continue;
      prod *= ordered_logit_prob(g * (theta[i] - b[j]) + h[i] + f[j], gamma, c);
    }
  }
  return rasch_loglik(theta, b, y) + std::log(prod);
}

std::array<double, 6> decision_leaf_probs(const std::array<double, 5>& theta, const std::array<double, 5>& b) {
  std::array<double, 5> p{};
  for (int k = 0; k < 5; ++k) p[k] = sigmoid(theta[k] - b[k]);
  // Node 1: no value?  Node 2: insufficient?  Node 3: source match?
  // Node 4: individualize vs close.  Node 5: exclude vs no overlap.
  return {
      p[0],
      (1 - p[0]) * (1 - p[1]) * p[2] * p[3],
      (1 - p[0]) * (1 - p[1]) * p[2] * (1 - p[3]),
      (1 - p[0]) * p[1],
      (1 - p[0]) * (1 - p[1]) * (1 - p[2]) * (1 - p[4]),
      (1 - p[0]) * (1 - p[1]) * (1 - p[2]) * p[4],
  };
}

std::array<double, 4> key_leaf_probs(const std::array<double, 3>& theta, const std::array<double, 3>& b) {
  std::array<double, 3> p{};
  for (int k = 0; k < 3; ++k) p[k] = sigmoid(theta[k] - b[k]);
  return {p[0], (1 - p[0]) * p[1], (1 - p[0]) * (1 - p[1]) * p[2], (1 - p[0]) * (1 - p[1]) * (1 - p[2])};
}

double decision_tree_loglik(const std::vector<double>& theta, const std::vector<double>& b, const Grid& y) {
  double prod = 1.0;
  for (std::size_t i = 0; i < y.rows; ++i) {
    for (std::size_t j = 0; j < y.cols; ++j) {
      const int leaf = y.at(i, j);
      if (leaf < 0) continue;
      std::array<double, 5> t{}, d{};
      for (int k = 0; k < 5; ++k) {
        t[k] = theta[i * 5 + k];
        d[k] = b[j * 5 + k];
      }
      prod *= decision_leaf_probs(t, d)[leaf];
    }
  }
  return std::log(prod);
}

std::array<double, 3> ltrm_cell(double T, double a, double b, double E, double lambda,
                                const std::array<double, 2>& gamma) {
  const double sd = std::sqrt(lambda / E);  // precision tau = E / lambda
  const double d1 = a * gamma[0] + b, d2 = a * gamma[1] + b;
  const double x1 = (d1 - T) / sd, x2 = (d2 - T) / sd;
  // Upper tails by symmetry, so no probability is a difference of two values near 1.
  const double mid = x1 > 0.0 ? phi_cdf(-x1) - phi_cdf(-x2) : phi_cdf(x2) - phi_cdf(x1);
  return {phi_cdf(x1), mid, phi_cdf(-x2)};
}

std::array<double, 3> cltrm_cell(double T, double a, double b, const std::array<double, 2>& gamma) {
  const double x1 = a * gamma[0] + b - T, x2 = a * gamma[1] + b - T;
  const double mid = x1 > 0.0 ? sigmoid(-x1) - sigmoid(-x2) : sigmoid(x2) - sigmoid(x1);
  return {sigmoid(x1), mid, sigmoid(-x2)};
}

std::array<double, 3> altrm_cell(double T, double a, double b, const std::array<double, 2>& gamma) {
  // P(c-1) / P(c) = exp(delta_c - T); fix the top category at weight 1.
  const double r2 = std::exp(a * gamma[1] + b - T);
  const double r1 = std::exp(a * gamma[0] + b - T);
  const double w2 = 1.0, w1 = r2 * w2, w0 = r1 * w1;
  const double z = w0 + w1 + w2;
  return {w0 / z, w1 / z, w2 / z};
}

std::array<double, 3> graded_response(double theta, const std::array<double, 2>& beta) {
  const double ge1 = sigmoid(theta - beta[0]), ge2 = sigmoid(theta - beta[1]);
  return {1.0 - ge1, ge1 - ge2, ge2};
}

std::array<double, 3> rating_scale(double theta, const std::array<double, 2>& beta) {
  const double w0 = 1.0, w1 = std::exp(theta - beta[0]), w2 = std::exp(2 * theta - beta[0] - beta[1]);
  const double z = w0 + w1 + w2;
  return {w0 / z, w1 / z, w2 / z};
}

Waic waic(const std::vector<std::vector<double>>& ll) {
  const std::size_t S = ll.size(), n = ll.front().size();
  std::vector<double> point(n);
  double lppd = 0.0, p = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double mean_lik = 0.0, mean = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      mean_lik += std::exp(ll[s][k]) / static_cast<double>(S);
      mean += ll[s][k] / static_cast<double>(S);
    }
    double var = 0.0;
    for (std::size_t s = 0; s < S; ++s) var += (ll[s][k] - mean) * (ll[s][k] - mean);
    var /= static_cast<double>(S - 1);
    lppd += std::log(mean_lik);
    p += var;
    point[k] = -2.0 * (std::log(mean_lik) - var);
  }
  const double w = -2.0 * (lppd - p);
  const double m = w / static_cast<double>(n);
  double ss = 0.0;
  for (double v : point) ss += (v - m) * (v - m);
  const double se = std::sqrt(static_cast<double>(n) * ss / static_cast<double>(n - 1));
  return {w, lppd, p, se};
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace fpirt::oracle
