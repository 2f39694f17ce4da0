#include "fpirt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "fpirt/errors.hpp"

namespace fpirt {

namespace {

void check_shape(const ChainDraws& chains) {
  if (chains.empty()) throw ShapeError("diagnostics need at least one chain");
  const std::size_t n = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != n) throw ShapeError("all chains must have the same number of draws");
  }
}

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double var_of(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

/// Basic Rhat of already-split chains. NaN when undefined.
double rhat_basic(const ChainDraws& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  if (m < 2 || n < 2) return std::nan("");
  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(chains[c]);
    vars[c] = var_of(chains[c]);
  }
  const double W = mean_of(vars);
  const double B = static_cast<double>(n) * var_of(means);
  const double nd = static_cast<double>(n);
  const double var_hat = (nd - 1.0) / nd * W + B / nd;
  if (W <= 0.0) return B > 0.0 ? std::numeric_limits<double>::infinity() : std::nan("");
  return std::sqrt(var_hat / W);
}

/// Lag-t autocovariance of one chain, normalised by n.
double autocov(std::span<const double> x, double mean, std::size_t t) {
  double s = 0.0;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i + t < n; ++i) s += (x[i] - mean) * (x[i + t] - mean);
  return s / static_cast<double>(n);
}

EssEstimate ess_core(const ChainDraws& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  if (n < 3) return {0.0, true};
  for (const auto& c : chains) {
    for (double v : c) {
      if (!std::isfinite(v)) return {0.0, true};
    }
  }
  std::vector<double> means(m);
  for (std::size_t c = 0; c < m; ++c) means[c] = mean_of(chains[c]);
  const double nd = static_cast<double>(n);
  auto mean_acov = [&](std::size_t t) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += autocov(chains[c], means[c], t);
    return s / static_cast<double>(m);
  };
  const double mean_var = mean_acov(0) * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += var_of(means);
  if (!(var_plus > 0.0)) return {0.0, true};

  std::vector<double> rho(n + 1, 0.0);
  auto rho_at = [&](std::size_t t) { return 1.0 - (mean_var - mean_acov(t)) / var_plus; };
  std::size_t t = 0;
  double rho_even = 1.0;
  double rho_odd = rho_at(1);
  rho[0] = rho_even;
  rho[1] = rho_odd;
  while (t + 5 < n && rho_even + rho_odd > 0.0) {
    t += 2;
    rho_even = rho_at(t);
    rho_odd = rho_at(t + 1);
    if (rho_even + rho_odd >= 0.0) {
      rho[t] = rho_even;
      rho[t + 1] = rho_odd;
    }
  }
  const std::size_t max_t = t;
  if (rho_even > 0.0) rho[max_t] = rho_even;

  // Initial monotone sequence.
  t = 0;
  while (t + 4 <= max_t) {
    t += 2;
    if (rho[t] + rho[t + 1] > rho[t - 2] + rho[t - 1]) {
      rho[t] = (rho[t - 2] + rho[t - 1]) / 2.0;
      rho[t + 1] = rho[t];
    }
  }
  const double total = static_cast<double>(m) * nd;
  double tau = -1.0 + rho[max_t];
  for (std::size_t i = 0; i < max_t; ++i) tau += 2.0 * rho[i];
  tau = std::max(tau, 1.0 / std::log10(total));
  return {total / tau, false};
}

}  // namespace

ChainDraws split_chains(const ChainDraws& chains) {
  check_shape(chains);
  const std::size_t n = chains.front().size();
  const std::size_t half = n / 2;
  ChainDraws out;
  out.reserve(2 * chains.size());
  for (const auto& c : chains) {
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

ChainDraws rank_normalize(const ChainDraws& chains) {
  check_shape(chains);
  const std::size_t n = chains.front().size();
  const std::size_t S = chains.size() * n;
  std::vector<std::size_t> order(S);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto value = [&](std::size_t k) { return chains[k / n][k % n]; };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value(a) < value(b); });

  ChainDraws out(chains.size(), std::vector<double>(n));
  const boost::math::normal_distribution<double> std_normal;
  const double denom = static_cast<double>(S) + 0.25;
  std::size_t i = 0;
  while (i < S) {
    std::size_t j = i;
    while (j + 1 < S && value(order[j + 1]) == value(order[i])) ++j;
    // 1-based average rank of the tie group [i, j].
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    const double z = boost::math::quantile(std_normal, (rank - 0.375) / denom);
    for (std::size_t k = i; k <= j; ++k) out[order[k] / n][order[k] % n] = z;
    i = j + 1;
  }
  return out;
}

std::optional<double> split_rhat_raw(const ChainDraws& chains) {
  check_shape(chains);
  if (chains.size() < 2 || chains.front().size() < 4) return std::nullopt;
  const double r = rhat_basic(split_chains(chains));
  if (std::isnan(r)) return std::nullopt;
  return r;
}

std::optional<double> split_rhat(const ChainDraws& chains) {
  check_shape(chains);
  if (chains.size() < 2 || chains.front().size() < 4) return std::nullopt;
  const ChainDraws split = split_chains(chains);
  const double bulk = rhat_basic(rank_normalize(split));

  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  const double med = quantile(pooled, 0.5);
  ChainDraws folded = split;
  for (auto& c : folded) {
    for (double& v : c) v = std::fabs(v - med);
  }
  const double tail = rhat_basic(rank_normalize(folded));

  if (std::isnan(bulk) && std::isnan(tail)) return std::nullopt;
  if (std::isnan(bulk)) return tail;
  if (std::isnan(tail)) return bulk;
  return std::max(bulk, tail);
}

EssEstimate ess_mean(const ChainDraws& chains) { return ess_core(split_chains(chains)); }

EssEstimate ess_bulk(const ChainDraws& chains) {
  const ChainDraws split = split_chains(chains);
  // Constant input has no spread to rank; report it before normalising ties.
  bool constant = true;
  const double first = split.front().empty() ? 0.0 : split.front().front();
  for (const auto& c : split) {
    for (double v : c) constant = constant && v == first;
  }
  if (constant) return {0.0, true};
  return ess_core(rank_normalize(split));
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ShapeError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile probability must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

}  // namespace fpirt
