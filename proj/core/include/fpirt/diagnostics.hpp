#pragma once

#include <optional>
#include <span>
#include <vector>

namespace fpirt {

/// Draws of one scalar, one inner vector per chain. All chains share a length.
using ChainDraws = std::vector<std::vector<double>>;

struct EssEstimate {
  double value = 0.0;
  /// Zero between- and within-chain variance; `value` is then 0.
  bool degenerate = false;
};

/// Rank-normalised split-Rhat: the larger of the bulk and folded statistics.
/// Absent with fewer than two chains or fewer than four draws per chain.
std::optional<double> split_rhat(const ChainDraws& chains);

/// Classic split-Rhat on the raw values. +inf when within-chain variance is
/// zero but chains differ; absent when everything is constant.
std::optional<double> split_rhat_raw(const ChainDraws& chains);

/// ESS of the mean of raw values using Geyer's initial positive and monotone
/// sequences over the multi-chain autocorrelation.
EssEstimate ess_mean(const ChainDraws& chains);

/// Bulk ESS: ess_mean of the rank-normalised split chains.
EssEstimate ess_bulk(const ChainDraws& chains);

/// Normal scores of pooled fractional ranks, (r - 3/8) / (S + 1/4), ties averaged.
ChainDraws rank_normalize(const ChainDraws& chains);

/// Halves each chain, dropping the middle draw of odd-length chains.
ChainDraws split_chains(const ChainDraws& chains);

/// Linear-interpolation quantile of unsorted values (R type 7).
double quantile(std::vector<double> values, double p);

}  // namespace fpirt
