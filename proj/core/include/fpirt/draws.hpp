#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fpirt/diagnostics.hpp"

namespace fpirt {

/// Per-chain sampler statistics. Per-iteration vectors cover retained draws only.
struct ChainStats {
  double step_size = 0.0;
  std::vector<double> inv_metric;
  std::vector<int> tree_depth;
  std::vector<std::size_t> n_leapfrog;
  std::vector<double> accept_stat;
  std::vector<std::uint8_t> divergent;
  std::vector<double> log_density;
  std::size_t warmup_divergences = 0;

  std::size_t divergences() const;
  std::size_t max_depth_hits(int max_depth) const;
};

/// Draws stored [chain][iteration][output] in one contiguous buffer.
class DrawSet {
 public:
  DrawSet() = default;
  DrawSet(std::vector<std::string> names, std::size_t chains, std::size_t iterations);

  std::size_t n_chains() const { return chains_; }
  std::size_t n_iterations() const { return iterations_; }
  std::size_t n_params() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  /// Index of a named output; nullopt when absent.
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index(std::string_view name) const;

  double& at(std::size_t chain, std::size_t iter, std::size_t param) {
    return values_[(chain * iterations_ + iter) * names_.size() + param];
  }
  double at(std::size_t chain, std::size_t iter, std::size_t param) const {
    return values_[(chain * iterations_ + iter) * names_.size() + param];
  }
  std::span<double> row(std::size_t chain, std::size_t iter) {
    return {values_.data() + (chain * iterations_ + iter) * names_.size(), names_.size()};
  }
  std::span<const double> row(std::size_t chain, std::size_t iter) const {
    return {values_.data() + (chain * iterations_ + iter) * names_.size(), names_.size()};
  }

  ChainDraws chains_of(std::size_t param) const;
  /// All draws of one output, chains concatenated.
  std::vector<double> pooled(std::size_t param) const;

  /// Total divergent transitions after warmup over all chains.
  std::size_t divergences() const;
  double divergence_fraction() const;
  /// More than 20% of retained transitions diverged.
  bool divergence_flagged() const { return divergence_fraction() > 0.2; }

  std::vector<ChainStats> stats;
  std::string method = "nuts";
  int max_tree_depth = 10;

 private:
  std::vector<std::string> names_;
  std::size_t chains_ = 0;
  std::size_t iterations_ = 0;
  std::vector<double> values_;
};

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double q2_5 = 0.0;
  double q5 = 0.0;
  double q95 = 0.0;
  double q97_5 = 0.0;
  std::optional<double> rhat;
  EssEstimate ess;
};

ParameterSummary summarize(const DrawSet& draws, std::size_t param);
std::vector<ParameterSummary> summarize(const DrawSet& draws);

/// Posterior medians of every output, in column order.
std::vector<double> posterior_medians(const DrawSet& draws);

/// Long format: header `chain,iter,name,value`, 1-based chain and iteration.
void write_draws_csv(const DrawSet& draws, std::ostream& out);
DrawSet read_draws_csv(std::istream& in);

void write_summary_json(const DrawSet& draws, const std::vector<ParameterSummary>& summaries,
                        std::ostream& out);
std::vector<ParameterSummary> read_summary_json(std::istream& in);

}  // namespace fpirt
