#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "fpirt/draws.hpp"
#include "fpirt/log_density.hpp"

namespace fpirt {

struct SamplerConfig {
  std::size_t chains = 4;
  std::size_t warmup = 1000;
  std::size_t samples = 1000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  std::uint64_t seed = 0;
  /// Initial points are drawn uniformly from [-init_radius, init_radius].
  double init_radius = 2.0;
  /// Energy error beyond which a trajectory counts as divergent.
  double max_delta_h = 1000.0;

  /// Throws DomainError on non-positive counts or target_accept outside (0,1).
  void validate() const;
};

/// Independent random stream for one chain of a seeded run.
std::mt19937_64 chain_rng(std::uint64_t seed, std::size_t chain);

/// Finds a point with finite log density and gradient; throws InitializationError
/// after 100 failed attempts.
std::vector<double> find_initial_point(const LogDensityModel& model, std::mt19937_64& rng, double radius);

/// One chain of adaptive NUTS. Fills `out` rows for `chain` and returns its stats.
ChainStats run_nuts_chain(const LogDensityModel& model, const SamplerConfig& cfg, std::size_t chain,
                          DrawSet& out);

/// Runs cfg.chains chains concurrently. Output depends only on the seed and chain count.
DrawSet sample_nuts(const LogDensityModel& model, const SamplerConfig& cfg);

}  // namespace fpirt
