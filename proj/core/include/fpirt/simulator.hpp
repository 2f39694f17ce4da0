#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "fpirt/consensus.hpp"
#include "fpirt/data.hpp"
#include "fpirt/draws.hpp"
#include "fpirt/irtree.hpp"
#include "fpirt/joint.hpp"
#include "fpirt/rasch.hpp"
#include "fpirt/tree.hpp"

namespace fpirt {

enum class ModelKind { Rasch, Joint, IRTree, IRTreeKey, LTRM, CLTRM, ALTRM };
std::string_view to_string(ModelKind k);
/// Accepts rasch, joint, irtree, irtree-key, ltrm, cltrm, altrm.
ModelKind parse_model_kind(std::string_view token);

struct DesignSpec {
  enum class Assignment { Complete, RandomSubset };

  std::size_t n_examiners = 170;
  std::size_t n_items = 744;
  Assignment assignment = Assignment::RandomSubset;
  std::size_t per_examiner = 100;  ///< RandomSubset only
  double mates_fraction = 0.5;
  std::uint64_t seed = 1;

  /// Throws DomainError for empty designs, per_examiner > n_items or a fraction outside [0, 1].
  void validate() const;
};

/// Examiner/item ids are zero-padded so their sorted order is the design order.
struct Design {
  std::vector<std::string> examiner_ids;
  std::vector<std::string> item_ids;
  std::vector<Mating> item_mating;
  std::vector<std::vector<std::size_t>> assigned;  ///< items per examiner, ascending

  std::size_t n_examiners() const { return examiner_ids.size(); }
  std::size_t n_items() const { return item_ids.size(); }
};

/// Mates are the first round(mates_fraction * J) items of a seeded permutation;
/// RandomSubset draws items without replacement, uniformly, per examiner.
Design make_design(const DesignSpec& spec);

/// Independent stream for (seed, index, purpose); examiners each get their own.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t purpose);

/// True parameter values under the fitted models' output names. Indices follow
/// the data a model would build from the simulated records.
struct SimulationTruth {
  std::string model;
  std::uint64_t seed = 0;
  std::vector<std::string> names;
  std::vector<double> values;

  std::optional<double> value(std::string_view name) const;
};

void write_truth_json(const SimulationTruth& t, std::ostream& out);
SimulationTruth read_truth_json(std::istream& in);

struct Simulation {
  std::vector<ResponseRecord> records;
  SimulationTruth truth;
};

// Parameters are indexed in design order. Each throws ShapeError when their
// dimensions do not match the design.

/// Conclusive decisions only: correct means individualization on mates, exclusion on non-mates.
Simulation simulate_rasch(const RaschParams& p, const Design& d, std::uint64_t seed);
/// As Rasch, plus a reported difficulty per response.
Simulation simulate_joint(const JointParams& p, const Design& d, std::uint64_t seed);
/// Leaves of a decision-process or answer-key tree; item covariate is the mating indicator.
Simulation simulate_irtree(const IRTreeParams& p, const TreeSpec& tree, const Design& d, std::uint64_t seed);
/// Conclusive responses become individualizations on mates and exclusions otherwise.
Simulation simulate_consensus(ConsensusVariant v, const LTRMParams& p, std::optional<double> sigma_b,
                              const Design& d, std::uint64_t seed);

/// Population values used when simulate() draws the true parameters.
struct SimulationHyper {
  double sigma_theta = 1.0;
  double mu_b = 0.0;
  double sigma_b = 1.0;
  double g = 1.0;
  double sigma_h = 0.5;
  double sigma_f = 0.5;
  std::vector<double> difficulty_cutpoints{-3.0, -1.0, 1.0, 3.0};
  /// Per-node intercepts; empty picks defaults that keep no-value responses rare.
  std::vector<double> beta0;
  double beta1 = -1.0;
  double T_sd = 1.5;
  std::vector<double> consensus_gamma{-1.0, 1.0};
  double a_log_sd = 0.3;
  double consensus_b_sd = 0.3;
  double E_log_sd = 0.5;
  double lambda_log_sd = 0.5;
};

/// Draws true parameters from `hyper` and simulates responses on `spec`'s design.
Simulation simulate(ModelKind kind, const DesignSpec& spec, const SimulationHyper& hyper = {});

struct RecoveryRow {
  std::string block;
  std::size_t n = 0;
  std::optional<double> correlation;  ///< absent for scalars or constant inputs
  double coverage = 0.0;  ///< fraction of truths inside the central interval
  double rmse = 0.0;       ///< posterior mean against truth
};

/// Blocks are name prefixes before '['. Throws DataError when a truth parameter is missing from the draws.
std::vector<RecoveryRow> recovery_report(const SimulationTruth& truth, const DrawSet& draws, double level = 0.95);
void write_recovery_csv(const std::vector<RecoveryRow>& rows, std::ostream& out);

}  // namespace fpirt
