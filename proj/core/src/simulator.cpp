#include "fpirt/simulator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>

#include <json.hpp>

#include "fpirt/csv.hpp"
#include "fpirt/diagnostics.hpp"
#include "fpirt/errors.hpp"
#include "fpirt/math.hpp"
#include "fpirt/ordinal.hpp"

namespace fpirt {

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Rasch: return "rasch";
    case ModelKind::Joint: return "joint";
    case ModelKind::IRTree: return "irtree";
    case ModelKind::IRTreeKey: return "irtree-key";
    case ModelKind::LTRM: return "ltrm";
    case ModelKind::CLTRM: return "cltrm";
    case ModelKind::ALTRM: return "altrm";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view token) {
  std::string t;
  for (char ch : token) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  std::replace(t.begin(), t.end(), '_', '-');
  for (auto k : {ModelKind::Rasch, ModelKind::Joint, ModelKind::IRTree, ModelKind::IRTreeKey, ModelKind::LTRM,
                 ModelKind::CLTRM, ModelKind::ALTRM}) {
    if (t == to_string(k)) return k;
  }
  if (t == "c-ltrm") return ModelKind::CLTRM;
  if (t == "a-ltrm") return ModelKind::ALTRM;
  throw DomainError("unknown model '" + std::string(token) + "'");
}

void DesignSpec::validate() const {
  if (n_examiners == 0 || n_items == 0) throw DomainError("design needs examiners and items");
  if (assignment == Assignment::RandomSubset && (per_examiner == 0 || per_examiner > n_items)) {
    throw DomainError("items per examiner must be in 1..n_items");
  }
  if (!(mates_fraction >= 0.0 && mates_fraction <= 1.0)) throw DomainError("mates fraction must lie in [0, 1]");
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(purpose), 0x5eedu};
  return std::mt19937_64(seq);
}

namespace {

// Stream purposes, kept distinct so adding draws to one never shifts another.
constexpr std::uint64_t kDesignStream = 1;
constexpr std::uint64_t kResponseStream = 2;
constexpr std::uint64_t kParameterStream = 3;

std::string padded(char prefix, std::size_t i, std::size_t n) {
  std::string digits = std::to_string(i + 1);
  const std::size_t width = std::to_string(n).size();
  return std::string(1, prefix) + std::string(width - digits.size(), '0') + digits;
}

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

ResponseRecord base_record(const Design& d, std::size_t i, std::size_t j) {
  ResponseRecord r;
  r.examiner_id = d.examiner_ids[i];
  r.item_id = d.item_ids[j];
  r.mating = d.item_mating[j];
  r.latent_value = LatentValue::VID;
  return r;
}

void set_conclusive(ResponseRecord& r, bool says_mates) {
  r.compare_value = says_mates ? CompareValue::Individualization : CompareValue::Exclusion;
  r.exclusion_reason = says_mates ? ExclusionReason::None : ExclusionReason::Minutiae;
}

void set_no_value(ResponseRecord& r) {
  r.latent_value = LatentValue::NV;
  r.compare_value = CompareValue::None;
}

void set_inconclusive(ResponseRecord& r, InconclusiveReason why) {
  r.compare_value = CompareValue::Inconclusive;
  r.inconclusive_reason = why;
}

int draw_category(std::span<const double> probs, std::mt19937_64& rng) {
  std::discrete_distribution<int> dist(probs.begin(), probs.end());
  return dist(rng);
}

/// Index maps a model would build from these records.
struct Indexer {
  IndexMap examiners, items;
  explicit Indexer(const std::vector<ResponseRecord>& recs) {
    std::vector<std::string> e, it;
    for (const auto& r : recs) {
      e.push_back(r.examiner_id);
      it.push_back(r.item_id);
    }
    examiners = IndexMap(std::move(e));
    items = IndexMap(std::move(it));
  }
};

struct TruthBuilder {
  SimulationTruth t;
  void scalar(const std::string& n, double v) {
    t.names.push_back(n);
    t.values.push_back(v);
  }
  void vec(const char* n, const std::vector<double>& v) {
    for (std::size_t k = 0; k < v.size(); ++k) scalar(std::string(n) + "[" + std::to_string(k + 1) + "]", v[k]);
  }
  /// Entries indexed by design position, renamed to data positions; unobserved ones are skipped.
  void mapped(const char* n, const std::vector<double>& v, const std::vector<std::string>& ids, const IndexMap& map,
              std::size_t K = 0) {
    std::vector<std::pair<std::size_t, std::size_t>> order;  // (data index, design index)
    for (std::size_t q = 0; q < ids.size(); ++q) {
      if (const auto at = map.find(ids[q])) order.emplace_back(*at, q);
    }
    std::sort(order.begin(), order.end());
    for (const auto& [di, q] : order) {
      if (K == 0) {
        scalar(std::string(n) + "[" + std::to_string(di + 1) + "]", v[q]);
      } else {
        for (std::size_t k = 0; k < K; ++k) {
          scalar(std::string(n) + "[" + std::to_string(di + 1) + "," + std::to_string(k + 1) + "]", v[q * K + k]);
        }
      }
    }
  }
};

}  // namespace

Design make_design(const DesignSpec& spec) {
  spec.validate();
  Design d;
  for (std::size_t i = 0; i < spec.n_examiners; ++i) d.examiner_ids.push_back(padded('E', i, spec.n_examiners));
  for (std::size_t j = 0; j < spec.n_items; ++j) d.item_ids.push_back(padded('I', j, spec.n_items));
  std::vector<std::size_t> perm(spec.n_items);
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = stream_rng(spec.seed, 0, kDesignStream);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_mates = static_cast<std::size_t>(std::llround(spec.mates_fraction * static_cast<double>(spec.n_items)));
  d.item_mating.assign(spec.n_items, Mating::NonMates);
  for (std::size_t q = 0; q < n_mates; ++q) d.item_mating[perm[q]] = Mating::Mates;

  std::vector<std::size_t> all(spec.n_items);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < spec.n_examiners; ++i) {
    if (spec.assignment == DesignSpec::Assignment::Complete) {
      d.assigned.push_back(all);
      continue;
    }
    auto er = stream_rng(spec.seed, i + 1, kDesignStream);
    std::vector<std::size_t> pick;
    std::sample(all.begin(), all.end(), std::back_inserter(pick), static_cast<std::ptrdiff_t>(spec.per_examiner), er);
    d.assigned.push_back(std::move(pick));
  }
  return d;
}

std::optional<double> SimulationTruth::value(std::string_view name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) return values[k];
  }
  return std::nullopt;
}

void write_truth_json(const SimulationTruth& t, std::ostream& out) {
  nlohmann::ordered_json j;
  j["model"] = t.model;
  j["seed"] = t.seed;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < t.names.size(); ++k) params[t.names[k]] = t.values[k];
  j["parameters"] = std::move(params);
  out << j.dump(2) << '\n';
}

SimulationTruth read_truth_json(std::istream& in) {
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("truth file is not valid JSON: ") + e.what());
  }
  SimulationTruth t;
  try {
    t.model = j.at("model").get<std::string>();
    t.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("parameters").items()) {
      t.names.push_back(k);
      t.values.push_back(v.get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("truth file is malformed: ") + e.what());
  }
  return t;
}

Simulation simulate_rasch(const RaschParams& p, const Design& d, std::uint64_t seed) {
  require(p.theta.size() == d.n_examiners() && p.b.size() == d.n_items(), "Rasch parameters do not match design");
  Simulation s;
  for (std::size_t i = 0; i < d.n_examiners(); ++i) {
    auto rng = stream_rng(seed, i, kResponseStream);
    for (std::size_t j : d.assigned[i]) {
      auto r = base_record(d, i, j);
      const bool correct = std::bernoulli_distribution(inv_logit(p.theta[i] - p.b[j]))(rng);
      set_conclusive(r, correct == (d.item_mating[j] == Mating::Mates));
      s.records.push_back(std::move(r));
    }
  }
  const Indexer ix(s.records);
  TruthBuilder tb;
  tb.t.model = "rasch";
  tb.t.seed = seed;
  tb.mapped("theta", p.theta, d.examiner_ids, ix.examiners);
  tb.mapped("b", p.b, d.item_ids, ix.items);
  tb.scalar("mu_b", p.mu_b);
  tb.scalar("sigma_theta", p.sigma_theta);
  tb.scalar("sigma_b", p.sigma_b);
  s.truth = std::move(tb.t);
  return s;
}

Simulation simulate_joint(const JointParams& p, const Design& d, std::uint64_t seed) {
  const std::size_t N = d.n_examiners(), J = d.n_items();
  require(p.theta.size() == N && p.b.size() == J && p.h.size() == N && p.f.size() == J &&
              p.gamma.size() == kDifficultyCutpoints,
          "joint parameters do not match design");
  require_increasing(p.gamma);
  Simulation s;
  for (std::size_t i = 0; i < N; ++i) {
    auto rng = stream_rng(seed, i, kResponseStream);
    for (std::size_t j : d.assigned[i]) {
      auto r = base_record(d, i, j);
      const bool correct = std::bernoulli_distribution(inv_logit(p.theta[i] - p.b[j]))(rng);
      set_conclusive(r, correct == (d.item_mating[j] == Mating::Mates));
      const auto probs = ordered_logit_probs(difficulty_eta(p, i, j), p.gamma);
      r.reported_difficulty = static_cast<ReportedDifficulty>(draw_category(probs, rng) + 1);
      s.records.push_back(std::move(r));
    }
  }
  const Indexer ix(s.records);
  TruthBuilder tb;
  tb.t.model = "joint";
  tb.t.seed = seed;
  tb.mapped("theta", p.theta, d.examiner_ids, ix.examiners);
  tb.mapped("b", p.b, d.item_ids, ix.items);
  tb.mapped("h", p.h, d.examiner_ids, ix.examiners);
  tb.mapped("f", p.f, d.item_ids, ix.items);
  tb.scalar("g", p.g);
  tb.vec("gamma", p.gamma);
  tb.scalar("mu_b", p.mu_b);
  tb.scalar("sigma_theta", p.sigma_theta);
  tb.scalar("sigma_b", p.sigma_b);
  tb.scalar("sigma_h", p.sigma_h);
  tb.scalar("sigma_f", p.sigma_f);
  s.truth = std::move(tb.t);
  return s;
}

Simulation simulate_irtree(const IRTreeParams& p, const TreeSpec& tree, const Design& d, std::uint64_t seed) {
  const std::size_t K = tree.n_nodes();
  require(p.K == K && p.theta.size() == d.n_examiners() * K && p.b.size() == d.n_items() * K,
          "IRTree parameters do not match design");
  const bool sequential = tree.n_leaves() == static_cast<std::size_t>(kSequentialOutcomes);
  if (!sequential && tree.n_leaves() != static_cast<std::size_t>(kKeyTreeOutcomes)) {
    throw DomainError("simulation supports the decision-process and answer-key trees");
  }
  Simulation s;
  for (std::size_t i = 0; i < d.n_examiners(); ++i) {
    auto rng = stream_rng(seed, i, kResponseStream);
    for (std::size_t j : d.assigned[i]) {
      auto r = base_record(d, i, j);
      const int leaf = draw_category(leaf_probs(tree, p.theta_row(i), p.b_row(j)), rng);
      const bool mates = d.item_mating[j] == Mating::Mates;
      if (sequential) {
        switch (static_cast<SequentialOutcome>(leaf)) {
          case SequentialOutcome::NoValue: set_no_value(r); break;
          case SequentialOutcome::Individualization: set_conclusive(r, true); break;
          case SequentialOutcome::Exclusion: set_conclusive(r, false); break;
          case SequentialOutcome::Close: set_inconclusive(r, InconclusiveReason::Close); break;
          case SequentialOutcome::Insufficient: set_inconclusive(r, InconclusiveReason::Insufficient); break;
          case SequentialOutcome::NoOverlap: set_inconclusive(r, InconclusiveReason::NoOverlap); break;
        }
      } else {
        switch (static_cast<KeyTreeOutcome>(leaf)) {
          case KeyTreeOutcome::NoValue: set_no_value(r); break;
          case KeyTreeOutcome::Inconclusive:
            set_inconclusive(r, mates ? InconclusiveReason::Close : InconclusiveReason::Insufficient);
            break;
          case KeyTreeOutcome::Individualization: set_conclusive(r, true); break;
          case KeyTreeOutcome::Exclusion: set_conclusive(r, false); break;
        }
      }
      s.records.push_back(std::move(r));
    }
  }
  const Indexer ix(s.records);
  TruthBuilder tb;
  tb.t.model = sequential ? "irtree" : "irtree-key";
  tb.t.seed = seed;
  tb.mapped("theta", p.theta, d.examiner_ids, ix.examiners, K);
  tb.mapped("b", p.b, d.item_ids, ix.items, K);
  tb.vec("beta0", p.beta0);
  tb.vec("beta1", p.beta1);
  tb.vec("sigma_theta", p.sigma_theta);
  tb.vec("sigma_b", p.sigma_b);
  s.truth = std::move(tb.t);
  return s;
}

Simulation simulate_consensus(ConsensusVariant v, const LTRMParams& p, std::optional<double> sigma_b,
                              const Design& d, std::uint64_t seed) {
  const std::size_t N = d.n_examiners(), J = d.n_items();
  const bool ltrm = v == ConsensusVariant::LTRM;
  require(p.T.size() == J && p.a.size() == N && p.b.size() == N, "consensus parameters do not match design");
  require(!ltrm || (p.E.size() == N && p.lambda.size() == J), "LTRM needs E and lambda");
  Simulation s;
  for (std::size_t i = 0; i < N; ++i) {
    auto rng = stream_rng(seed, i, kResponseStream);
    const auto delta = thresholds(p.a[i], p.b[i], p.gamma);
    for (std::size_t j : d.assigned[i]) {
      auto r = base_record(d, i, j);
      std::array<double, 3> probs{};
      switch (v) {
        case ConsensusVariant::LTRM: probs = ltrm_probs(p.T[j], p.E[i] / p.lambda[j], delta); break;
        case ConsensusVariant::CLTRM: probs = cltrm_probs(p.T[j], delta); break;
        case ConsensusVariant::ALTRM: probs = altrm_probs(p.T[j], delta); break;
      }
      switch (static_cast<Conclusiveness>(draw_category(probs, rng))) {
        case Conclusiveness::NoValue: set_no_value(r); break;
        case Conclusiveness::Inconclusive: set_inconclusive(r, InconclusiveReason::Close); break;
        case Conclusiveness::Conclusive: set_conclusive(r, d.item_mating[j] == Mating::Mates); break;
      }
      s.records.push_back(std::move(r));
    }
  }
  const Indexer ix(s.records);
  TruthBuilder tb;
  tb.t.model = std::string(to_string(v));
  tb.t.seed = seed;
  tb.mapped("T", p.T, d.item_ids, ix.items);
  tb.vec("gamma", {p.gamma[0], p.gamma[1]});
  tb.mapped("a", p.a, d.examiner_ids, ix.examiners);
  tb.mapped("b", p.b, d.examiner_ids, ix.examiners);
  if (sigma_b) tb.scalar("sigma_b", *sigma_b);
  if (ltrm) {
    tb.mapped("E", p.E, d.examiner_ids, ix.examiners);
    tb.mapped("lambda", p.lambda, d.item_ids, ix.items);
  }
  s.truth = std::move(tb.t);
  return s;
}

Simulation simulate(ModelKind kind, const DesignSpec& spec, const SimulationHyper& h) {
  const Design d = make_design(spec);
  const std::size_t N = d.n_examiners(), J = d.n_items();
  auto rng = stream_rng(spec.seed, 0, kParameterStream);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  const auto normals = [&](std::size_t n, double mu, double sd) {
    std::vector<double> v(n);
    for (double& x : v) x = mu + sd * std_normal(rng);
    return v;
  };
  const auto lognormals = [&](std::size_t n, double sd) {
    auto v = normals(n, 0.0, sd);
    for (double& x : v) x = std::exp(x);
    return v;
  };
  switch (kind) {
    case ModelKind::Rasch:
    case ModelKind::Joint: {
      JointParams p;
      p.theta = normals(N, 0.0, h.sigma_theta);
      p.b = normals(J, h.mu_b, h.sigma_b);
      p.mu_b = h.mu_b;
      p.sigma_theta = h.sigma_theta;
      p.sigma_b = h.sigma_b;
      if (kind == ModelKind::Rasch) {
        return simulate_rasch(RaschParams{p.theta, p.b, p.mu_b, p.sigma_theta, p.sigma_b}, d, spec.seed);
      }
      p.h = normals(N, 0.0, h.sigma_h);
      p.f = normals(J, 0.0, h.sigma_f);
      p.g = h.g;
      p.gamma = h.difficulty_cutpoints;
      p.sigma_h = h.sigma_h;
      p.sigma_f = h.sigma_f;
      return simulate_joint(p, d, spec.seed);
    }
    case ModelKind::IRTree:
    case ModelKind::IRTreeKey: {
      const TreeSpec tree = kind == ModelKind::IRTree ? TreeSpec::decision_process() : TreeSpec::answer_key();
      const std::size_t K = tree.n_nodes();
      IRTreeParams p;
      p.K = K;
      p.beta0 = h.beta0;
      if (p.beta0.empty()) {
        p.beta0 = kind == ModelKind::IRTree ? std::vector<double>{2.0, 1.5, 0.0, 0.5, 0.5}
                                            : std::vector<double>{2.0, 1.0, 0.0};
      }
      if (p.beta0.size() != K) throw ShapeError("one intercept per tree node is required");
      p.beta1.assign(K, h.beta1);
      p.sigma_theta.assign(K, h.sigma_theta);
      p.sigma_b.assign(K, h.sigma_b);
      // Independent node effects: identity correlation factors.
      p.L_theta.assign(K * K, 0.0);
      for (std::size_t k = 0; k < K; ++k) p.L_theta[k * K + k] = 1.0;
      p.L_b = p.L_theta;
      p.theta = normals(N * K, 0.0, h.sigma_theta);
      p.b = normals(J * K, 0.0, h.sigma_b);
      for (std::size_t j = 0; j < J; ++j) {
        const double x = d.item_mating[j] == Mating::Mates ? 1.0 : 0.0;
        for (std::size_t k = 0; k < K; ++k) p.b[j * K + k] += p.beta0[k] + p.beta1[k] * x;
      }
      return simulate_irtree(p, tree, d, spec.seed);
    }
    case ModelKind::LTRM:
    case ModelKind::CLTRM:
    case ModelKind::ALTRM: {
      if (h.consensus_gamma.size() != 2) throw ShapeError("expected two category boundaries");
      LTRMParams p;
      p.T = normals(J, 0.0, h.T_sd);
      p.gamma = {h.consensus_gamma[0], h.consensus_gamma[1]};
      p.a = lognormals(N, h.a_log_sd);
      p.b = normals(N, 0.0, h.consensus_b_sd);
      const auto v = kind == ModelKind::LTRM    ? ConsensusVariant::LTRM
                     : kind == ModelKind::CLTRM ? ConsensusVariant::CLTRM
                                                : ConsensusVariant::ALTRM;
      if (v == ConsensusVariant::LTRM) {
        p.E = lognormals(N, h.E_log_sd);
        p.lambda = lognormals(J, h.lambda_log_sd);
        // Product-one normalisation, matching the fitted constraint.
        double mean_log = 0.0;
        for (double l : p.lambda) mean_log += std::log(l);
        mean_log /= static_cast<double>(J);
        for (double& l : p.lambda) l /= std::exp(mean_log);
      }
      return simulate_consensus(v, p, h.consensus_b_sd, d, spec.seed);
    }
  }
  throw DomainError("unknown model");
}

std::vector<RecoveryRow> recovery_report(const SimulationTruth& truth, const DrawSet& draws, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("interval level must lie in (0, 1)");
  const double lo_p = 0.5 * (1.0 - level), hi_p = 1.0 - lo_p;
  struct Acc {
    std::vector<double> truth, est;
    std::size_t covered = 0;
  };
  std::map<std::string, Acc> blocks;
  std::vector<std::string> order;
  for (std::size_t k = 0; k < truth.names.size(); ++k) {
    const auto& name = truth.names[k];
    const auto idx = draws.find(name);
    if (!idx) throw DataError("fitted draws have no parameter '" + name + "'");
    const auto v = draws.pooled(*idx);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    const std::string block = name.substr(0, name.find('['));
    if (!blocks.count(block)) order.push_back(block);
    auto& acc = blocks[block];
    acc.truth.push_back(truth.values[k]);
    acc.est.push_back(mean);
    if (quantile(v, lo_p) <= truth.values[k] && truth.values[k] <= quantile(v, hi_p)) ++acc.covered;
  }
  std::vector<RecoveryRow> rows;
  for (const auto& b : order) {
    const auto& acc = blocks[b];
    RecoveryRow r;
    r.block = b;
    r.n = acc.truth.size();
    r.coverage = static_cast<double>(acc.covered) / static_cast<double>(r.n);
    double sse = 0.0;
    for (std::size_t k = 0; k < r.n; ++k) sse += (acc.est[k] - acc.truth[k]) * (acc.est[k] - acc.truth[k]);
    r.rmse = std::sqrt(sse / static_cast<double>(r.n));
    if (r.n >= 2) {
      const double n = static_cast<double>(r.n);
      const double mt = std::accumulate(acc.truth.begin(), acc.truth.end(), 0.0) / n;
      const double me = std::accumulate(acc.est.begin(), acc.est.end(), 0.0) / n;
      double sxy = 0.0, sxx = 0.0, syy = 0.0;
      for (std::size_t k = 0; k < r.n; ++k) {
        sxy += (acc.truth[k] - mt) * (acc.est[k] - me);
        sxx += (acc.truth[k] - mt) * (acc.truth[k] - mt);
        syy += (acc.est[k] - me) * (acc.est[k] - me);
      }
      if (sxx > 0.0 && syy > 0.0) r.correlation = sxy / std::sqrt(sxx * syy);
    }
    rows.push_back(r);
  }
  return rows;
}

void write_recovery_csv(const std::vector<RecoveryRow>& rows, std::ostream& out) {
  CsvWriter w(out);
  w.row({"block", "n", "correlation", "coverage", "rmse"});
  for (const auto& r : rows) {
    w.row({r.block, std::to_string(r.n), r.correlation ? format_double(*r.correlation) : "", format_double(r.coverage),
           format_double(r.rmse)});
  }
}

}  // namespace fpirt
