#include "app.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <sstream>
#include <unordered_map>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "fpirt/answer_key.hpp"
#include "fpirt/consensus.hpp"
#include "fpirt/csv.hpp"
#include "fpirt/data.hpp"
#include "fpirt/draws.hpp"
#include "fpirt/errors.hpp"
#include "fpirt/evaluation.hpp"
#include "fpirt/irtree.hpp"
#include "fpirt/joint.hpp"
#include "fpirt/nuts.hpp"
#include "fpirt/optimize.hpp"
#include "fpirt/rasch.hpp"
#include "fpirt/simulator.hpp"

namespace fpirt::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  std::string input;
  std::string model = "rasch";
  std::string scheme = "mcar";
  SamplerConfig sampler{.seed = 1};
  bool map = false;
  std::string out;
  std::string format = "json";
  double rhat_threshold = 1.05;
  double beta_sd = 1.0;

  std::vector<std::string> compare_dirs;
  std::string fit_dir, truth;
  std::string ltrm_dir, cltrm_dir, altrm_dir, irtree_key_dir;

  std::size_t examiners = 170, items = 744, per_examiner = 100;
  bool complete = false;
  double mates_fraction = 0.5;
};

std::string fixed(double x, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read '" + p.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::function<void(std::ostream&)>& body) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write '" + p.string() + "'");
  body(out);
  if (!out) throw DataError("failed while writing '" + p.string() + "'");
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw DataError("'" + p.string() + "' is not valid JSON: " + e.what());
  }
}

struct Dataset {
  ParseResult parsed;
  std::string hash;
};

Dataset load_dataset(const std::string& path) {
  if (path.empty()) throw UsageError("--input is required");
  const std::string bytes = read_file(path);
  if (bytes.find_first_not_of(" \t\r\n") == std::string::npos) throw DataError("input '" + path + "' is empty");
  const auto eol = bytes.find('\n');
  const bool tabbed = bytes.substr(0, eol).find('\t') != std::string::npos;
  std::istringstream in(bytes);
  Dataset d{parse_table(in, tabbed ? TableFormat::tab() : TableFormat::comma()), sha256_hex(bytes)};
  if (d.parsed.records.empty()) throw DataError("input '" + path + "' has no usable records");
  return d;
}

ModelKind model_kind(const std::string& token) {
  try {
    return parse_model_kind(token);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
}

ScoringScheme scheme_of(const RunConfig& cfg) {
  try {
    return parse_scoring_scheme(cfg.scheme);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::string observation_scale(ModelKind k, ScoringScheme s) {
  switch (k) {
    case ModelKind::Rasch: return "scored:" + std::string(to_string(s));
    case ModelKind::Joint: return "scored+difficulty:" + std::string(to_string(s));
    default: return "conclusiveness";
  }
}

std::unique_ptr<PosteriorModel> build_model(ModelKind k, const std::vector<ResponseRecord>& records, ScoringScheme s,
                                            const RunConfig& cfg) {
  IRTreePriors tree_priors;
  tree_priors.beta_sd = cfg.beta_sd;
  switch (k) {
    case ModelKind::Rasch: return std::make_unique<RaschPosterior>(build_matrix(records, s));
    case ModelKind::Joint: return std::make_unique<JointPosterior>(build_joint_data(records, s));
    case ModelKind::IRTree:
      return std::make_unique<IRTreePosterior>(build_sequential_data(records), TreeSpec::decision_process(),
                                               tree_priors, "irtree");
    case ModelKind::IRTreeKey:
      return std::make_unique<IRTreePosterior>(build_key_tree_data(records), TreeSpec::answer_key(), tree_priors,
                                               "irtree-key");
    case ModelKind::LTRM:
      return std::make_unique<ConsensusPosterior>(build_conclusiveness_data(records), ConsensusVariant::LTRM);
    case ModelKind::CLTRM:
      return std::make_unique<ConsensusPosterior>(build_conclusiveness_data(records), ConsensusVariant::CLTRM);
    case ModelKind::ALTRM:
      return std::make_unique<ConsensusPosterior>(build_conclusiveness_data(records), ConsensusVariant::ALTRM);
  }
  throw UsageError("unknown model");
}

std::optional<double> max_rhat(const std::vector<ParameterSummary>& s) {
  std::optional<double> worst;
  for (const auto& p : s) {
    if (p.rhat && (!worst || *p.rhat > *worst)) worst = p.rhat;
  }
  return worst;
}

std::optional<double> min_ess(const std::vector<ParameterSummary>& s) {
  std::optional<double> lo;
  for (const auto& p : s) {
    if (!p.ess.degenerate && (!lo || p.ess.value < *lo)) lo = p.ess.value;
  }
  return lo;
}

json optional_json(std::optional<double> v) {
  if (!v) return nullptr;
  if (std::isinf(*v)) return "inf";
  return *v;
}

void write_summary_csv(const std::vector<ParameterSummary>& s, std::ostream& out) {
  CsvWriter w(out);
  w.row({"name", "mean", "median", "sd", "q2.5", "q5", "q95", "q97.5", "rhat", "ess_bulk"});
  for (const auto& p : s) {
    w.row({p.name, format_double(p.mean), format_double(p.median), format_double(p.sd), format_double(p.q2_5),
           format_double(p.q5), format_double(p.q95), format_double(p.q97_5), p.rhat ? format_double(*p.rhat) : "",
           format_double(p.ess.value)});
  }
}

using SummaryIndex = std::unordered_map<std::string, const ParameterSummary*>;

SummaryIndex index_summaries(const std::vector<ParameterSummary>& s) {
  SummaryIndex idx;
  for (const auto& p : s) idx.emplace(p.name, &p);
  return idx;
}

const ParameterSummary& lookup(const SummaryIndex& idx, const std::string& name, const std::string& where) {
  const auto it = idx.find(name);
  if (it == idx.end()) throw DataError("fit '" + where + "' has no parameter '" + name + "'");
  return *it->second;
}

std::string indexed(const char* n, std::size_t i) { return std::string(n) + "[" + std::to_string(i + 1) + "]"; }

void write_consensus_reports(const fs::path& dir, const ConsensusPosterior& m,
                             const std::vector<ParameterSummary>& s) {
  const auto idx = index_summaries(s);
  const auto& d = m.data();
  write_file(dir / "items.csv", [&](std::ostream& o) {
    CsvWriter w(o);
    w.row({"item_id", "T_mean", "T_median", "T_q2.5", "T_q97.5"});
    for (std::size_t j = 0; j < d.n_items(); ++j) {
      const auto& t = lookup(idx, indexed("T", j), dir.string());
      w.row({d.items.id(j), format_double(t.mean), format_double(t.median), format_double(t.q2_5),
             format_double(t.q97_5)});
    }
  });
  const bool ltrm = m.variant() == ConsensusVariant::LTRM;
  write_file(dir / "examiners.csv", [&](std::ostream& o) {
    CsvWriter w(o);
    std::vector<std::string> header{"examiner_id", "a_median", "a_q2.5", "a_q97.5", "b_median", "b_q2.5", "b_q97.5"};
    if (ltrm) header.insert(header.end(), {"E_median", "E_q2.5", "E_q97.5"});
    w.row(header);
    for (std::size_t i = 0; i < d.n_examiners(); ++i) {
      std::vector<std::string> row{d.examiners.id(i)};
      for (const char* n : {"a", "b", "E"}) {
        if (std::string(n) == "E" && !ltrm) continue;
        const auto& p = lookup(idx, indexed(n, i), dir.string());
        row.insert(row.end(), {format_double(p.median), format_double(p.q2_5), format_double(p.q97_5)});
      }
      w.row(row);
    }
  });
}

void write_reports(const fs::path& dir, ModelKind k, const PosteriorModel& model, const DrawSet& draws,
                   const std::vector<ParameterSummary>& s, const std::vector<ResponseRecord>& records) {
  switch (k) {
    case ModelKind::Rasch: {
      const auto& m = dynamic_cast<const RaschPosterior&>(model);
      write_file(dir / "proficiency.csv",
                 [&](std::ostream& o) { write_proficiency_csv(proficiency_report(draws, m.data(), records), o); });
      write_file(dir / "predictive_scores.csv", [&](std::ostream& o) {
        write_predictive_scores_csv(posterior_predictive_scores(draws, m.data()), o);
      });
      break;
    }
    case ModelKind::Joint: {
      const auto& m = dynamic_cast<const JointPosterior&>(model);
      write_file(dir / "bias.csv",
                 [&](std::ostream& o) { write_bias_csv(reporting_bias_report(draws, m.data()), o); });
      write_file(dir / "predicted_observed.csv",
                 [&](std::ostream& o) { write_predicted_observed_csv(predicted_vs_observed(draws, m.data()), o); });
      write_file(dir / "predictive_scores.csv", [&](std::ostream& o) {
        write_predictive_scores_csv(posterior_predictive_scores(draws, m.data().scored), o);
      });
      break;
    }
    case ModelKind::IRTree:
    case ModelKind::IRTreeKey: {
      const auto& m = dynamic_cast<const IRTreePosterior&>(model);
      const std::size_t K = m.tree().n_nodes();
      write_file(dir / "coefficients.csv",
                 [&](std::ostream& o) { write_coefficients_csv(coefficient_table(draws, K), o); });
      write_file(dir / "flags.csv",
                 [&](std::ostream& o) { write_flags_csv(flag_unexpected(draws, m.data(), m.tree()), m.tree(), o); });
      break;
    }
    case ModelKind::LTRM:
    case ModelKind::CLTRM:
    case ModelKind::ALTRM:
      write_consensus_reports(dir, dynamic_cast<const ConsensusPosterior&>(model), s);
      break;
  }
}

fs::path require_out(const RunConfig& cfg) {
  if (cfg.out.empty()) throw UsageError("--out is required for this command");
  return cfg.out;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const RunConfig& cfg, std::ostream& out) {
  const Dataset d = load_dataset(cfg.input);
  const auto& recs = d.parsed.records;
  const auto counts = count_dataset(recs);
  const auto rates = error_rates(recs);
  out << counts.examiners << " examiners, " << counts.items << " items, " << counts.records << " records\n";
  out << "quarantined rows: " << d.parsed.quarantined() << " of " << d.parsed.data_rows << "\n";
  out << "no value: " << counts.no_value << ", inconclusive: " << counts.inconclusive
      << ", individualizations: " << counts.individualizations << ", exclusions: " << counts.exclusions << "\n";
  out << "false positive rate: " << (rates.fpr ? fixed(100.0 * *rates.fpr, 2) + "%" : std::string("n/a"))
      << " (" << rates.false_positives << "/" << rates.nonmate_conclusive << ")\n";
  out << "false negative rate: " << (rates.fnr ? fixed(100.0 * *rates.fnr, 2) + "%" : std::string("n/a"))
      << " (" << rates.false_negatives << "/" << rates.mate_conclusive << ")\n";
  if (cfg.out.empty()) return kOk;
  const fs::path dir = cfg.out;
  write_file(dir / "dataset.csv", [&](std::ostream& o) { write_table(o, recs); });
  write_file(dir / "quarantine.jsonl", [&](std::ostream& o) { write_issues_jsonl(o, d.parsed.issues); });
  json j;
  j["input"] = cfg.input;
  j["input_hash"] = d.hash;
  j["data_rows"] = d.parsed.data_rows;
  j["quarantined"] = d.parsed.quarantined();
  j["records"] = counts.records;
  j["examiners"] = counts.examiners;
  j["items"] = counts.items;
  j["no_value"] = counts.no_value;
  j["inconclusive"] = counts.inconclusive;
  j["individualizations"] = counts.individualizations;
  j["exclusions"] = counts.exclusions;
  j["false_positives"] = rates.false_positives;
  j["nonmate_conclusive"] = rates.nonmate_conclusive;
  j["false_negatives"] = rates.false_negatives;
  j["mate_conclusive"] = rates.mate_conclusive;
  j["fpr"] = optional_json(rates.fpr);
  j["fnr"] = optional_json(rates.fnr);
  write_file(dir / "ingest.json", [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  out << "wrote " << (dir / "dataset.csv").string() << "\n";
  return kOk;
}

int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ModelKind kind = model_kind(cfg.model);
  const ScoringScheme scheme = scheme_of(cfg);
  const fs::path dir = require_out(cfg);
  cfg.sampler.validate();
  const Dataset d = load_dataset(cfg.input);
  const auto model = build_model(kind, d.parsed.records, scheme, cfg);

  DrawSet draws;
  json fit_info;
  if (cfg.map) {
    OptimizerConfig oc;
    LaplaceApproximation fit;
    try {
      fit = map_laplace(*model, oc, std::nullopt, cfg.sampler.seed);
    } catch (const ConvergenceError& e) {
      // One restart from the best point before giving up.
      fit = map_laplace(*model, oc, e.best_point(), cfg.sampler.seed);
    }
    draws = laplace_draws(*model, fit, cfg.sampler.chains, cfg.sampler.samples, cfg.sampler.seed);
    fit_info["mode_log_density"] = fit.log_density;
    fit_info["gradient_norm"] = fit.gradient_norm;
    fit_info["iterations"] = fit.iterations;
  } else {
    draws = sample_nuts(*model, cfg.sampler);
  }

  const auto summaries = summarize(draws);
  write_file(dir / "summary.json", [&](std::ostream& o) { write_summary_json(draws, summaries, o); });
  if (cfg.format == "csv") write_file(dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(summaries, o); });
  if (!cfg.map) write_file(dir / "draws.csv", [&](std::ostream& o) { write_draws_csv(draws, o); });

  const WaicResult w = waic(*model, draws);
  const double pe = prediction_error(*model, draws);
  json wj;
  wj["model"] = std::string(to_string(kind));
  wj["waic"] = w.waic;
  wj["se"] = w.se;
  wj["lppd"] = w.lppd;
  wj["p_waic"] = w.p_waic;
  wj["n_observations"] = w.n_observations;
  wj["n_draws"] = w.n_draws;
  wj["prediction_error"] = pe;
  write_file(dir / "waic.json", [&](std::ostream& o) { o << wj.dump(2) << '\n'; });

  const auto rhat = max_rhat(summaries);
  const auto ess = min_ess(summaries);
  json meta;
  meta["model"] = std::string(to_string(kind));
  meta["method"] = draws.method;
  meta["input"] = cfg.input;
  meta["dataset_hash"] = d.hash;
  meta["scheme"] = std::string(to_string(scheme));
  meta["observation_scale"] = observation_scale(kind, scheme);
  meta["n_observations"] = model->n_observations();
  meta["n_parameters"] = model->dimension();
  meta["seed"] = cfg.sampler.seed;
  meta["chains"] = cfg.sampler.chains;
  meta["warmup"] = cfg.map ? 0 : cfg.sampler.warmup;
  meta["samples"] = cfg.sampler.samples;
  meta["target_accept"] = cfg.sampler.target_accept;
  meta["max_tree_depth"] = cfg.sampler.max_tree_depth;
  meta["divergences"] = draws.divergences();
  meta["divergence_flagged"] = draws.divergence_flagged();
  meta["max_rhat"] = optional_json(rhat);
  meta["min_ess_bulk"] = optional_json(ess);
  meta["rhat_threshold"] = cfg.rhat_threshold;
  if (!fit_info.is_null()) meta["laplace"] = fit_info;
  write_file(dir / "metadata.json", [&](std::ostream& o) { o << meta.dump(2) << '\n'; });
  write_reports(dir, kind, *model, draws, summaries, d.parsed.records);

  out << to_string(kind) << " (" << draws.method << "): " << summaries.size() << " outputs, "
      << model->n_observations() << " observations\n";
  out << "WAIC " << fixed(w.waic, 1) << " (se " << fixed(w.se, 1) << "), prediction error " << fixed(pe, 3) << "\n";
  out << "max Rhat " << (rhat ? fixed(*rhat, 3) : std::string("n/a")) << ", min bulk ESS "
      << (ess ? fixed(*ess, 0) : std::string("n/a")) << ", divergences " << draws.divergences() << "\n";
  out << "wrote " << dir.string() << "\n";
  if (draws.divergence_flagged()) err << "warning: more than 20% of transitions diverged\n";
  // Laplace draws are independent, so Rhat carries no convergence information there.
  if (!cfg.map && rhat && *rhat > cfg.rhat_threshold) {
    err << "warning: max Rhat " << fixed(*rhat, 3) << " exceeds " << cfg.rhat_threshold << "\n";
    return kConvergence;
  }
  return kOk;
}

int cmd_diagnose(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.fit_dir.empty()) throw UsageError("--fit is required");
  const fs::path dir = cfg.fit_dir;
  std::vector<ParameterSummary> s;
  {
    std::istringstream in(read_file(dir / "summary.json"));
    s = read_summary_json(in);
  }
  const json meta = read_json(dir / "metadata.json");
  std::vector<const ParameterSummary*> order;
  for (const auto& p : s) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    return a->rhat.value_or(0.0) > b->rhat.value_or(0.0);
  });
  std::size_t above = 0;
  for (const auto& p : s) above += p.rhat && *p.rhat > cfg.rhat_threshold;
  const auto rhat = max_rhat(s);
  const auto ess = min_ess(s);
  if (cfg.format == "json") {
    json j;
    j["fit"] = dir.string();
    j["parameters"] = s.size();
    j["max_rhat"] = optional_json(rhat);
    j["min_ess_bulk"] = optional_json(ess);
    j["rhat_threshold"] = cfg.rhat_threshold;
    j["above_threshold"] = above;
    j["divergences"] = meta.value("divergences", 0);
    json worst = json::array();
    for (std::size_t q = 0; q < std::min<std::size_t>(10, order.size()); ++q) {
      worst.push_back({{"name", order[q]->name}, {"rhat", optional_json(order[q]->rhat)},
                       {"ess_bulk", order[q]->ess.value}});
    }
    j["worst"] = worst;
    out << j.dump(2) << '\n';
  } else {
    out << "parameters: " << s.size() << ", above Rhat " << cfg.rhat_threshold << ": " << above
        << ", divergences: " << meta.value("divergences", 0) << "\n";
    out << "max Rhat " << (rhat ? fixed(*rhat, 3) : std::string("n/a")) << ", min bulk ESS "
        << (ess ? fixed(*ess, 0) : std::string("n/a")) << "\n";
    CsvWriter w(out);
    w.row({"name", "rhat", "ess_bulk"});
    for (std::size_t q = 0; q < std::min<std::size_t>(10, order.size()); ++q) {
      w.row({order[q]->name, order[q]->rhat ? format_double(*order[q]->rhat) : "",
             format_double(order[q]->ess.value)});
    }
  }
  if (!cfg.truth.empty()) {
    std::istringstream tin(read_file(cfg.truth));
    const auto truth = read_truth_json(tin);
    std::istringstream din(read_file(dir / "draws.csv"));
    const auto draws = read_draws_csv(din);
    const auto rows = recovery_report(truth, draws);
    const fs::path target = cfg.out.empty() ? dir / "recovery.csv" : fs::path(cfg.out) / "recovery.csv";
    write_file(target, [&](std::ostream& o) { write_recovery_csv(rows, o); });
    for (const auto& r : rows) {
      out << "recovery " << r.block << ": n=" << r.n << " r="
          << (r.correlation ? fixed(*r.correlation, 3) : std::string("n/a")) << " coverage=" << fixed(r.coverage, 3)
          << " rmse=" << fixed(r.rmse, 3) << "\n";
    }
  }
  if (rhat && *rhat > cfg.rhat_threshold) {
    err << "warning: " << above << " parameters exceed Rhat " << cfg.rhat_threshold << "\n";
    return kConvergence;
  }
  return kOk;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out) {
  if (cfg.compare_dirs.empty()) throw UsageError("compare needs at least one fit directory");
  struct Row {
    std::string dir, model;
    double waic, se, p_waic, pe;
  };
  std::vector<Row> rows;
  std::string hash, scale;
  for (const auto& dir : cfg.compare_dirs) {
    const json meta = read_json(fs::path(dir) / "metadata.json");
    const json w = read_json(fs::path(dir) / "waic.json");
    const auto h = meta.at("dataset_hash").get<std::string>();
    const auto sc = meta.at("observation_scale").get<std::string>();
    if (rows.empty()) {
      hash = h;
      scale = sc;
    } else if (h != hash) {
      throw DataError("fit '" + dir + "' was run on a different dataset; refusing to compare");
    } else if (sc != scale) {
      throw DataError("fit '" + dir + "' uses observation scale '" + sc + "', not '" + scale + "'");
    }
    rows.push_back({dir, meta.at("model").get<std::string>(), w.at("waic").get<double>(), w.at("se").get<double>(),
                    w.at("p_waic").get<double>(), w.at("prediction_error").get<double>()});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.waic < b.waic; });
  const auto emit_csv = [&](std::ostream& o) {
    CsvWriter w(o);
    w.row({"model", "waic", "se", "p_waic", "prediction_error", "fit"});
    for (const auto& r : rows) {
      w.row({r.model, format_double(r.waic), format_double(r.se), format_double(r.p_waic), format_double(r.pe),
             r.dir});
    }
  };
  if (cfg.format == "json") {
    json arr = json::array();
    for (const auto& r : rows) {
      arr.push_back({{"model", r.model}, {"waic", r.waic}, {"se", r.se}, {"p_waic", r.p_waic},
                     {"prediction_error", r.pe}, {"fit", r.dir}});
    }
    out << arr.dump(2) << '\n';
  } else {
    emit_csv(out);
  }
  if (!cfg.out.empty()) write_file(fs::path(cfg.out) / "comparison.csv", emit_csv);
  return kOk;
}

int cmd_answerkey(const RunConfig& cfg, std::ostream& out) {
  const fs::path dir = require_out(cfg);
  const std::vector<std::pair<std::string, std::string>> fits{{"--ltrm", cfg.ltrm_dir},
                                                              {"--cltrm", cfg.cltrm_dir},
                                                              {"--altrm", cfg.altrm_dir},
                                                              {"--irtree-key", cfg.irtree_key_dir}};
  for (const auto& [flag, path] : fits) {
    if (path.empty()) throw UsageError("answerkey needs the " + flag.substr(2) + " fit (" + flag + " DIR)");
  }
  const Dataset d = load_dataset(cfg.input);
  const CategoricalData data = build_conclusiveness_data(d.parsed.records);
  const auto& ids = data.items.ids();

  const auto load_fit = [&](const std::string& flag, const std::string& path, ModelKind expect) {
    const fs::path f = path;
    if (!fs::exists(f / "summary.json") || !fs::exists(f / "metadata.json")) {
      throw DataError("missing " + flag.substr(2) + " fit: '" + path + "' has no summary.json/metadata.json");
    }
    const json meta = read_json(f / "metadata.json");
    if (meta.at("model").get<std::string>() != to_string(expect)) {
      throw DataError("fit '" + path + "' is a " + meta.at("model").get<std::string>() + " fit, expected " +
                      std::string(to_string(expect)));
    }
    if (meta.at("dataset_hash").get<std::string>() != d.hash) {
      throw DataError("fit '" + path + "' was run on a different dataset");
    }
    std::istringstream in(read_file(f / "summary.json"));
    return read_summary_json(in);
  };
  const auto consensus_key = [&](const std::string& flag, const std::string& path, ModelKind kind, KeySource src) {
    const auto s = load_fit(flag, path, kind);
    const auto idx = index_summaries(s);
    std::vector<double> T(ids.size());
    for (std::size_t j = 0; j < ids.size(); ++j) T[j] = lookup(idx, indexed("T", j), path).median;
    const std::array<double, 2> gamma{lookup(idx, "gamma[1]", path).median, lookup(idx, "gamma[2]", path).median};
    return threshold_key(ids, T, gamma, src);
  };

  std::vector<AnswerKey> keys;
  keys.push_back(modal_key(data));
  keys.push_back(consensus_key("--ltrm", cfg.ltrm_dir, ModelKind::LTRM, KeySource::LTRM));
  keys.push_back(consensus_key("--cltrm", cfg.cltrm_dir, ModelKind::CLTRM, KeySource::CLTRM));
  keys.push_back(consensus_key("--altrm", cfg.altrm_dir, ModelKind::ALTRM, KeySource::ALTRM));
  {
    const auto s = load_fit("--irtree-key", cfg.irtree_key_dir, ModelKind::IRTreeKey);
    const auto idx = index_summaries(s);
    const TreeSpec tree = TreeSpec::answer_key();
    const std::size_t K = tree.n_nodes();
    std::vector<double> b(ids.size() * K);
    for (std::size_t j = 0; j < ids.size(); ++j) {
      for (std::size_t k = 0; k < K; ++k) {
        b[j * K + k] = lookup(idx, "b[" + std::to_string(j + 1) + "," + std::to_string(k + 1) + "]",
                              cfg.irtree_key_dir)
                           .median;
      }
    }
    keys.push_back(irtree_key(ids, b, tree));
  }

  const std::array<const char*, 5> files{"key_modal.csv", "key_ltrm.csv", "key_cltrm.csv", "key_altrm.csv",
                                         "key_irtree.csv"};
  for (std::size_t m = 0; m < keys.size(); ++m) {
    write_file(dir / files[m], [&](std::ostream& o) { write_key_csv(keys[m], o); });
  }
  const Disagreement dis = disagreement_matrix(keys);
  write_file(dir / "disagreement_matrix.csv", [&](std::ostream& o) { write_disagreement_matrix_csv(dis, o); });
  write_file(dir / "disagreement_detail.csv", [&](std::ostream& o) { write_disagreement_detail_csv(dis, o); });
  std::size_t ties = 0;
  for (bool t : keys[0].tie) ties += t;
  out << ids.size() << " items, " << ties << " modal ties, " << dis.details.size() << " items with any disagreement\n";
  write_disagreement_matrix_csv(dis, out);
  return kOk;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const ModelKind kind = model_kind(cfg.model);
  const fs::path dir = require_out(cfg);
  DesignSpec spec;
  spec.n_examiners = cfg.examiners;
  spec.n_items = cfg.items;
  spec.assignment = cfg.complete ? DesignSpec::Assignment::Complete : DesignSpec::Assignment::RandomSubset;
  spec.per_examiner = cfg.per_examiner;
  spec.mates_fraction = cfg.mates_fraction;
  spec.seed = cfg.sampler.seed;
  try {
    spec.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  const Simulation sim = simulate(kind, spec);
  write_file(dir / "dataset.csv", [&](std::ostream& o) { write_table(o, sim.records); });
  write_file(dir / "truth.json", [&](std::ostream& o) { write_truth_json(sim.truth, o); });
  const auto counts = count_dataset(sim.records);
  out << "simulated " << to_string(kind) << ": " << counts.examiners << " examiners, " << counts.items << " items, "
      << counts.records << " records\n";
  out << "wrote " << (dir / "dataset.csv").string() << " and truth.json\n";
  return kOk;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int k = 0; k < len; ++k) {
    std::snprintf(buf, sizeof buf, "%02x", md[k]);
    hex += buf;
  }
  return hex;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Bayesian item response models for forensic examiner responses", "fpirt"};
  app.set_config("--config", "", "Read options from a flat key=value file (flags take precedence)");
  app.footer(
      "Config files hold one `long-option=value` per line, for example\n"
      "  model=irtree\n  chains=4\n  scheme=mcar\n"
      "Subcommand options use a dotted prefix, e.g. simulate.examiners=50.\n"
      "Exit codes: 0 success, 1 usage, 2 data error, 3 convergence warning.");
  app.require_subcommand(1);

  app.add_option("--input", cfg.input, "Response table (comma or tab delimited)");
  app.add_option("--model", cfg.model, "rasch | joint | irtree | irtree-key | ltrm | cltrm | altrm")
      ->capture_default_str();
  app.add_option("--scheme", cfg.scheme, "Inconclusive scoring: mcar | incorrect | correct")
      ->check(CLI::IsMember({"mcar", "incorrect", "correct"}))
      ->capture_default_str();
  app.add_option("--seed", cfg.sampler.seed, "Random seed")->capture_default_str();
  app.add_option("--chains", cfg.sampler.chains, "Number of chains")->capture_default_str();
  app.add_option("--warmup", cfg.sampler.warmup, "Warmup iterations per chain")->capture_default_str();
  app.add_option("--samples", cfg.sampler.samples, "Retained draws per chain")->capture_default_str();
  app.add_option("--target-accept", cfg.sampler.target_accept, "Step-size adaptation target")
      ->capture_default_str();
  app.add_option("--max-depth", cfg.sampler.max_tree_depth, "Maximum NUTS tree depth")->capture_default_str();
  app.add_flag("--map", cfg.map, "Posterior mode with a Laplace approximation instead of NUTS");
  app.add_option("--out", cfg.out, "Output directory");
  app.add_option("--format", cfg.format, "Summary format: csv | json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  app.add_option("--rhat-threshold", cfg.rhat_threshold, "Rhat above which fit/diagnose exit with 3")
      ->capture_default_str();
  app.add_option("--beta-sd", cfg.beta_sd, "Prior sd of tree regression coefficients")->capture_default_str();

  auto* ingest = app.add_subcommand("ingest", "Validate a response table and write a normalised copy");
  auto* fit = app.add_subcommand("fit", "Fit a model and write summaries, draws and reports");
  auto* diagnose = app.add_subcommand("diagnose", "Convergence diagnostics and parameter recovery for a fit");
  diagnose->add_option("--fit", cfg.fit_dir, "Fit directory")->required();
  diagnose->add_option("--truth", cfg.truth, "truth.json from simulate, for a recovery report");
  auto* compare = app.add_subcommand("compare", "WAIC and prediction-error table for fits of one dataset");
  compare->add_option("fits", cfg.compare_dirs, "Fit directories")->required();
  auto* answerkey = app.add_subcommand("answerkey", "Five answer keys and their disagreements");
  answerkey->add_option("--ltrm", cfg.ltrm_dir, "LTRM fit directory");
  answerkey->add_option("--cltrm", cfg.cltrm_dir, "C-LTRM fit directory");
  answerkey->add_option("--altrm", cfg.altrm_dir, "A-LTRM fit directory");
  answerkey->add_option("--irtree-key", cfg.irtree_key_dir, "Answer-key tree fit directory");
  auto* sim = app.add_subcommand("simulate", "Simulate a dataset and its true parameters");
  sim->add_option("--examiners", cfg.examiners, "Number of examiners")->capture_default_str();
  sim->add_option("--items", cfg.items, "Number of items")->capture_default_str();
  sim->add_option("--per-examiner", cfg.per_examiner, "Items per examiner")->capture_default_str();
  sim->add_flag("--complete", cfg.complete, "Every examiner answers every item");
  sim->add_option("--mates-fraction", cfg.mates_fraction, "Fraction of same-source items")->capture_default_str();
  for (auto* sub : {ingest, fit, diagnose, compare, answerkey, sim}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*ingest) return cmd_ingest(cfg, out);
    if (*fit) return cmd_fit(cfg, out, err);
    if (*diagnose) return cmd_diagnose(cfg, out, err);
    if (*compare) return cmd_compare(cfg, out);
    if (*answerkey) return cmd_answerkey(cfg, out);
    if (*sim) return cmd_simulate(cfg, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const SchemaError& e) {
    err << "error: " << e.what();
    for (const auto& m : e.missing_columns()) err << (&m == &e.missing_columns().front() ? " (missing: " : ", ") << m;
    err << (e.missing_columns().empty() ? "" : ")") << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace fpirt::cli
