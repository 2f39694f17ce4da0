// Acceptance checks, one PASS/FAIL line per criterion.
//
// Criteria that need the public response file read its path from
// FPIRT_BLACKBOX_DATA. Without it they print FAIL with the reason and exit
// with kSkipped so ctest reports them as skipped rather than passed.

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "fpirt/answer_key.hpp"
#include "fpirt/consensus.hpp"
#include "fpirt/data.hpp"
#include "fpirt/diagnostics.hpp"
#include "fpirt/errors.hpp"
#include "fpirt/draws.hpp"
#include "fpirt/evaluation.hpp"
#include "fpirt/gradient_check.hpp"
#include "fpirt/irtree.hpp"
#include "fpirt/joint.hpp"
#include "fpirt/log_density.hpp"
#include "fpirt/nuts.hpp"
#include "fpirt/optimize.hpp"
#include "fpirt/ordinal.hpp"
#include "fpirt/rasch.hpp"
#include "fpirt/simulator.hpp"
#include "fpirt/tree.hpp"
#include "oracles.hpp"

namespace fpirt {
namespace {

// Tolerances, pinned.
constexpr double kRateTolerance = 0.0005;  // 0.05 percentage points
constexpr double kGradientTolerance = 1e-5;
constexpr std::size_t kGradientPoints = 100;
constexpr double kNormalizationTolerance = 1e-12;
constexpr std::size_t kNormalizationDraws = 10000;
constexpr double kOracleTolerance = 1e-10;
constexpr double kRecoveryCorrelation = 0.8;
constexpr double kCoverageLow = 0.88;
constexpr double kCoverageHigh = 0.99;
constexpr double kTreePredictionError = 0.15;

constexpr int kSkipped = 77;

struct Outcome {
  bool pass = false;
  std::string detail;
  bool skipped = false;
};

std::string fmt(double x, int digits = 4) {
  std::ostringstream o;
  o << std::setprecision(digits) << x;
  return o.str();
}

std::optional<std::string> data_path() {
  const char* p = std::getenv("FPIRT_BLACKBOX_DATA");
  if (p == nullptr || *p == '\0') return std::nullopt;
  return std::string(p);
}

Outcome no_data() { return {false, "FPIRT_BLACKBOX_DATA is not set; the public response file is required", true}; }

std::vector<ResponseRecord> load_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string first;
  std::getline(in, first);
  const bool tabbed = first.find('\t') != std::string::npos;
  in.clear();
  in.seekg(0);
  auto parsed = parse_table(in, tabbed ? TableFormat::tab() : TableFormat::comma());
  return std::move(parsed.records);
}

// ------------------------------------------------------------ criterion 1

Outcome dataset_statistics() {
  const auto path = data_path();
  if (!path) return no_data();
  const auto recs = load_records(*path);
  const auto c = count_dataset(recs);
  const auto r = error_rates(recs);
  const bool counts = c.examiners == 169 && c.items == 744 && c.records == 17121 && c.inconclusive == 4907;
  const bool rates = r.fpr && r.fnr && std::fabs(*r.fpr - 0.001) <= kRateTolerance &&
                     std::fabs(*r.fnr - 0.075) <= kRateTolerance;
  std::ostringstream d;
  d << c.examiners << " examiners, " << c.items << " items, " << c.records << " records, " << c.inconclusive
    << " inconclusive, fpr " << (r.fpr ? fmt(100 * *r.fpr) + "%" : "n/a") << ", fnr "
    << (r.fnr ? fmt(100 * *r.fnr) + "%" : "n/a");
  return {counts && rates, d.str()};
}

// ------------------------------------------------------------ criterion 2

std::unique_ptr<PosteriorModel> model_for(ModelKind k, const std::vector<ResponseRecord>& recs) {
  const auto scheme = ScoringScheme::InconclusiveMCAR;
  switch (k) {
    case ModelKind::Rasch: return std::make_unique<RaschPosterior>(build_matrix(recs, scheme));
    case ModelKind::Joint: return std::make_unique<JointPosterior>(build_joint_data(recs, scheme));
    case ModelKind::IRTree:
      return std::make_unique<IRTreePosterior>(build_sequential_data(recs), TreeSpec::decision_process());
    case ModelKind::IRTreeKey:
      return std::make_unique<IRTreePosterior>(build_key_tree_data(recs), TreeSpec::answer_key(), IRTreePriors{},
                                               "irtree-key");
    case ModelKind::LTRM:
      return std::make_unique<ConsensusPosterior>(build_conclusiveness_data(recs), ConsensusVariant::LTRM);
    case ModelKind::CLTRM:
      return std::make_unique<ConsensusPosterior>(build_conclusiveness_data(recs), ConsensusVariant::CLTRM);
    case ModelKind::ALTRM:
      return std::make_unique<ConsensusPosterior>(build_conclusiveness_data(recs), ConsensusVariant::ALTRM);
  }
  throw DomainError("unknown model");
}

constexpr std::array kAllModels{ModelKind::Rasch, ModelKind::Joint, ModelKind::IRTree, ModelKind::IRTreeKey,
                                ModelKind::LTRM,  ModelKind::CLTRM, ModelKind::ALTRM};

Outcome gradient_suite() {
  DesignSpec spec;
  spec.n_examiners = 8;
  spec.n_items = 10;
  spec.per_examiner = 7;
  spec.seed = 2024;
  bool pass = true;
  std::ostringstream d;
  for (auto k : kAllModels) {
    const auto sim = simulate(k, spec);
    const auto model = model_for(k, sim.records);
    const auto g = check_gradient(*model, kGradientPoints, 17);
    pass = pass && g.points >= kGradientPoints && g.max_relative_error <= kGradientTolerance;
    d << to_string(k) << " " << fmt(g.max_relative_error, 2) << " (" << g.points << " pts, dim "
      << model->dimension() << "); ";
  }
  return {pass, d.str()};
}

// ------------------------------------------------------------ criterion 3

Outcome normalization_suite() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 3.0);
  std::lognormal_distribution<double> ln(0.0, 1.5);
  const auto decision = TreeSpec::decision_process();
  const auto key = TreeSpec::answer_key();
  double worst = 0.0;
  const auto track = [&](const auto& probs) {
    double s = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) worst = std::numeric_limits<double>::infinity();
      s += p;
    }
    worst = std::max(worst, std::fabs(s - 1.0));
  };
  const auto normals = [&](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = z(rng);
    return v;
  };
  for (std::size_t rep = 0; rep < kNormalizationDraws; ++rep) {
    track(leaf_probs(decision, normals(5), normals(5)));
    track(leaf_probs(key, normals(3), normals(3)));
    auto gamma = normals(4);
    std::sort(gamma.begin(), gamma.end());
    track(ordered_logit_probs(z(rng), gamma));
    std::array<double, 2> delta{z(rng), z(rng)};
    std::sort(delta.begin(), delta.end());
    const double T = z(rng);
    track(ltrm_probs(T, ln(rng), delta));
    track(cltrm_probs(T, delta));
    track(altrm_probs(T, delta));
  }
  return {worst <= kNormalizationTolerance,
          "max |sum - 1| = " + fmt(worst, 3) + " over " + std::to_string(kNormalizationDraws) + " draws x 6 families"};
}

// ------------------------------------------------------------ criterion 4

std::vector<double> normals(std::mt19937_64& rng, std::size_t n, double sd = 1.0) {
  std::normal_distribution<double> z(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = z(rng);
  return v;
}

oracle::Grid random_grid(std::mt19937_64& rng, int hi) {
  std::uniform_int_distribution<int> cat(0, hi);
  oracle::Grid g{3, 3, std::vector<int>(9)};
  for (auto& c : g.cells) c = cat(rng);
  return g;
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(4);
  std::map<std::string, double> worst;
  const auto record = [&](const std::string& name, double got, double expect) {
    const double rel = std::fabs(got - expect) / std::max(1.0, std::fabs(expect));
    worst[name] = std::max(worst[name], rel);
  };
  const std::vector<int> mates{1, 0, 1};
  for (int rep = 0; rep < 50; ++rep) {
    {
      const auto y = random_grid(rng, 1);
      const RaschParams p{normals(rng, 3, 1.5), normals(rng, 3, 1.5)};
      record("rasch", rasch_loglik(p, testing::scored(y)), oracle::rasch_loglik(p.theta, p.b, y));
    }
    {
      const auto y = random_grid(rng, 1);
      auto x = random_grid(rng, 4);
      JointData d;
      d.scored = testing::scored(y);
      for (auto& c : x.cells) c += 1;
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) d.difficulty.push_back({i, j, x.at(i, j)});
      JointParams p;
      p.theta = normals(rng, 3);
      p.b = normals(rng, 3);
      p.g = 0.7;
      p.h = normals(rng, 3, 0.5);
      p.f = normals(rng, 3, 0.5);
      p.gamma = {-2.0, -0.4, 0.6, 2.2};
      record("joint", joint_loglik(p, d), oracle::joint_loglik(p.theta, p.b, p.g, p.h, p.f, p.gamma, y, x));
    }
    {
      const auto y = random_grid(rng, 5);
      IRTreeParams p;
      p.K = 5;
      p.theta = normals(rng, 15);
      p.b = normals(rng, 15);
      record("irtree", irtree_loglik(p, testing::categorical(y, 6, mates), TreeSpec::decision_process()),
             oracle::decision_tree_loglik(p.theta, p.b, y));
    }
    {
      const auto y = random_grid(rng, 3);
      IRTreeParams p;
      p.K = 3;
      p.theta = normals(rng, 9);
      p.b = normals(rng, 9);
      double expect = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
          const std::array<double, 3> t{p.theta[i * 3], p.theta[i * 3 + 1], p.theta[i * 3 + 2]};
          const std::array<double, 3> b{p.b[j * 3], p.b[j * 3 + 1], p.b[j * 3 + 2]};
          expect += std::log(oracle::key_leaf_probs(t, b)[static_cast<std::size_t>(y.at(i, j))]);
        }
      }
      record("irtree-key", irtree_loglik(p, testing::categorical(y, 4, mates), TreeSpec::answer_key()), expect);
    }
    {
      const auto y = random_grid(rng, 2);
      const auto d = testing::categorical(y, 3, mates);
      LTRMParams p;
      p.T = normals(rng, 3);
      p.gamma = {-0.7, 0.9};
      std::lognormal_distribution<double> ln(0.0, 0.4);
      for (int i = 0; i < 3; ++i) {
        p.a.push_back(ln(rng));
        p.b.push_back(0.4 * normals(rng, 1)[0]);
        p.E.push_back(ln(rng));
        p.lambda.push_back(ln(rng));
      }
      double ltrm = 0.0, cltrm = 0.0, altrm = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
          const auto c = static_cast<std::size_t>(y.at(i, j));
          ltrm += std::log(oracle::ltrm_cell(p.T[j], p.a[i], p.b[i], p.E[i], p.lambda[j], p.gamma)[c]);
          cltrm += std::log(oracle::cltrm_cell(p.T[j], p.a[i], p.b[i], p.gamma)[c]);
          altrm += std::log(oracle::altrm_cell(p.T[j], p.a[i], p.b[i], p.gamma)[c]);
        }
      }
      record("ltrm", ltrm_loglik(p, d), ltrm);
      record("cltrm", cltrm_loglik(p, d), cltrm);
      record("altrm", altrm_loglik(p, d), altrm);
    }
  }
  bool pass = true;
  std::ostringstream d;
  for (const auto& [name, err] : worst) {
    pass = pass && err <= kOracleTolerance;
    d << name << " " << fmt(err, 2) << "; ";
  }
  return {pass, "max relative error: " + d.str()};
}

// ------------------------------------------------------------ criterion 5

std::size_t env_size(const char* name, std::size_t fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? static_cast<std::size_t>(std::stoul(v)) : fallback;
}

Outcome recovery() {
  DesignSpec spec;  // 170 examiners, 744 items, 100 responses each
  spec.seed = 55;
  SamplerConfig cfg;
  cfg.chains = env_size("FPIRT_RECOVERY_CHAINS", 4);
  cfg.warmup = env_size("FPIRT_RECOVERY_WARMUP", 300);
  cfg.samples = env_size("FPIRT_RECOVERY_SAMPLES", 250);
  cfg.seed = 8;
  bool pass = true;
  std::ostringstream d;
  for (auto k : {ModelKind::Rasch, ModelKind::IRTree}) {
    const auto start = std::chrono::steady_clock::now();
    const auto sim = simulate(k, spec);
    const auto model = model_for(k, sim.records);
    const auto draws = sample_nuts(*model, cfg);
    const auto rows = recovery_report(sim.truth, draws);
    const auto it = std::find_if(rows.begin(), rows.end(), [](const RecoveryRow& r) { return r.block == "theta"; });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (it == rows.end() || !it->correlation) {
      pass = false;
      d << to_string(k) << ": no person block; ";
      continue;
    }
    const bool ok = *it->correlation >= kRecoveryCorrelation && it->coverage >= kCoverageLow &&
                    it->coverage <= kCoverageHigh;
    pass = pass && ok;
    double max_rhat = 0.0;
    for (const auto& s : summarize(draws)) {
      if (s.rhat) max_rhat = std::max(max_rhat, *s.rhat);
    }
    d << to_string(k) << " theta r=" << fmt(*it->correlation, 3) << " coverage=" << fmt(it->coverage, 3)
      << " (n=" << it->n << ", max Rhat " << fmt(max_rhat, 3) << ", " << fmt(secs, 3) << " s); ";
  }
  return {pass, d.str()};
}

// ------------------------------------------------------------ criteria 6-8

struct RealFit {
  std::unique_ptr<PosteriorModel> model;
  DrawSet draws;
};

RealFit fit_real(ModelKind k, const std::vector<ResponseRecord>& recs) {
  RealFit f{model_for(k, recs), {}};
  OptimizerConfig oc;
  LaplaceApproximation lap;
  try {
    lap = map_laplace(*f.model, oc, std::nullopt, 1);
  } catch (const ConvergenceError& e) {
    lap = map_laplace(*f.model, oc, e.best_point(), 1);
  }
  f.draws = laplace_draws(*f.model, lap, 2, 500, 1);
  return f;
}

Outcome waic_ordering() {
  const auto path = data_path();
  if (!path) return no_data();
  const auto recs = load_records(*path);
  std::map<ModelKind, double> w;
  double tree_pe = 1.0;
  for (auto k : {ModelKind::IRTree, ModelKind::CLTRM, ModelKind::ALTRM, ModelKind::LTRM}) {
    const auto f = fit_real(k, recs);
    w[k] = waic(*f.model, f.draws).waic;
    if (k == ModelKind::IRTree) tree_pe = prediction_error(*f.model, f.draws);
  }
  const bool order = w[ModelKind::IRTree] < w[ModelKind::CLTRM] && w[ModelKind::CLTRM] < w[ModelKind::ALTRM] &&
                     w[ModelKind::ALTRM] < w[ModelKind::LTRM];
  std::ostringstream d;
  for (auto k : {ModelKind::IRTree, ModelKind::CLTRM, ModelKind::ALTRM, ModelKind::LTRM}) {
    d << to_string(k) << " " << fmt(w[k], 6) << "; ";
  }
  d << "IRTree prediction error " << fmt(tree_pe, 3);
  return {order && tree_pe <= kTreePredictionError, d.str()};
}

AnswerKey key_from_fit(const RealFit& f, const std::vector<std::string>& ids, KeySource src) {
  return threshold_key(f.draws, ids, src);
}

Outcome key_structure() {
  const auto path = data_path();
  if (!path) return no_data();
  const auto recs = load_records(*path);
  const auto data = build_conclusiveness_data(recs);
  const auto& ids = data.items.ids();
  std::vector<AnswerKey> keys{modal_key(data)};
  keys.push_back(key_from_fit(fit_real(ModelKind::LTRM, recs), ids, KeySource::LTRM));
  keys.push_back(key_from_fit(fit_real(ModelKind::CLTRM, recs), ids, KeySource::CLTRM));
  keys.push_back(key_from_fit(fit_real(ModelKind::ALTRM, recs), ids, KeySource::ALTRM));
  {
    const auto f = fit_real(ModelKind::IRTreeKey, recs);
    const auto tree = TreeSpec::answer_key();
    const auto med = tree_medians(f.draws, data.n_examiners(), ids.size(), tree.n_nodes());
    keys.push_back(irtree_key(ids, med.b, tree));
  }
  const auto dis = disagreement_matrix(keys);
  // Rows: Modal, LTRM, C-LTRM, A-LTRM, IRTree.
  const auto nearest = [&](std::size_t row, std::size_t expect) {
    int best = std::numeric_limits<int>::max();
    for (std::size_t c = 0; c < dis.counts.size(); ++c)
      if (c != row) best = std::min(best, dis.counts[row][c]);
    return dis.counts[row][expect] == best;
  };
  const bool pass = nearest(2, 3) && nearest(3, 2) && nearest(1, 0);
  std::ostringstream d;
  for (std::size_t r = 0; r < dis.counts.size(); ++r) {
    d << dis.sources[r] << "[";
    for (std::size_t c = 0; c < dis.counts.size(); ++c) d << (c ? " " : "") << dis.counts[r][c];
    d << "] ";
  }
  return {pass, d.str()};
}

Outcome beta1_signs() {
  const auto path = data_path();
  if (!path) return no_data();
  const auto recs = load_records(*path);
  const auto f = fit_real(ModelKind::IRTree, recs);
  bool pass = true;
  std::ostringstream d;
  for (const auto& row : coefficient_table(f.draws, 5)) {
    if (row.parameter != "beta1" || row.node > 3) continue;
    pass = pass && row.q95 < 0.0;
    d << "node " << row.node << " [" << fmt(row.q5, 3) << ", " << fmt(row.q95, 3) << "] ";
  }
  return {pass, "beta1 90% intervals: " + d.str()};
}

// ------------------------------------------------------------ criterion 9

Outcome sampler_correctness() {
  bool pass = true;
  std::ostringstream d;
  {
    ParameterSpace s;
    s.add("x", {3});
    const FunctionLogDensity model(std::move(s), [](std::span<const double> x, std::span<double> g) {
      double lp = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) {
        lp -= 0.5 * x[k] * x[k];
        if (!g.empty()) g[k] = -x[k];
      }
      return lp;
    });
    SamplerConfig cfg;
    cfg.seed = 42;
    const auto draws = sample_nuts(model, cfg);
    for (std::size_t p = 0; p < 3; ++p) {
      const auto s = summarize(draws, p);
      const bool ok = std::fabs(s.mean) <= 4.0 / std::sqrt(s.ess.value) && std::fabs(s.sd - 1.0) <= 0.05 &&
                      s.rhat && *s.rhat < 1.01;
      pass = pass && ok;
      d << s.name << " mean " << fmt(s.mean, 2) << " sd " << fmt(s.sd, 3) << " Rhat " << fmt(s.rhat.value_or(0), 4)
        << "; ";
    }
  }
  {
    ParameterSpace s;
    s.add("x", {2});
    constexpr double rho = 0.8;
    const FunctionLogDensity model(std::move(s), [](std::span<const double> x, std::span<double> g) {
      const double det = 1 - rho * rho;
      if (!g.empty()) {
        g[0] = -(x[0] - rho * x[1]) / det;
        g[1] = -(x[1] - rho * x[0]) / det;
      }
      return -0.5 * (x[0] * x[0] - 2 * rho * x[0] * x[1] + x[1] * x[1]) / det;
    });
    SamplerConfig cfg;
    cfg.seed = 7;
    const auto draws = sample_nuts(model, cfg);
    const double r = oracle::correlation(draws.pooled(0), draws.pooled(1));
    pass = pass && std::fabs(r - rho) <= 0.05;
    d << "correlation " << fmt(r, 3) << "; ";
  }
  {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> z;
    ChainDraws same(4, std::vector<double>(1000)), shifted = same;
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t i = 0; i < 1000; ++i) {
        same[c][i] = z(rng);
        shifted[c][i] = z(rng) + 3.0 * static_cast<double>(c);
      }
    }
    const auto a = split_rhat(same), b = split_rhat(shifted);
    pass = pass && a && *a < 1.01 && b && *b > 1.1;
    d << "iid Rhat " << fmt(a.value_or(0), 4) << ", separated chains Rhat " << fmt(b.value_or(0), 3);
  }
  return {pass, d.str()};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace fpirt

int main(int argc, char** argv) {
  using namespace fpirt;
  CLI::App app{"Acceptance checks"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "Criteria to run (default: all)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "dataset statistics", dataset_statistics},
      {2, "gradient suite", gradient_suite},
      {3, "normalization suite", normalization_suite},
      {4, "oracle equivalence", oracle_equivalence},
      {5, "parameter recovery", recovery},
      {6, "model ordering by WAIC", waic_ordering},
      {7, "answer-key disagreement structure", key_structure},
      {8, "beta1 signs on nodes 1-3", beta1_signs},
      {9, "sampler correctness", sampler_correctness},
  };
  if (selected.empty())
    for (const auto& c : all) selected.push_back(c.id);

  bool failed = false, skipped = false;
  for (int id : selected) {
    const auto& c = all[static_cast<std::size_t>(id - 1)];
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    while (!o.detail.empty() && (o.detail.back() == ' ' || o.detail.back() == ';')) o.detail.pop_back();
    std::cout << "criterion " << c.id << " (" << c.title << "): " << (o.pass ? "PASS" : "FAIL") << ": " << o.detail
              << std::endl;
    failed = failed || (!o.pass && !o.skipped);
    skipped = skipped || o.skipped;
  }
  if (failed) return 1;
  return skipped ? kSkipped : 0;
}
