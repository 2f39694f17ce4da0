#include "fpirt/draws.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <json.hpp>

#include "fpirt/csv.hpp"
#include "fpirt/errors.hpp"

namespace fpirt {

using ordered_json = nlohmann::ordered_json;

std::size_t ChainStats::divergences() const {
  return static_cast<std::size_t>(std::count(divergent.begin(), divergent.end(), std::uint8_t{1}));
}

std::size_t ChainStats::max_depth_hits(int max_depth) const {
  return static_cast<std::size_t>(std::count(tree_depth.begin(), tree_depth.end(), max_depth));
}

DrawSet::DrawSet(std::vector<std::string> names, std::size_t chains, std::size_t iterations)
    : names_(std::move(names)), chains_(chains), iterations_(iterations) {
  if (chains == 0) throw ShapeError("a draw set needs at least one chain");
  values_.assign(chains_ * iterations_ * names_.size(), 0.0);
}

std::optional<std::size_t> DrawSet::find(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::size_t DrawSet::index(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw ShapeError("no output named '" + std::string(name) + "'");
}

ChainDraws DrawSet::chains_of(std::size_t param) const {
  ChainDraws out(chains_, std::vector<double>(iterations_));
  for (std::size_t c = 0; c < chains_; ++c) {
    for (std::size_t i = 0; i < iterations_; ++i) out[c][i] = at(c, i, param);
  }
  return out;
}

std::vector<double> DrawSet::pooled(std::size_t param) const {
  std::vector<double> out;
  out.reserve(chains_ * iterations_);
  for (std::size_t c = 0; c < chains_; ++c) {
    for (std::size_t i = 0; i < iterations_; ++i) out.push_back(at(c, i, param));
  }
  return out;
}

std::size_t DrawSet::divergences() const {
  std::size_t n = 0;
  for (const auto& s : stats) n += s.divergences();
  return n;
}

double DrawSet::divergence_fraction() const {
  const std::size_t total = chains_ * iterations_;
  return total == 0 ? 0.0 : static_cast<double>(divergences()) / static_cast<double>(total);
}

ParameterSummary summarize(const DrawSet& draws, std::size_t param) {
  ParameterSummary s;
  s.name = draws.names().at(param);
  std::vector<double> x = draws.pooled(param);
  if (x.empty()) throw ShapeError("cannot summarise an empty draw set");
  std::sort(x.begin(), x.end());
  double sum = 0.0;
  for (double v : x) sum += v;
  s.mean = sum / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.sd = x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
  s.median = quantile(x, 0.5);
  s.q2_5 = quantile(x, 0.025);
  s.q5 = quantile(x, 0.05);
  s.q95 = quantile(x, 0.95);
  s.q97_5 = quantile(x, 0.975);
  const ChainDraws chains = draws.chains_of(param);
  if (draws.n_iterations() >= 4) {
    s.rhat = split_rhat(chains);
    s.ess = ess_bulk(chains);
  } else {
    s.ess = {0.0, true};
  }
  return s;
}

std::vector<ParameterSummary> summarize(const DrawSet& draws) {
  std::vector<ParameterSummary> out;
  out.reserve(draws.n_params());
  for (std::size_t p = 0; p < draws.n_params(); ++p) out.push_back(summarize(draws, p));
  return out;
}

std::vector<double> posterior_medians(const DrawSet& draws) {
  std::vector<double> out(draws.n_params());
  for (std::size_t p = 0; p < draws.n_params(); ++p) out[p] = quantile(draws.pooled(p), 0.5);
  return out;
}

void write_draws_csv(const DrawSet& draws, std::ostream& out) {
  out << "chain,iter,name,value\n";
  std::vector<std::string> escaped;
  escaped.reserve(draws.n_params());
  for (const auto& n : draws.names()) escaped.push_back(csv_escape(n));
  for (std::size_t c = 0; c < draws.n_chains(); ++c) {
    for (std::size_t i = 0; i < draws.n_iterations(); ++i) {
      const auto r = draws.row(c, i);
      for (std::size_t p = 0; p < r.size(); ++p) {
        out << (c + 1) << ',' << (i + 1) << ',' << escaped[p] << ',' << format_double(r[p]) << '\n';
      }
    }
  }
}

namespace {

std::size_t parse_count(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v == 0) {
    throw DataError("draws line " + std::to_string(line) + ": bad index '" + s + "'");
  }
  return v;
}

double parse_value(const std::string& s, std::size_t line) {
  if (s == "NA" || s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf" || s == "Inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf" || s == "-Inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("draws line " + std::to_string(line) + ": bad value '" + s + "'");
  }
  return v;
}

struct Cell {
  std::size_t chain, iter, param;
  double value;
};

}  // namespace

DrawSet read_draws_csv(std::istream& in) {
  CsvReader reader(in);
  auto header = reader.next();
  if (!header || header->size() != 4 || (*header)[0] != "chain" || (*header)[1] != "iter" ||
      (*header)[2] != "name" || (*header)[3] != "value") {
    throw SchemaError("draws file must have header chain,iter,name,value", {"chain", "iter", "name", "value"});
  }
  std::vector<std::string> names;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<Cell> cells;
  std::size_t chains = 0, iters = 0;
  while (auto rec = reader.next()) {
    if (rec->size() != 4) throw DataError("draws line " + std::to_string(reader.line()) + ": expected 4 fields");
    const std::size_t c = parse_count((*rec)[0], reader.line());
    const std::size_t i = parse_count((*rec)[1], reader.line());
    auto [it, inserted] = index.try_emplace((*rec)[2], names.size());
    if (inserted) names.push_back((*rec)[2]);
    cells.push_back({c - 1, i - 1, it->second, parse_value((*rec)[3], reader.line())});
    chains = std::max(chains, c);
    iters = std::max(iters, i);
  }
  if (cells.empty()) throw DataError("draws file has no rows");
  if (cells.size() != chains * iters * names.size()) {
    throw DataError("draws file is incomplete: expected " + std::to_string(chains * iters * names.size()) +
                    " rows, found " + std::to_string(cells.size()));
  }
  DrawSet d(std::move(names), chains, iters);
  std::vector<std::uint8_t> seen(cells.size(), 0);
  for (const auto& cell : cells) {
    const std::size_t k = (cell.chain * iters + cell.iter) * d.n_params() + cell.param;
    if (seen[k]) throw DataError("draws file repeats an entry");
    seen[k] = 1;
    d.at(cell.chain, cell.iter, cell.param) = cell.value;
  }
  return d;
}

namespace {

ordered_json number_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from(const ordered_json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw DataError("summary holds a non-numeric value '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace

void write_summary_json(const DrawSet& draws, const std::vector<ParameterSummary>& summaries,
                        std::ostream& out) {
  ordered_json j;
  j["method"] = draws.method;
  j["chains"] = draws.n_chains();
  j["iterations"] = draws.n_iterations();
  ordered_json sampler;
  sampler["divergences"] = draws.divergences();
  sampler["divergence_fraction"] = draws.divergence_fraction();
  sampler["divergence_flag"] = draws.divergence_flagged();
  ordered_json steps = ordered_json::array();
  std::size_t depth_hits = 0;
  for (const auto& s : draws.stats) {
    steps.push_back(s.step_size);
    depth_hits += s.max_depth_hits(draws.max_tree_depth);
  }
  sampler["step_size"] = steps;
  sampler["max_tree_depth"] = draws.max_tree_depth;
  sampler["max_tree_depth_hits"] = depth_hits;
  j["sampler"] = sampler;
  ordered_json params = ordered_json::array();
  for (const auto& s : summaries) {
    ordered_json p;
    p["name"] = s.name;
    p["mean"] = number_or_null(s.mean);
    p["median"] = number_or_null(s.median);
    p["sd"] = number_or_null(s.sd);
    p["q2.5"] = number_or_null(s.q2_5);
    p["q5"] = number_or_null(s.q5);
    p["q95"] = number_or_null(s.q95);
    p["q97.5"] = number_or_null(s.q97_5);
    p["rhat"] = s.rhat ? number_or_null(*s.rhat) : ordered_json(nullptr);
    p["ess_bulk"] = s.ess.degenerate ? ordered_json(nullptr) : ordered_json(s.ess.value);
    p["ess_degenerate"] = s.ess.degenerate;
    params.push_back(std::move(p));
  }
  j["parameters"] = std::move(params);
  out << j.dump(2) << '\n';
}

std::vector<ParameterSummary> read_summary_json(std::istream& in) {
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("summary is not valid JSON: ") + e.what());
  }
  if (!j.contains("parameters") || !j["parameters"].is_array()) {
    throw DataError("summary has no parameters array");
  }
  std::vector<ParameterSummary> out;
  for (const auto& p : j["parameters"]) {
    ParameterSummary s;
    s.name = p.at("name").get<std::string>();
    s.mean = number_from(p.at("mean"));
    s.median = number_from(p.at("median"));
    s.sd = number_from(p.at("sd"));
    s.q2_5 = number_from(p.at("q2.5"));
    s.q5 = number_from(p.at("q5"));
    s.q95 = number_from(p.at("q95"));
    s.q97_5 = number_from(p.at("q97.5"));
    if (!p.at("rhat").is_null()) s.rhat = number_from(p.at("rhat"));
    s.ess.degenerate = p.at("ess_degenerate").get<bool>();
    s.ess.value = s.ess.degenerate ? 0.0 : number_from(p.at("ess_bulk"));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fpirt
