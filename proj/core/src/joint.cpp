#include "fpirt/joint.hpp"

#include <algorithm>
#include <cmath>

#include "fpirt/csv.hpp"
#include "fpirt/errors.hpp"
#include "fpirt/math.hpp"
#include "fpirt/ordinal.hpp"
#include "fpirt/priors.hpp"
#include "fpirt/rasch.hpp"

namespace fpirt {

namespace {

std::vector<std::string> indexed(const std::string& name, std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(name + "[" + std::to_string(i + 1) + "]");
  return out;
}

void check_dims(const JointParams& p, const JointData& d) {
  const std::size_t N = d.scored.n_examiners(), J = d.scored.n_items();
  if (p.theta.size() != N || p.h.size() != N || p.b.size() != J || p.f.size() != J ||
      p.gamma.size() != kDifficultyCutpoints) {
    throw ShapeError("joint parameters do not match the data");
  }
}

double std_normal_lpdf(double z) { return -0.5 * z * z - kLogSqrtTwoPi; }

}  // namespace

double joint_loglik(const JointParams& p, const JointData& d) {
  check_dims(p, d);
  require_increasing(p.gamma);
  std::vector<double> terms;
  terms.reserve(d.scored.entries.size() + d.difficulty.size());
  for (const auto& e : d.scored.entries) {
    const double eta = p.theta[e.examiner] - p.b[e.item];
    terms.push_back(e.y == 1 ? log_inv_logit(eta) : log1m_inv_logit(eta));
  }
  for (const auto& o : d.difficulty) {
    terms.push_back(ordered_logit_logprob(difficulty_eta(p, o.examiner, o.item), p.gamma, o.x));
  }
  return order_invariant_sum(std::move(terms));
}

JointPosterior::JointPosterior(JointData data, JointPriors priors) : data_(std::move(data)), priors_(priors) {
  if (data_.scored.entries.empty() && data_.difficulty.empty()) {
    throw DataError("joint model needs at least one observation");
  }
  const std::size_t N = data_.scored.n_examiners(), J = data_.scored.n_items();
  z_theta_ = space_.add("z_theta", {N});
  z_b_ = space_.add("z_b", {J});
  mu_b_ = space_.add("mu_b", {});
  sigma_theta_ = space_.add("sigma_theta", {}, Constraint::Positive);
  sigma_b_ = space_.add("sigma_b", {}, Constraint::Positive);
  g_ = space_.add("g", {});
  z_h_ = space_.add("z_h", {N});
  sigma_h_ = space_.add("sigma_h", {}, Constraint::Positive);
  z_f_ = space_.add("z_f", {J});
  sigma_f_ = space_.add("sigma_f", {}, Constraint::Positive);
  gamma_ = space_.add("gamma", {kDifficultyCutpoints}, Constraint::OrderedIncreasing);
}

std::size_t JointPosterior::n_observations() const {
  return data_.scored.entries.size() + data_.difficulty.size();
}

std::vector<std::string> JointPosterior::output_names() const {
  const std::size_t N = data_.scored.n_examiners(), J = data_.scored.n_items();
  std::vector<std::string> names;
  for (auto&& block : {indexed("theta", N), indexed("b", J), indexed("h", N), indexed("f", J)}) {
    names.insert(names.end(), block.begin(), block.end());
  }
  names.push_back("g");
  for (auto& n : indexed("gamma", kDifficultyCutpoints)) names.push_back(std::move(n));
  for (const char* n : {"mu_b", "sigma_theta", "sigma_b", "sigma_h", "sigma_f"}) names.emplace_back(n);
  return names;
}

JointParams JointPosterior::params_from_constrained(std::span<const double> c) const {
  const std::size_t N = data_.scored.n_examiners(), J = data_.scored.n_items();
  const auto off = [&](std::size_t b) { return space_.block(b).constrained_offset; };
  JointParams p;
  p.mu_b = c[off(mu_b_)];
  p.sigma_theta = c[off(sigma_theta_)];
  p.sigma_b = c[off(sigma_b_)];
  p.sigma_h = c[off(sigma_h_)];
  p.sigma_f = c[off(sigma_f_)];
  p.g = c[off(g_)];
  p.theta.resize(N);
  p.h.resize(N);
  p.b.resize(J);
  p.f.resize(J);
  for (std::size_t i = 0; i < N; ++i) {
    p.theta[i] = p.sigma_theta * c[off(z_theta_) + i];
    p.h[i] = p.sigma_h * c[off(z_h_) + i];
  }
  for (std::size_t j = 0; j < J; ++j) {
    p.b[j] = p.mu_b + p.sigma_b * c[off(z_b_) + j];
    p.f[j] = p.sigma_f * c[off(z_f_) + j];
  }
  p.gamma.assign(c.begin() + static_cast<std::ptrdiff_t>(off(gamma_)),
                 c.begin() + static_cast<std::ptrdiff_t>(off(gamma_) + kDifficultyCutpoints));
  return p;
}

void JointPosterior::write_outputs(std::span<const double> u, std::span<double> out) const {
  std::vector<double> c(space_.constrained_dim());
  space_.transform(u, c);
  const JointParams p = params_from_constrained(c);
  std::size_t k = 0;
  for (const auto* v : {&p.theta, &p.b, &p.h, &p.f}) {
    for (double x : *v) out[k++] = x;
  }
  out[k++] = p.g;
  for (double x : p.gamma) out[k++] = x;
  for (double x : {p.mu_b, p.sigma_theta, p.sigma_b, p.sigma_h, p.sigma_f}) out[k++] = x;
}

JointParams JointPosterior::params_from_outputs(std::span<const double> o) const {
  const std::size_t N = data_.scored.n_examiners(), J = data_.scored.n_items();
  JointParams p;
  std::size_t k = 0;
  const auto take = [&](std::vector<double>& v, std::size_t n) {
    v.assign(o.begin() + static_cast<std::ptrdiff_t>(k), o.begin() + static_cast<std::ptrdiff_t>(k + n));
    k += n;
  };
  take(p.theta, N);
  take(p.b, J);
  take(p.h, N);
  take(p.f, J);
  p.g = o[k++];
  take(p.gamma, kDifficultyCutpoints);
  p.mu_b = o[k++];
  p.sigma_theta = o[k++];
  p.sigma_b = o[k++];
  p.sigma_h = o[k++];
  p.sigma_f = o[k++];
  return p;
}

std::vector<double> JointPosterior::unconstrained_from(const JointParams& p) const {
  check_dims(p, data_);
  const auto off = [&](std::size_t b) { return space_.block(b).constrained_offset; };
  std::vector<double> c(space_.constrained_dim());
  for (std::size_t i = 0; i < p.theta.size(); ++i) {
    c[off(z_theta_) + i] = p.theta[i] / p.sigma_theta;
    c[off(z_h_) + i] = p.h[i] / p.sigma_h;
  }
  for (std::size_t j = 0; j < p.b.size(); ++j) {
    c[off(z_b_) + j] = (p.b[j] - p.mu_b) / p.sigma_b;
    c[off(z_f_) + j] = p.f[j] / p.sigma_f;
  }
  c[off(mu_b_)] = p.mu_b;
  c[off(sigma_theta_)] = p.sigma_theta;
  c[off(sigma_b_)] = p.sigma_b;
  c[off(sigma_h_)] = p.sigma_h;
  c[off(sigma_f_)] = p.sigma_f;
  c[off(g_)] = p.g;
  std::copy(p.gamma.begin(), p.gamma.end(), c.begin() + static_cast<std::ptrdiff_t>(off(gamma_)));
  return space_.untransform(c);
}

double JointPosterior::log_density_constrained(std::span<const double> c, std::span<double> grad) const {
  const std::size_t N = data_.scored.n_examiners(), J = data_.scored.n_items();
  const auto off = [&](std::size_t b) { return space_.block(b).constrained_offset; };
  const JointParams p = params_from_constrained(c);
  const bool want = !grad.empty();

  std::vector<double> gt(want ? N : 0, 0.0), gb(want ? J : 0, 0.0);
  std::vector<double> gh(want ? N : 0, 0.0), gf(want ? J : 0, 0.0);
  double gg = 0.0;
  std::span<double> ggamma = want ? grad.subspan(off(gamma_), kDifficultyCutpoints) : std::span<double>();

  double lp = rasch_loglik_grad(p.theta, p.b, data_.scored.entries, gt, gb);
  for (const auto& o : data_.difficulty) {
    const double diff = p.theta[o.examiner] - p.b[o.item];
    const double eta = p.g * diff + p.h[o.examiner] + p.f[o.item];
    double d_eta = 0.0;
    lp += ordered_logit_logprob_grad(eta, p.gamma, o.x, want ? &d_eta : nullptr, ggamma);
    if (want) {
      gt[o.examiner] += p.g * d_eta;
      gb[o.item] -= p.g * d_eta;
      gg += diff * d_eta;
      gh[o.examiner] += d_eta;
      gf[o.item] += d_eta;
    }
  }

  for (std::size_t blk : {z_theta_, z_h_}) {
    for (std::size_t i = 0; i < N; ++i) lp += std_normal_lpdf(c[off(blk) + i]);
  }
  for (std::size_t blk : {z_b_, z_f_}) {
    for (std::size_t j = 0; j < J; ++j) lp += std_normal_lpdf(c[off(blk) + j]);
  }
  lp += normal_lpdf(p.mu_b, 0.0, priors_.mu_b_sd);
  lp += normal_lpdf(p.g, 0.0, priors_.g_sd);
  for (double s : {p.sigma_theta, p.sigma_b, p.sigma_h, p.sigma_f}) lp += half_cauchy_lpdf(s, priors_.half_cauchy_scale);
  for (double x : p.gamma) lp += normal_lpdf(x, 0.0, priors_.gamma_sd);

  if (want) {
    double d_st = 0.0, d_sh = 0.0, d_sb = 0.0, d_sf = 0.0, d_mu = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double zt = c[off(z_theta_) + i], zh = c[off(z_h_) + i];
      grad[off(z_theta_) + i] = p.sigma_theta * gt[i] - zt;
      grad[off(z_h_) + i] = p.sigma_h * gh[i] - zh;
      d_st += gt[i] * zt;
      d_sh += gh[i] * zh;
    }
    for (std::size_t j = 0; j < J; ++j) {
      const double zb = c[off(z_b_) + j], zf = c[off(z_f_) + j];
      grad[off(z_b_) + j] = p.sigma_b * gb[j] - zb;
      grad[off(z_f_) + j] = p.sigma_f * gf[j] - zf;
      d_sb += gb[j] * zb;
      d_sf += gf[j] * zf;
      d_mu += gb[j];
    }
    const double hc = priors_.half_cauchy_scale;
    grad[off(mu_b_)] = d_mu + normal_lpdf_dx(p.mu_b, 0.0, priors_.mu_b_sd);
    grad[off(sigma_theta_)] = d_st + half_cauchy_lpdf_dx(p.sigma_theta, hc);
    grad[off(sigma_b_)] = d_sb + half_cauchy_lpdf_dx(p.sigma_b, hc);
    grad[off(sigma_h_)] = d_sh + half_cauchy_lpdf_dx(p.sigma_h, hc);
    grad[off(sigma_f_)] = d_sf + half_cauchy_lpdf_dx(p.sigma_f, hc);
    grad[off(g_)] = gg + normal_lpdf_dx(p.g, 0.0, priors_.g_sd);
    for (std::size_t k = 0; k < kDifficultyCutpoints; ++k) ggamma[k] += normal_lpdf_dx(p.gamma[k], 0.0, priors_.gamma_sd);
  }
  return lp;
}

void JointPosterior::pointwise_log_lik(std::span<const double> o, std::span<double> out) const {
  const JointParams p = params_from_outputs(o);
  std::size_t k = 0;
  for (const auto& e : data_.scored.entries) {
    const double eta = p.theta[e.examiner] - p.b[e.item];
    out[k++] = e.y == 1 ? log_inv_logit(eta) : log1m_inv_logit(eta);
  }
  for (const auto& d : data_.difficulty) {
    out[k++] = ordered_logit_logprob(difficulty_eta(p, d.examiner, d.item), p.gamma, d.x);
  }
}

std::vector<int> JointPosterior::observed_categories() const {
  std::vector<int> y;
  y.reserve(n_observations());
  for (const auto& e : data_.scored.entries) y.push_back(e.y);
  for (const auto& d : data_.difficulty) y.push_back(d.x);
  return y;
}

std::vector<int> JointPosterior::predicted_categories(std::span<const double> o) const {
  const JointParams p = params_from_outputs(o);
  std::vector<int> y;
  y.reserve(n_observations());
  for (const auto& e : data_.scored.entries) y.push_back(p.theta[e.examiner] - p.b[e.item] >= 0.0 ? 1 : 0);
  for (const auto& d : data_.difficulty) {
    const auto probs = ordered_logit_probs(difficulty_eta(p, d.examiner, d.item), p.gamma);
    y.push_back(static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin()) + 1);
  }
  return y;
}

std::vector<BiasRow> reporting_bias_report(const DrawSet& draws, const JointData& d) {
  std::vector<BiasRow> rows;
  const auto add = [&](const std::string& kind, const std::string& name, const IndexMap& ids) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto s = summarize(draws, draws.index(name + "[" + std::to_string(i + 1) + "]"));
      rows.push_back({kind, ids.id(i), s.mean, s.median, s.q2_5, s.q97_5, s.q2_5 > 0.0 || s.q97_5 < 0.0});
    }
  };
  add("examiner", "h", d.scored.examiners);
  add("item", "f", d.scored.items);
  return rows;
}

void write_bias_csv(const std::vector<BiasRow>& rows, std::ostream& out) {
  CsvWriter w(out);
  w.row({"kind", "id", "mean", "median", "q2.5", "q97.5", "excludes_zero"});
  for (const auto& r : rows) {
    w.row({r.kind, r.id, format_double(r.mean), format_double(r.median), format_double(r.q2_5),
           format_double(r.q97_5), r.excludes_zero ? "true" : "false"});
  }
}

std::vector<PredictedObservedRow> predicted_vs_observed(const DrawSet& draws, const JointData& d) {
  const std::size_t N = d.scored.n_examiners(), J = d.scored.n_items();
  std::vector<std::size_t> theta(N), b(J), h(N), f(J), gamma(kDifficultyCutpoints);
  for (std::size_t i = 0; i < N; ++i) {
    theta[i] = draws.index("theta[" + std::to_string(i + 1) + "]");
    h[i] = draws.index("h[" + std::to_string(i + 1) + "]");
  }
  for (std::size_t j = 0; j < J; ++j) {
    b[j] = draws.index("b[" + std::to_string(j + 1) + "]");
    f[j] = draws.index("f[" + std::to_string(j + 1) + "]");
  }
  for (std::size_t k = 0; k < kDifficultyCutpoints; ++k) gamma[k] = draws.index("gamma[" + std::to_string(k + 1) + "]");
  const std::size_t g = draws.index("g");

  std::vector<PredictedObservedRow> rows(N);
  for (std::size_t i = 0; i < N; ++i) rows[i].examiner_id = d.scored.examiners.id(i);
  for (const auto& e : d.scored.entries) {
    ++rows[e.examiner].n_scored;
    rows[e.examiner].observed_score += e.y;
  }
  for (const auto& o : d.difficulty) {
    ++rows[o.examiner].n_reports;
    rows[o.examiner].observed_mean_difficulty += o.x;
  }

  const double S = static_cast<double>(draws.n_chains() * draws.n_iterations());
  std::vector<double> cut(kDifficultyCutpoints);
  for (std::size_t c = 0; c < draws.n_chains(); ++c) {
    for (std::size_t it = 0; it < draws.n_iterations(); ++it) {
      const auto r = draws.row(c, it);
      for (std::size_t k = 0; k < kDifficultyCutpoints; ++k) cut[k] = r[gamma[k]];
      for (const auto& e : d.scored.entries) {
        rows[e.examiner].predicted_score += inv_logit(r[theta[e.examiner]] - r[b[e.item]]) / S;
      }
      for (const auto& o : d.difficulty) {
        const double eta = r[g] * (r[theta[o.examiner]] - r[b[o.item]]) + r[h[o.examiner]] + r[f[o.item]];
        const auto probs = ordered_logit_probs(eta, cut);
        double expect = 0.0;
        for (std::size_t k = 0; k < probs.size(); ++k) expect += static_cast<double>(k + 1) * probs[k];
        rows[o.examiner].predicted_mean_difficulty += expect / S;
      }
    }
  }
  for (auto& r : rows) {
    if (r.n_scored > 0) {
      r.observed_score /= static_cast<double>(r.n_scored);
      r.predicted_score /= static_cast<double>(r.n_scored);
    }
    if (r.n_reports > 0) {
      r.observed_mean_difficulty /= static_cast<double>(r.n_reports);
      r.predicted_mean_difficulty /= static_cast<double>(r.n_reports);
    }
  }
  return rows;
}

void write_predicted_observed_csv(const std::vector<PredictedObservedRow>& rows, std::ostream& out) {
  CsvWriter w(out);
  w.row({"examiner_id", "n_scored", "observed_score", "predicted_score", "n_reports", "observed_mean_difficulty",
         "predicted_mean_difficulty"});
  for (const auto& r : rows) {
    w.row({r.examiner_id, std::to_string(r.n_scored), format_double(r.observed_score), format_double(r.predicted_score),
           std::to_string(r.n_reports), format_double(r.observed_mean_difficulty),
           format_double(r.predicted_mean_difficulty)});
  }
}

}  // namespace fpirt
