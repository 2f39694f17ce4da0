#include "fpirt/rasch.hpp"

#include <algorithm>
#include <cmath>

#include "fpirt/csv.hpp"
#include "fpirt/errors.hpp"
#include "fpirt/evaluation.hpp"
#include "fpirt/math.hpp"
#include "fpirt/priors.hpp"

namespace fpirt {

namespace {

double bernoulli_logit(int y, double eta) { return y == 1 ? log_inv_logit(eta) : log1m_inv_logit(eta); }

std::vector<std::string> indexed(const std::string& name, std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(name + "[" + std::to_string(i + 1) + "]");
  return out;
}

}  // namespace

double rasch_loglik(const RaschParams& p, const ScoredMatrix& m) {
  if (p.theta.size() != m.n_examiners() || p.b.size() != m.n_items()) {
    throw ShapeError("Rasch parameters do not match the response matrix");
  }
  std::vector<double> terms;
  terms.reserve(m.entries.size());
  for (const auto& e : m.entries) terms.push_back(bernoulli_logit(e.y, p.theta[e.examiner] - p.b[e.item]));
  return order_invariant_sum(std::move(terms));
}

double rasch_loglik_grad(std::span<const double> theta, std::span<const double> b,
                         std::span<const ScoredEntry> entries, std::span<double> d_theta, std::span<double> d_b) {
  double lp = 0.0;
  const bool grad = !d_theta.empty();
  for (const auto& e : entries) {
    const double eta = theta[e.examiner] - b[e.item];
    lp += bernoulli_logit(e.y, eta);
    if (grad) {
      const double r = static_cast<double>(e.y) - inv_logit(eta);
      d_theta[e.examiner] += r;
      d_b[e.item] -= r;
    }
  }
  return lp;
}

RaschPosterior::RaschPosterior(ScoredMatrix data, RaschPriors priors)
    : data_(std::move(data)), priors_(priors) {
  if (data_.entries.empty()) throw DataError("Rasch model needs at least one scored response");
  z_theta_ = space_.add("z_theta", {data_.n_examiners()});
  z_b_ = space_.add("z_b", {data_.n_items()});
  if (!priors_.fixed_mu_b) mu_b_ = space_.add("mu_b", {});
  if (!priors_.fixed_sigma_theta) sigma_theta_ = space_.add("sigma_theta", {}, Constraint::Positive);
  if (!priors_.fixed_sigma_b) sigma_b_ = space_.add("sigma_b", {}, Constraint::Positive);
}

std::vector<std::string> RaschPosterior::output_names() const {
  auto names = indexed("theta", data_.n_examiners());
  auto b = indexed("b", data_.n_items());
  names.insert(names.end(), b.begin(), b.end());
  if (mu_b_) names.push_back("mu_b");
  if (sigma_theta_) names.push_back("sigma_theta");
  if (sigma_b_) names.push_back("sigma_b");
  return names;
}

void RaschPosterior::write_outputs(std::span<const double> u, std::span<double> out) const {
  std::vector<double> c(space_.constrained_dim());
  space_.transform(u, c);
  const auto at = [&](std::size_t block) { return c[space_.block(block).constrained_offset]; };
  const double mu = mu_b_ ? at(*mu_b_) : *priors_.fixed_mu_b;
  const double st = sigma_theta_ ? at(*sigma_theta_) : *priors_.fixed_sigma_theta;
  const double sb = sigma_b_ ? at(*sigma_b_) : *priors_.fixed_sigma_b;
  const double* zt = c.data() + space_.block(z_theta_).constrained_offset;
  const double* zb = c.data() + space_.block(z_b_).constrained_offset;
  std::size_t k = 0;
  for (std::size_t i = 0; i < data_.n_examiners(); ++i) out[k++] = st * zt[i];
  for (std::size_t j = 0; j < data_.n_items(); ++j) out[k++] = mu + sb * zb[j];
  if (mu_b_) out[k++] = mu;
  if (sigma_theta_) out[k++] = st;
  if (sigma_b_) out[k++] = sb;
}

RaschParams RaschPosterior::params_from_outputs(std::span<const double> o) const {
  RaschParams p;
  const std::size_t N = data_.n_examiners(), J = data_.n_items();
  p.theta.assign(o.begin(), o.begin() + static_cast<std::ptrdiff_t>(N));
  p.b.assign(o.begin() + static_cast<std::ptrdiff_t>(N), o.begin() + static_cast<std::ptrdiff_t>(N + J));
  std::size_t k = N + J;
  p.mu_b = mu_b_ ? o[k++] : *priors_.fixed_mu_b;
  p.sigma_theta = sigma_theta_ ? o[k++] : *priors_.fixed_sigma_theta;
  p.sigma_b = sigma_b_ ? o[k++] : *priors_.fixed_sigma_b;
  return p;
}

std::vector<double> RaschPosterior::unconstrained_from(const RaschParams& p) const {
  if (p.theta.size() != data_.n_examiners() || p.b.size() != data_.n_items()) {
    throw ShapeError("Rasch parameters do not match the response matrix");
  }
  std::vector<double> c(space_.constrained_dim());
  const double mu = mu_b_ ? p.mu_b : *priors_.fixed_mu_b;
  const double st = sigma_theta_ ? p.sigma_theta : *priors_.fixed_sigma_theta;
  const double sb = sigma_b_ ? p.sigma_b : *priors_.fixed_sigma_b;
  double* zt = c.data() + space_.block(z_theta_).constrained_offset;
  double* zb = c.data() + space_.block(z_b_).constrained_offset;
  for (std::size_t i = 0; i < p.theta.size(); ++i) zt[i] = p.theta[i] / st;
  for (std::size_t j = 0; j < p.b.size(); ++j) zb[j] = (p.b[j] - mu) / sb;
  if (mu_b_) c[space_.block(*mu_b_).constrained_offset] = mu;
  if (sigma_theta_) c[space_.block(*sigma_theta_).constrained_offset] = st;
  if (sigma_b_) c[space_.block(*sigma_b_).constrained_offset] = sb;
  return space_.untransform(c);
}

double RaschPosterior::log_density_constrained(std::span<const double> c, std::span<double> grad) const {
  const std::size_t N = data_.n_examiners(), J = data_.n_items();
  const std::size_t ot = space_.block(z_theta_).constrained_offset;
  const std::size_t ob = space_.block(z_b_).constrained_offset;
  const double mu = mu_b_ ? c[space_.block(*mu_b_).constrained_offset] : *priors_.fixed_mu_b;
  const double st = sigma_theta_ ? c[space_.block(*sigma_theta_).constrained_offset] : *priors_.fixed_sigma_theta;
  const double sb = sigma_b_ ? c[space_.block(*sigma_b_).constrained_offset] : *priors_.fixed_sigma_b;

  std::vector<double> theta(N), b(J);
  for (std::size_t i = 0; i < N; ++i) theta[i] = st * c[ot + i];
  for (std::size_t j = 0; j < J; ++j) b[j] = mu + sb * c[ob + j];

  const bool want = !grad.empty();
  std::vector<double> gt(want ? N : 0, 0.0), gb(want ? J : 0, 0.0);
  double lp = rasch_loglik_grad(theta, b, data_.entries, gt, gb);

  for (std::size_t i = 0; i < N; ++i) lp += -0.5 * c[ot + i] * c[ot + i] - kLogSqrtTwoPi;
  for (std::size_t j = 0; j < J; ++j) lp += -0.5 * c[ob + j] * c[ob + j] - kLogSqrtTwoPi;
  if (mu_b_) lp += normal_lpdf(mu, 0.0, priors_.mu_b_sd);
  if (sigma_theta_) lp += half_cauchy_lpdf(st, priors_.half_cauchy_scale);
  if (sigma_b_) lp += half_cauchy_lpdf(sb, priors_.half_cauchy_scale);

  if (want) {
    double d_st = 0.0, d_sb = 0.0, d_mu = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      grad[ot + i] = st * gt[i] - c[ot + i];
      d_st += gt[i] * c[ot + i];
    }
    for (std::size_t j = 0; j < J; ++j) {
      grad[ob + j] = sb * gb[j] - c[ob + j];
      d_sb += gb[j] * c[ob + j];
      d_mu += gb[j];
    }
    if (mu_b_) grad[space_.block(*mu_b_).constrained_offset] = d_mu + normal_lpdf_dx(mu, 0.0, priors_.mu_b_sd);
    if (sigma_theta_) {
      grad[space_.block(*sigma_theta_).constrained_offset] =
          d_st + half_cauchy_lpdf_dx(st, priors_.half_cauchy_scale);
    }
    if (sigma_b_) {
      grad[space_.block(*sigma_b_).constrained_offset] = d_sb + half_cauchy_lpdf_dx(sb, priors_.half_cauchy_scale);
    }
  }
  return lp;
}

void RaschPosterior::pointwise_log_lik(std::span<const double> o, std::span<double> out) const {
  const std::size_t N = data_.n_examiners();
  for (std::size_t k = 0; k < data_.entries.size(); ++k) {
    const auto& e = data_.entries[k];
    out[k] = bernoulli_logit(e.y, o[e.examiner] - o[N + e.item]);
  }
}

std::vector<int> RaschPosterior::observed_categories() const {
  std::vector<int> y;
  y.reserve(data_.entries.size());
  for (const auto& e : data_.entries) y.push_back(e.y);
  return y;
}

std::vector<int> RaschPosterior::predicted_categories(std::span<const double> o) const {
  const std::size_t N = data_.n_examiners();
  std::vector<int> y;
  y.reserve(data_.entries.size());
  for (const auto& e : data_.entries) y.push_back(o[e.examiner] - o[N + e.item] >= 0.0 ? 1 : 0);
  return y;
}

std::vector<ProficiencyRow> proficiency_report(const DrawSet& draws, const ScoredMatrix& m,
                                               std::span<const ResponseRecord> records) {
  std::vector<std::vector<ResponseRecord>> by_examiner(m.n_examiners());
  for (const auto& r : records) {
    if (auto i = m.examiners.find(r.examiner_id)) by_examiner[*i].push_back(r);
  }
  std::vector<std::size_t> seen(m.n_examiners(), 0), correct(m.n_examiners(), 0);
  for (const auto& e : m.entries) {
    ++seen[e.examiner];
    correct[e.examiner] += static_cast<std::size_t>(e.y);
  }
  std::vector<ProficiencyRow> rows;
  rows.reserve(m.n_examiners());
  for (std::size_t i = 0; i < m.n_examiners(); ++i) {
    const auto s = summarize(draws, draws.index("theta[" + std::to_string(i + 1) + "]"));
    const ErrorRates er = error_rates(by_examiner[i]);
    ProficiencyRow row;
    row.examiner_id = m.examiners.id(i);
    row.theta_mean = s.mean;
    row.theta_median = s.median;
    row.q2_5 = s.q2_5;
    row.q97_5 = s.q97_5;
    row.observed_score = seen[i] == 0 ? 0.0 : static_cast<double>(correct[i]) / static_cast<double>(seen[i]);
    row.fpr = er.fpr;
    row.fnr = er.fnr;
    row.n_conclusive = er.individualizations + er.exclusions;
    row.n_responses = er.total;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_proficiency_csv(const std::vector<ProficiencyRow>& rows, std::ostream& out) {
  CsvWriter w(out);
  w.row({"examiner_id", "theta_mean", "theta_median", "q2.5", "q97.5", "observed_score", "fpr", "fnr",
         "n_conclusive", "n_responses"});
  const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
  for (const auto& r : rows) {
    w.row({r.examiner_id, format_double(r.theta_mean), format_double(r.theta_median), format_double(r.q2_5),
           format_double(r.q97_5), format_double(r.observed_score), opt(r.fpr), opt(r.fnr),
           std::to_string(r.n_conclusive), std::to_string(r.n_responses)});
  }
}

}  // namespace fpirt
