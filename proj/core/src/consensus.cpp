#include "fpirt/consensus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "fpirt/errors.hpp"
#include "fpirt/math.hpp"
#include "fpirt/ordinal.hpp"
#include "fpirt/priors.hpp"

namespace fpirt {

std::string_view to_string(ConsensusVariant v) {
  switch (v) {
    case ConsensusVariant::LTRM: return "ltrm";
    case ConsensusVariant::CLTRM: return "cltrm";
    case ConsensusVariant::ALTRM: return "altrm";
  }
  return "?";
}

ConsensusVariant parse_consensus_variant(std::string_view token) {
  std::string t;
  for (char ch : token) {
    if (ch != '-' && ch != '_') t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  if (t == "ltrm") return ConsensusVariant::LTRM;
  if (t == "cltrm") return ConsensusVariant::CLTRM;
  if (t == "altrm") return ConsensusVariant::ALTRM;
  throw DomainError("unknown consensus model '" + std::string(token) + "'");
}

std::array<double, 2> thresholds(double a, double b, std::span<const double> gamma) {
  if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("scale bias must be positive");
  if (gamma.size() != kConsensusBoundaries) throw ShapeError("expected two category boundaries");
  require_increasing(gamma);
  return {a * gamma[0] + b, a * gamma[1] + b};
}

std::array<double, 3> ltrm_probs(double T, double tau, const std::array<double, 2>& delta) {
  if (!(tau > 0.0)) throw DomainError("precision must be positive");
  const double s = std::sqrt(tau);
  const double c1 = normal_cdf((delta[0] - T) * s);
  const double c2 = normal_cdf((delta[1] - T) * s);
  return {c1, c2 - c1, 1.0 - c2};
}

std::array<double, 3> cltrm_probs(double T, const std::array<double, 2>& delta) {
  const double c1 = inv_logit(delta[0] - T);
  const double c2 = inv_logit(delta[1] - T);
  return {c1, c2 - c1, 1.0 - c2};
}

namespace {

// Unnormalised adjacent-category log weights (u1 + u2, u2, 0) with u_c = delta_c - T.
std::array<double, 3> altrm_logits(double T, const std::array<double, 2>& delta) {
  const double u1 = delta[0] - T, u2 = delta[1] - T;
  return {u1 + u2, u2, 0.0};
}

}  // namespace

std::array<double, 3> altrm_probs(double T, const std::array<double, 2>& delta) {
  const auto l = altrm_logits(T, delta);
  const double norm = log_sum_exp(l);
  return {std::exp(l[0] - norm), std::exp(l[1] - norm), std::exp(l[2] - norm)};
}

namespace {

void check_shapes(const LTRMParams& p, const CategoricalData& d, bool ltrm) {
  const std::size_t N = d.n_examiners(), J = d.n_items();
  if (p.T.size() != J || p.a.size() != N || p.b.size() != N) throw ShapeError("consensus parameters do not match data");
  if (ltrm && (p.E.size() != N || p.lambda.size() != J)) throw ShapeError("LTRM needs E[N] and lambda[J]");
  if (d.n_categories != kConclusivenessCategories) throw DataError("consensus models need the conclusiveness scale");
}

double cell_logprob(ConsensusVariant v, const LTRMParams& p, std::size_t i, std::size_t j, int y) {
  const auto delta = thresholds(p.a[i], p.b[i], p.gamma);
  switch (v) {
    case ConsensusVariant::LTRM: {
      const double tau = p.E[i] / p.lambda[j];
      if (!(tau > 0.0)) throw DomainError("precision must be positive");
      return ordered_probit_logprob(p.T[j], std::sqrt(tau), delta, y + 1);
    }
    case ConsensusVariant::CLTRM: return ordered_logit_logprob(p.T[j], delta, y + 1);
    case ConsensusVariant::ALTRM: {
      const auto l = altrm_logits(p.T[j], delta);
      return l[static_cast<std::size_t>(y)] - log_sum_exp(l);
    }
  }
  return kNegInf;
}

}  // namespace

double consensus_loglik(ConsensusVariant v, const LTRMParams& p, const CategoricalData& data) {
  check_shapes(p, data, v == ConsensusVariant::LTRM);
  std::vector<double> terms;
  terms.reserve(data.observations.size());
  for (const auto& o : data.observations) terms.push_back(cell_logprob(v, p, o.examiner, o.item, o.category));
  return order_invariant_sum(std::move(terms));
}

double ltrm_loglik(const LTRMParams& p, const CategoricalData& data) {
  return consensus_loglik(ConsensusVariant::LTRM, p, data);
}
double cltrm_loglik(const LTRMParams& p, const CategoricalData& data) {
  return consensus_loglik(ConsensusVariant::CLTRM, p, data);
}
double altrm_loglik(const LTRMParams& p, const CategoricalData& data) {
  return consensus_loglik(ConsensusVariant::ALTRM, p, data);
}

ConsensusPosterior::ConsensusPosterior(CategoricalData data, ConsensusVariant variant, ConsensusPriors priors)
    : data_(std::move(data)), variant_(variant), priors_(priors) {
  if (data_.observations.empty()) throw DataError("consensus model needs at least one response");
  if (data_.n_categories != kConclusivenessCategories) throw DataError("consensus models need the conclusiveness scale");
  const std::size_t N = data_.n_examiners(), J = data_.n_items();
  T_ = space_.add("T", {J});
  gamma_ = space_.add("gamma", {kConsensusBoundaries}, Constraint::OrderedIncreasing);
  a_ = space_.add("a", {N}, Constraint::Positive);
  z_b_ = space_.add("z_b", {N});
  sigma_b_ = space_.add("sigma_b", {}, Constraint::Positive);
  if (variant_ == ConsensusVariant::LTRM) {
    E_ = space_.add("E", {N}, Constraint::Positive);
    // A single item leaves nothing to normalise against.
    if (J > 1) lambda_ = space_.add("lambda", {J}, Constraint::UnitScaledPositive);
  }
}

std::string ConsensusPosterior::kind() const { return std::string(to_string(variant_)); }

std::vector<std::string> ConsensusPosterior::output_names() const {
  const std::size_t N = data_.n_examiners(), J = data_.n_items();
  std::vector<std::string> names;
  const auto vec = [&](const char* n, std::size_t len) {
    for (std::size_t k = 0; k < len; ++k) names.push_back(std::string(n) + "[" + std::to_string(k + 1) + "]");
  };
  vec("T", J);
  vec("gamma", kConsensusBoundaries);
  vec("a", N);
  vec("b", N);
  names.emplace_back("sigma_b");
  if (variant_ == ConsensusVariant::LTRM) {
    vec("E", N);
    vec("lambda", J);
  }
  return names;
}

void ConsensusPosterior::write_outputs(std::span<const double> u, std::span<double> out) const {
  std::vector<double> c(space_.constrained_dim());
  space_.transform(u, c);
  const std::size_t N = data_.n_examiners(), J = data_.n_items();
  const auto at = [&](std::size_t blk) { return c.data() + space_.block(blk).constrained_offset; };
  std::size_t k = 0;
  for (std::size_t j = 0; j < J; ++j) out[k++] = at(T_)[j];
  for (std::size_t q = 0; q < kConsensusBoundaries; ++q) out[k++] = at(gamma_)[q];
  for (std::size_t i = 0; i < N; ++i) out[k++] = at(a_)[i];
  const double sb = *at(sigma_b_);
  for (std::size_t i = 0; i < N; ++i) out[k++] = sb * at(z_b_)[i];
  out[k++] = sb;
  if (variant_ == ConsensusVariant::LTRM) {
    for (std::size_t i = 0; i < N; ++i) out[k++] = at(*E_)[i];
    for (std::size_t j = 0; j < J; ++j) out[k++] = lambda_ ? at(*lambda_)[j] : 1.0;
  }
}

LTRMParams ConsensusPosterior::params_from_outputs(std::span<const double> o) const {
  const std::size_t N = data_.n_examiners(), J = data_.n_items();
  LTRMParams p;
  std::size_t k = 0;
  const auto take = [&](std::vector<double>& v, std::size_t n) {
    v.assign(o.begin() + static_cast<std::ptrdiff_t>(k), o.begin() + static_cast<std::ptrdiff_t>(k + n));
    k += n;
  };
  take(p.T, J);
  p.gamma = {o[k], o[k + 1]};
  k += 2;
  take(p.a, N);
  take(p.b, N);
  ++k;  // sigma_b
  if (variant_ == ConsensusVariant::LTRM) {
    take(p.E, N);
    take(p.lambda, J);
  }
  return p;
}

std::vector<double> ConsensusPosterior::unconstrained_from(const LTRMParams& p, double sigma_b) const {
  check_shapes(p, data_, variant_ == ConsensusVariant::LTRM);
  if (!(sigma_b > 0.0)) throw DomainError("sigma_b must be positive");
  std::vector<double> c(space_.constrained_dim());
  const auto put = [&](std::size_t blk, std::span<const double> v) {
    std::copy(v.begin(), v.end(), c.begin() + static_cast<std::ptrdiff_t>(space_.block(blk).constrained_offset));
  };
  put(T_, p.T);
  put(gamma_, p.gamma);
  put(a_, p.a);
  std::vector<double> z(p.b.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = p.b[i] / sigma_b;
  put(z_b_, z);
  c[space_.block(sigma_b_).constrained_offset] = sigma_b;
  if (E_) put(*E_, p.E);
  if (lambda_) put(*lambda_, p.lambda);
  return space_.untransform(c);
}

std::array<double, 3> ConsensusPosterior::cell_probs(const LTRMParams& p, std::size_t i, std::size_t j) const {
  const auto delta = thresholds(p.a[i], p.b[i], p.gamma);
  switch (variant_) {
    case ConsensusVariant::LTRM: return ltrm_probs(p.T[j], p.E[i] / p.lambda[j], delta);
    case ConsensusVariant::CLTRM: return cltrm_probs(p.T[j], delta);
    case ConsensusVariant::ALTRM: return altrm_probs(p.T[j], delta);
  }
  return {};
}

double ConsensusPosterior::log_density_constrained(std::span<const double> c, std::span<double> grad) const {
  const std::size_t N = data_.n_examiners(), J = data_.n_items();
  const bool want = !grad.empty();
  const auto off = [&](std::size_t blk) { return space_.block(blk).constrained_offset; };
  const double* T = c.data() + off(T_);
  const double* gamma = c.data() + off(gamma_);
  const double* a = c.data() + off(a_);
  const double* z = c.data() + off(z_b_);
  const double sb = c[off(sigma_b_)];
  const double* E = E_ ? c.data() + off(*E_) : nullptr;
  const double* lambda = lambda_ ? c.data() + off(*lambda_) : nullptr;
  const std::array<double, 2> g{gamma[0], gamma[1]};
  if (!(g[0] < g[1])) throw DomainError("category boundaries must be increasing");

  std::vector<double> gb(want ? N : 0, 0.0);
  double lp = 0.0;
  for (const auto& o : data_.observations) {
    const std::size_t i = o.examiner, j = o.item;
    const int y = o.category;
    const double b = sb * z[i];
    const std::array<double, 2> delta{a[i] * g[0] + b, a[i] * g[1] + b};
    std::array<double, 2> du{0.0, 0.0};  // d lp / d(delta_c - T_j)
    switch (variant_) {
      case ConsensusVariant::LTRM: {
        const double lam = lambda ? lambda[j] : 1.0;
        const double s = std::sqrt(E[i] / lam);
        const double zu = y < 2 ? (delta[static_cast<std::size_t>(y)] - T[j]) * s : kInf;
        const double zl = y > 0 ? (delta[static_cast<std::size_t>(y - 1)] - T[j]) * s : kNegInf;
        const double cell = log_diff_normal_cdf(zu, zl);
        lp += cell;
        if (!want) break;
        std::array<double, 2> w{0.0, 0.0};  // d lp / d z_c
        if (y < 2) w[static_cast<std::size_t>(y)] = std::exp(log_normal_pdf_std(zu) - cell);
        if (y > 0) w[static_cast<std::size_t>(y - 1)] = -std::exp(log_normal_pdf_std(zl) - cell);
        double ds = 0.0;
        for (std::size_t q = 0; q < 2; ++q) {
          du[q] = w[q] * s;
          ds += w[q] * (delta[q] - T[j]);
        }
        grad[off(*E_) + i] += ds * s / (2.0 * E[i]);
        if (lambda) grad[off(*lambda_) + j] -= ds * s / (2.0 * lam);
        break;
      }
      case ConsensusVariant::CLTRM: {
        if (!want) {
          lp += ordered_logit_logprob(T[j], delta, y + 1);
          break;
        }
        double d_eta = 0.0;
        lp += ordered_logit_logprob_grad(T[j], delta, y + 1, &d_eta, du);
        break;
      }
      case ConsensusVariant::ALTRM: {
        const auto l = altrm_logits(T[j], delta);
        const double norm = log_sum_exp(l);
        lp += l[static_cast<std::size_t>(y)] - norm;
        if (!want) break;
        std::array<double, 3> r{};  // d lp / d l_k
        for (std::size_t k = 0; k < 3; ++k) r[k] = (static_cast<int>(k) == y ? 1.0 : 0.0) - std::exp(l[k] - norm);
        du = {r[0], r[0] + r[1]};
        break;
      }
    }
    if (!want) continue;
    grad[off(T_) + j] -= du[0] + du[1];
    grad[off(a_) + i] += du[0] * g[0] + du[1] * g[1];
    gb[i] += du[0] + du[1];
    grad[off(gamma_)] += a[i] * du[0];
    grad[off(gamma_) + 1] += a[i] * du[1];
  }

  for (std::size_t j = 0; j < J; ++j) lp += normal_lpdf(T[j], 0.0, priors_.T_sd);
  for (std::size_t q = 0; q < 2; ++q) lp += normal_lpdf(g[q], 0.0, priors_.gamma_sd);
  for (std::size_t i = 0; i < N; ++i) {
    lp += lognormal_lpdf(a[i], 0.0, priors_.a_log_sd);
    lp += log_normal_pdf_std(z[i]);
  }
  lp += half_cauchy_lpdf(sb, priors_.half_cauchy_scale);
  if (E) {
    for (std::size_t i = 0; i < N; ++i) lp += lognormal_lpdf(E[i], 0.0, priors_.E_log_sd);
  }
  // Density on log(lambda): the constraint's Jacobian is already taken in log coordinates.
  if (lambda) {
    for (std::size_t j = 0; j < J; ++j) lp += normal_lpdf(std::log(lambda[j]), 0.0, priors_.lambda_log_sd);
  }
  if (!want) return lp;

  for (std::size_t j = 0; j < J; ++j) grad[off(T_) + j] += normal_lpdf_dx(T[j], 0.0, priors_.T_sd);
  for (std::size_t q = 0; q < 2; ++q) grad[off(gamma_) + q] += normal_lpdf_dx(g[q], 0.0, priors_.gamma_sd);
  double g_sb = half_cauchy_lpdf_dx(sb, priors_.half_cauchy_scale);
  for (std::size_t i = 0; i < N; ++i) {
    grad[off(a_) + i] += lognormal_lpdf_dx(a[i], 0.0, priors_.a_log_sd);
    grad[off(z_b_) + i] = sb * gb[i] - z[i];
    g_sb += gb[i] * z[i];
  }
  grad[off(sigma_b_)] += g_sb;
  if (E) {
    for (std::size_t i = 0; i < N; ++i) grad[off(*E_) + i] += lognormal_lpdf_dx(E[i], 0.0, priors_.E_log_sd);
  }
  if (lambda) {
    const double v = priors_.lambda_log_sd * priors_.lambda_log_sd;
    for (std::size_t j = 0; j < J; ++j) grad[off(*lambda_) + j] -= std::log(lambda[j]) / (v * lambda[j]);
  }
  return lp;
}

void ConsensusPosterior::pointwise_log_lik(std::span<const double> o, std::span<double> out) const {
  const LTRMParams p = params_from_outputs(o);
  for (std::size_t n = 0; n < data_.observations.size(); ++n) {
    const auto& ob = data_.observations[n];
    out[n] = cell_logprob(variant_, p, ob.examiner, ob.item, ob.category);
  }
}

std::vector<int> ConsensusPosterior::observed_categories() const {
  std::vector<int> y;
  y.reserve(data_.observations.size());
  for (const auto& o : data_.observations) y.push_back(o.category);
  return y;
}

std::vector<int> ConsensusPosterior::predicted_categories(std::span<const double> o) const {
  const LTRMParams p = params_from_outputs(o);
  std::vector<int> y;
  y.reserve(data_.observations.size());
  for (const auto& ob : data_.observations) {
    const auto pr = cell_probs(p, ob.examiner, ob.item);
    y.push_back(static_cast<int>(std::max_element(pr.begin(), pr.end()) - pr.begin()));
  }
  return y;
}

}  // namespace fpirt
