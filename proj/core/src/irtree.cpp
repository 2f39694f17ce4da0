#include "fpirt/irtree.hpp"

#include <algorithm>
#include <cmath>

#include "fpirt/csv.hpp"
#include "fpirt/errors.hpp"
#include "fpirt/math.hpp"
#include "fpirt/priors.hpp"

namespace fpirt {

namespace {

std::string name2(const char* n, std::size_t r, std::size_t c) {
  return std::string(n) + "[" + std::to_string(r + 1) + "," + std::to_string(c + 1) + "]";
}
std::string name1(const char* n, std::size_t r) { return std::string(n) + "[" + std::to_string(r + 1) + "]"; }

/// out = diag(sigma) * L * z for one K-row.
void scale_chol(std::span<const double> sigma, std::span<const double> L, const double* z, double* out,
                std::size_t K) {
  for (std::size_t k = 0; k < K; ++k) {
    double acc = 0.0;
    for (std::size_t l = 0; l <= k; ++l) acc += L[k * K + l] * z[l];
    out[k] = sigma[k] * acc;
  }
}

double group_logprob(const TreeSpec& tree, std::span<const double> theta, std::span<const double> b, int group) {
  double acc = kNegInf;
  for (std::size_t l = 0; l < tree.n_leaves(); ++l) {
    if (tree.group_of(static_cast<int>(l)) == group) {
      acc = log_sum_exp(acc, leaf_logprob(tree, theta, b, static_cast<int>(l)));
    }
  }
  return acc;
}

}  // namespace

double irtree_loglik(const IRTreeParams& p, const CategoricalData& data, const TreeSpec& tree) {
  if (p.K != tree.n_nodes() || p.theta.size() != data.n_examiners() * p.K || p.b.size() != data.n_items() * p.K) {
    throw ShapeError("IRTree parameters do not match the data and tree");
  }
  std::vector<double> terms;
  terms.reserve(data.observations.size());
  for (const auto& o : data.observations) {
    terms.push_back(leaf_logprob(tree, p.theta_row(o.examiner), p.b_row(o.item), o.category));
  }
  return order_invariant_sum(std::move(terms));
}

IRTreePosterior::IRTreePosterior(CategoricalData data, TreeSpec tree, IRTreePriors priors, std::string kind)
    : data_(std::move(data)), tree_(std::move(tree)), priors_(priors), kind_(std::move(kind)), K_(tree_.n_nodes()) {
  if (data_.observations.empty()) throw DataError("IRTree model needs at least one response");
  if (data_.item_mates.size() != data_.n_items()) throw DataError("every item needs a mating indicator");
  if (static_cast<std::size_t>(data_.n_categories) != tree_.n_leaves()) {
    throw DataError("response categories do not match the tree leaves");
  }
  const std::size_t N = data_.n_examiners(), J = data_.n_items();
  z_theta_ = space_.add("z_theta", {N, K_});
  sigma_theta_ = space_.add("sigma_theta", {K_}, Constraint::Positive);
  L_theta_ = space_.add("L_theta", {K_, K_}, Constraint::CorrelationCholesky);
  z_b_ = space_.add("z_b", {J, K_});
  sigma_b_ = space_.add("sigma_b", {K_}, Constraint::Positive);
  L_b_ = space_.add("L_b", {K_, K_}, Constraint::CorrelationCholesky);
  beta0_ = space_.add("beta0", {K_});
  beta1_ = space_.add("beta1", {K_});
}

std::vector<std::string> IRTreePosterior::output_names() const {
  const std::size_t N = data_.n_examiners(), J = data_.n_items();
  std::vector<std::string> names;
  names.reserve(N * K_ + J * K_ + 4 * K_ + 2 * K_ * K_);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t k = 0; k < K_; ++k) names.push_back(name2("theta", i, k));
  }
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t k = 0; k < K_; ++k) names.push_back(name2("b", j, k));
  }
  for (const char* n : {"beta0", "beta1", "sigma_theta", "sigma_b"}) {
    for (std::size_t k = 0; k < K_; ++k) names.push_back(name1(n, k));
  }
  for (const char* n : {"L_theta", "L_b"}) {
    for (std::size_t r = 0; r < K_; ++r) {
      for (std::size_t c = 0; c < K_; ++c) names.push_back(name2(n, r, c));
    }
  }
  return names;
}

IRTreeParams IRTreePosterior::params_from_constrained(std::span<const double> c) const {
  const std::size_t N = data_.n_examiners(), J = data_.n_items(), K = K_;
  const auto seg = [&](std::size_t blk) {
    const auto& b = space_.block(blk);
    return std::vector<double>(c.begin() + static_cast<std::ptrdiff_t>(b.constrained_offset),
                               c.begin() + static_cast<std::ptrdiff_t>(b.constrained_offset + b.size()));
  };
  IRTreeParams p;
  p.K = K;
  p.sigma_theta = seg(sigma_theta_);
  p.sigma_b = seg(sigma_b_);
  p.L_theta = seg(L_theta_);
  p.L_b = seg(L_b_);
  p.beta0 = seg(beta0_);
  p.beta1 = seg(beta1_);
  p.theta.resize(N * K);
  p.b.resize(J * K);
  const double* zt = c.data() + space_.block(z_theta_).constrained_offset;
  const double* zb = c.data() + space_.block(z_b_).constrained_offset;
  for (std::size_t i = 0; i < N; ++i) scale_chol(p.sigma_theta, p.L_theta, zt + i * K, p.theta.data() + i * K, K);
  for (std::size_t j = 0; j < J; ++j) {
    scale_chol(p.sigma_b, p.L_b, zb + j * K, p.b.data() + j * K, K);
    const double x = data_.item_mates[j];
    for (std::size_t k = 0; k < K; ++k) p.b[j * K + k] += p.beta0[k] + p.beta1[k] * x;
  }
  return p;
}

void IRTreePosterior::write_outputs(std::span<const double> u, std::span<double> out) const {
  std::vector<double> c(space_.constrained_dim());
  space_.transform(u, c);
  const IRTreeParams p = params_from_constrained(c);
  std::size_t k = 0;
  for (const auto* v : {&p.theta, &p.b, &p.beta0, &p.beta1, &p.sigma_theta, &p.sigma_b, &p.L_theta, &p.L_b}) {
    for (double x : *v) out[k++] = x;
  }
}

IRTreeParams IRTreePosterior::params_from_outputs(std::span<const double> o) const {
  const std::size_t N = data_.n_examiners(), J = data_.n_items(), K = K_;
  IRTreeParams p;
  p.K = K;
  std::size_t k = 0;
  const auto take = [&](std::vector<double>& v, std::size_t n) {
    v.assign(o.begin() + static_cast<std::ptrdiff_t>(k), o.begin() + static_cast<std::ptrdiff_t>(k + n));
    k += n;
  };
  take(p.theta, N * K);
  take(p.b, J * K);
  take(p.beta0, K);
  take(p.beta1, K);
  take(p.sigma_theta, K);
  take(p.sigma_b, K);
  take(p.L_theta, K * K);
  take(p.L_b, K * K);
  return p;
}

std::vector<double> IRTreePosterior::unconstrained_from(const IRTreeParams& p) const {
  const std::size_t N = data_.n_examiners(), J = data_.n_items(), K = K_;
  if (p.K != K || p.theta.size() != N * K || p.b.size() != J * K) throw ShapeError("IRTree parameters do not match");
  std::vector<double> c(space_.constrained_dim());
  const auto put = [&](std::size_t blk, const std::vector<double>& v) {
    std::copy(v.begin(), v.end(), c.begin() + static_cast<std::ptrdiff_t>(space_.block(blk).constrained_offset));
  };
  put(sigma_theta_, p.sigma_theta);
  put(sigma_b_, p.sigma_b);
  put(L_theta_, p.L_theta);
  put(L_b_, p.L_b);
  put(beta0_, p.beta0);
  put(beta1_, p.beta1);
  // Invert the non-centred maps row by row: forward substitution through L.
  const auto solve = [&](const std::vector<double>& sigma, const std::vector<double>& L, const double* x, double* z) {
    for (std::size_t k2 = 0; k2 < K; ++k2) {
      double acc = x[k2] / sigma[k2];
      for (std::size_t l = 0; l < k2; ++l) acc -= L[k2 * K + l] * z[l];
      z[k2] = acc / L[k2 * K + k2];
    }
  };
  double* zt = c.data() + space_.block(z_theta_).constrained_offset;
  double* zb = c.data() + space_.block(z_b_).constrained_offset;
  for (std::size_t i = 0; i < N; ++i) solve(p.sigma_theta, p.L_theta, p.theta.data() + i * K, zt + i * K);
  std::vector<double> resid(K);
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t k2 = 0; k2 < K; ++k2) {
      resid[k2] = p.b[j * K + k2] - p.beta0[k2] - p.beta1[k2] * data_.item_mates[j];
    }
    solve(p.sigma_b, p.L_b, resid.data(), zb + j * K);
  }
  return space_.untransform(c);
}

double IRTreePosterior::log_density_constrained(std::span<const double> c, std::span<double> grad) const {
  const std::size_t N = data_.n_examiners(), J = data_.n_items(), K = K_;
  const IRTreeParams p = params_from_constrained(c);
  const bool want = !grad.empty();
  const auto off = [&](std::size_t blk) { return space_.block(blk).constrained_offset; };

  std::vector<double> gt(want ? N * K : 0, 0.0), gb(want ? J * K : 0, 0.0), d_diff(K);
  double lp = 0.0;
  for (const auto& o : data_.observations) {
    if (want) {
      std::fill(d_diff.begin(), d_diff.end(), 0.0);
      lp += leaf_logprob_grad(tree_, p.theta_row(o.examiner), p.b_row(o.item), o.category, d_diff);
      for (std::size_t k = 0; k < K; ++k) {
        gt[o.examiner * K + k] += d_diff[k];
        gb[o.item * K + k] -= d_diff[k];
      }
    } else {
      lp += leaf_logprob(tree_, p.theta_row(o.examiner), p.b_row(o.item), o.category);
    }
  }

  const double* zt = c.data() + off(z_theta_);
  const double* zb = c.data() + off(z_b_);
  for (std::size_t n = 0; n < N * K; ++n) lp += -0.5 * zt[n] * zt[n] - kLogSqrtTwoPi;
  for (std::size_t n = 0; n < J * K; ++n) lp += -0.5 * zb[n] * zb[n] - kLogSqrtTwoPi;
  for (std::size_t k = 0; k < K; ++k) {
    lp += half_cauchy_lpdf(p.sigma_theta[k], priors_.half_cauchy_scale);
    lp += half_cauchy_lpdf(p.sigma_b[k], priors_.half_cauchy_scale);
    lp += normal_lpdf(p.beta0[k], 0.0, priors_.beta_sd);
    lp += normal_lpdf(p.beta1[k], 0.0, priors_.beta_sd);
  }
  lp += lkj_cholesky_lpdf(p.L_theta, K, priors_.lkj_eta);
  lp += lkj_cholesky_lpdf(p.L_b, K, priors_.lkj_eta);
  if (!want) return lp;

  // Chain rule through x = diag(sigma) L z for each row.
  const auto backprop_rows = [&](std::size_t rows, const std::vector<double>& g, const double* z,
                                 const std::vector<double>& sigma, const std::vector<double>& L, std::size_t z_blk,
                                 std::size_t sigma_blk, std::size_t L_blk) {
    std::vector<double> v(K);
    double* gz = grad.data() + off(z_blk);
    double* gs = grad.data() + off(sigma_blk);
    double* gL = grad.data() + off(L_blk);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* zr = z + r * K;
      for (std::size_t k = 0; k < K; ++k) {
        v[k] = sigma[k] * g[r * K + k];
        double lz = 0.0;
        for (std::size_t l = 0; l <= k; ++l) {
          lz += L[k * K + l] * zr[l];
          gL[k * K + l] += v[k] * zr[l];
        }
        gs[k] += g[r * K + k] * lz;
      }
      for (std::size_t l = 0; l < K; ++l) {
        double acc = 0.0;
        for (std::size_t k = l; k < K; ++k) acc += L[k * K + l] * v[k];
        gz[r * K + l] = acc - zr[l];
      }
    }
  };
  backprop_rows(N, gt, zt, p.sigma_theta, p.L_theta, z_theta_, sigma_theta_, L_theta_);
  backprop_rows(J, gb, zb, p.sigma_b, p.L_b, z_b_, sigma_b_, L_b_);

  for (std::size_t j = 0; j < J; ++j) {
    const double x = data_.item_mates[j];
    for (std::size_t k = 0; k < K; ++k) {
      grad[off(beta0_) + k] += gb[j * K + k];
      grad[off(beta1_) + k] += gb[j * K + k] * x;
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    grad[off(sigma_theta_) + k] += half_cauchy_lpdf_dx(p.sigma_theta[k], priors_.half_cauchy_scale);
    grad[off(sigma_b_) + k] += half_cauchy_lpdf_dx(p.sigma_b[k], priors_.half_cauchy_scale);
    grad[off(beta0_) + k] += normal_lpdf_dx(p.beta0[k], 0.0, priors_.beta_sd);
    grad[off(beta1_) + k] += normal_lpdf_dx(p.beta1[k], 0.0, priors_.beta_sd);
  }
  lkj_cholesky_lpdf_grad(p.L_theta, K, priors_.lkj_eta, grad.subspan(off(L_theta_), K * K));
  lkj_cholesky_lpdf_grad(p.L_b, K, priors_.lkj_eta, grad.subspan(off(L_b_), K * K));
  return lp;
}

void IRTreePosterior::pointwise_log_lik(std::span<const double> o, std::span<double> out) const {
  const IRTreeParams p = params_from_outputs(o);
  for (std::size_t n = 0; n < data_.observations.size(); ++n) {
    const auto& ob = data_.observations[n];
    out[n] = group_logprob(tree_, p.theta_row(ob.examiner), p.b_row(ob.item), tree_.group_of(ob.category));
  }
}

std::vector<int> IRTreePosterior::observed_categories() const {
  std::vector<int> y;
  y.reserve(data_.observations.size());
  for (const auto& o : data_.observations) y.push_back(tree_.group_of(o.category));
  return y;
}

std::vector<int> IRTreePosterior::predicted_categories(std::span<const double> o) const {
  const IRTreeParams p = params_from_outputs(o);
  std::vector<int> y;
  y.reserve(data_.observations.size());
  for (const auto& ob : data_.observations) {
    const auto g = group_probs(tree_, p.theta_row(ob.examiner), p.b_row(ob.item));
    y.push_back(static_cast<int>(std::max_element(g.begin(), g.end()) - g.begin()));
  }
  return y;
}

TreeMedians tree_medians(const DrawSet& draws, std::size_t n_examiners, std::size_t n_items, std::size_t K) {
  TreeMedians m;
  m.K = K;
  m.theta.resize(n_examiners * K);
  m.b.resize(n_items * K);
  for (std::size_t i = 0; i < n_examiners; ++i) {
    for (std::size_t k = 0; k < K; ++k) m.theta[i * K + k] = quantile(draws.pooled(draws.index(name2("theta", i, k))), 0.5);
  }
  for (std::size_t j = 0; j < n_items; ++j) {
    for (std::size_t k = 0; k < K; ++k) m.b[j * K + k] = quantile(draws.pooled(draws.index(name2("b", j, k))), 0.5);
  }
  return m;
}

std::vector<UnexpectedResponse> flag_unexpected(const DrawSet& draws, const CategoricalData& data,
                                                const TreeSpec& tree, double threshold) {
  const std::size_t K = tree.n_nodes();
  const TreeMedians med = tree_medians(draws, data.n_examiners(), data.n_items(), K);
  std::vector<UnexpectedResponse> out;
  out.reserve(data.observations.size());
  for (const auto& o : data.observations) {
    UnexpectedResponse r;
    r.examiner_id = data.examiners.id(o.examiner);
    r.item_id = data.items.id(o.item);
    r.observed = o.category;
    r.probabilities = leaf_probs(tree, std::span<const double>(med.theta.data() + o.examiner * K, K),
                                 std::span<const double>(med.b.data() + o.item * K, K));
    const auto best = std::max_element(r.probabilities.begin(), r.probabilities.end());
    r.predicted = static_cast<int>(best - r.probabilities.begin());
    r.flagged = r.predicted != r.observed && *best >= threshold;
    out.push_back(std::move(r));
  }
  return out;
}

void write_flags_csv(const std::vector<UnexpectedResponse>& rows, const TreeSpec& tree, std::ostream& out, bool all) {
  CsvWriter w(out);
  std::vector<std::string> header{"examiner_id", "item_id", "observed", "predicted"};
  for (std::size_t l = 0; l < tree.n_leaves(); ++l) header.push_back("p_" + tree.leaf_name(static_cast<int>(l)));
  if (all) header.emplace_back("flagged");
  w.row(header);
  for (const auto& r : rows) {
    if (!all && !r.flagged) continue;
    std::vector<std::string> row{r.examiner_id, r.item_id, tree.leaf_name(r.observed), tree.leaf_name(r.predicted)};
    for (double p : r.probabilities) row.push_back(format_double(p));
    if (all) row.emplace_back(r.flagged ? "true" : "false");
    w.row(row);
  }
}

std::vector<CoefficientRow> coefficient_table(const DrawSet& draws, std::size_t K) {
  std::vector<CoefficientRow> rows;
  for (std::size_t k = 0; k < K; ++k) {
    for (const char* n : {"beta0", "beta1", "sigma_theta", "sigma_b"}) {
      const auto s = summarize(draws, draws.index(name1(n, k)));
      rows.push_back({static_cast<int>(k + 1), n, s.mean, s.median, s.q5, s.q95});
    }
  }
  return rows;
}

void write_coefficients_csv(const std::vector<CoefficientRow>& rows, std::ostream& out) {
  CsvWriter w(out);
  w.row({"node", "parameter", "mean", "median", "q5", "q95"});
  for (const auto& r : rows) {
    w.row({std::to_string(r.node), r.parameter, format_double(r.mean), format_double(r.median), format_double(r.q5),
           format_double(r.q95)});
  }
}

}  // namespace fpirt
