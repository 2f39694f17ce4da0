#include "fpirt/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

#include "fpirt/errors.hpp"
#include "fpirt/math.hpp"
#include "fpirt/nuts.hpp"

namespace fpirt {

namespace {

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct LinePoint {
  double alpha = 0.0;
  double value = kInf;
  double slope = 0.0;
  std::vector<double> x, g;
};

class LineSearch {
 public:
  LineSearch(const Objective& f, std::span<const double> x, std::span<const double> d, double f0, double slope0)
      : f_(f), x_(x), d_(d), f0_(f0), slope0_(slope0) {}

  std::optional<LinePoint> run(double alpha) {
    LinePoint prev{0.0, f0_, slope0_, {}, {}};
    for (int i = 0; i < 60; ++i) {
      LinePoint cur = eval(alpha);
      if (!sufficient(cur) || (i > 0 && cur.value >= prev.value)) return zoom(prev, cur);
      if (std::fabs(cur.slope) <= -kC2 * slope0_) return cur;
      if (cur.slope >= 0.0) return zoom(cur, prev);
      prev = std::move(cur);
      alpha *= 2.0;
    }
    return std::nullopt;
  }

 private:
  static constexpr double kC1 = 1e-4;
  static constexpr double kC2 = 0.9;

  bool sufficient(const LinePoint& p) const {
    return std::isfinite(p.value) && p.value <= f0_ + kC1 * p.alpha * slope0_;
  }

  LinePoint eval(double alpha) const {
    LinePoint p;
    p.alpha = alpha;
    p.x.resize(x_.size());
    p.g.assign(x_.size(), 0.0);
    for (std::size_t i = 0; i < x_.size(); ++i) p.x[i] = x_[i] + alpha * d_[i];
    p.value = f_(p.x, p.g);
    if (!std::isfinite(p.value)) {
      p.value = kInf;
      p.slope = 0.0;
    } else {
      p.slope = dot(p.g, d_);
    }
    return p;
  }

  std::optional<LinePoint> zoom(LinePoint lo, LinePoint hi) {
    for (int i = 0; i < 60; ++i) {
      const double width = hi.alpha - lo.alpha;
      double alpha;
      if (std::isfinite(hi.value)) {
        // Minimiser of the quadratic through (lo.value, lo.slope, hi.value).
        const double denom = 2.0 * (hi.value - lo.value - lo.slope * width);
        alpha = denom > 0.0 ? lo.alpha - lo.slope * width * width / denom : lo.alpha + 0.5 * width;
        const double a = std::min(lo.alpha, hi.alpha), b = std::max(lo.alpha, hi.alpha);
        const double margin = 0.1 * (b - a);
        alpha = std::clamp(alpha, a + margin, b - margin);
      } else {
        alpha = lo.alpha + 0.5 * width;
      }
      if (std::fabs(width) < 1e-16 * std::max(1.0, std::fabs(lo.alpha))) break;
      LinePoint cur = eval(alpha);
      if (!sufficient(cur) || cur.value >= lo.value) {
        hi = std::move(cur);
      } else {
        if (std::fabs(cur.slope) <= -kC2 * slope0_) return cur;
        if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
    }
    // Accept any strict decrease found on the bracket.
    if (lo.alpha > 0.0 && lo.value < f0_) return lo;
    return std::nullopt;
  }

  const Objective& f_;
  std::span<const double> x_, d_;
  double f0_, slope0_;
};

}  // namespace

MinimizeResult lbfgs_minimize(const Objective& f, std::vector<double> x0, const OptimizerConfig& cfg) {
  const std::size_t n = x0.size();
  MinimizeResult r;
  r.x = std::move(x0);
  std::vector<double> g(n, 0.0);
  r.value = f(r.x, g);
  if (!std::isfinite(r.value)) throw InitializationError("objective is not finite at the starting point");
  r.gradient_norm = inf_norm(g);

  std::deque<std::vector<double>> S, Y;
  std::deque<double> rho;
  std::vector<double> d(n), q(n);
  std::vector<double> alpha_hist(cfg.history);
  bool restarted = false;

  for (r.iterations = 0; r.iterations < cfg.max_iterations; ++r.iterations) {
    if (r.gradient_norm <= cfg.gradient_tolerance) return r;

    // Two-loop recursion.
    q = g;
    for (std::size_t k = S.size(); k-- > 0;) {
      alpha_hist[k] = rho[k] * dot(S[k], q);
      for (std::size_t i = 0; i < n; ++i) q[i] -= alpha_hist[k] * Y[k][i];
    }
    double gamma = 1.0;
    if (!S.empty()) gamma = dot(S.back(), Y.back()) / dot(Y.back(), Y.back());
    for (std::size_t i = 0; i < n; ++i) q[i] *= gamma;
    for (std::size_t k = 0; k < S.size(); ++k) {
      const double beta = rho[k] * dot(Y[k], q);
      for (std::size_t i = 0; i < n; ++i) q[i] += S[k][i] * (alpha_hist[k] - beta);
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = -q[i];
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      S.clear();
      Y.clear();
      rho.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      slope = dot(g, d);
    }
    const double step0 = S.empty() ? std::min(1.0, 1.0 / std::max(inf_norm(g), 1e-12)) : 1.0;

    LineSearch ls(f, r.x, d, r.value, slope);
    auto next = ls.run(step0);
    if (!next) {
      if (!S.empty() && !restarted) {
        S.clear();
        Y.clear();
        rho.clear();
        restarted = true;
        continue;
      }
      // No representable decrease left along the steepest direction.
      if (r.gradient_norm <= cfg.stall_tolerance) return r;
      throw ConvergenceError("line search failed with gradient norm " + std::to_string(r.gradient_norm), r.x,
                             r.value);
    }
    restarted = false;

    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = next->x[i] - r.x[i];
      y[i] = next->g[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
      if (S.size() == cfg.history) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
    }
    r.x = std::move(next->x);
    g = std::move(next->g);
    r.value = next->value;
    r.gradient_norm = inf_norm(g);
  }
  if (r.gradient_norm <= cfg.gradient_tolerance) return r;
  throw ConvergenceError("no convergence after " + std::to_string(cfg.max_iterations) + " iterations", r.x,
                         r.value);
}

Eigen::MatrixXd finite_difference_hessian(const LogDensityModel& model, std::span<const double> x, double rel_step) {
  const std::size_t n = x.size();
  Eigen::MatrixXd H(n, n);
  std::vector<double> xp(x.begin(), x.end()), gp(n), gm(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double h = rel_step * (1.0 + std::fabs(x[i]));
    xp[i] = x[i] + h;
    model.log_density(xp, gp);
    xp[i] = x[i] - h;
    model.log_density(xp, gm);
    xp[i] = x[i];
    for (std::size_t j = 0; j < n; ++j) H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = (gp[j] - gm[j]) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

LaplaceApproximation map_laplace(const LogDensityModel& model, const OptimizerConfig& cfg,
                                 std::optional<std::vector<double>> init, std::uint64_t seed) {
  std::vector<double> x0;
  if (init) {
    if (init->size() != model.dimension()) throw ShapeError("initial point has the wrong length");
    x0 = std::move(*init);
  } else {
    auto rng = chain_rng(seed, 0);
    x0 = find_initial_point(model, rng, 2.0);
  }
  const Objective neg = [&model](std::span<const double> x, std::span<double> g) {
    const double lp = model.log_density(x, g);
    for (double& v : g) v = -v;
    return -lp;
  };
  const MinimizeResult m = lbfgs_minimize(neg, std::move(x0), cfg);

  LaplaceApproximation out;
  out.mode = m.x;
  out.log_density = -m.value;
  out.gradient_norm = m.gradient_norm;
  out.iterations = m.iterations;
  const Eigen::MatrixXd precision = -finite_difference_hessian(model, out.mode, cfg.hessian_step);
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw DomainError("Hessian at the mode is not negative definite");
  out.covariance = llt.solve(Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
  return out;
}

DrawSet laplace_draws(const LogDensityModel& model, const LaplaceApproximation& fit, std::size_t chains,
                      std::size_t per_chain, std::uint64_t seed) {
  if (chains == 0 || per_chain == 0) throw DomainError("draw counts must be positive");
  const auto n = static_cast<Eigen::Index>(fit.mode.size());
  Eigen::LLT<Eigen::MatrixXd> llt(fit.covariance);
  if (llt.info() != Eigen::Success) throw DomainError("Laplace covariance is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  const Eigen::Map<const Eigen::VectorXd> mode(fit.mode.data(), n);

  DrawSet draws(model.output_names(), chains, per_chain);
  draws.method = "laplace";
  draws.stats.resize(chains);
  Eigen::VectorXd z(n), x(n);
  for (std::size_t c = 0; c < chains; ++c) {
    auto rng = chain_rng(seed, c);
    std::normal_distribution<double> norm(0.0, 1.0);
    for (std::size_t i = 0; i < per_chain; ++i) {
      for (Eigen::Index k = 0; k < n; ++k) z[k] = norm(rng);
      x = mode + L * z;
      model.write_outputs(std::span<const double>(x.data(), static_cast<std::size_t>(n)), draws.row(c, i));
    }
  }
  return draws;
}

}  // namespace fpirt
