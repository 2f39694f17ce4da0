#include "fpirt/nuts.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "fpirt/errors.hpp"
#include "fpirt/math.hpp"

namespace fpirt {

void SamplerConfig::validate() const {
  if (chains == 0) throw DomainError("chains must be positive");
  if (warmup == 0) throw DomainError("warmup must be positive");
  if (samples == 0) throw DomainError("samples must be positive");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw DomainError("target_accept must lie in (0, 1)");
  if (max_tree_depth <= 0) throw DomainError("max_tree_depth must be positive");
  if (!(init_radius > 0.0)) throw DomainError("init_radius must be positive");
}

std::mt19937_64 chain_rng(std::uint64_t seed, std::size_t chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x6e757473u};
  return std::mt19937_64(seq);
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct PhasePoint {
  std::vector<double> q, p, g;
  double lp = 0.0;
};

class DualAveraging {
 public:
  void restart(double mu) {
    mu_ = mu;
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }
  double learn(double accept, double delta) {
    ++counter_;
    accept = std::min(1.0, accept);
    const double n = static_cast<double>(counter_);
    const double eta = 1.0 / (n + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta - accept);
    const double x = mu_ - s_bar_ * std::sqrt(n) / kGamma;
    const double x_eta = std::pow(n, -kKappa);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }
  double final_step() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double mu_ = 0.0;
  std::size_t counter_ = 0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
};

/// Stan-style warmup schedule: fast initial buffer, doubling slow windows,
/// fast terminal buffer.
class WindowSchedule {
 public:
  explicit WindowSchedule(std::size_t warmup) : warmup_(warmup) {
    if (warmup < 20) {
      adapt_metric_ = false;
      return;
    }
    if (init_buffer_ + base_window_ + term_buffer_ > warmup) {
      init_buffer_ = static_cast<std::size_t>(0.15 * static_cast<double>(warmup));
      term_buffer_ = static_cast<std::size_t>(0.1 * static_cast<double>(warmup));
      base_window_ = warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  bool adapting_metric() const { return adapt_metric_; }
  bool in_window() const {
    return adapt_metric_ && counter_ >= init_buffer_ && counter_ < warmup_ - term_buffer_ && counter_ != warmup_;
  }
  bool window_end() const { return adapt_metric_ && counter_ == next_window_ && counter_ != warmup_; }
  void advance() { ++counter_; }
  void compute_next_window() {
    if (next_window_ == warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != warmup_ - term_buffer_ - 1) {
      const std::size_t boundary = next_window_ + 2 * window_size_;
      if (boundary >= warmup_ - term_buffer_) next_window_ = warmup_ - term_buffer_ - 1;
    }
  }

 private:
  std::size_t warmup_;
  std::size_t init_buffer_ = 75;
  std::size_t term_buffer_ = 50;
  std::size_t base_window_ = 25;
  std::size_t window_size_ = 25;
  std::size_t next_window_ = 0;
  std::size_t counter_ = 0;
  bool adapt_metric_ = true;
};

class Welford {
 public:
  explicit Welford(std::size_t d) : mean_(d, 0.0), m2_(d, 0.0) {}
  void add(std::span<const double> x) {
    ++n_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean_[i];
      mean_[i] += delta / static_cast<double>(n_);
      m2_[i] += delta * (x[i] - mean_[i]);
    }
  }
  std::size_t count() const { return n_; }
  void variance(std::span<double> out) const {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = n_ > 1 ? m2_[i] / static_cast<double>(n_ - 1) : 1.0;
  }
  void restart() {
    n_ = 0;
    std::fill(mean_.begin(), mean_.end(), 0.0);
    std::fill(m2_.begin(), m2_.end(), 0.0);
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> mean_, m2_;
};

class NutsChain {
 public:
  NutsChain(const LogDensityModel& model, const SamplerConfig& cfg, std::mt19937_64& rng)
      : model_(model), cfg_(cfg), rng_(rng), d_(model.dimension()), inv_metric_(d_, 1.0) {}

  void set_point(std::vector<double> q) {
    z_.q = std::move(q);
    z_.p.assign(d_, 0.0);
    z_.g.assign(d_, 0.0);
    z_.lp = model_.log_density(z_.q, z_.g);
  }

  const PhasePoint& point() const { return z_; }
  double step_size() const { return eps_; }
  void set_step_size(double e) { eps_ = e; }
  const std::vector<double>& inv_metric() const { return inv_metric_; }
  std::vector<double>& inv_metric() { return inv_metric_; }

  struct Transition {
    double accept_stat;
    int depth;
    std::size_t n_leapfrog;
    bool divergent;
  };

  void init_step_size() {
    const PhasePoint start = z_;
    auto trial = [&] {
      z_ = start;
      sample_momentum();
      const double h0 = hamiltonian(z_);
      leapfrog(z_, eps_);
      double h = hamiltonian(z_);
      if (std::isnan(h)) h = kInf;
      return h0 - h;
    };
    double delta_h = trial();
    const int direction = delta_h > std::log(0.8) ? 1 : -1;
    for (int iter = 0; iter < 100; ++iter) {
      delta_h = trial();
      if (direction == 1 && !(delta_h > std::log(0.8))) break;
      if (direction == -1 && !(delta_h < std::log(0.8))) break;
      eps_ = direction == 1 ? 2.0 * eps_ : 0.5 * eps_;
      if (eps_ > 1e7) throw InitializationError("step size search diverged: posterior may be improper");
      if (eps_ == 0.0) throw InitializationError("step size collapsed to zero: model has no finite curvature");
    }
    z_ = start;
  }

  Transition transition() {
    sample_momentum();
    divergent_ = false;
    const double h0 = hamiltonian(z_);

    PhasePoint z_fwd = z_, z_bck = z_;
    PhasePoint z_sample = z_, z_propose = z_;

    std::vector<double> p_sharp_fwd_fwd = sharp(z_.p), p_sharp_fwd_bck = p_sharp_fwd_fwd;
    std::vector<double> p_sharp_bck_fwd = p_sharp_fwd_fwd, p_sharp_bck_bck = p_sharp_fwd_fwd;
    std::vector<double> p_fwd_fwd = z_.p, p_fwd_bck = z_.p, p_bck_fwd = z_.p, p_bck_bck = z_.p;
    std::vector<double> rho = z_.p;

    double log_sum_weight = 0.0;
    std::size_t n_leapfrog = 0;
    double sum_metro = 0.0;
    int depth = 0;
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    while (depth < cfg_.max_tree_depth) {
      std::vector<double> rho_fwd(d_, 0.0), rho_bck(d_, 0.0);
      bool valid = false;
      double lsw_subtree = kNegInf;
      if (unif(rng_) > 0.5) {
        z_ = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd,
                           h0, 1.0, n_leapfrog, lsw_subtree, sum_metro);
        z_fwd = z_;
      } else {
        z_ = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd, p_bck_bck,
                           h0, -1.0, n_leapfrog, lsw_subtree, sum_metro);
        z_bck = z_;
      }
      if (!valid) break;
      ++depth;

      // Biased progressive sampling favours the newer subtree.
      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (unif(rng_) < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

      for (std::size_t i = 0; i < d_; ++i) rho[i] = rho_bck[i] + rho_fwd[i];
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      std::vector<double> ext(d_);
      for (std::size_t i = 0; i < d_; ++i) ext[i] = rho_bck[i] + p_fwd_bck[i];
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, ext);
      for (std::size_t i = 0; i < d_; ++i) ext[i] = rho_fwd[i] + p_bck_fwd[i];
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, ext);
      if (!persist) break;
    }
    z_ = z_sample;
    const double accept = n_leapfrog == 0 ? 0.0 : sum_metro / static_cast<double>(n_leapfrog);
    return {accept, depth, n_leapfrog, divergent_};
  }

 private:
  void sample_momentum() {
    std::normal_distribution<double> norm(0.0, 1.0);
    for (std::size_t i = 0; i < d_; ++i) z_.p[i] = norm(rng_) / std::sqrt(inv_metric_[i]);
  }

  double hamiltonian(const PhasePoint& z) const {
    double k = 0.0;
    for (std::size_t i = 0; i < d_; ++i) k += z.p[i] * z.p[i] * inv_metric_[i];
    return -z.lp + 0.5 * k;
  }

  std::vector<double> sharp(std::span<const double> p) const {
    std::vector<double> out(d_);
    for (std::size_t i = 0; i < d_; ++i) out[i] = inv_metric_[i] * p[i];
    return out;
  }

  void leapfrog(PhasePoint& z, double eps) const {
    for (std::size_t i = 0; i < d_; ++i) z.p[i] += 0.5 * eps * z.g[i];
    for (std::size_t i = 0; i < d_; ++i) z.q[i] += eps * inv_metric_[i] * z.p[i];
    z.lp = model_.log_density(z.q, z.g);
    if (!std::isfinite(z.lp) || !all_finite(z.g)) {
      z.lp = kNegInf;
      return;
    }
    for (std::size_t i = 0; i < d_; ++i) z.p[i] += 0.5 * eps * z.g[i];
  }

  static bool criterion(std::span<const double> p_sharp_minus, std::span<const double> p_sharp_plus,
                        std::span<const double> rho) {
    return dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0;
  }

  bool build_tree(int depth, PhasePoint& z_propose, std::vector<double>& p_sharp_beg, std::vector<double>& p_sharp_end,
                  std::vector<double>& rho, std::vector<double>& p_beg, std::vector<double>& p_end, double h0,
                  double sign, std::size_t& n_leapfrog, double& log_sum_weight, double& sum_metro) {
    if (depth == 0) {
      leapfrog(z_, sign * eps_);
      ++n_leapfrog;
      double h = std::isfinite(z_.lp) ? hamiltonian(z_) : kInf;
      if (std::isnan(h)) h = kInf;
      if (h - h0 > cfg_.max_delta_h) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
      z_propose = z_;
      p_sharp_beg = sharp(z_.p);
      p_sharp_end = p_sharp_beg;
      for (std::size_t i = 0; i < d_; ++i) rho[i] += z_.p[i];
      p_beg = z_.p;
      p_end = p_beg;
      return !divergent_;
    }

    double lsw_init = kNegInf;
    std::vector<double> p_init_end(d_), p_sharp_init_end(d_), rho_init(d_, 0.0);
    if (!build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, h0, sign,
                    n_leapfrog, lsw_init, sum_metro)) {
      return false;
    }

    PhasePoint z_propose_final = z_;
    double lsw_final = kNegInf;
    std::vector<double> p_final_beg(d_), p_sharp_final_beg(d_), rho_final(d_, 0.0);
    if (!build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end, h0,
                    sign, n_leapfrog, lsw_final, sum_metro)) {
      return false;
    }

    // Uniform multinomial merge within a subtree.
    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (lsw_final > lsw_subtree) {
      z_propose = z_propose_final;
    } else if (unif(rng_) < std::exp(lsw_final - lsw_subtree)) {
      z_propose = z_propose_final;
    }

    std::vector<double> rho_subtree(d_);
    for (std::size_t i = 0; i < d_; ++i) {
      rho_subtree[i] = rho_init[i] + rho_final[i];
      rho[i] += rho_subtree[i];
    }
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    std::vector<double> ext(d_);
    for (std::size_t i = 0; i < d_; ++i) ext[i] = rho_init[i] + p_final_beg[i];
    persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, ext);
    for (std::size_t i = 0; i < d_; ++i) ext[i] = rho_final[i] + p_init_end[i];
    persist = persist && criterion(p_sharp_init_end, p_sharp_end, ext);
    return persist;
  }

  const LogDensityModel& model_;
  const SamplerConfig& cfg_;
  std::mt19937_64& rng_;
  std::size_t d_;
  std::vector<double> inv_metric_;
  PhasePoint z_;
  double eps_ = 1.0;
  bool divergent_ = false;
};

}  // namespace

std::vector<double> find_initial_point(const LogDensityModel& model, std::mt19937_64& rng, double radius) {
  const std::size_t d = model.dimension();
  std::uniform_real_distribution<double> unif(-radius, radius);
  std::vector<double> q(d), g(d);
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (double& x : q) x = unif(rng);
    const double lp = model.log_density(q, g);
    if (std::isfinite(lp) && all_finite(g)) return q;
  }
  throw InitializationError("no point with finite log density and gradient after 100 random initialisations");
}

ChainStats run_nuts_chain(const LogDensityModel& model, const SamplerConfig& cfg, std::size_t chain,
                          DrawSet& out) {
  std::mt19937_64 rng = chain_rng(cfg.seed, chain);
  NutsChain sampler(model, cfg, rng);
  sampler.set_point(find_initial_point(model, rng, cfg.init_radius));
  sampler.init_step_size();

  DualAveraging da;
  da.restart(std::log(10.0 * sampler.step_size()));
  WindowSchedule schedule(cfg.warmup);
  Welford welford(model.dimension());

  ChainStats stats;
  for (std::size_t it = 0; it < cfg.warmup; ++it) {
    const auto t = sampler.transition();
    if (t.divergent) ++stats.warmup_divergences;
    sampler.set_step_size(da.learn(t.accept_stat, cfg.target_accept));
    if (schedule.in_window()) welford.add(sampler.point().q);
    if (schedule.window_end()) {
      schedule.compute_next_window();
      auto& var = sampler.inv_metric();
      welford.variance(var);
      const double n = static_cast<double>(welford.count());
      for (double& v : var) v = (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0));
      welford.restart();
      sampler.init_step_size();
      da.restart(std::log(10.0 * sampler.step_size()));
    }
    schedule.advance();
  }
  sampler.set_step_size(da.final_step());
  stats.step_size = sampler.step_size();
  stats.inv_metric = sampler.inv_metric();

  const std::size_t n = cfg.samples;
  stats.tree_depth.reserve(n);
  stats.n_leapfrog.reserve(n);
  stats.accept_stat.reserve(n);
  stats.divergent.reserve(n);
  stats.log_density.reserve(n);
  for (std::size_t it = 0; it < n; ++it) {
    const auto t = sampler.transition();
    stats.tree_depth.push_back(t.depth);
    stats.n_leapfrog.push_back(t.n_leapfrog);
    stats.accept_stat.push_back(t.accept_stat);
    stats.divergent.push_back(t.divergent ? 1 : 0);
    stats.log_density.push_back(sampler.point().lp);
    model.write_outputs(sampler.point().q, out.row(chain, it));
  }
  return stats;
}

DrawSet sample_nuts(const LogDensityModel& model, const SamplerConfig& cfg) {
  cfg.validate();
  DrawSet draws(model.output_names(), cfg.chains, cfg.samples);
  draws.method = "nuts";
  draws.max_tree_depth = cfg.max_tree_depth;
  draws.stats.resize(cfg.chains);
  std::vector<std::exception_ptr> errors(cfg.chains);
  {
    std::vector<std::jthread> workers;
    workers.reserve(cfg.chains);
    for (std::size_t c = 0; c < cfg.chains; ++c) {
      workers.emplace_back([&, c] {
        try {
          draws.stats[c] = run_nuts_chain(model, cfg, c, draws);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return draws;
}

}  // namespace fpirt
