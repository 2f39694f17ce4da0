#include "fpirt/parameter_space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fpirt/errors.hpp"

namespace fpirt {

namespace {

double log1m_tanh_sq(double y) {
  const double a = std::fabs(y);
  return 2.0 * (std::log(2.0) - a - std::log1p(std::exp(-2.0 * a)));
}

double corr_cholesky_impl(const double* y, std::size_t K, double* L) {
  double log_jac = 0.0;
  for (std::size_t i = 0; i < K * K; ++i) L[i] = 0.0;
  if (K == 0) return log_jac;
  L[0] = 1.0;
  std::size_t k = 0;
  for (std::size_t i = 1; i < K; ++i) {
    double sum_sq = 0.0;
    for (std::size_t j = 0; j < i; ++j, ++k) {
      const double z = std::tanh(y[k]);
      const double remaining = 1.0 - sum_sq;
      const double root = std::sqrt(remaining);
      L[i * K + j] = z * root;
      log_jac += log1m_tanh_sq(y[k]) + 0.5 * std::log(remaining);
      sum_sq += L[i * K + j] * L[i * K + j];
    }
    L[i * K + i] = std::sqrt(1.0 - sum_sq);
  }
  return log_jac;
}

}  // namespace

std::string_view to_string(Constraint c) {
  switch (c) {
    case Constraint::Free: return "free";
    case Constraint::Positive: return "positive";
    case Constraint::OrderedIncreasing: return "ordered";
    case Constraint::CorrelationCholesky: return "cholesky_corr";
    case Constraint::UnitScaledPositive: return "unit_scaled_positive";
  }
  return "";
}

std::size_t Block::size() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::size_t Block::unconstrained_size() const {
  const std::size_t n = size();
  switch (constraint) {
    case Constraint::CorrelationCholesky: {
      const std::size_t K = shape.empty() ? 1 : shape[0];
      return K * (K - 1) / 2;
    }
    case Constraint::UnitScaledPositive: return n == 0 ? 0 : n - 1;
    default: return n;
  }
}

std::size_t ParameterSpace::add(std::string name, std::vector<std::size_t> shape, Constraint c) {
  if (c == Constraint::CorrelationCholesky &&
      (shape.size() != 2 || shape[0] != shape[1] || shape[0] == 0)) {
    throw ShapeError("correlation Cholesky block '" + name + "' must be square and non-empty");
  }
  Block b{std::move(name), std::move(shape), c, constrained_dim_, unconstrained_dim_};
  constrained_dim_ += b.size();
  unconstrained_dim_ += b.unconstrained_size();
  blocks_.push_back(std::move(b));
  return blocks_.size() - 1;
}

std::size_t ParameterSpace::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].name == name) return i;
  }
  throw ShapeError("no parameter block named '" + std::string(name) + "'");
}

const Block& ParameterSpace::block(std::string_view name) const { return blocks_[index_of(name)]; }

TransformResult ParameterSpace::transform(std::span<const double> u) const {
  TransformResult r;
  r.values.resize(constrained_dim_);
  r.log_jacobian = transform(u, r.values);
  return r;
}

double ParameterSpace::transform(std::span<const double> u, std::span<double> c) const {
  if (u.size() != unconstrained_dim_) {
    throw ShapeError("unconstrained vector has length " + std::to_string(u.size()) + ", expected " +
                     std::to_string(unconstrained_dim_));
  }
  if (c.size() != constrained_dim_) throw ShapeError("constrained buffer has wrong length");
  double log_jac = 0.0;
  for (const auto& b : blocks_) {
    const double* in = u.data() + b.unconstrained_offset;
    double* out = c.data() + b.constrained_offset;
    const std::size_t n = b.size();
    switch (b.constraint) {
      case Constraint::Free:
        std::copy(in, in + n, out);
        break;
      case Constraint::Positive:
        for (std::size_t i = 0; i < n; ++i) {
          out[i] = std::exp(in[i]);
          log_jac += in[i];
        }
        break;
      case Constraint::OrderedIncreasing:
        if (n == 0) break;
        out[0] = in[0];
        for (std::size_t i = 1; i < n; ++i) {
          out[i] = out[i - 1] + std::exp(in[i]);
          log_jac += in[i];
        }
        break;
      case Constraint::CorrelationCholesky: {
        const std::size_t K = b.shape[0];
        log_jac += corr_cholesky_impl(in, K, out);
        break;
      }
      case Constraint::UnitScaledPositive: {
        if (n == 0) break;
        double last = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
          out[i] = std::exp(in[i]);
          last -= in[i];
        }
        out[n - 1] = std::exp(last);
        break;
      }
    }
  }
  return log_jac;
}

std::vector<double> ParameterSpace::untransform(std::span<const double> c) const {
  if (c.size() != constrained_dim_) throw ShapeError("constrained vector has wrong length");
  std::vector<double> u(unconstrained_dim_);
  for (const auto& b : blocks_) {
    const double* in = c.data() + b.constrained_offset;
    double* out = u.data() + b.unconstrained_offset;
    const std::size_t n = b.size();
    switch (b.constraint) {
      case Constraint::Free:
        std::copy(in, in + n, out);
        break;
      case Constraint::Positive:
        for (std::size_t i = 0; i < n; ++i) {
          if (!(in[i] > 0.0)) throw DomainError("block '" + b.name + "' requires positive values");
          out[i] = std::log(in[i]);
        }
        break;
      case Constraint::OrderedIncreasing:
        if (n == 0) break;
        out[0] = in[0];
        for (std::size_t i = 1; i < n; ++i) {
          if (!(in[i] > in[i - 1])) {
            throw DomainError("block '" + b.name + "' requires strictly increasing values");
          }
          out[i] = std::log(in[i] - in[i - 1]);
        }
        break;
      case Constraint::CorrelationCholesky: {
        auto y = corr_cholesky_untransform(std::span<const double>(in, n), b.shape[0]);
        std::copy(y.begin(), y.end(), out);
        break;
      }
      case Constraint::UnitScaledPositive: {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (!(in[i] > 0.0)) throw DomainError("block '" + b.name + "' requires positive values");
          total += std::log(in[i]);
        }
        if (std::fabs(total) > 1e-8 * static_cast<double>(n)) {
          throw DomainError("block '" + b.name + "' requires a product of one");
        }
        for (std::size_t i = 0; i + 1 < n; ++i) out[i] = std::log(in[i]);
        break;
      }
    }
  }
  return u;
}

void ParameterSpace::backprop(std::span<const double> u, std::span<const double> c,
                              std::span<const double> gc, std::span<double> gu) const {
  if (u.size() != unconstrained_dim_ || gu.size() != unconstrained_dim_ ||
      c.size() != constrained_dim_ || gc.size() != constrained_dim_) {
    throw ShapeError("backprop buffers have inconsistent lengths");
  }
  for (const auto& b : blocks_) {
    const double* uin = u.data() + b.unconstrained_offset;
    const double* x = c.data() + b.constrained_offset;
    const double* g = gc.data() + b.constrained_offset;
    double* out = gu.data() + b.unconstrained_offset;
    const std::size_t n = b.size();
    switch (b.constraint) {
      case Constraint::Free:
        std::copy(g, g + n, out);
        break;
      case Constraint::Positive:
        for (std::size_t i = 0; i < n; ++i) out[i] = g[i] * x[i] + 1.0;
        break;
      case Constraint::OrderedIncreasing: {
        if (n == 0) break;
        double tail = 0.0;
        for (std::size_t i = n; i-- > 1;) {
          tail += g[i];
          out[i] = tail * (x[i] - x[i - 1]) + 1.0;
        }
        out[0] = tail + g[0];
        break;
      }
      case Constraint::CorrelationCholesky: {
        // Row i: r_0 = 1, L_ij = z_j sqrt(r_j), r_{j+1} = r_j (1 - z_j^2),
        // L_ii = sqrt(r_i). Reverse pass carries the adjoint of r.
        const std::size_t K = b.shape[0];
        std::vector<double> r(K + 1), z(K);
        std::size_t k0 = 0;
        for (std::size_t i = 1; i < K; ++i) {
          double sum_sq = 0.0;
          for (std::size_t j = 0; j < i; ++j) {
            z[j] = std::tanh(uin[k0 + j]);
            r[j] = 1.0 - sum_sq;
            sum_sq += x[i * K + j] * x[i * K + j];
          }
          r[i] = 1.0 - sum_sq;
          double ar = g[i * K + i] * 0.5 / x[i * K + i];
          for (std::size_t j = i; j-- > 0;) {
            const double root = std::sqrt(r[j]);
            const double gz = g[i * K + j] * root - 2.0 * ar * r[j] * z[j];
            out[k0 + j] = gz * (1.0 - z[j] * z[j]) - 2.0 * z[j];
            ar = g[i * K + j] * z[j] * 0.5 / root + ar * (1.0 - z[j] * z[j]) + 0.5 / r[j];
          }
          k0 += i;
        }
        break;
      }
      case Constraint::UnitScaledPositive: {
        if (n == 0) break;
        const double last = g[n - 1] * x[n - 1];
        for (std::size_t i = 0; i + 1 < n; ++i) out[i] = g[i] * x[i] - last;
        break;
      }
    }
  }
}

std::vector<std::string> ParameterSpace::element_names() const {
  std::vector<std::string> names;
  names.reserve(constrained_dim_);
  for (const auto& b : blocks_) {
    if (b.shape.empty()) {
      names.push_back(b.name);
    } else if (b.shape.size() == 1) {
      for (std::size_t i = 0; i < b.shape[0]; ++i) {
        names.push_back(b.name + "[" + std::to_string(i + 1) + "]");
      }
    } else {
      const std::size_t cols = b.size() / b.shape[0];
      for (std::size_t r = 0; r < b.shape[0]; ++r) {
        for (std::size_t col = 0; col < cols; ++col) {
          names.push_back(b.name + "[" + std::to_string(r + 1) + "," + std::to_string(col + 1) + "]");
        }
      }
    }
  }
  return names;
}

double corr_cholesky_transform(std::span<const double> y, std::size_t K, std::span<double> factor) {
  if (y.size() != K * (K - 1) / 2 || factor.size() != K * K) {
    throw ShapeError("correlation Cholesky transform: wrong input or output length");
  }
  return corr_cholesky_impl(y.data(), K, factor.data());
}

std::vector<double> corr_cholesky_untransform(std::span<const double> L, std::size_t K) {
  if (L.size() != K * K) throw ShapeError("correlation Cholesky factor must have K*K entries");
  std::vector<double> y;
  y.reserve(K * (K - 1) / 2);
  for (std::size_t i = 0; i < K; ++i) {
    double sum_sq = 0.0;
    for (std::size_t j = 0; j < K; ++j) sum_sq += L[i * K + j] * L[i * K + j];
    if (std::fabs(sum_sq - 1.0) > 1e-8) throw DomainError("Cholesky factor rows must have unit norm");
    for (std::size_t j = i + 1; j < K; ++j) {
      if (L[i * K + j] != 0.0) throw DomainError("Cholesky factor must be lower triangular");
    }
    if (!(L[i * K + i] > 0.0)) throw DomainError("Cholesky factor needs a positive diagonal");
  }
  for (std::size_t i = 1; i < K; ++i) {
    double sum_sq = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double z = L[i * K + j] / std::sqrt(1.0 - sum_sq);
      y.push_back(std::atanh(z));
      sum_sq += L[i * K + j] * L[i * K + j];
    }
  }
  return y;
}

}  // namespace fpirt
