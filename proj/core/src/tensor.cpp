#include "avec/tensor.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace avec {

namespace {

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void round_to_precision(Tensor& t) {
  if (t.precision() == Precision::f32) {
    for (double& v : t.values_mut()) v = static_cast<double>(static_cast<float>(v));
  }
}

// Iterates every 1-D lane of `shape` along `axis`, calling fn(base, stride).
template <typename Fn>
void for_each_lane(const Shape& shape, std::size_t axis, Fn&& fn) {
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  const std::size_t len = shape[axis];
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      fn(o * len * inner + in, inner);
    }
  }
  (void)len;
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) {
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->values.assign(shape_product(impl_->shape), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
  if (shape_product(shape) != values.size()) {
    throw std::invalid_argument("tensor: shape " + shape_str(shape) + " needs " +
                                std::to_string(shape_product(shape)) + " values, got " +
                                std::to_string(values.size()));
  }
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
}

Tensor Tensor::scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

Tensor Tensor::row(std::vector<double> values) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values));
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw std::invalid_argument("tensor: axis out of range");
  return impl_->shape[axis];
}

std::size_t Tensor::size() const { return impl_->values.size(); }

std::span<const double> Tensor::values() const { return impl_->values; }
std::span<double> Tensor::values_mut() { return impl_->values; }

double Tensor::operator[](std::size_t i) const { return impl_->values[i]; }
double& Tensor::mut(std::size_t i) { return impl_->values[i]; }

double Tensor::at(std::size_t i, std::size_t j) const {
  return impl_->values[i * impl_->shape[1] + j];
}

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("tensor: item() on non-scalar of shape " + shape_str(shape()));
  }
  return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
  impl_->requires_grad = v;
  return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("tensor: gradient not populated");
  return impl_->grad;
}

void Tensor::ensure_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
}

void Tensor::zero_grad() { impl_->grad.clear(); }

void Tensor::accumulate_grad(std::span<const double> g) {
  ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) impl_->grad[i] += g[i];
}

Precision Tensor::precision() const { return impl_->precision; }

Tensor& Tensor::set_precision(Precision p) {
  impl_->precision = p;
  return *this;
}

Tensor Tape::make_output(Shape shape, std::initializer_list<const Tensor*> inputs) {
  Tensor out(std::move(shape));
  bool needs_grad = false;
  Precision prec = Precision::f64;
  for (const Tensor* in : inputs) {
    needs_grad = needs_grad || in->requires_grad();
    if (in->precision() == Precision::f32) prec = Precision::f32;
  }
  out.set_requires_grad(recording_ && needs_grad);
  out.set_precision(prec);
  return out;
}

void Tape::record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
  }
  if (replayed_) throw std::logic_error("backward: tape already replayed");
  replayed_ = true;
  if (!loss.requires_grad()) return;  // nothing reachable
  Tensor root = loss;
  root.ensure_grad();
  root.impl_->grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = make_output({m, n}, {&a, &b});
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* po = out.values_mut().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += pa[i * k + t] * pb[t * n + j];
      po[i * n + j] = acc;
    }
  }
  round_to_precision(out);
  if (out.requires_grad()) {
    record([a = a, b = b, out, m, k, n]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      if (a.requires_grad()) {
        a.ensure_grad();
        double* ga = a.impl_->grad.data();
        const double* pb = b.values().data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t t = 0; t < k; ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * pb[t * n + j];
            ga[i * k + t] += acc;
          }
      }
      if (b.requires_grad()) {
        b.ensure_grad();
        double* gb = b.impl_->grad.data();
        const double* pa = a.values().data();
        for (std::size_t t = 0; t < k; ++t)
          for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) acc += pa[i * k + t] * g[i * n + j];
            gb[t * n + j] += acc;
          }
      }
    });
  }
  return out;
}

Tensor Tape::matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw std::invalid_argument("matmul_nt: incompatible shapes " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Tensor out = make_output({m, n}, {&a, &b});
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* po = out.values_mut().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += pa[i * k + t] * pb[j * k + t];
      po[i * n + j] = acc;
    }
  round_to_precision(out);
  if (out.requires_grad()) {
    record([a = a, b = b, out, m, k, n]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      if (a.requires_grad()) {
        a.ensure_grad();
        double* ga = a.impl_->grad.data();
        const double* pb = b.values().data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t t = 0; t < k; ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * pb[j * k + t];
            ga[i * k + t] += acc;
          }
      }
      if (b.requires_grad()) {
        b.ensure_grad();
        double* gb = b.impl_->grad.data();
        const double* pa = a.values().data();
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t t = 0; t < k; ++t) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) acc += g[i * n + j] * pa[i * k + t];
            gb[j * k + t] += acc;
          }
      }
    });
  }
  return out;
}

namespace {
void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}
}  // namespace

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out = make_output(a.shape(), {&a, &b});
  for (std::size_t i = 0; i < out.size(); ++i) out.mut(i) = a[i] + b[i];
  round_to_precision(out);
  if (out.requires_grad()) {
    record([a = a, b = b, out]() mutable {
      if (!out.has_grad()) return;
      if (a.requires_grad()) a.accumulate_grad(out.grad());
      if (b.requires_grad()) b.accumulate_grad(out.grad());
    });
  }
  return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out = make_output(a.shape(), {&a, &b});
  for (std::size_t i = 0; i < out.size(); ++i) out.mut(i) = a[i] - b[i];
  round_to_precision(out);
  if (out.requires_grad()) {
    record([a = a, b = b, out]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      if (a.requires_grad()) a.accumulate_grad(g);
      if (b.requires_grad()) {
        b.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) b.impl_->grad[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  Tensor out = make_output(a.shape(), {&a, &b});
  for (std::size_t i = 0; i < out.size(); ++i) out.mut(i) = a[i] * b[i];
  round_to_precision(out);
  if (out.requires_grad()) {
    record([a = a, b = b, out]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      if (a.requires_grad()) {
        a.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) a.impl_->grad[i] += g[i] * b[i];
      }
      if (b.requires_grad()) {
        b.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) b.impl_->grad[i] += g[i] * a[i];
      }
    });
  }
  return out;
}

Tensor Tape::scale(const Tensor& a, double c) {
  Tensor out = make_output(a.shape(), {&a});
  for (std::size_t i = 0; i < out.size(); ++i) out.mut(i) = a[i] * c;
  round_to_precision(out);
  if (out.requires_grad()) {
    record([a = a, out, c]() mutable {
      if (!out.has_grad()) return;
      a.ensure_grad();
      const auto g = out.grad();
      for (std::size_t i = 0; i < g.size(); ++i) a.impl_->grad[i] += g[i] * c;
    });
  }
  return out;
}

Tensor Tape::add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.rank() != 1) {
    throw std::invalid_argument("add_bias: bias must be rank-1, got " +
                                shape_str(bias.shape()));
  }
  if (x.rank() == 1) return add(x, bias);
  if (x.rank() != 2 || x.dim(1) != bias.dim(0)) {
    throw std::invalid_argument("add_bias: shape mismatch " + shape_str(x.shape()) +
                                " vs " + shape_str(bias.shape()));
  }
  const std::size_t n = x.dim(0), d = x.dim(1);
  Tensor out = make_output({n, d}, {&x, &bias});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.mut(i * d + j) = x[i * d + j] + bias[j];
  round_to_precision(out);
  if (out.requires_grad()) {
    record([x = x, bias = bias, out, n, d]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      if (x.requires_grad()) x.accumulate_grad(out.grad());
      if (bias.requires_grad()) {
        bias.ensure_grad();
        for (std::size_t j = 0; j < d; ++j) {
          double acc = 0.0;
          for (std::size_t i = 0; i < n; ++i) acc += g[i * d + j];
          bias.impl_->grad[j] += acc;
        }
      }
    });
  }
  return out;
}

Tensor Tape::exp(const Tensor& x) {
  Tensor out = make_output(x.shape(), {&x});
  for (std::size_t i = 0; i < out.size(); ++i) out.mut(i) = std::exp(x[i]);
  round_to_precision(out);
  if (out.requires_grad()) {
    record([x = x, out]() mutable {
      if (!out.has_grad()) return;
      x.ensure_grad();
      const auto g = out.grad();
      for (std::size_t i = 0; i < g.size(); ++i) x.impl_->grad[i] += g[i] * out[i];
    });
  }
  return out;
}

Tensor Tape::log(const Tensor& x) {
  Tensor out = make_output(x.shape(), {&x});
  for (std::size_t i = 0; i < out.size(); ++i) out.mut(i) = std::log(x[i]);
  round_to_precision(out);
  if (out.requires_grad()) {
    record([x = x, out]() mutable {
      if (!out.has_grad()) return;
      x.ensure_grad();
      const auto g = out.grad();
      for (std::size_t i = 0; i < g.size(); ++i) x.impl_->grad[i] += g[i] / x[i];
    });
  }
  return out;
}

Tensor Tape::gelu(const Tensor& x) {
  Tensor out = make_output(x.shape(), {&x});
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x[i];
    out.mut(i) = 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
  }
  round_to_precision(out);
  if (out.requires_grad()) {
    record([x = x, out]() mutable {
      if (!out.has_grad()) return;
      x.ensure_grad();
      const auto g = out.grad();
      constexpr double inv_sqrt_2pi = 0.3989422804014326779;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = x[i];
        const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        x.impl_->grad[i] += g[i] * (cdf + v * pdf);
      }
    });
  }
  return out;
}

Tensor Tape::softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(x.shape()));
  }
  Tensor out = make_output(x.shape(), {&x});
  const std::size_t len = x.dim(axis);
  for_each_lane(x.shape(), axis, [&](std::size_t base, std::size_t stride) {
    double mx = x[base];
    for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, x[base + i * stride]);
    double total = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double e = std::exp(x[base + i * stride] - mx);
      out.mut(base + i * stride) = e;
      total += e;
    }
    for (std::size_t i = 0; i < len; ++i) out.mut(base + i * stride) /= total;
  });
  round_to_precision(out);
  if (out.requires_grad()) {
    record([x = x, out, axis, len]() mutable {
      if (!out.has_grad()) return;
      x.ensure_grad();
      const double* g = out.grad().data();
      for_each_lane(x.shape(), axis, [&](std::size_t base, std::size_t stride) {
        double dot = 0.0;
        for (std::size_t i = 0; i < len; ++i)
          dot += g[base + i * stride] * out[base + i * stride];
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t k = base + i * stride;
          x.impl_->grad[k] += out[k] * (g[k] - dot);
        }
      });
    });
  }
  return out;
}

Tensor Tape::layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        double eps) {
  if (x.rank() < 1) throw std::invalid_argument("layer_norm: rank-0 input");
  const std::size_t d = x.shape().back();
  if (gamma.rank() != 1 || beta.rank() != 1 || gamma.dim(0) != d || beta.dim(0) != d) {
    throw std::invalid_argument("layer_norm: gamma/beta must be rank-1 of length " +
                                std::to_string(d));
  }
  if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be positive");
  const std::size_t slices = x.size() / d;
  Tensor out = make_output(x.shape(), {&x, &gamma, &beta});
  // Cache per-slice normalized values and inverse stddev for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(slices);
  for (std::size_t s = 0; s < slices; ++s) {
    const std::size_t base = s * d;
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += x[base + i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double c = x[base + i] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double istd = 1.0 / std::sqrt(var + eps);
    (*inv_std)[s] = istd;
    for (std::size_t i = 0; i < d; ++i) {
      const double h = (x[base + i] - mean) * istd;
      (*xhat)[base + i] = h;
      out.mut(base + i) = gamma[i] * h + beta[i];
    }
  }
  round_to_precision(out);
  if (out.requires_grad()) {
    record([x = x, gamma = gamma, beta = beta, out, xhat, inv_std, d, slices]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      for (std::size_t s = 0; s < slices; ++s) {
        const std::size_t base = s * d;
        if (gamma.requires_grad()) {
          gamma.ensure_grad();
          for (std::size_t i = 0; i < d; ++i)
            gamma.impl_->grad[i] += g[base + i] * (*xhat)[base + i];
        }
        if (beta.requires_grad()) {
          beta.ensure_grad();
          for (std::size_t i = 0; i < d; ++i) beta.impl_->grad[i] += g[base + i];
        }
        if (x.requires_grad()) {
          x.ensure_grad();
          double mean_dh = 0.0, mean_dh_xhat = 0.0;
          for (std::size_t i = 0; i < d; ++i) {
            const double dh = g[base + i] * gamma[i];
            mean_dh += dh;
            mean_dh_xhat += dh * (*xhat)[base + i];
          }
          mean_dh /= static_cast<double>(d);
          mean_dh_xhat /= static_cast<double>(d);
          for (std::size_t i = 0; i < d; ++i) {
            const double dh = g[base + i] * gamma[i];
            x.impl_->grad[base + i] +=
                (*inv_std)[s] * (dh - mean_dh - (*xhat)[base + i] * mean_dh_xhat);
          }
        }
      }
    });
  }
  return out;
}

Tensor Tape::row_l2_normalize(const Tensor& x, double eps) {
  if (x.rank() != 2) {
    throw std::invalid_argument("row_l2_normalize: expected rank-2, got " +
                                shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0), d = x.dim(1);
  Tensor out = make_output({n, d}, {&x});
  auto norms = std::make_shared<std::vector<double>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += x[i * d + j] * x[i * d + j];
    const double norm = std::max(std::sqrt(sq), eps);
    (*norms)[i] = norm;
    for (std::size_t j = 0; j < d; ++j) out.mut(i * d + j) = x[i * d + j] / norm;
  }
  round_to_precision(out);
  if (out.requires_grad()) {
    record([x = x, out, norms, n, d]() mutable {
      if (!out.has_grad()) return;
      x.ensure_grad();
      const double* g = out.grad().data();
      for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += g[i * d + j] * out[i * d + j];
        for (std::size_t j = 0; j < d; ++j) {
          x.impl_->grad[i * d + j] +=
              (g[i * d + j] - dot * out[i * d + j]) / (*norms)[i];
        }
      }
    });
  }
  return out;
}

Tensor Tape::mean_pool(const Tensor& x) {
  if (x.rank() != 2) {
    throw std::invalid_argument("mean_pool: expected rank-2 [tokens, d], got " +
                                shape_str(x.shape()));
  }
  const std::size_t tokens = x.dim(0), d = x.dim(1);
  if (tokens == 0) throw std::invalid_argument("mean_pool: empty input (zero tokens)");
  Tensor out = make_output({d}, {&x});
  for (std::size_t j = 0; j < d; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < tokens; ++i) acc += x[i * d + j];
    out.mut(j) = acc / static_cast<double>(tokens);
  }
  round_to_precision(out);
  if (out.requires_grad()) {
    record([x = x, out, tokens, d]() mutable {
      if (!out.has_grad()) return;
      x.ensure_grad();
      const auto g = out.grad();
      const double inv = 1.0 / static_cast<double>(tokens);
      for (std::size_t i = 0; i < tokens; ++i)
        for (std::size_t j = 0; j < d; ++j) x.impl_->grad[i * d + j] += g[j] * inv;
    });
  }
  return out;
}

Tensor Tape::row_sum(const Tensor& x) {
  if (x.rank() != 2) {
    throw std::invalid_argument("row_sum: expected rank-2, got " + shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0), m = x.dim(1);
  Tensor out = make_output({n}, {&x});
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += x[i * m + j];
    out.mut(i) = acc;
  }
  round_to_precision(out);
  if (out.requires_grad()) {
    record([x = x, out, n, m]() mutable {
      if (!out.has_grad()) return;
      x.ensure_grad();
      const auto g = out.grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) x.impl_->grad[i * m + j] += g[i];
    });
  }
  return out;
}

Tensor Tape::sum(const Tensor& x) {
  Tensor out = make_output({1}, {&x});
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
  out.mut(0) = acc;
  round_to_precision(out);
  if (out.requires_grad()) {
    record([x = x, out]() mutable {
      if (!out.has_grad()) return;
      x.ensure_grad();
      const double g = out.grad()[0];
      for (double& gi : x.impl_->grad) gi += g;
    });
  }
  return out;
}

Tensor Tape::reshape(const Tensor& x, Shape shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != x.size()) {
    throw std::invalid_argument("reshape: size mismatch " + shape_str(x.shape()) +
                                " -> " + shape_str(shape));
  }
  Tensor out = make_output(std::move(shape), {&x});
  for (std::size_t i = 0; i < x.size(); ++i) out.mut(i) = x[i];
  round_to_precision(out);
  if (out.requires_grad()) {
    record([x = x, out]() mutable {
      if (!out.has_grad()) return;
      x.accumulate_grad(out.grad());
    });
  }
  return out;
}

namespace {
// Rank-1 tensors count as a single row for concatenation purposes.
std::pair<std::size_t, std::size_t> rows_cols(const Tensor& t) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw std::invalid_argument("concat: expected rank-1 or rank-2, got " +
                              shape_str(t.shape()));
}
}  // namespace

Tensor Tape::concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::size_t cols = rows_cols(parts[0]).second;
  std::size_t rows = 0;
  bool needs_grad = false;
  Precision prec = Precision::f64;
  for (const Tensor& p : parts) {
    auto [r, c] = rows_cols(p);
    if (c != cols) {
      throw std::invalid_argument("concat_rows: column mismatch " + shape_str(p.shape()));
    }
    rows += r;
    needs_grad = needs_grad || p.requires_grad();
    if (p.precision() == Precision::f32) prec = Precision::f32;
  }
  Tensor out({rows, cols});
  out.set_requires_grad(recording_ && needs_grad);
  out.set_precision(prec);
  std::size_t row = 0;
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  for (const Tensor& p : inputs) {
    for (std::size_t i = 0; i < p.size(); ++i) out.mut(row * cols + i) = p[i];
    row += rows_cols(p).first;
  }
  round_to_precision(out);
  if (out.requires_grad()) {
    record([inputs, out, cols]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      std::size_t offset = 0;
      for (Tensor& p : inputs) {
        if (p.requires_grad()) p.accumulate_grad({g + offset, p.size()});
        offset += p.size();
      }
    });
  }
  return out;
}

Tensor Tape::concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t rows = rows_cols(parts[0]).first;
  std::size_t cols = 0;
  bool needs_grad = false;
  Precision prec = Precision::f64;
  for (const Tensor& p : parts) {
    auto [r, c] = rows_cols(p);
    if (r != rows) {
      throw std::invalid_argument("concat_cols: row mismatch " + shape_str(p.shape()));
    }
    cols += c;
    needs_grad = needs_grad || p.requires_grad();
    if (p.precision() == Precision::f32) prec = Precision::f32;
  }
  Tensor out({rows, cols});
  out.set_requires_grad(recording_ && needs_grad);
  out.set_precision(prec);
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  std::size_t col = 0;
  for (const Tensor& p : inputs) {
    const std::size_t c = rows_cols(p).second;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < c; ++j) out.mut(i * cols + col + j) = p[i * c + j];
    col += c;
  }
  round_to_precision(out);
  if (out.requires_grad()) {
    record([inputs, out, rows, cols]() mutable {
      if (!out.has_grad()) return;
      const double* g = out.grad().data();
      std::size_t col = 0;
      for (Tensor& p : inputs) {
        const std::size_t c = rows_cols(p).second;
        if (p.requires_grad()) {
          p.ensure_grad();
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < c; ++j)
              p.impl_->grad[i * c + j] += g[i * cols + col + j];
        }
        col += c;
      }
    });
  }
  return out;
}

Tensor Tape::gather_pairs(const Tensor& x,
                          std::span<const std::pair<std::size_t, std::size_t>> idx) {
  if (x.rank() != 2) {
    throw std::invalid_argument("gather_pairs: expected rank-2, got " +
                                shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0), m = x.dim(1);
  for (const auto& [i, j] : idx) {
    if (i >= n || j >= m) throw std::invalid_argument("gather_pairs: index out of range");
  }
  Tensor out = make_output({idx.size()}, {&x});
  for (std::size_t k = 0; k < idx.size(); ++k) out.mut(k) = x.at(idx[k].first, idx[k].second);
  round_to_precision(out);
  if (out.requires_grad()) {
    std::vector<std::pair<std::size_t, std::size_t>> saved(idx.begin(), idx.end());
    record([x = x, out, saved, m]() mutable {
      if (!out.has_grad()) return;
      x.ensure_grad();
      const auto g = out.grad();
      for (std::size_t k = 0; k < saved.size(); ++k)
        x.impl_->grad[saved[k].first * m + saved[k].second] += g[k];
    });
  }
  return out;
}

Tensor Tape::diag(const Tensor& x) {
  if (x.rank() != 2 || x.dim(0) != x.dim(1)) {
    throw std::invalid_argument("diag: expected square rank-2, got " +
                                shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0);
  Tensor out = make_output({n}, {&x});
  for (std::size_t i = 0; i < n; ++i) out.mut(i) = x.at(i, i);
  round_to_precision(out);
  if (out.requires_grad()) {
    record([x = x, out, n]() mutable {
      if (!out.has_grad()) return;
      x.ensure_grad();
      const auto g = out.grad();
      for (std::size_t i = 0; i < n; ++i) x.impl_->grad[i * n + i] += g[i];
    });
  }
  return out;
}

}  // namespace avec
