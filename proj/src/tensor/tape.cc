#include "adcgs/tensor/tape.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "adcgs/tensor/kernels.h"

namespace adcgs {

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

template <typename T>
Var<T> Tape<T>::param(Tensor<T>& t) {
  Node n;
  n.value = Tensor<T>(t.shape(), t.values());
  n.needs_grad = grad_enabled_ && t.requires_grad();
  n.leaf = n.needs_grad ? &t : nullptr;
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
std::vector<T>& Tape<T>::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
  return n.grad;
}

template <typename T>
Var<T> Tape<T>::push(Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  bool ng = false;
  if (grad_enabled_) {
    for (std::size_t i : inputs) ng = ng || nodes_[i].needs_grad;
  }
  n.needs_grad = ng;
  if (ng) n.backward = std::move(fn);
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_string(loss.shape()));
  }
  if (!grad_enabled_) throw ContractError("backward: tape was recorded without gradients");
  for (Node& n : nodes_) n.grad.clear();
  grad(loss.id())[0] = T(1);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
  }
  for (Node& n : nodes_) {
    if (!n.leaf) continue;
    std::vector<T>& g = n.leaf->grad();
    if (n.grad.empty()) continue;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  }
}

namespace {

template <typename T>
void require_same(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.size() != b.size() || a.rows() != b.rows()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

template <typename T>
void require_tape(const Var<T>& a, const Var<T>& b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
}

Shape matrix_shape(std::size_t r, std::size_t c) { return Shape{r, c}; }

// Unary elementwise op: forward f(x), backward g += gy · df(x, y).
template <typename T, typename F, typename D>
Var<T> unary(Var<T> a, F f, D df) {
  Tape<T>& tape = a.tape();
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return tape.push(std::move(y), {a.id()}, [df](Tape<T>& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const auto& x = t.value(in);
    const auto& y = t.value(self);
    const auto& gy = t.grad(self);
    auto& gx = t.grad(in);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * df(x[i], y[i]);
  });
}

template <typename T>
T std_normal_pdf(T x) {
  return T(0.3989422804014327) * std::exp(T(-0.5) * x * x);
}

// Φ(u) − Φ(l) for u > l without cancellation in the upper tail.
template <typename T>
T normal_interval(T l, T u) {
  constexpr T kInvSqrt2 = T(0.7071067811865476);
  if (l > T(0)) return T(0.5) * (std::erfc(l * kInvSqrt2) - std::erfc(u * kInvSqrt2));
  return T(0.5) * (std::erfc(-u * kInvSqrt2) - std::erfc(-l * kInvSqrt2));
}

template <typename T>
T sigm(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

// σ(u) − σ(l) for u > l, using σ(u) − σ(l) = σ(−l) − σ(−u) above zero.
template <typename T>
T logistic_interval(T l, T u) {
  if (l > T(0)) return sigm(-l) - sigm(-u);
  return sigm(u) - sigm(l);
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  require_tape(a, b);
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k || a.size() != n * k) {
    throw DimensionError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor<T> c(matrix_shape(n, m));
  kernels::matmul<T>(a.value().data(), b.value().data(), c.data(), n, k, m);
  return a.tape().push(std::move(c), {a.id(), b.id()}, [n, k, m](Tape<T>& t, std::size_t self) {
    const std::size_t ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    std::span<const T> gc(t.grad(self));
    if (t.needs_grad(ia)) {
      kernels::matmul_a_bt<T>(gc, t.value(ib).data(), std::span<T>(t.grad(ia)), n, k, m);
    }
    if (t.needs_grad(ib)) {
      kernels::matmul_at_b<T>(t.value(ia).data(), gc, std::span<T>(t.grad(ib)), n, k, m);
    }
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_tape(a, b);
  require_same(a, b, "add");
  Tensor<T> y(a.shape());
  const auto &av = a.value(), &bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  return a.tape().push(std::move(y), {a.id(), b.id()}, [](Tape<T>& t, std::size_t self) {
    for (std::size_t in : t.inputs(self)) {
      if (!t.needs_grad(in)) continue;
      const auto& gy = t.grad(self);
      auto& gx = t.grad(in);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    }
  });
}

template <typename T>
Var<T> add_row(Var<T> a, Var<T> b) {
  require_tape(a, b);
  const std::size_t n = a.rows(), m = a.cols();
  if (b.size() != m) {
    throw DimensionError("add_row: " + shape_string(a.shape()) + " + " + shape_string(b.shape()));
  }
  Tensor<T> y(a.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) y[i * m + j] = av[i * m + j] + bv[j];
  return a.tape().push(std::move(y), {a.id(), b.id()}, [n, m](Tape<T>& t, std::size_t self) {
    const std::size_t ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const auto& gy = t.grad(self);
    if (t.needs_grad(ia)) {
      auto& ga = t.grad(ia);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    }
    if (t.needs_grad(ib)) {
      auto& gb = t.grad(ib);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gb[j] += gy[i * m + j];
    }
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_tape(a, b);
  require_same(a, b, "sub");
  Tensor<T> y(a.shape());
  const auto &av = a.value(), &bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  return a.tape().push(std::move(y), {a.id(), b.id()}, [](Tape<T>& t, std::size_t self) {
    const std::size_t ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const auto& gy = t.grad(self);
    if (t.needs_grad(ia)) {
      auto& g = t.grad(ia);
      for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
    }
    if (t.needs_grad(ib)) {
      auto& g = t.grad(ib);
      for (std::size_t i = 0; i < gy.size(); ++i) g[i] -= gy[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_tape(a, b);
  require_same(a, b, "mul");
  Tensor<T> y(a.shape());
  const auto &av = a.value(), &bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  return a.tape().push(std::move(y), {a.id(), b.id()}, [](Tape<T>& t, std::size_t self) {
    const std::size_t ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const auto& gy = t.grad(self);
    if (t.needs_grad(ia)) {
      auto& g = t.grad(ia);
      const auto& bv = t.value(ib);
      for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * bv[i];
    }
    if (t.needs_grad(ib)) {
      auto& g = t.grad(ib);
      const auto& av = t.value(ia);
      for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
  return unary<T>(a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> add_scalar(Var<T> a, T s) {
  return unary<T>(a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::vector<std::size_t> widths, ids;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_tape(parts[0], p);
    if (p.rows() != n) throw DimensionError("concat_cols: row count mismatch");
    widths.push_back(p.cols());
    ids.push_back(p.id());
    total += p.cols();
  }
  Tensor<T> y(matrix_shape(n, total));
  std::size_t off = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto& v = parts[pi].value();
    const std::size_t w = widths[pi];
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(v.data().data() + i * w, w, y.data().data() + i * total + off);
    off += w;
  }
  return parts[0].tape().push(std::move(y), ids, [n, widths, total](Tape<T>& t, std::size_t self) {
    const auto& gy = t.grad(self);
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < widths.size(); ++pi) {
      const std::size_t in = t.inputs(self)[pi];
      const std::size_t w = widths[pi];
      if (t.needs_grad(in)) {
        auto& g = t.grad(in);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < w; ++j) g[i * w + j] += gy[i * total + off + j];
      }
      off += w;
    }
  });
}

template <typename T>
Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t end) {
  const std::size_t n = a.rows(), m = a.cols();
  if (begin > end || end > m) throw DimensionError("slice_cols: range out of bounds");
  const std::size_t w = end - begin;
  Tensor<T> y(matrix_shape(n, w));
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(a.value().data().data() + i * m + begin, w, y.data().data() + i * w);
  return a.tape().push(std::move(y), {a.id()}, [n, m, w, begin](Tape<T>& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const auto& gy = t.grad(self);
    auto& g = t.grad(in);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * m + begin + j] += gy[i * w + j];
  });
}

template <typename T>
Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t end) {
  const std::size_t n = a.rows(), m = a.cols();
  if (begin > end || end > n) throw DimensionError("slice_rows: range out of bounds");
  std::vector<T> data(a.value().data().begin() + begin * m, a.value().data().begin() + end * m);
  Tensor<T> y(matrix_shape(end - begin, m), std::move(data));
  return a.tape().push(std::move(y), {a.id()}, [m, begin](Tape<T>& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const auto& gy = t.grad(self);
    auto& g = t.grad(in);
    for (std::size_t i = 0; i < gy.size(); ++i) g[begin * m + i] += gy[i];
  });
}

template <typename T>
Var<T> gather_rows(Var<T> a, std::vector<std::size_t> index) {
  const std::size_t n = a.rows(), m = a.cols();
  Tensor<T> y(matrix_shape(index.size(), m));
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= n) throw DimensionError("gather_rows: index out of range");
    std::copy_n(a.value().data().data() + index[i] * m, m, y.data().data() + i * m);
  }
  return a.tape().push(std::move(y), {a.id()},
                       [m, index = std::move(index)](Tape<T>& t, std::size_t self) {
                         const std::size_t in = t.inputs(self)[0];
                         if (!t.needs_grad(in)) return;
                         const auto& gy = t.grad(self);
                         auto& g = t.grad(in);
                         for (std::size_t i = 0; i < index.size(); ++i)
                           for (std::size_t j = 0; j < m; ++j) g[index[i] * m + j] += gy[i * m + j];
                       });
}

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  Tensor<T> y(std::move(shape), a.value().values());
  return a.tape().push(std::move(y), {a.id()}, [](Tape<T>& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const auto& gy = t.grad(self);
    auto& g = t.grad(in);
    for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
  });
}

template <typename T>
Var<T> tanh(Var<T> a) {
  return unary<T>(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> relu(Var<T> a) {
  return unary<T>(a, [](T x) { return x > T(0) ? x : T(0); },
                  [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> exp(Var<T> a) {
  return unary<T>(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  return unary<T>(a, [](T x) { return sigm(x); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> clamp(Var<T> a, T lo, T hi) {
  return unary<T>(a, [lo, hi](T x) { return std::clamp(x, lo, hi); },
                  [lo, hi](T x, T) { return (x > lo && x < hi) ? T(1) : T(0); });
}

template <typename T>
Var<T> detach(Var<T> a) {
  return a.tape().constant(a.value());
}

template <typename T>
Var<T> sum(Var<T> a) {
  T s = T(0);
  for (T v : a.value().data()) s += v;
  return a.tape().push(Tensor<T>(Shape{1}, std::vector<T>{s}), {a.id()},
                       [](Tape<T>& t, std::size_t self) {
                         const std::size_t in = t.inputs(self)[0];
                         if (!t.needs_grad(in)) return;
                         const T gy = t.grad(self)[0];
                         for (T& g : t.grad(in)) g += gy;
                       });
}

template <typename T>
Var<T> mean(Var<T> a) {
  return scale(sum(a), T(1) / static_cast<T>(std::max<std::size_t>(a.size(), 1)));
}

template <typename T>
Var<T> mse(Var<T> a, Var<T> b) {
  require_tape(a, b);
  require_same(a, b, "mse");
  const std::size_t n = a.size();
  T s = T(0);
  const auto &av = a.value(), &bv = b.value();
  for (std::size_t i = 0; i < n; ++i) {
    const T d = av[i] - bv[i];
    s += d * d;
  }
  s /= static_cast<T>(n);
  return a.tape().push(Tensor<T>(Shape{1}, std::vector<T>{s}), {a.id(), b.id()},
                       [n](Tape<T>& t, std::size_t self) {
                         const std::size_t ia = t.inputs(self)[0], ib = t.inputs(self)[1];
                         const T gy = t.grad(self)[0] * T(2) / static_cast<T>(n);
                         const auto& av = t.value(ia);
                         const auto& bv = t.value(ib);
                         if (t.needs_grad(ia)) {
                           auto& g = t.grad(ia);
                           for (std::size_t i = 0; i < n; ++i) g[i] += gy * (av[i] - bv[i]);
                         }
                         if (t.needs_grad(ib)) {
                           auto& g = t.grad(ib);
                           for (std::size_t i = 0; i < n; ++i) g[i] -= gy * (av[i] - bv[i]);
                         }
                       });
}

template <typename T>
Var<T> quantize_ste(Var<T> a, Var<T> step) {
  require_tape(a, step);
  require_same(a, step, "quantize_ste");
  Tensor<T> y(a.shape());
  const auto &av = a.value(), &sv = step.value();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T s = sv[i];
    y[i] = std::nearbyint(av[i] / s) * s + T(0);  // no negative zeros
  }
  return a.tape().push(std::move(y), {a.id(), step.id()}, [](Tape<T>& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const auto& gy = t.grad(self);
    auto& g = t.grad(in);
    for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
  });
}

template <typename T>
Var<T> sinusoidal_embedding(Var<T> a, std::size_t bands) {
  const std::size_t n = a.rows(), d = a.cols(), w = d * 2 * bands;
  Tensor<T> y({n, w});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double x = a.value().at(r, c);
      for (std::size_t b = 0; b < bands; ++b) {
        const double arg = std::ldexp(x, static_cast<int>(b));
        y.at(r, (c * bands + b) * 2) = static_cast<T>(std::sin(arg));
        y.at(r, (c * bands + b) * 2 + 1) = static_cast<T>(std::cos(arg));
      }
    }
  }
  return a.tape().push(std::move(y), {a.id()}, [n, d, bands, w](Tape<T>& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const auto& gy = t.grad(self);
    const Tensor<T>& x = t.value(in);
    auto& g = t.grad(in);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        double acc = 0.0;
        for (std::size_t b = 0; b < bands; ++b) {
          const double f = std::ldexp(1.0, static_cast<int>(b));
          const double arg = f * x.at(r, c);
          const std::size_t k = r * w + (c * bands + b) * 2;
          acc += f * (gy[k] * std::cos(arg) - gy[k + 1] * std::sin(arg));
        }
        g[r * d + c] += static_cast<T>(acc);
      }
    }
  });
}

template <typename T>
Var<T> gaussian_bits(Var<T> x, Var<T> mu, Var<T> sigma, Var<T> step, T floor_p) {
  require_same(x, mu, "gaussian_bits");
  require_same(x, sigma, "gaussian_bits");
  require_same(x, step, "gaussian_bits");
  const std::size_t n = x.size();
  Tensor<T> y(x.shape());
  const auto &xv = x.value(), &mv = mu.value(), &sgv = sigma.value(), &stv = step.value();
  for (std::size_t i = 0; i < n; ++i) {
    const T s = sgv[i], h = stv[i] / T(2);
    const T u = (xv[i] + h - mv[i]) / s;
    const T l = (xv[i] - h - mv[i]) / s;
    const T p = std::max(normal_interval(l, u), floor_p);
    y[i] = -std::log2(p);
  }
  return x.tape().push(
      std::move(y), {x.id(), mu.id(), sigma.id(), step.id()},
      [n, floor_p](Tape<T>& t, std::size_t self) {
        const auto& in = t.inputs(self);
        const auto& xv = t.value(in[0]);
        const auto& mv = t.value(in[1]);
        const auto& sv = t.value(in[2]);
        const auto& qv = t.value(in[3]);
        const auto& gy = t.grad(self);
        std::vector<T>* gx = t.needs_grad(in[0]) ? &t.grad(in[0]) : nullptr;
        std::vector<T>* gm = t.needs_grad(in[1]) ? &t.grad(in[1]) : nullptr;
        std::vector<T>* gs = t.needs_grad(in[2]) ? &t.grad(in[2]) : nullptr;
        std::vector<T>* gq = t.needs_grad(in[3]) ? &t.grad(in[3]) : nullptr;
        constexpr T kInvLn2 = T(1.4426950408889634);
        for (std::size_t i = 0; i < n; ++i) {
          const T s = sv[i], h = qv[i] / T(2);
          const T u = (xv[i] + h - mv[i]) / s;
          const T l = (xv[i] - h - mv[i]) / s;
          const T p = normal_interval(l, u);
          if (p <= floor_p) continue;
          const T dbits_dp = -gy[i] * kInvLn2 / p;
          const T pu = std_normal_pdf(u), pl = std_normal_pdf(l);
          const T dpdx = (pu - pl) / s;
          if (gx) (*gx)[i] += dbits_dp * dpdx;
          if (gm) (*gm)[i] -= dbits_dp * dpdx;
          if (gs) (*gs)[i] += dbits_dp * (-(pu * u - pl * l) / s);
          if (gq) (*gq)[i] += dbits_dp * (pu + pl) / (T(2) * s);
        }
      });
}

template <typename T>
Var<T> logistic_bits(Var<T> x, Var<T> loc, Var<T> scale_v, T floor_p) {
  const std::size_t n = x.rows(), c = x.cols();
  if (loc.size() != c || scale_v.size() != c) {
    throw DimensionError("logistic_bits: per-channel parameters must have " + std::to_string(c) +
                         " entries");
  }
  Tensor<T> y(x.shape());
  const auto &xv = x.value(), &lv = loc.value(), &scv = scale_v.value();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const T s = scv[j];
      const T v = xv[i * c + j] - lv[j];
      const T p = std::max(logistic_interval((v - T(0.5)) / s, (v + T(0.5)) / s), floor_p);
      y[i * c + j] = -std::log2(p);
    }
  }
  return x.tape().push(
      std::move(y), {x.id(), loc.id(), scale_v.id()},
      [n, c, floor_p](Tape<T>& t, std::size_t self) {
        const auto& in = t.inputs(self);
        const auto& xv = t.value(in[0]);
        const auto& lv = t.value(in[1]);
        const auto& sv = t.value(in[2]);
        const auto& gy = t.grad(self);
        std::vector<T>* gx = t.needs_grad(in[0]) ? &t.grad(in[0]) : nullptr;
        std::vector<T>* gl = t.needs_grad(in[1]) ? &t.grad(in[1]) : nullptr;
        std::vector<T>* gs = t.needs_grad(in[2]) ? &t.grad(in[2]) : nullptr;
        constexpr T kInvLn2 = T(1.4426950408889634);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            const std::size_t e = i * c + j;
            const T s = sv[j];
            const T v = xv[e] - lv[j];
            const T u = (v + T(0.5)) / s, l = (v - T(0.5)) / s;
            const T p = logistic_interval(l, u);
            if (p <= floor_p) continue;
            const T dbits_dp = -gy[e] * kInvLn2 / p;
            const T su = sigm(u), sl = sigm(l);
            const T du = su * (T(1) - su), dl = sl * (T(1) - sl);
            const T dpdx = (du - dl) / s;
            if (gx) (*gx)[e] += dbits_dp * dpdx;
            if (gl) (*gl)[j] -= dbits_dp * dpdx;
            if (gs) (*gs)[j] += dbits_dp * (-(du * u - dl * l) / s);
          }
        }
      });
}

#define ADCGS_INSTANTIATE_OPS(T)                                                              \
  template class Tape<T>;                                                                     \
  template Var<T> matmul(Var<T>, Var<T>);                                                     \
  template Var<T> add(Var<T>, Var<T>);                                                        \
  template Var<T> add_row(Var<T>, Var<T>);                                                    \
  template Var<T> sub(Var<T>, Var<T>);                                                        \
  template Var<T> mul(Var<T>, Var<T>);                                                        \
  template Var<T> scale(Var<T>, T);                                                           \
  template Var<T> add_scalar(Var<T>, T);                                                      \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                    \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                               \
  template Var<T> slice_rows(Var<T>, std::size_t, std::size_t);                               \
  template Var<T> gather_rows(Var<T>, std::vector<std::size_t>);                              \
  template Var<T> reshape(Var<T>, Shape);                                                     \
  template Var<T> tanh(Var<T>);                                                               \
  template Var<T> relu(Var<T>);                                                               \
  template Var<T> exp(Var<T>);                                                                \
  template Var<T> sigmoid(Var<T>);                                                            \
  template Var<T> clamp(Var<T>, T, T);                                                        \
  template Var<T> detach(Var<T>);                                                             \
  template Var<T> sum(Var<T>);                                                                \
  template Var<T> mean(Var<T>);                                                               \
  template Var<T> mse(Var<T>, Var<T>);                                                        \
  template Var<T> quantize_ste(Var<T>, Var<T>);                                               \
  template Var<T> sinusoidal_embedding(Var<T>, std::size_t);                                  \
  template Var<T> gaussian_bits(Var<T>, Var<T>, Var<T>, Var<T>, T);                           \
  template Var<T> logistic_bits(Var<T>, Var<T>, Var<T>, T);

ADCGS_INSTANTIATE_OPS(float)
ADCGS_INSTANTIATE_OPS(double)

}  // namespace adcgs
