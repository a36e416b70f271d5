#ifndef ADCGS_TENSOR_TAPE_H_
#define ADCGS_TENSOR_TAPE_H_

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "adcgs/tensor/tensor.h"

// Tape-based reverse-mode automatic differentiation over a fixed op set.
// A Tape records one forward computation; backward() walks it in reverse.
// Tapes are single-threaded; independent tapes may live on different threads.
namespace adcgs {

template <typename T>
class Tape;

template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t size() const { return value().size(); }
  T item() const { return value()[0]; }

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf referencing an external parameter. Gradients accumulate into
  // `t.grad()` when the tape records gradients and t.requires_grad().
  Var<T> param(Tensor<T>& t);
  Var<T> constant(Tensor<T> value);
  Var<T> constant(Shape shape, std::vector<T> data) {
    return constant(Tensor<T>(std::move(shape), std::move(data)));
  }

  // Populates gradients of every reachable requires_grad leaf; reachable
  // or not, every leaf parameter on this tape ends with an allocated grad.
  void backward(Var<T> loss);

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  // Op-implementation interface.
  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
  std::vector<T>& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
  Var<T> push(Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn fn);

 private:
  struct Node {
    Tensor<T> value;
    std::vector<T> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Tensor<T>* leaf = nullptr;
    bool needs_grad = false;
  };

  std::deque<Node> nodes_;
  bool grad_enabled_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

// --- ops -------------------------------------------------------------------
// Shapes are rank-2 [rows × cols] unless noted; rank-1 tensors act as one row.

template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
template <typename T> Var<T> add(Var<T> a, Var<T> b);
// a[n×m] + b[1×m] broadcast over rows.
template <typename T> Var<T> add_row(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T s);
template <typename T> Var<T> add_scalar(Var<T> a, T s);
template <typename T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <typename T> Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t end);
template <typename T> Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t end);
template <typename T> Var<T> gather_rows(Var<T> a, std::vector<std::size_t> index);
template <typename T> Var<T> reshape(Var<T> a, Shape shape);
template <typename T> Var<T> tanh(Var<T> a);
template <typename T> Var<T> relu(Var<T> a);
template <typename T> Var<T> exp(Var<T> a);
template <typename T> Var<T> sigmoid(Var<T> a);
// Subgradient 0 at and beyond the bounds.
template <typename T> Var<T> clamp(Var<T> a, T lo, T hi);
template <typename T> Var<T> detach(Var<T> a);
template <typename T> Var<T> sum(Var<T> a);
template <typename T> Var<T> mean(Var<T> a);
template <typename T> Var<T> mse(Var<T> a, Var<T> b);

// round(a/step)·step with a straight-through gradient to `a` only.
template <typename T> Var<T> quantize_ste(Var<T> a, Var<T> step);

// [n×d] → [n×2·d·bands]: for each column c and band b, (sin(2^b x), cos(2^b x)).
template <typename T> Var<T> sinusoidal_embedding(Var<T> a, std::size_t bands);

// Elementwise −log2 of the discretized-Gaussian mass of a bin of width
// `step` centred at `x`, floored at `floor_p`. All operands share a shape.
template <typename T>
Var<T> gaussian_bits(Var<T> x, Var<T> mu, Var<T> sigma, Var<T> step, T floor_p);

// Elementwise −log2 of the unit-bin logistic mass at `x`; `loc` and `scale`
// are [1×c] and broadcast over the rows of x[n×c].
template <typename T>
Var<T> logistic_bits(Var<T> x, Var<T> loc, Var<T> scale, T floor_p);

}  // namespace adcgs

#endif  // ADCGS_TENSOR_TAPE_H_
