#ifndef ADCGS_TENSOR_MLP_H_
#define ADCGS_TENSOR_MLP_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "adcgs/tensor/tape.h"

namespace adcgs {

enum class Activation { kRelu, kTanh };

// Layer widths from input to output. Hidden layers apply `activation`; the
// output layer is linear. With `residual`, every hidden layer whose input and
// output widths match becomes h + act(W h + b).
struct MlpSpec {
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::kRelu;
  bool residual = false;

  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t output_width() const { return layer_widths.back(); }
  std::size_t layer_count() const { return layer_widths.size() - 1; }
  bool is_skip_layer(std::size_t layer) const;
  // Throws ConfigError when the spec is malformed.
  void validate() const;
};

using Rng = std::mt19937_64;

template <typename T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpSpec spec, std::string name);

  const MlpSpec& spec() const { return spec_; }
  const std::string& name() const { return name_; }

  // Uniform Glorot initialisation of weights, zero biases.
  void init(Rng& rng, T gain = T(1));
  void zero_output_layer();
  void set_requires_grad(bool v);

  // Records the forward pass; parameters become tape leaves.
  Var<T> forward(Tape<T>& tape, Var<T> input);
  // Forward pass that treats parameters as constants.
  Var<T> apply(Tape<T>& tape, Var<T> input) const;
  // Forward pass from precomputed first-layer pre-activations (x·W0 + b0).
  // Used when the first layer is evaluated in pieces.
  Var<T> forward_from_first(Tape<T>& tape, Var<T> first_preact, Var<T> input_for_skip);

  Tensor<T>& weight(std::size_t layer) { return weights_[layer]; }
  Tensor<T>& bias(std::size_t layer) { return biases_[layer]; }
  const Tensor<T>& weight(std::size_t layer) const { return weights_[layer]; }
  const Tensor<T>& bias(std::size_t layer) const { return biases_[layer]; }

  // Parameter tensors in a fixed order with stable names.
  std::vector<std::pair<std::string, Tensor<T>*>> parameters();
  std::vector<std::pair<std::string, const Tensor<T>*>> parameters() const;
  std::size_t parameter_count() const;

  // Number of input rows pushed through this network since the last reset.
  std::uint64_t evaluations() const { return evaluations_; }
  void reset_evaluations() { evaluations_ = 0; }
  void count_evaluations(std::uint64_t rows) const { evaluations_ += rows; }

  template <typename U>
  Mlp<U> cast() const;

 private:
  Var<T> run(Tape<T>& tape, Var<T> input, bool as_params);
  Var<T> run_hidden(Tape<T>& tape, Var<T> first_preact, Var<T> input, bool as_params);

  MlpSpec spec_;
  std::string name_;
  std::vector<Tensor<T>> weights_;  // [in × out]
  std::vector<Tensor<T>> biases_;   // [1 × out]
  mutable std::uint64_t evaluations_ = 0;
};

template <typename T>
template <typename U>
Mlp<U> Mlp<T>::cast() const {
  Mlp<U> out(spec_, name_);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.weight(l) = weights_[l].template cast<U>();
    out.bias(l) = biases_[l].template cast<U>();
  }
  return out;
}

}  // namespace adcgs

#endif  // ADCGS_TENSOR_MLP_H_
