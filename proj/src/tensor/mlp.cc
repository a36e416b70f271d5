#include "adcgs/tensor/mlp.h"

#include <cmath>

namespace adcgs {

bool MlpSpec::is_skip_layer(std::size_t layer) const {
  return residual && layer + 1 < layer_count() &&
         layer_widths[layer] == layer_widths[layer + 1];
}

void MlpSpec::validate() const {
  if (layer_widths.size() < 2) throw ConfigError("MLP needs at least input and output widths");
  for (std::size_t w : layer_widths) {
    if (w == 0) throw ConfigError("MLP layer widths must be positive");
  }
  if (residual) {
    bool any = false;
    for (std::size_t l = 0; l < layer_count(); ++l) any = any || is_skip_layer(l);
    if (!any) throw ConfigError("residual MLP has no hidden layer with matching widths");
  }
}

template <typename T>
Mlp<T>::Mlp(MlpSpec spec, std::string name) : spec_(std::move(spec)), name_(std::move(name)) {
  spec_.validate();
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    weights_.emplace_back(Shape{spec_.layer_widths[l], spec_.layer_widths[l + 1]});
    biases_.emplace_back(Shape{1, spec_.layer_widths[l + 1]});
  }
}

template <typename T>
void Mlp<T>::init(Rng& rng, T gain) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const double fan = static_cast<double>(weights_[l].dim(0) + weights_[l].dim(1));
    const double limit = static_cast<double>(gain) * std::sqrt(6.0 / fan);
    std::uniform_real_distribution<double> u(-limit, limit);
    for (T& w : weights_[l].values()) w = static_cast<T>(u(rng));
    for (T& b : biases_[l].values()) b = T(0);
  }
}

template <typename T>
void Mlp<T>::zero_output_layer() {
  for (T& w : weights_.back().values()) w = T(0);
  for (T& b : biases_.back().values()) b = T(0);
}

template <typename T>
void Mlp<T>::set_requires_grad(bool v) {
  for (auto& w : weights_) w.set_requires_grad(v);
  for (auto& b : biases_) b.set_requires_grad(v);
}

template <typename T>
Var<T> Mlp<T>::run_hidden(Tape<T>& tape, Var<T> first_preact, Var<T> input, bool as_params) {
  auto leaf = [&](Tensor<T>& t) { return as_params ? tape.param(t) : tape.constant(t); };
  const std::size_t layers = spec_.layer_count();
  Var<T> z = first_preact;
  Var<T> h = input;
  for (std::size_t l = 0;; ++l) {
    if (l + 1 == layers) return z;
    Var<T> a = spec_.activation == Activation::kRelu ? relu(z) : tanh(z);
    if (spec_.is_skip_layer(l)) {
      if (!h.valid()) throw ContractError(name_ + ": residual first layer needs its input");
      a = add(h, a);
    }
    h = a;
    z = add_row(matmul(h, leaf(weights_[l + 1])), leaf(biases_[l + 1]));
  }
}

template <typename T>
Var<T> Mlp<T>::run(Tape<T>& tape, Var<T> input, bool as_params) {
  if (input.cols() != spec_.input_width()) {
    throw DimensionError(name_ + ": input width " + std::to_string(input.cols()) +
                         " != expected " + std::to_string(spec_.input_width()));
  }
  count_evaluations(input.rows());
  auto leaf = [&](Tensor<T>& t) { return as_params ? tape.param(t) : tape.constant(t); };
  Var<T> z0 = add_row(matmul(input, leaf(weights_[0])), leaf(biases_[0]));
  return run_hidden(tape, z0, input, as_params);
}

template <typename T>
Var<T> Mlp<T>::forward(Tape<T>& tape, Var<T> input) {
  return run(tape, input, true);
}

template <typename T>
Var<T> Mlp<T>::apply(Tape<T>& tape, Var<T> input) const {
  return const_cast<Mlp<T>*>(this)->run(tape, input, false);
}

template <typename T>
Var<T> Mlp<T>::forward_from_first(Tape<T>& tape, Var<T> first_preact, Var<T> input_for_skip) {
  count_evaluations(first_preact.rows());
  return run_hidden(tape, first_preact, input_for_skip, true);
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Mlp<T>::parameters() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.emplace_back(name_ + ".w" + std::to_string(l), &weights_[l]);
    out.emplace_back(name_ + ".b" + std::to_string(l), &biases_[l]);
  }
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> Mlp<T>::parameters() const {
  std::vector<std::pair<std::string, const Tensor<T>*>> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.emplace_back(name_ + ".w" + std::to_string(l), &weights_[l]);
    out.emplace_back(name_ + ".b" + std::to_string(l), &biases_[l]);
  }
  return out;
}

template <typename T>
std::size_t Mlp<T>::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

template class Mlp<float>;
template class Mlp<double>;

}  // namespace adcgs
