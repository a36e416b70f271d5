#include "adcgs/tensor/adam.h"

#include <cmath>

namespace adcgs {

template <typename T>
void adam_update(Tensor<T>& param, AdamState<T>& state) {
  if (!param.has_grad()) throw ContractError("adam_update: parameter has no gradient");
  const std::size_t n = param.size();
  if (state.first_moment.size() != n) state.first_moment.assign(n, T(0));
  if (state.second_moment.size() != n) state.second_moment.assign(n, T(0));
  const AdamConfig& c = state.config;
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count));
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  const T step = static_cast<T>(c.learning_rate / bc1);
  const T inv_bc2 = static_cast<T>(1.0 / bc2);
  const T eps = static_cast<T>(c.epsilon);
  auto& g = param.grad();
  auto& m = state.first_moment;
  auto& v = state.second_moment;
  auto& p = param.values();
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (T(1) - b1) * g[i];
    v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
    p[i] -= step * m[i] / (std::sqrt(v[i] * inv_bc2) + eps);
  }
}

template <typename T>
void AdamOptimizer<T>::add(std::string name, Tensor<T>* param, AdamConfig config) {
  param->set_requires_grad(true);
  Slot s{std::move(name), param, {}};
  s.state.config = config;
  slots_.push_back(std::move(s));
}

template <typename T>
void AdamOptimizer<T>::zero_grad() {
  for (auto& s : slots_) s.param->zero_grad();
}

template <typename T>
void AdamOptimizer<T>::step() {
  for (auto& s : slots_) {
    if (!s.param->has_grad()) continue;
    adam_update(*s.param, s.state);
  }
}

template <typename T>
double AdamOptimizer<T>::clip_grad_norm(double max_norm) {
  double sq = 0.0;
  for (auto& s : slots_) {
    if (!s.param->has_grad()) continue;
    for (T g : s.param->grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T f = static_cast<T>(max_norm / norm);
    for (auto& s : slots_) {
      if (!s.param->has_grad()) continue;
      for (T& g : s.param->grad()) g *= f;
    }
  }
  return norm;
}

template <typename T>
void AdamOptimizer<T>::remap_rows(const Tensor<T>* param, const std::vector<std::int64_t>& source) {
  for (auto& s : slots_) {
    if (s.param != param) continue;
    const std::size_t cols = param->cols();
    auto remap = [&](std::vector<T>& buf) {
      if (buf.empty()) return;
      std::vector<T> out(source.size() * cols, T(0));
      for (std::size_t i = 0; i < source.size(); ++i) {
        if (source[i] < 0) continue;
        const std::size_t src = static_cast<std::size_t>(source[i]);
        std::copy_n(buf.begin() + static_cast<std::ptrdiff_t>(src * cols), cols,
                    out.begin() + static_cast<std::ptrdiff_t>(i * cols));
      }
      buf = std::move(out);
    };
    remap(s.state.first_moment);
    remap(s.state.second_moment);
  }
}

template void adam_update<float>(Tensor<float>&, AdamState<float>&);
template void adam_update<double>(Tensor<double>&, AdamState<double>&);
template class AdamOptimizer<float>;
template class AdamOptimizer<double>;

}  // namespace adcgs
