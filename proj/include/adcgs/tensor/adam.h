#ifndef ADCGS_TENSOR_ADAM_H_
#define ADCGS_TENSOR_ADAM_H_

#include <cstdint>
#include <string>
#include <vector>

#include "adcgs/tensor/tensor.h"

namespace adcgs {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-15;
};

template <typename T>
struct AdamState {
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  std::int64_t step_count = 0;
  AdamConfig config;
};

// One bias-corrected Adam step on `param` using its gradient.
template <typename T>
void adam_update(Tensor<T>& param, AdamState<T>& state);

// Adam over a set of parameters with per-parameter hyperparameters.
template <typename T>
class AdamOptimizer {
 public:
  struct Slot {
    std::string name;
    Tensor<T>* param;
    AdamState<T> state;
  };

  void add(std::string name, Tensor<T>* param, AdamConfig config);
  void zero_grad();
  void step();

  // Global L2 norm of all gradients; scales them down to `max_norm` if larger.
  double clip_grad_norm(double max_norm);

  // Re-binds a row-major parameter whose rows were reindexed: new row i takes
  // the moments of old row source[i], or zeros when source[i] < 0.
  void remap_rows(const Tensor<T>* param, const std::vector<std::int64_t>& source);

  std::vector<Slot>& slots() { return slots_; }

 private:
  std::vector<Slot> slots_;
};

}  // namespace adcgs

#endif  // ADCGS_TENSOR_ADAM_H_
