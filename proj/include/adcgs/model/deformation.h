#ifndef ADCGS_MODEL_DEFORMATION_H_
#define ADCGS_MODEL_DEFORMATION_H_

#include <vector>

#include "adcgs/model/canonical.h"
#include "adcgs/render/renderer.h"

namespace adcgs {

// Learnable 1-D grid Z plus the network F_s that lifts (Interp(Z, t), t) to f_t.
template <typename T>
struct TimeEmbedding {
  Tensor<T> z;  // [1×time_grid]
  Mlp<T> f_s;
};

template <typename T>
struct DeformationNets {
  TimeEmbedding<T> time;
  Mlp<T> f_omega;  // coarse, per anchor
  Mlp<T> f_varpi;  // fine, per primitive

  template <typename U>
  DeformationNets<U> cast() const;
};

MlpSpec f_s_spec(const ModelConfig& cfg);
MlpSpec f_omega_spec(const ModelConfig& cfg);
MlpSpec f_varpi_spec(const ModelConfig& cfg);

// Z ~ U(−1,1), networks Glorot-initialised, deformation output layers zero so
// the initial deformation is the identity.
DeformationNets<float> init_deformation(const ModelConfig& cfg, Rng& rng);

// Out-of-range times: kStrict clamps and reports, kPedantic throws ContractError.
enum class TimePolicy { kStrict, kPedantic };

// Linear interpolation of the grid at fractional index t·(n−1).
template <typename T>
double interp_time_grid(const Tensor<T>& z, double t);

template <typename T>
Var<T> time_embedding(Tape<T>& tape, TimeEmbedding<T>& te, double t,
                      TimePolicy policy = TimePolicy::kStrict, bool* clamped = nullptr);

// Per axis, per band b = 0..bands−1: (sin(2^b x), cos(2^b x)).
std::vector<double> positional_embedding(const Vec3& x, std::size_t bands = 12);
template <typename T>
Tensor<T> positional_embedding_rows(const Tensor<T>& positions, std::size_t bands);

// [A×12] anchor deltas (ΔX, ΔΣ, ΔC) from concat(f_v, f_t); one F_ω row per anchor.
template <typename T>
Var<T> coarse_deform(Tape<T>& tape, Mlp<T>& f_omega, Var<T> f_v, Var<T> f_t);

// Reference for benchmarking: the same network evaluated once per primitive.
template <typename T>
Var<T> coarse_deform_per_primitive(Tape<T>& tape, Mlp<T>& f_omega, Var<T> f_v, Var<T> f_t,
                                   std::size_t K);

// [A·K×4] primitive deltas (ΔO, ΔC) from concat(f_p, f_t, onehot(k)).
template <typename T>
Var<T> fine_deform(Tape<T>& tape, Mlp<T>& f_varpi, Var<T> f_p, Var<T> f_t, std::size_t K);

// Applies coarse and fine deltas to canonical primitives [A·K×13]. Either
// delta may be an invalid Var, meaning zero.
template <typename T>
Var<T> compose(Var<T> prims, Var<T> coarse, Var<T> fine, std::size_t K);

struct CoarseDeformation {
  std::size_t anchor_id = 0;
  Vec3 d_position{};
  CovParams d_covariance{};
  Vec3 d_color{};
};

struct FineDeformation {
  double d_opacity = 0.0;
  Vec3 d_color{};
};

DeformedPrimitive compose(const NeuralPrimitive& p, const CoarseDeformation& coarse,
                          const FineDeformation& fine);

struct DeformOptions {
  bool coarse = true;
  bool fine = true;
  TimePolicy policy = TimePolicy::kStrict;
  // Stop the gradient from f_p back into the coarse position delta.
  bool detach_position_embedding = true;
};

// Everything needed to render one frame: canonical primitives deformed to t.
template <typename T>
struct FrameGraph {
  Var<T> canonical;  // [A·K×13]
  Var<T> coarse;     // [A×12] or invalid
  Var<T> fine;       // [A·K×4] or invalid
  Var<T> deformed;   // [A·K×13]
  bool time_clamped = false;
};

template <typename T>
FrameGraph<T> deform_frame(Tape<T>& tape, Mlp<T>& f_theta, DeformationNets<T>& nets,
                           const AnchorVars<T>& anchors, std::size_t K, double t,
                           const DeformOptions& opts = {});

template <typename T>
std::vector<DeformedPrimitive> to_deformed(const Tensor<T>& prims);

}  // namespace adcgs

#endif  // ADCGS_MODEL_DEFORMATION_H_
