#ifndef ADCGS_MODEL_CANONICAL_H_
#define ADCGS_MODEL_CANONICAL_H_

#include <span>
#include <vector>

#include "adcgs/geometry.h"
#include "adcgs/tensor/checkpoint.h"
#include "adcgs/tensor/mlp.h"

namespace adcgs {

// Model hyperparameters shared by every network that touches anchors.
struct ModelConfig {
  std::size_t K = 10;    // primitives per anchor
  std::size_t n_v = 32;  // reference feature width
  std::size_t n_g = 16;  // residual feature width per primitive
  std::size_t M = 4;     // f_g chunks
  double voxel_size = 0.05;

  std::size_t hidden = 64;  // F_θ, F_ω, F_ϖ
  std::size_t time_grid = 256;
  std::size_t time_dim = 256;
  std::size_t time_hidden = 64;
  std::size_t pos_bands = 12;
  std::size_t hyper_dim = 8;
  std::size_t entropy_hidden = 32;
  std::size_t chunk_hidden = 64;

  // Initial spread of primitive offsets around their anchor, in voxels.
  double offset_spread = 1.0;
  double initial_opacity = 0.1;

  std::size_t residual_width() const { return K * n_g; }
  std::size_t chunk_width() const { return K * n_g / M; }
  std::size_t pos_embed_width() const { return 3 * 2 * pos_bands; }
  // Throws ConfigError when widths are inconsistent.
  void validate() const;

  void save(Checkpoint& ck) const;
  static ModelConfig load(const Checkpoint& ck);
};

struct Anchor {
  Vec3 position{};
  CovParams covariance{};
  Vec3 color{};
  std::vector<double> f_v;
  std::vector<double> f_g;
};

struct NeuralPrimitive {
  std::size_t anchor_id = 0;
  Vec3 position{};
  CovParams covariance{};
  Vec3 color{};
  double opacity = 0.0;
};

// Anchors stored column-wise as one row per anchor.
template <typename T>
struct AnchorTable {
  Tensor<T> position;  // [A×3], voxel centres, never optimised
  Tensor<T> covariance;  // [A×6]
  Tensor<T> color;     // [A×3]
  Tensor<T> f_v;       // [A×n_v]
  Tensor<T> f_g;       // [A×K·n_g]

  AnchorTable() = default;
  AnchorTable(std::size_t count, const ModelConfig& cfg);

  std::size_t size() const { return position.rows(); }
  Anchor get(std::size_t i) const;
  void set(std::size_t i, const Anchor& a);
  // New table with rows `order` (rows may repeat).
  AnchorTable select(const std::vector<std::size_t>& order) const;
  void append(const Anchor& a);
  std::vector<Tensor<T>*> trainable();

  template <typename U>
  AnchorTable<U> cast() const;
};

template <typename T>
struct CanonicalSpace {
  ModelConfig config;
  AnchorTable<T> anchors;
  Mlp<T> f_theta;

  std::size_t primitive_count() const { return anchors.size() * config.K; }
};

MlpSpec f_theta_spec(const ModelConfig& cfg);

// Distinct occupied voxels in ascending key order.
std::vector<VoxelKey> occupied_voxels(std::span<const Vec3> points, double voxel_size);

// One anchor per occupied voxel, features ~ 0.01·N(0,1), log-scales from the
// mean distance to the three nearest anchors, color 0.5.
CanonicalSpace<float> init_canonical(std::span<const Vec3> points, const ModelConfig& cfg,
                                     Rng& rng);

// Sets the F_θ output bias so that primitives start spread around their anchor
// with the configured opacity. The weights are left untouched.
template <typename T>
void init_primitive_bias(Mlp<T>& f_theta, const ModelConfig& cfg, Rng& rng);

// Graph inputs for one set of anchors (possibly quantized).
template <typename T>
struct AnchorVars {
  Var<T> position, covariance, color, f_v, f_g;
};

template <typename T>
AnchorVars<T> anchor_params(Tape<T>& tape, AnchorTable<T>& table);

// Residual prediction of K primitives per anchor. Returns [A·K × 13] rows laid
// out as (position, covariance params, color, opacity); row a·K + k belongs
// to slot k of anchor a.
template <typename T>
Var<T> derive_primitives(Tape<T>& tape, Mlp<T>& f_theta, const AnchorVars<T>& anchors,
                         std::size_t K);

// Single-anchor convenience form.
std::vector<NeuralPrimitive> derive_primitives(const Anchor& anchor, const Mlp<double>& f_theta,
                                               std::size_t K, std::size_t anchor_id = 0);

// Rows of a primitive tensor as structs.
template <typename T>
std::vector<NeuralPrimitive> to_neural_primitives(const Tensor<T>& prims, std::size_t K);

// Anchor table section of an uncompressed snapshot.
void write_anchor_table(io::ByteWriter& w, const AnchorTable<float>& t);
AnchorTable<float> read_anchor_table(io::ByteReader& r, const ModelConfig& cfg);

}  // namespace adcgs

#endif  // ADCGS_MODEL_CANONICAL_H_
