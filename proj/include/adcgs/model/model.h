#ifndef ADCGS_MODEL_MODEL_H_
#define ADCGS_MODEL_MODEL_H_

#include <array>
#include <string>
#include <vector>

#include "adcgs/codec/entropy_model.h"
#include "adcgs/model/deformation.h"

namespace adcgs {

struct SceneMeta {
  std::vector<Camera> cameras;
  std::size_t frame_count = 1;
  std::array<double, 6> bbox{};  // min xyz, max xyz

  // Frame index → normalized time in [0, 1].
  double frame_time(std::size_t frame) const;
};

// Everything a trained scene consists of.
struct Model {
  CanonicalSpace<float> canonical;
  DeformationNets<float> deform;
  EntropyModel<float> entropy;
  SceneMeta meta;
  bool coarse = true;  // deformation stages enabled at render time
  bool fine = true;
  double lambda_e = 0.0;

  const ModelConfig& config() const { return canonical.config; }
  std::size_t anchor_count() const { return canonical.anchors.size(); }
  // Every network parameter (F_θ, deformation, entropy model) with stable names.
  std::vector<std::pair<std::string, Tensor<float>*>> network_parameters();
};

Model init_model(std::span<const Vec3> points, const ModelConfig& cfg, const QuantizerConfig& q,
                 SceneMeta meta, Rng& rng);

// Networks with the right shapes and zero weights, no anchors.
Model model_skeleton(const ModelConfig& cfg, const QuantizerConfig& q);

// Network weights, config, scene metadata and flags. Anchors are optional.
Checkpoint network_checkpoint(const Model& m, bool with_anchors);
// Inverse of network_checkpoint; throws DataError on missing or misshapen entries.
Model model_from_checkpoint(const Checkpoint& ck);

void save_model(const std::string& path, const Model& m);
Model load_model(const std::string& path);

// Anchor rows in the order the position decoder emits them.
std::vector<std::size_t> octree_anchor_order(const AnchorTable<float>& anchors, double voxel_size);

// Reorders anchors into octree order and snaps positions to the decoded
// voxel centres.
void prepare_for_coding(Model& m);

// Test-mode quantization of the anchors after reordering into octree order.
// The result is exactly what decoding the encoded model produces.
Model quantize_model(const Model& m, RateBreakdown* rate = nullptr);

// Rate estimate of the current anchors under the test-mode entropy model.
RateBreakdown estimate_rate(const Model& m);

std::vector<DeformedPrimitive> frame_primitives(const Model& m, double t);
Image render_frame(const Model& m, const Camera& cam, double t);

}  // namespace adcgs

#endif  // ADCGS_MODEL_MODEL_H_
