#ifndef ADCGS_MODEL_REFINEMENT_H_
#define ADCGS_MODEL_REFINEMENT_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adcgs/model/canonical.h"

namespace adcgs {

struct RefinementConfig {
  std::size_t interval = 400;  // iterations per accumulation window
  double tau_g = 2e-4;         // growth threshold on the weighted gradient
  double tau_p = 0.05;         // pruning threshold on window-max opacity
  void validate() const;
};

// Per-primitive Σ Ψ·‖∇‖ and Σ Ψ plus per-anchor max opacity over a window.
class SignificanceAccumulator {
 public:
  SignificanceAccumulator() = default;
  SignificanceAccumulator(std::size_t anchors, std::size_t K) { reset(anchors, K); }

  void reset(std::size_t anchors, std::size_t K);
  // One rendered view: screen-space gradient norms, rendering weights Ψ and
  // opacities for every primitive (row a·K + k).
  void record(std::span<const double> grad_norm, std::span<const double> weight,
              std::span<const double> opacity);

  std::size_t primitives() const { return weighted_.size(); }
  std::size_t anchors() const { return max_opacity_.size(); }
  std::size_t K() const { return K_; }
  std::size_t records() const { return records_; }
  bool defined(std::size_t prim) const { return weight_sum_[prim] > 0.0; }
  // Σ Ψ‖∇‖ / Σ Ψ, zero where no weight was seen.
  double significance(std::size_t prim) const;
  double max_opacity(std::size_t anchor) const { return max_opacity_[anchor]; }

 private:
  std::size_t K_ = 1;
  std::size_t records_ = 0;
  std::vector<double> weighted_, weight_sum_, max_opacity_;
};

// Canonical attributes of one primitive, as grown into a new anchor.
struct PrimitiveAttributes {
  Vec3 position{};
  CovParams covariance{};
  Vec3 color{};
};

struct GrowResult {
  std::size_t added = 0;
  // For every row of the new table: the old row it came from (new anchors
  // report their parent).
  std::vector<std::size_t> parent;
};

// Adds one anchor per empty voxel holding a primitive with significance
// above tau_g; within a voxel the most significant primitive wins. At most
// `max_new` anchors are added, the most significant first.
GrowResult grow_anchors(AnchorTable<float>& anchors, const ModelConfig& cfg,
                        const SignificanceAccumulator& acc,
                        std::span<const PrimitiveAttributes> primitives, double tau_g,
                        std::size_t max_new = static_cast<std::size_t>(-1));

// Removes anchors whose window-max opacity is below tau_p and returns the
// surviving old rows. Throws ContractError instead of removing every anchor.
std::vector<std::size_t> prune_anchors(AnchorTable<float>& anchors, const SignificanceAccumulator& acc,
                                       double tau_p);

struct RefinementEvent {
  std::size_t iteration = 0, grown = 0, pruned = 0, anchors = 0;
};

void write_refinement_csv(const std::string& path, const std::vector<RefinementEvent>& events);

}  // namespace adcgs

#endif  // ADCGS_MODEL_REFINEMENT_H_
