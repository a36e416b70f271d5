#include "adcgs/model/refinement.h"

#include <fstream>
#include <algorithm>
#include <map>

namespace adcgs {

void RefinementConfig::validate() const {
  if (interval == 0) throw ConfigError("refinement interval must be positive");
  if (!(tau_g >= 0.0) || !(tau_p >= 0.0)) throw ConfigError("refinement thresholds must be non-negative");
}

void SignificanceAccumulator::reset(std::size_t anchors, std::size_t K) {
  K_ = K;
  records_ = 0;
  weighted_.assign(anchors * K, 0.0);
  weight_sum_.assign(anchors * K, 0.0);
  max_opacity_.assign(anchors, 0.0);
}

void SignificanceAccumulator::record(std::span<const double> grad_norm, std::span<const double> weight,
                                     std::span<const double> opacity) {
  const std::size_t n = weighted_.size();
  if (grad_norm.size() != n || weight.size() != n || opacity.size() != n) {
    throw DimensionError("significance record needs one value per primitive");
  }
  for (std::size_t p = 0; p < n; ++p) {
    weighted_[p] += weight[p] * grad_norm[p];
    weight_sum_[p] += weight[p];
    max_opacity_[p / K_] = std::max(max_opacity_[p / K_], opacity[p]);
  }
  ++records_;
}

double SignificanceAccumulator::significance(std::size_t prim) const {
  return weight_sum_[prim] > 0.0 ? weighted_[prim] / weight_sum_[prim] : 0.0;
}

GrowResult grow_anchors(AnchorTable<float>& anchors, const ModelConfig& cfg,
                        const SignificanceAccumulator& acc,
                        std::span<const PrimitiveAttributes> primitives, double tau_g,
                        std::size_t max_new) {
  const std::size_t A = anchors.size(), K = cfg.K;
  if (acc.anchors() != A || primitives.size() != A * K) {
    throw DimensionError("growth inputs do not match the anchor table");
  }
  std::map<VoxelKey, bool> occupied;
  for (std::size_t a = 0; a < A; ++a) {
    const Vec3 p{anchors.position.at(a, 0), anchors.position.at(a, 1), anchors.position.at(a, 2)};
    occupied[voxel_of(p, cfg.voxel_size)] = true;
  }
  // Most significant qualifying primitive per empty voxel.
  std::map<VoxelKey, std::size_t> best;
  for (std::size_t p = 0; p < A * K; ++p) {
    const double g = acc.significance(p);
    if (!(g > tau_g)) continue;
    const VoxelKey key = voxel_of(primitives[p].position, cfg.voxel_size);
    if (occupied.count(key)) continue;
    auto it = best.find(key);
    if (it == best.end() || g > acc.significance(it->second)) best[key] = p;
  }
  if (best.size() > max_new) {
    std::vector<std::pair<double, VoxelKey>> ranked;
    for (const auto& [key, p] : best) ranked.emplace_back(acc.significance(p), key);
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    for (std::size_t i = max_new; i < ranked.size(); ++i) best.erase(ranked[i].second);
  }
  GrowResult res;
  res.parent.resize(A);
  for (std::size_t a = 0; a < A; ++a) res.parent[a] = a;
  for (const auto& [key, p] : best) {
    Anchor parent = anchors.get(p / K);
    Anchor grown = parent;
    grown.position = voxel_center(key, cfg.voxel_size);
    grown.covariance = primitives[p].covariance;
    grown.color = primitives[p].color;
    anchors.append(grown);
    res.parent.push_back(p / K);
  }
  res.added = best.size();
  return res;
}

std::vector<std::size_t> prune_anchors(AnchorTable<float>& anchors, const SignificanceAccumulator& acc,
                                       double tau_p) {
  if (acc.anchors() != anchors.size()) throw DimensionError("pruning statistics do not match the anchor table");
  std::vector<std::size_t> keep;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (!(acc.max_opacity(a) < tau_p)) keep.push_back(a);
  }
  if (keep.empty()) throw ContractError("pruning would remove every anchor");
  if (keep.size() != anchors.size()) anchors = anchors.select(keep);
  return keep;
}

void write_refinement_csv(const std::string& path, const std::vector<RefinementEvent>& events) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "iteration,grown,pruned,anchors\n";
  for (const auto& e : events) out << e.iteration << ',' << e.grown << ',' << e.pruned << ',' << e.anchors << '\n';
}

}  // namespace adcgs
