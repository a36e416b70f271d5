#ifndef ADCGS_TESTS_MODEL_FIXTURE_H_
#define ADCGS_TESTS_MODEL_FIXTURE_H_

#include <random>
#include <set>

#include "adcgs/model/model.h"

namespace adcgs::testing {

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.K = 4;
  c.n_v = 8;
  c.n_g = 4;
  c.M = 4;
  c.voxel_size = 0.1;
  c.hidden = 16;
  c.time_grid = 16;
  c.time_dim = 8;
  c.time_hidden = 8;
  c.pos_bands = 4;
  c.hyper_dim = 4;
  c.entropy_hidden = 16;
  c.chunk_hidden = 16;
  return c;
}

inline SceneMeta test_meta() {
  SceneMeta meta;
  meta.cameras.push_back(Camera::look_at({0, 0, -3}, {0, 0, 0}, {0, -1, 0}, 40, 32, 32));
  meta.frame_count = 4;
  meta.bbox = {-1, -1, -1, 1, 1, 1};
  return meta;
}

// Random points on distinct voxels, every parameter perturbed so the model
// behaves like a trained one.
inline Model random_model(std::uint64_t seed, std::size_t anchors, const ModelConfig& cfg = tiny_config()) {
  Rng rng(seed);
  std::uniform_int_distribution<int> cell(-9, 9);
  std::set<std::array<int, 3>> used;
  std::vector<Vec3> pts;
  while (pts.size() < anchors) {
    std::array<int, 3> k{cell(rng), cell(rng), cell(rng)};
    if (!used.insert(k).second) continue;
    pts.push_back({(k[0] + 0.5) * cfg.voxel_size, (k[1] + 0.5) * cfg.voxel_size, (k[2] + 0.5) * cfg.voxel_size});
  }
  Model m = init_model(pts, cfg, QuantizerConfig{}, test_meta(), rng);
  std::normal_distribution<float> n(0.f, 1.f);
  for (auto& [name, t] : m.network_parameters()) {
    for (float& v : t->values()) v += 0.05f * n(rng);
  }
  AnchorTable<float>& a = m.canonical.anchors;
  for (float& v : a.f_v.values()) v = 0.5f * n(rng);
  for (float& v : a.f_g.values()) v = 0.3f * n(rng);
  for (float& v : a.covariance.values()) v += 0.05f * n(rng);
  for (float& v : a.color.values()) v += 0.1f * n(rng);
  return m;
}

}  // namespace adcgs::testing

#endif  // ADCGS_TESTS_MODEL_FIXTURE_H_
