#ifndef ADCGS_WORKBENCH_SCENE_H_
#define ADCGS_WORKBENCH_SCENE_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "adcgs/render/renderer.h"

namespace adcgs {

// Coefficients c0 + c1·t + c2·t² + … per axis.
using Polynomial3 = std::vector<Vec3>;

Vec3 eval_polynomial(const Polynomial3& p, double t);

struct BlobSpec {
  Vec3 scale{0.2, 0.2, 0.2};  // standard deviations
  Vec3 color{0.8, 0.8, 0.8};
  double opacity = 0.9;
  Polynomial3 translation{{0, 0, 0}};
  Polynomial3 rotation{{0, 0, 0}};  // axis-angle over time
};

struct CameraRing {
  std::size_t count = 8;       // training cameras
  std::size_t eval_count = 2;  // held-out cameras, interleaved on the ring
  double radius = 4.0;
  double height = 1.0;
  double focal = 70.0;
  Vec3 target{0, 0, 0};
};

struct SceneSpec {
  std::string name = "scene";
  std::vector<BlobSpec> blobs;
  CameraRing cameras;
  std::size_t frames = 10;
  int width = 64, height = 64;
  std::array<double, 6> bbox{-2, -2, -2, 2, 2, 2};
  std::size_t points_per_blob = 300;
  double point_jitter = 0.01;
  std::uint64_t seed = 7;

  // Throws DataError when a blob centre leaves the bounding box or the spec
  // is otherwise unusable.
  void validate() const;
  static SceneSpec from_json_text(const std::string& text);
  static SceneSpec load(const std::string& path);
  std::string to_json_text() const;
};

struct SceneDataset {
  std::string name;
  std::vector<Camera> cameras;
  std::vector<std::size_t> train_cameras, eval_cameras;
  std::size_t frames = 0;
  std::array<double, 6> bbox{};
  std::uint64_t seed = 0;
  std::vector<Vec3> init_points;
  // images[camera][frame], 8-bit quantized.
  std::vector<std::vector<Image>> images;

  double frame_time(std::size_t f) const { return frames <= 1 ? 0.0 : double(f) / double(frames - 1); }
  void validate() const;
};

// Ground-truth primitives of every blob at time t.
std::vector<DeformedPrimitive> blob_primitives(const SceneSpec& spec, double t);

SceneDataset generate_scene(const SceneSpec& spec);

// Directory layout: manifest.json, points.csv, images/cam<c>_frame<f>.ppm.
void save_dataset(const SceneDataset& d, const std::string& dir);
SceneDataset load_dataset(const std::string& dir);

// Specs of the three standard scenes.
SceneSpec builtin_scene(const std::string& name);
std::vector<std::string> builtin_scene_names();

}  // namespace adcgs

#endif  // ADCGS_WORKBENCH_SCENE_H_
