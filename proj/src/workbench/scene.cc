#include "adcgs/workbench/scene.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "adcgs/error.h"
#include "json.hpp"

namespace adcgs {

using nlohmann::json;

Vec3 eval_polynomial(const Polynomial3& p, double t) {
  Vec3 out{0, 0, 0};
  double tp = 1.0;
  for (const Vec3& c : p) {
    for (int i = 0; i < 3; ++i) out[i] += c[i] * tp;
    tp *= t;
  }
  return out;
}

void SceneSpec::validate() const {
  if (blobs.empty()) throw DataError("scene '" + name + "' has no blobs");
  if (frames == 0 || width <= 0 || height <= 0) throw DataError("scene needs frames and a non-empty image size");
  if (cameras.count == 0) throw DataError("scene needs at least one training camera");
  for (int i = 0; i < 3; ++i) {
    if (!(bbox[i] < bbox[i + 3])) throw DataError("scene bounding box is empty");
  }
  for (std::size_t b = 0; b < blobs.size(); ++b) {
    const BlobSpec& blob = blobs[b];
    if (blob.translation.empty()) throw DataError("blob " + std::to_string(b) + " has no trajectory");
    if (!(blob.opacity > 0 && blob.opacity <= 1)) throw DataError("blob opacity must lie in (0, 1]");
    for (double s : blob.scale) {
      if (!(s > 0)) throw DataError("blob scales must be positive");
    }
    for (int k = 0; k <= 100; ++k) {
      const Vec3 c = eval_polynomial(blob.translation, k / 100.0);
      for (int i = 0; i < 3; ++i) {
        if (c[i] < bbox[i] || c[i] > bbox[i + 3]) {
          throw DataError("blob " + std::to_string(b) + " leaves the bounding box at t=" +
                          std::to_string(k / 100.0));
        }
      }
    }
  }
}

namespace {

Vec3 vec3(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
json to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Polynomial3 poly(const json& j) {
  Polynomial3 p;
  for (const auto& c : j) p.push_back(vec3(c));
  return p;
}

json to_json(const Polynomial3& p) {
  json a = json::array();
  for (const Vec3& c : p) a.push_back(to_json(c));
  return a;
}

json camera_json(const Camera& c) {
  json r = json::array();
  for (const auto& row : c.rotation) r.push_back(to_json(Vec3{row[0], row[1], row[2]}));
  return {{"rotation", r}, {"translation", to_json(c.translation)}, {"fx", c.fx}, {"fy", c.fy},
          {"cx", c.cx},    {"cy", c.cy},                           {"width", c.width}, {"height", c.height}};
}

Camera camera_from_json(const json& j) {
  Camera c;
  for (int r = 0; r < 3; ++r) {
    const Vec3 row = vec3(j.at("rotation").at(r));
    for (int k = 0; k < 3; ++k) c.rotation[r][k] = row[k];
  }
  c.translation = vec3(j.at("translation"));
  c.fx = j.at("fx");
  c.fy = j.at("fy");
  c.cx = j.at("cx");
  c.cy = j.at("cy");
  c.width = j.at("width");
  c.height = j.at("height");
  c.validate();
  return c;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Image quantize_8bit(const Image& img) {
  Image out = img;
  for (double& v : out.rgb) v = std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return out;
}

}  // namespace

SceneSpec SceneSpec::from_json_text(const std::string& text) {
  SceneSpec s;
  try {
    const json j = json::parse(text);
    s.name = j.value("name", s.name);
    s.frames = j.value("frames", s.frames);
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.points_per_blob = j.value("points_per_blob", s.points_per_blob);
    s.point_jitter = j.value("point_jitter", s.point_jitter);
    s.seed = j.value("seed", s.seed);
    if (j.contains("bbox")) {
      for (int i = 0; i < 6; ++i) s.bbox[i] = j["bbox"].at(i);
    }
    if (j.contains("cameras")) {
      const json& c = j["cameras"];
      s.cameras.count = c.value("count", s.cameras.count);
      s.cameras.eval_count = c.value("eval_count", s.cameras.eval_count);
      s.cameras.radius = c.value("radius", s.cameras.radius);
      s.cameras.height = c.value("height", s.cameras.height);
      s.cameras.focal = c.value("focal", s.cameras.focal);
      if (c.contains("target")) s.cameras.target = vec3(c["target"]);
    }
    for (const json& b : j.at("blobs")) {
      BlobSpec blob;
      if (b.contains("scale")) blob.scale = vec3(b["scale"]);
      if (b.contains("color")) blob.color = vec3(b["color"]);
      blob.opacity = b.value("opacity", blob.opacity);
      if (b.contains("translation")) blob.translation = poly(b["translation"]);
      if (b.contains("rotation")) blob.rotation = poly(b["rotation"]);
      s.blobs.push_back(blob);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("scene spec: ") + e.what());
  }
  s.validate();
  return s;
}

SceneSpec SceneSpec::load(const std::string& path) { return from_json_text(read_text(path)); }

std::string SceneSpec::to_json_text() const {
  json blobs_j = json::array();
  for (const BlobSpec& b : blobs) {
    blobs_j.push_back({{"scale", to_json(b.scale)},
                       {"color", to_json(b.color)},
                       {"opacity", b.opacity},
                       {"translation", to_json(b.translation)},
                       {"rotation", to_json(b.rotation)}});
  }
  json j = {{"name", name},
            {"frames", frames},
            {"width", width},
            {"height", height},
            {"bbox", bbox},
            {"points_per_blob", points_per_blob},
            {"point_jitter", point_jitter},
            {"seed", seed},
            {"cameras",
             {{"count", cameras.count},
              {"eval_count", cameras.eval_count},
              {"radius", cameras.radius},
              {"height", cameras.height},
              {"focal", cameras.focal},
              {"target", to_json(cameras.target)}}},
            {"blobs", blobs_j}};
  return j.dump(2) + "\n";
}

void SceneDataset::validate() const {
  if (cameras.empty() || frames == 0) throw DataError("dataset has no cameras or frames");
  if (images.size() != cameras.size()) throw DataError("dataset needs one image list per camera");
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    if (images[c].size() != frames) throw DataError("camera " + std::to_string(c) + " lacks frames");
    for (const Image& img : images[c]) {
      if (img.width != cameras[c].width || img.height != cameras[c].height) {
        throw DataError("image size disagrees with camera " + std::to_string(c));
      }
    }
  }
  if (train_cameras.empty()) throw DataError("dataset has no training cameras");
  for (std::size_t c : train_cameras)
    if (c >= cameras.size()) throw DataError("training camera index out of range");
  for (std::size_t c : eval_cameras)
    if (c >= cameras.size()) throw DataError("evaluation camera index out of range");
  if (init_points.empty()) throw DataError("dataset has no initial points");
  for (const Vec3& p : init_points) {
    for (int i = 0; i < 3; ++i) {
      if (p[i] < bbox[i] || p[i] > bbox[i + 3]) throw DataError("initial point outside the bounding box");
    }
  }
}

std::vector<DeformedPrimitive> blob_primitives(const SceneSpec& spec, double t) {
  std::vector<DeformedPrimitive> out;
  for (const BlobSpec& b : spec.blobs) {
    DeformedPrimitive p;
    p.position = eval_polynomial(b.translation, t);
    const Vec3 r = eval_polynomial(b.rotation, t);
    p.covariance = {std::log(b.scale[0]), std::log(b.scale[1]), std::log(b.scale[2]), r[0], r[1], r[2]};
    p.color = b.color;
    p.opacity = b.opacity;
    out.push_back(p);
  }
  return out;
}

SceneDataset generate_scene(const SceneSpec& spec) {
  spec.validate();
  SceneDataset d;
  d.name = spec.name;
  d.frames = spec.frames;
  d.bbox = spec.bbox;
  d.seed = spec.seed;
  const CameraRing& ring = spec.cameras;
  const std::size_t n = ring.count + ring.eval_count;
  const std::size_t stride = ring.eval_count ? n / ring.eval_count : n + 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    const Vec3 eye{ring.target[0] + ring.radius * std::cos(a), ring.target[1] + ring.height,
                   ring.target[2] + ring.radius * std::sin(a)};
    d.cameras.push_back(Camera::look_at(eye, ring.target, {0, 1, 0}, ring.focal, spec.width, spec.height));
    const bool eval = ring.eval_count && i % stride == stride / 2 && d.eval_cameras.size() < ring.eval_count;
    (eval ? d.eval_cameras : d.train_cameras).push_back(i);
  }

  d.images.assign(n, {});
  for (std::size_t f = 0; f < spec.frames; ++f) {
    const auto prims = blob_primitives(spec, d.frame_time(f));
    for (std::size_t c = 0; c < n; ++c) {
      std::vector<Splat2D> splats;
      for (std::size_t k = 0; k < prims.size(); ++k) {
        if (auto s = project(prims[k], d.cameras[c], static_cast<std::uint32_t>(k))) splats.push_back(*s);
      }
      d.images[c].push_back(quantize_8bit(rasterize_bruteforce(splats, spec.height, spec.width).image));
    }
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto prims0 = blob_primitives(spec, 0.0);
  for (std::size_t b = 0; b < spec.blobs.size(); ++b) {
    const BlobSpec& blob = spec.blobs[b];
    const Vec3 r = eval_polynomial(blob.rotation, 0.0);
    const auto rot = rotation_from_axis_angle(r[0], r[1], r[2]);
    for (std::size_t k = 0; k < spec.points_per_blob; ++k) {
      Vec3 u{normal(rng), normal(rng), normal(rng)};
      const double len = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
      Vec3 p = prims0[b].position;
      for (int i = 0; i < 3; ++i) {
        double s = 0;
        for (int m = 0; m < 3; ++m) s += rot[i][m] * blob.scale[m] * u[m] / len;
        p[i] += s + spec.point_jitter * normal(rng);
        p[i] = std::clamp(p[i], spec.bbox[i], spec.bbox[i + 3]);
      }
      d.init_points.push_back(p);
    }
  }
  d.validate();
  return d;
}

void save_dataset(const SceneDataset& d, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  json cams = json::array();
  for (const Camera& c : d.cameras) cams.push_back(camera_json(c));
  const json manifest = {{"name", d.name},       {"frames", d.frames},
                         {"bbox", d.bbox},       {"seed", d.seed},
                         {"train", d.train_cameras}, {"eval", d.eval_cameras},
                         {"cameras", cams}};
  {
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw DataError("cannot write into " + dir);
    out << manifest.dump(2) << '\n';
  }
  {
    std::ofstream out(fs::path(dir) / "points.csv");
    out << "x,y,z\n";
    char buf[96];
    for (const Vec3& p : d.init_points) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p[0], p[1], p[2]);
      out << buf;
    }
  }
  for (std::size_t c = 0; c < d.cameras.size(); ++c) {
    for (std::size_t f = 0; f < d.frames; ++f) {
      write_ppm((fs::path(dir) / "images" / ("cam" + std::to_string(c) + "_frame" + std::to_string(f) + ".ppm")).string(),
                d.images[c][f]);
    }
  }
}

SceneDataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  SceneDataset d;
  try {
    const json m = json::parse(read_text((fs::path(dir) / "manifest.json").string()));
    d.name = m.at("name");
    d.frames = m.at("frames");
    for (int i = 0; i < 6; ++i) d.bbox[i] = m.at("bbox").at(i);
    d.seed = m.at("seed");
    d.train_cameras = m.at("train").get<std::vector<std::size_t>>();
    d.eval_cameras = m.at("eval").get<std::vector<std::size_t>>();
    for (const json& c : m.at("cameras")) d.cameras.push_back(camera_from_json(c));
  } catch (const json::exception& e) {
    throw DataError("dataset manifest in " + dir + ": " + e.what());
  }
  std::ifstream pts(fs::path(dir) / "points.csv");
  if (!pts) throw DataError("dataset " + dir + " lacks points.csv");
  std::string line;
  std::getline(pts, line);
  while (std::getline(pts, line)) {
    if (line.empty()) continue;
    Vec3 p;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &p[0], &p[1], &p[2]) != 3) {
      throw DataError("malformed point row '" + line + "'");
    }
    d.init_points.push_back(p);
  }
  d.images.assign(d.cameras.size(), {});
  for (std::size_t c = 0; c < d.cameras.size(); ++c) {
    for (std::size_t f = 0; f < d.frames; ++f) {
      d.images[c].push_back(
          read_ppm((fs::path(dir) / "images" / ("cam" + std::to_string(c) + "_frame" + std::to_string(f) + ".ppm")).string()));
    }
  }
  d.validate();
  return d;
}

std::vector<std::string> builtin_scene_names() { return {"two-blobs-orbit", "rigid-cluster-shift", "static-control"}; }

SceneSpec builtin_scene(const std::string& name) {
  SceneSpec s;
  s.name = name;
  s.bbox = {-1.5, -1.5, -1.5, 1.5, 1.5, 1.5};
  if (name == "two-blobs-orbit") {
    s.frames = 12;
    // Two blobs swapping sides along opposite arcs while spinning.
    BlobSpec a;
    a.scale = {0.32, 0.16, 0.16};
    a.color = {0.95, 0.35, 0.2};
    a.translation = {{0.7, 0.0, 0.0}, {-1.4, 0.0, 1.2}, {0.0, 0.0, -1.2}};
    a.rotation = {{0, 0, 0}, {0, 1.6, 0}};
    BlobSpec b;
    b.scale = {0.2, 0.3, 0.2};
    b.color = {0.2, 0.55, 0.95};
    b.translation = {{-0.7, 0.1, 0.0}, {1.4, 0.0, -1.2}, {0.0, 0.0, 1.2}};
    b.rotation = {{0, 0, 0}, {1.2, 0, 0}};
    s.blobs = {a, b};
  } else if (name == "rigid-cluster-shift") {
    s.frames = 10;
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> u(-0.35, 0.35), c(0.2, 0.95), sc(0.07, 0.13);
    for (int i = 0; i < 12; ++i) {
      BlobSpec b;
      const Vec3 off{u(rng), u(rng), u(rng)};
      b.scale = {sc(rng), sc(rng), sc(rng)};
      b.color = {c(rng), c(rng), c(rng)};
      b.translation = {{off[0] - 0.5, off[1], off[2]}, {1.0, 0.25, 0.0}};
      s.blobs.push_back(b);
    }
  } else if (name == "static-control") {
    s.frames = 4;
    BlobSpec a;
    a.scale = {0.25, 0.25, 0.15};
    a.color = {0.9, 0.8, 0.2};
    a.translation = {{0.4, 0, 0}};
    BlobSpec b = a;
    b.scale = {0.15, 0.3, 0.2};
    b.color = {0.3, 0.9, 0.4};
    b.translation = {{-0.4, 0.1, 0.2}};
    BlobSpec c = a;
    c.scale = {0.2, 0.15, 0.3};
    c.color = {0.7, 0.3, 0.9};
    c.translation = {{0.0, -0.3, -0.3}};
    c.rotation = {{0.4, 0.2, 0.0}};
    s.blobs = {a, b, c};
  } else {
    throw ConfigError("unknown scene '" + name + "'");
  }
  s.validate();
  return s;
}

}  // namespace adcgs
