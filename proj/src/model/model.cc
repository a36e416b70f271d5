#include "adcgs/model/model.h"

#include <algorithm>
#include <map>
#include <numeric>

#include "adcgs/codec/octree.h"

namespace adcgs {

double SceneMeta::frame_time(std::size_t frame) const {
  if (frame_count <= 1) return 0.0;
  return static_cast<double>(frame) / static_cast<double>(frame_count - 1);
}

std::vector<std::pair<std::string, Tensor<float>*>> Model::network_parameters() {
  std::vector<std::pair<std::string, Tensor<float>*>> out = canonical.f_theta.parameters();
  out.emplace_back("time.z", &deform.time.z);
  for (auto* m : {&deform.time.f_s, &deform.f_omega, &deform.f_varpi}) {
    for (auto& p : m->parameters()) out.push_back(p);
  }
  for (auto& p : entropy.parameters()) out.push_back(p);
  return out;
}

Model init_model(std::span<const Vec3> points, const ModelConfig& cfg, const QuantizerConfig& q,
                 SceneMeta meta, Rng& rng) {
  cfg.validate();
  Model m;
  m.canonical = init_canonical(points, cfg, rng);
  init_primitive_bias(m.canonical.f_theta, cfg, rng);
  m.deform = init_deformation(cfg, rng);
  m.entropy = init_entropy_model(cfg, q, rng);
  m.meta = std::move(meta);
  return m;
}

Model model_skeleton(const ModelConfig& cfg, const QuantizerConfig& q) {
  cfg.validate();
  Rng rng(0);
  Model m;
  m.canonical.config = cfg;
  m.canonical.anchors = AnchorTable<float>(0, cfg);
  m.canonical.f_theta = Mlp<float>(f_theta_spec(cfg), "f_theta");
  m.deform = init_deformation(cfg, rng);
  m.entropy = init_entropy_model(cfg, q, rng);
  for (auto& [name, t] : m.network_parameters()) std::fill(t->values().begin(), t->values().end(), 0.f);
  return m;
}

namespace {

constexpr std::size_t kCameraValues = 18;

std::vector<double> pack_cameras(const std::vector<Camera>& cams) {
  std::vector<double> v;
  for (const Camera& c : cams) {
    for (const auto& row : c.rotation) v.insert(v.end(), row.begin(), row.end());
    v.insert(v.end(), c.translation.begin(), c.translation.end());
    v.insert(v.end(), {c.fx, c.fy, c.cx, c.cy, static_cast<double>(c.width), static_cast<double>(c.height)});
  }
  return v;
}

std::vector<Camera> unpack_cameras(const std::vector<double>& v) {
  if (v.size() % kCameraValues != 0) throw DataError("camera block has a partial entry");
  std::vector<Camera> cams(v.size() / kCameraValues);
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const double* p = v.data() + i * kCameraValues;
    Camera& c = cams[i];
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) c.rotation[r][k] = p[3 * r + k];
    for (int k = 0; k < 3; ++k) c.translation[k] = p[9 + k];
    c.fx = p[12];
    c.fy = p[13];
    c.cx = p[14];
    c.cy = p[15];
    c.width = static_cast<int>(p[16]);
    c.height = static_cast<int>(p[17]);
  }
  return cams;
}

void put_anchors(Checkpoint& ck, const AnchorTable<float>& a) {
  ck.put("anchors.position", a.position);
  ck.put("anchors.covariance", a.covariance);
  ck.put("anchors.color", a.color);
  ck.put("anchors.f_v", a.f_v);
  ck.put("anchors.f_g", a.f_g);
}

Tensor<float> fetch(const Checkpoint& ck, const std::string& name, const Shape& shape) {
  if (!ck.has(name)) throw DataError("checkpoint lacks '" + name + "'");
  Tensor<float> t = ck.tensor<float>(name);
  if (t.shape() != shape) {
    throw DataError("checkpoint entry '" + name + "' has shape " + shape_string(t.shape()) +
                    ", expected " + shape_string(shape));
  }
  return t;
}

}  // namespace

Checkpoint network_checkpoint(const Model& m, bool with_anchors) {
  Checkpoint ck;
  m.config().save(ck);
  ck.put_scalars("quant.base_steps",
                 std::vector<double>(m.entropy.quant.base_steps.begin(), m.entropy.quant.base_steps.end()));
  ck.put_scalars("meta.cameras", pack_cameras(m.meta.cameras));
  ck.put_scalars("meta.frames", {static_cast<double>(m.meta.frame_count)});
  ck.put_scalars("meta.bbox", std::vector<double>(m.meta.bbox.begin(), m.meta.bbox.end()));
  ck.put_scalars("model.flags", {m.coarse ? 1.0 : 0.0, m.fine ? 1.0 : 0.0, m.lambda_e});
  for (auto& [name, t] : const_cast<Model&>(m).network_parameters()) ck.put(name, *t);
  if (with_anchors) put_anchors(ck, m.canonical.anchors);
  return ck;
}

Model model_from_checkpoint(const Checkpoint& ck) {
  const ModelConfig cfg = ModelConfig::load(ck);
  QuantizerConfig q;
  for (std::size_t i = 0; i < kStreamCount; ++i) q.base_steps[i] = ck.scalar("quant.base_steps", i);
  Model m = model_skeleton(cfg, q);
  m.meta.cameras = unpack_cameras(ck.entry("meta.cameras").values);
  m.meta.frame_count = static_cast<std::size_t>(ck.scalar("meta.frames"));
  for (std::size_t i = 0; i < 6; ++i) m.meta.bbox[i] = ck.scalar("meta.bbox", i);
  m.coarse = ck.scalar("model.flags", 0) != 0.0;
  m.fine = ck.scalar("model.flags", 1) != 0.0;
  m.lambda_e = ck.scalar("model.flags", 2);
  for (auto& [name, t] : m.network_parameters()) *t = fetch(ck, name, t->shape());
  if (ck.has("anchors.position")) {
    const std::size_t A = ck.entry("anchors.position").shape.at(0);
    AnchorTable<float>& a = m.canonical.anchors;
    a.position = fetch(ck, "anchors.position", {A, 3});
    a.covariance = fetch(ck, "anchors.covariance", {A, 6});
    a.color = fetch(ck, "anchors.color", {A, 3});
    a.f_v = fetch(ck, "anchors.f_v", {A, cfg.n_v});
    a.f_g = fetch(ck, "anchors.f_g", {A, cfg.residual_width()});
  }
  return m;
}

void save_model(const std::string& path, const Model& m) {
  io::ByteWriter w;
  network_checkpoint(m, true).write(w);
  io::write_file(path, w.data());
}

Model load_model(const std::string& path) {
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes);
  try {
    return model_from_checkpoint(Checkpoint::read(r));
  } catch (const DecodeError& e) {
    throw DataError("checkpoint '" + path + "' is malformed: " + e.what());
  }
}

std::vector<std::size_t> octree_anchor_order(const AnchorTable<float>& anchors, double voxel_size) {
  const std::size_t A = anchors.size();
  std::vector<Vec3> pos(A);
  for (std::size_t i = 0; i < A; ++i)
    for (int c = 0; c < 3; ++c) pos[i][c] = anchors.position.at(i, c);
  const std::vector<VoxelKey> keys = keys_on_grid(pos, voxel_size);
  std::vector<std::size_t> order(A);
  std::iota(order.begin(), order.end(), 0);
  const std::vector<VoxelKey> sorted = octree_order(keys);
  std::map<VoxelKey, std::size_t> rank;
  for (std::size_t i = 0; i < sorted.size(); ++i) rank.emplace(sorted[i], i);
  if (rank.size() != A) throw ContractError("two anchors share a voxel");
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rank[keys[a]] < rank[keys[b]]; });
  return order;
}

void prepare_for_coding(Model& m) {
  const double voxel = m.config().voxel_size;
  AnchorTable<float>& a = m.canonical.anchors;
  a = a.select(octree_anchor_order(a, voxel));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec3 p{a.position.at(i, 0), a.position.at(i, 1), a.position.at(i, 2)};
    const Vec3 c = voxel_center(voxel_of(p, voxel), voxel);
    for (int k = 0; k < 3; ++k) a.position.at(i, k) = static_cast<float>(c[k]);
  }
}

Model quantize_model(const Model& m, RateBreakdown* rate) {
  Model out = m;
  const ModelConfig& cfg = m.config();
  prepare_for_coding(out);
  AnchorTable<float>& a = out.canonical.anchors;
  Tape<float> tape(false);
  auto q = quantize_anchors(tape, out.entropy, anchor_params(tape, a), cfg.M, QuantMode::kTest, nullptr);
  a.f_v = q.f_v.value();
  a.f_g = q.f_g.value();
  a.covariance = q.covariance.value();
  a.color = q.color.value();
  if (rate) *rate = rate_breakdown(q);
  return out;
}

RateBreakdown estimate_rate(const Model& m) {
  Model copy = m;
  Tape<float> tape(false);
  auto q = quantize_anchors(tape, copy.entropy, anchor_params(tape, copy.canonical.anchors), m.config().M,
                            QuantMode::kTest, nullptr);
  return rate_breakdown(q);
}

std::vector<DeformedPrimitive> frame_primitives(const Model& m, double t) {
  Model& mm = const_cast<Model&>(m);
  Tape<float> tape(false);
  DeformOptions opts;
  opts.coarse = m.coarse;
  opts.fine = m.fine;
  auto g = deform_frame(tape, mm.canonical.f_theta, mm.deform, anchor_params(tape, mm.canonical.anchors),
                        m.config().K, t, opts);
  return to_deformed(g.deformed.value());
}

Image render_frame(const Model& m, const Camera& cam, double t) {
  const auto prims = frame_primitives(m, t);
  return render(prims, cam).output.image;
}

}  // namespace adcgs
