#include "adcgs/model/canonical.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "adcgs/error.h"

namespace adcgs {

void ModelConfig::validate() const {
  if (K == 0 || n_v == 0 || n_g == 0 || M == 0) throw ConfigError("model widths must be positive");
  if ((K * n_g) % M != 0) {
    throw ConfigError("K·n_g = " + std::to_string(K * n_g) + " is not divisible by M = " +
                      std::to_string(M));
  }
  if (!(voxel_size > 0.0)) throw ConfigError("voxel_size must be positive");
  if (time_grid < 2) throw ConfigError("time grid needs at least 2 entries");
  if (!(initial_opacity > 0.0 && initial_opacity < 1.0)) {
    throw ConfigError("initial_opacity must lie in (0,1)");
  }
}

void ModelConfig::save(Checkpoint& ck) const {
  ck.put_scalars("config.model",
                 {double(K), double(n_v), double(n_g), double(M), voxel_size, double(hidden),
                  double(time_grid), double(time_dim), double(time_hidden), double(pos_bands),
                  double(hyper_dim), double(entropy_hidden), double(chunk_hidden), offset_spread,
                  initial_opacity});
}

ModelConfig ModelConfig::load(const Checkpoint& ck) {
  const auto& v = ck.entry("config.model").values;
  if (v.size() != 15) throw DecodeError(DecodeFailure::kCorrupt, "config.model has wrong length");
  ModelConfig c;
  auto z = [](double x) { return static_cast<std::size_t>(x); };
  c.K = z(v[0]);
  c.n_v = z(v[1]);
  c.n_g = z(v[2]);
  c.M = z(v[3]);
  c.voxel_size = v[4];
  c.hidden = z(v[5]);
  c.time_grid = z(v[6]);
  c.time_dim = z(v[7]);
  c.time_hidden = z(v[8]);
  c.pos_bands = z(v[9]);
  c.hyper_dim = z(v[10]);
  c.entropy_hidden = z(v[11]);
  c.chunk_hidden = z(v[12]);
  c.offset_spread = v[13];
  c.initial_opacity = v[14];
  c.validate();
  return c;
}

template <typename T>
AnchorTable<T>::AnchorTable(std::size_t count, const ModelConfig& cfg)
    : position({count, 3}),
      covariance({count, 6}),
      color({count, 3}),
      f_v({count, cfg.n_v}),
      f_g({count, cfg.residual_width()}) {}

template <typename T>
Anchor AnchorTable<T>::get(std::size_t i) const {
  Anchor a;
  for (int c = 0; c < 3; ++c) a.position[c] = position.at(i, c);
  for (int c = 0; c < 6; ++c) a.covariance[c] = covariance.at(i, c);
  for (int c = 0; c < 3; ++c) a.color[c] = color.at(i, c);
  a.f_v.assign(f_v.values().begin() + i * f_v.cols(), f_v.values().begin() + (i + 1) * f_v.cols());
  a.f_g.assign(f_g.values().begin() + i * f_g.cols(), f_g.values().begin() + (i + 1) * f_g.cols());
  return a;
}

template <typename T>
void AnchorTable<T>::set(std::size_t i, const Anchor& a) {
  if (a.f_v.size() != f_v.cols() || a.f_g.size() != f_g.cols()) {
    throw DimensionError("anchor feature widths do not match the table");
  }
  for (int c = 0; c < 3; ++c) position.at(i, c) = static_cast<T>(a.position[c]);
  for (int c = 0; c < 6; ++c) covariance.at(i, c) = static_cast<T>(a.covariance[c]);
  for (int c = 0; c < 3; ++c) color.at(i, c) = static_cast<T>(a.color[c]);
  for (std::size_t c = 0; c < a.f_v.size(); ++c) f_v.at(i, c) = static_cast<T>(a.f_v[c]);
  for (std::size_t c = 0; c < a.f_g.size(); ++c) f_g.at(i, c) = static_cast<T>(a.f_g[c]);
}

namespace {

template <typename T>
Tensor<T> select_rows(const Tensor<T>& t, const std::vector<std::size_t>& order) {
  const std::size_t c = t.cols();
  Tensor<T> out({order.size(), c});
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::copy_n(t.values().begin() + order[i] * c, c, out.values().begin() + i * c);
  }
  return out;
}

template <typename T>
void append_row(Tensor<T>& t, std::size_t cols, const T* row) {
  std::vector<T> v = t.values();
  v.insert(v.end(), row, row + cols);
  const std::size_t rows = v.size() / cols;
  t.assign({rows, cols}, std::move(v));
}

}  // namespace

template <typename T>
AnchorTable<T> AnchorTable<T>::select(const std::vector<std::size_t>& order) const {
  AnchorTable out;
  out.position = select_rows(position, order);
  out.covariance = select_rows(covariance, order);
  out.color = select_rows(color, order);
  out.f_v = select_rows(f_v, order);
  out.f_g = select_rows(f_g, order);
  return out;
}

template <typename T>
void AnchorTable<T>::append(const Anchor& a) {
  if (a.f_v.size() != f_v.cols() || a.f_g.size() != f_g.cols()) {
    throw DimensionError("anchor feature widths do not match the table");
  }
  auto conv = [](auto begin, auto end) { return std::vector<T>(begin, end); };
  const auto p = conv(a.position.begin(), a.position.end());
  const auto s = conv(a.covariance.begin(), a.covariance.end());
  const auto c = conv(a.color.begin(), a.color.end());
  const auto fv = conv(a.f_v.begin(), a.f_v.end());
  const auto fg = conv(a.f_g.begin(), a.f_g.end());
  append_row(position, 3, p.data());
  append_row(covariance, 6, s.data());
  append_row(color, 3, c.data());
  append_row(f_v, f_v.cols(), fv.data());
  append_row(f_g, f_g.cols(), fg.data());
}

template <typename T>
std::vector<Tensor<T>*> AnchorTable<T>::trainable() {
  return {&covariance, &color, &f_v, &f_g};
}

template <typename T>
template <typename U>
AnchorTable<U> AnchorTable<T>::cast() const {
  AnchorTable<U> out;
  out.position = position.template cast<U>();
  out.covariance = covariance.template cast<U>();
  out.color = color.template cast<U>();
  out.f_v = f_v.template cast<U>();
  out.f_g = f_g.template cast<U>();
  return out;
}

template struct AnchorTable<float>;
template struct AnchorTable<double>;
template AnchorTable<double> AnchorTable<float>::cast<double>() const;
template AnchorTable<float> AnchorTable<double>::cast<float>() const;

MlpSpec f_theta_spec(const ModelConfig& cfg) {
  return MlpSpec{{cfg.n_v + cfg.residual_width(), cfg.hidden, cfg.hidden, cfg.K * kPrimitiveAttrs},
                 Activation::kRelu,
                 true};
}

std::vector<VoxelKey> occupied_voxels(std::span<const Vec3> points, double voxel_size) {
  std::vector<VoxelKey> keys;
  keys.reserve(points.size());
  for (const Vec3& p : points) keys.push_back(voxel_of(p, voxel_size));
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

CanonicalSpace<float> init_canonical(std::span<const Vec3> points, const ModelConfig& cfg,
                                     Rng& rng) {
  cfg.validate();
  if (points.empty()) throw DataError("cannot initialise a canonical space from zero points");
  for (const Vec3& p : points) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
      throw DataError("initial point cloud contains non-finite coordinates");
    }
  }
  const std::vector<VoxelKey> keys = occupied_voxels(points, cfg.voxel_size);
  const std::size_t n = keys.size();
  CanonicalSpace<float> space;
  space.config = cfg;
  space.anchors = AnchorTable<float>(n, cfg);
  std::vector<Vec3> centers(n);
  for (std::size_t i = 0; i < n; ++i) centers[i] = voxel_center(keys[i], cfg.voxel_size);

  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 3> best{HUGE_VAL, HUGE_VAL, HUGE_VAL};
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = 0;
      for (int c = 0; c < 3; ++c) d2 += (centers[i][c] - centers[j][c]) * (centers[i][c] - centers[j][c]);
      if (d2 < best[2]) {
        best[2] = d2;
        std::sort(best.begin(), best.end());
      }
    }
    double mean = 0.0;
    int found = 0;
    for (double d2 : best) {
      if (std::isfinite(d2)) {
        mean += std::sqrt(d2);
        ++found;
      }
    }
    mean = found ? mean / found : cfg.voxel_size;
    const double log_scale = std::log(std::max(mean, 1e-7));
    Anchor a;
    a.position = centers[i];
    a.covariance = {log_scale, log_scale, log_scale, 0.0, 0.0, 0.0};
    a.color = {0.5, 0.5, 0.5};
    a.f_v.resize(cfg.n_v);
    a.f_g.resize(cfg.residual_width());
    for (double& v : a.f_v) v = 0.01 * normal(rng);
    for (double& v : a.f_g) v = 0.01 * normal(rng);
    space.anchors.set(i, a);
  }
  space.f_theta = Mlp<float>(f_theta_spec(cfg), "f_theta");
  space.f_theta.init(rng);
  init_primitive_bias(space.f_theta, cfg, rng);
  return space;
}

template <typename T>
void init_primitive_bias(Mlp<T>& f_theta, const ModelConfig& cfg, Rng& rng) {
  Tensor<T>& b = f_theta.bias(f_theta.spec().layer_count() - 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double spread = cfg.offset_spread * cfg.voxel_size;
  const double logit = std::log(cfg.initial_opacity / (1.0 - cfg.initial_opacity));
  for (std::size_t k = 0; k < cfg.K; ++k) {
    T* row = b.values().data() + k * kPrimitiveAttrs;
    for (std::size_t c = 0; c < 3; ++c) row[kPosOffset + c] = static_cast<T>(spread * u(rng));
    for (std::size_t c = 0; c < 6; ++c) row[kCovOffset + c] = T(0);
    for (std::size_t c = 0; c < 3; ++c) row[kColorOffset + c] = T(0);
    row[kOpacityOffset] = static_cast<T>(logit);
  }
}

template void init_primitive_bias(Mlp<float>&, const ModelConfig&, Rng&);
template void init_primitive_bias(Mlp<double>&, const ModelConfig&, Rng&);

template <typename T>
AnchorVars<T> anchor_params(Tape<T>& tape, AnchorTable<T>& table) {
  return {tape.param(table.position), tape.param(table.covariance), tape.param(table.color),
          tape.param(table.f_v), tape.param(table.f_g)};
}

template <typename T>
Var<T> derive_primitives(Tape<T>& tape, Mlp<T>& f_theta, const AnchorVars<T>& anchors,
                         std::size_t K) {
  const std::size_t a = anchors.f_v.rows();
  const std::size_t width = K * kPrimitiveAttrs;
  if (f_theta.spec().output_width() != width) {
    throw ConfigError("F_θ output width " + std::to_string(f_theta.spec().output_width()) +
                      " does not equal K·13 = " + std::to_string(width));
  }
  Var<T> raw = f_theta.forward(tape, concat_cols<T>({anchors.f_v, anchors.f_g}));
  raw = reshape(raw, Shape{a * K, kPrimitiveAttrs});
  std::vector<std::size_t> owner(a * K);
  for (std::size_t i = 0; i < owner.size(); ++i) owner[i] = i / K;
  auto per_prim = [&](Var<T> v) { return gather_rows(v, owner); };
  Var<T> pos = add(per_prim(anchors.position), slice_cols(raw, kPosOffset, kPosOffset + 3));
  Var<T> cov = add(per_prim(anchors.covariance), slice_cols(raw, kCovOffset, kCovOffset + 6));
  Var<T> col = clamp(add(per_prim(anchors.color), slice_cols(raw, kColorOffset, kColorOffset + 3)),
                     T(0), T(1));
  Var<T> opa = sigmoid(slice_cols(raw, kOpacityOffset, kOpacityOffset + 1));
  return concat_cols<T>({pos, cov, col, opa});
}

template AnchorVars<float> anchor_params(Tape<float>&, AnchorTable<float>&);
template AnchorVars<double> anchor_params(Tape<double>&, AnchorTable<double>&);
template Var<float> derive_primitives(Tape<float>&, Mlp<float>&, const AnchorVars<float>&,
                                      std::size_t);
template Var<double> derive_primitives(Tape<double>&, Mlp<double>&, const AnchorVars<double>&,
                                       std::size_t);

template <typename T>
std::vector<NeuralPrimitive> to_neural_primitives(const Tensor<T>& prims, std::size_t K) {
  if (prims.cols() != kPrimitiveAttrs) throw DimensionError("primitive tensor must have 13 columns");
  std::vector<NeuralPrimitive> out(prims.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    NeuralPrimitive& p = out[i];
    p.anchor_id = i / K;
    for (int c = 0; c < 3; ++c) p.position[c] = prims.at(i, kPosOffset + c);
    for (int c = 0; c < 6; ++c) p.covariance[c] = prims.at(i, kCovOffset + c);
    for (int c = 0; c < 3; ++c) p.color[c] = prims.at(i, kColorOffset + c);
    p.opacity = prims.at(i, kOpacityOffset);
  }
  return out;
}

template std::vector<NeuralPrimitive> to_neural_primitives(const Tensor<float>&, std::size_t);
template std::vector<NeuralPrimitive> to_neural_primitives(const Tensor<double>&, std::size_t);

std::vector<NeuralPrimitive> derive_primitives(const Anchor& anchor, const Mlp<double>& f_theta,
                                               std::size_t K, std::size_t anchor_id) {
  ModelConfig cfg;
  cfg.K = K;
  cfg.n_v = anchor.f_v.size();
  cfg.n_g = K ? anchor.f_g.size() / K : 0;
  if (cfg.n_g * K != anchor.f_g.size()) throw DimensionError("f_g width is not a multiple of K");
  AnchorTable<double> table(1, cfg);
  table.set(0, anchor);
  Mlp<double> net = f_theta;
  Tape<double> tape(false);
  AnchorVars<double> vars = anchor_params(tape, table);
  Var<double> prims = derive_primitives(tape, net, vars, K);
  auto out = to_neural_primitives(prims.value(), K);
  for (auto& p : out) p.anchor_id = anchor_id;
  return out;
}

void write_anchor_table(io::ByteWriter& w, const AnchorTable<float>& t) {
  const std::size_t n = t.size();
  w.u32(static_cast<std::uint32_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (const Tensor<float>* col : {&t.position, &t.covariance, &t.color, &t.f_v, &t.f_g}) {
      for (std::size_t c = 0; c < col->cols(); ++c) w.f32(col->at(i, c));
    }
  }
}

AnchorTable<float> read_anchor_table(io::ByteReader& r, const ModelConfig& cfg) {
  const std::size_t n = r.u32();
  const std::size_t row_bytes = 4 * (3 + 6 + 3 + cfg.n_v + cfg.residual_width());
  if (r.remaining() < n * row_bytes) {
    throw DecodeError(DecodeFailure::kTruncated, "anchor table shorter than its declared count");
  }
  AnchorTable<float> t(n, cfg);
  for (std::size_t i = 0; i < n; ++i) {
    for (Tensor<float>* col : {&t.position, &t.covariance, &t.color, &t.f_v, &t.f_g}) {
      for (std::size_t c = 0; c < col->cols(); ++c) col->at(i, c) = r.f32();
    }
  }
  return t;
}

}  // namespace adcgs
