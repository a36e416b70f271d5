#include "adcgs/model/deformation.h"

#include <cmath>
#include <random>

#include "adcgs/error.h"

namespace adcgs {

MlpSpec f_s_spec(const ModelConfig& cfg) {
  return MlpSpec{{2, cfg.time_hidden, cfg.time_dim}, Activation::kTanh, false};
}

MlpSpec f_omega_spec(const ModelConfig& cfg) {
  return MlpSpec{{cfg.n_v + cfg.time_dim, cfg.hidden, cfg.hidden, 12}, Activation::kRelu, false};
}

MlpSpec f_varpi_spec(const ModelConfig& cfg) {
  return MlpSpec{{cfg.pos_embed_width() + cfg.time_dim + cfg.K, cfg.hidden, cfg.hidden, 4},
                 Activation::kRelu,
                 false};
}

DeformationNets<float> init_deformation(const ModelConfig& cfg, Rng& rng) {
  DeformationNets<float> d;
  d.time.z = Tensor<float>({1, cfg.time_grid});
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (float& v : d.time.z.values()) v = static_cast<float>(u(rng));
  d.time.f_s = Mlp<float>(f_s_spec(cfg), "f_s");
  d.time.f_s.init(rng);
  d.f_omega = Mlp<float>(f_omega_spec(cfg), "f_omega");
  d.f_omega.init(rng);
  d.f_omega.zero_output_layer();
  d.f_varpi = Mlp<float>(f_varpi_spec(cfg), "f_varpi");
  d.f_varpi.init(rng);
  d.f_varpi.zero_output_layer();
  return d;
}

template <typename T>
template <typename U>
DeformationNets<U> DeformationNets<T>::cast() const {
  DeformationNets<U> out;
  out.time.z = time.z.template cast<U>();
  out.time.f_s = time.f_s.template cast<U>();
  out.f_omega = f_omega.template cast<U>();
  out.f_varpi = f_varpi.template cast<U>();
  return out;
}

template DeformationNets<double> DeformationNets<float>::cast<double>() const;
template DeformationNets<float> DeformationNets<double>::cast<float>() const;

namespace {

struct GridPoint {
  std::size_t i0, i1;
  double frac;
};

GridPoint grid_point(std::size_t n, double t) {
  const double x = t * static_cast<double>(n - 1);
  std::size_t i0 = static_cast<std::size_t>(std::floor(x));
  if (i0 >= n - 1) i0 = n - 2;
  return {i0, i0 + 1, x - static_cast<double>(i0)};
}

double checked_time(double t, TimePolicy policy, bool* clamped) {
  const bool out = !(t >= 0.0 && t <= 1.0);
  if (clamped) *clamped = out;
  if (!out) return t;
  if (policy == TimePolicy::kPedantic || std::isnan(t)) {
    throw ContractError("normalized time " + std::to_string(t) + " outside [0,1]");
  }
  return t < 0.0 ? 0.0 : 1.0;
}

}  // namespace

template <typename T>
double interp_time_grid(const Tensor<T>& z, double t) {
  const GridPoint g = grid_point(z.size(), t);
  return static_cast<double>(z[g.i0]) + g.frac * (static_cast<double>(z[g.i1]) - z[g.i0]);
}

template double interp_time_grid(const Tensor<float>&, double);
template double interp_time_grid(const Tensor<double>&, double);

template <typename T>
Var<T> time_embedding(Tape<T>& tape, TimeEmbedding<T>& te, double t, TimePolicy policy,
                      bool* clamped) {
  t = checked_time(t, policy, clamped);
  const GridPoint g = grid_point(te.z.size(), t);
  Var<T> z = tape.param(te.z);
  Var<T> lo = slice_cols(z, g.i0, g.i0 + 1);
  Var<T> hi = slice_cols(z, g.i1, g.i1 + 1);
  Var<T> value = add(scale(lo, static_cast<T>(1.0 - g.frac)), scale(hi, static_cast<T>(g.frac)));
  Var<T> input = concat_cols<T>({value, tape.constant(Shape{1, 1}, {static_cast<T>(t)})});
  return te.f_s.forward(tape, input);
}

template Var<float> time_embedding(Tape<float>&, TimeEmbedding<float>&, double, TimePolicy, bool*);
template Var<double> time_embedding(Tape<double>&, TimeEmbedding<double>&, double, TimePolicy,
                                    bool*);

std::vector<double> positional_embedding(const Vec3& x, std::size_t bands) {
  std::vector<double> out;
  out.reserve(6 * bands);
  for (int a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < bands; ++b) {
      const double arg = std::ldexp(x[a], static_cast<int>(b));
      out.push_back(std::sin(arg));
      out.push_back(std::cos(arg));
    }
  }
  return out;
}

template <typename T>
Tensor<T> positional_embedding_rows(const Tensor<T>& positions, std::size_t bands) {
  const std::size_t n = positions.rows();
  Tensor<T> out({n, 6 * bands});
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 x{positions.at(i, 0), positions.at(i, 1), positions.at(i, 2)};
    const std::vector<double> e = positional_embedding(x, bands);
    for (std::size_t c = 0; c < e.size(); ++c) out.at(i, c) = static_cast<T>(e[c]);
  }
  return out;
}

template Tensor<float> positional_embedding_rows(const Tensor<float>&, std::size_t);
template Tensor<double> positional_embedding_rows(const Tensor<double>&, std::size_t);

namespace {

void check_width(const Mlp<auto>& net, std::size_t in, std::size_t out, const char* what) {
  if (net.spec().input_width() != in || net.spec().output_width() != out) {
    throw ConfigError(std::string(what) + " expects " + std::to_string(in) + "→" +
                      std::to_string(out) + " but the network is " +
                      std::to_string(net.spec().input_width()) + "→" +
                      std::to_string(net.spec().output_width()));
  }
}

// First layer of F applied to concat(rows, broadcast row) without materialising
// the concatenation: rows·W[0:r] + (row·W[r:] + b).
template <typename T>
Var<T> split_first_layer(Tape<T>& tape, Mlp<T>& net, Var<T> rows, Var<T> shared) {
  const std::size_t r = rows.cols();
  Var<T> w = tape.param(net.weight(0));
  Var<T> b = tape.param(net.bias(0));
  Var<T> top = slice_rows(w, 0, r);
  Var<T> bottom = slice_rows(w, r, w.rows());
  return add_row(matmul(rows, top), add(matmul(shared, bottom), b));
}

}  // namespace

template <typename T>
Var<T> coarse_deform(Tape<T>& tape, Mlp<T>& f_omega, Var<T> f_v, Var<T> f_t) {
  check_width(f_omega, f_v.cols() + f_t.cols(), 12, "F_ω");
  Var<T> pre = split_first_layer(tape, f_omega, f_v, f_t);
  return f_omega.forward_from_first(tape, pre, Var<T>());
}

template <typename T>
Var<T> coarse_deform_per_primitive(Tape<T>& tape, Mlp<T>& f_omega, Var<T> f_v, Var<T> f_t,
                                   std::size_t K) {
  std::vector<std::size_t> owner(f_v.rows() * K);
  for (std::size_t i = 0; i < owner.size(); ++i) owner[i] = i / K;
  return coarse_deform(tape, f_omega, gather_rows(f_v, owner), f_t);
}

template <typename T>
Var<T> fine_deform(Tape<T>& tape, Mlp<T>& f_varpi, Var<T> f_p, Var<T> f_t, std::size_t K) {
  const std::size_t a = f_p.rows(), p = f_p.cols(), tw = f_t.cols();
  check_width(f_varpi, p + tw + K, 4, "F_ϖ");
  Var<T> w = tape.param(f_varpi.weight(0));
  Var<T> b = tape.param(f_varpi.bias(0));
  Var<T> per_anchor = matmul(f_p, slice_rows(w, 0, p));
  Var<T> shared = add(matmul(f_t, slice_rows(w, p, p + tw)), b);
  Var<T> slot_rows = slice_rows(w, p + tw, p + tw + K);
  std::vector<std::size_t> owner(a * K), slot(a * K);
  for (std::size_t i = 0; i < owner.size(); ++i) {
    owner[i] = i / K;
    slot[i] = i % K;
  }
  Var<T> pre = add_row(add(gather_rows(per_anchor, owner), gather_rows(slot_rows, slot)), shared);
  return f_varpi.forward_from_first(tape, pre, Var<T>());
}

template <typename T>
Var<T> compose(Var<T> prims, Var<T> coarse, Var<T> fine, std::size_t K) {
  const std::size_t n = prims.rows();
  Var<T> pos = slice_cols(prims, kPosOffset, kPosOffset + 3);
  Var<T> cov = slice_cols(prims, kCovOffset, kCovOffset + 6);
  Var<T> col = slice_cols(prims, kColorOffset, kColorOffset + 3);
  Var<T> opa = slice_cols(prims, kOpacityOffset, kOpacityOffset + 1);
  if (coarse.valid()) {
    if (coarse.rows() * K != n || coarse.cols() != 12) {
      throw ContractError("coarse deformation does not match the primitive set");
    }
    std::vector<std::size_t> owner(n);
    for (std::size_t i = 0; i < n; ++i) owner[i] = i / K;
    Var<T> per = gather_rows(coarse, owner);
    pos = add(pos, slice_cols(per, 0, 3));
    cov = add(cov, slice_cols(per, 3, 9));
    col = add(col, slice_cols(per, 9, 12));
  }
  if (fine.valid()) {
    if (fine.rows() != n || fine.cols() != 4) {
      throw ContractError("fine deformation does not match the primitive set");
    }
    opa = add(opa, slice_cols(fine, 0, 1));
    col = add(col, slice_cols(fine, 1, 4));
  }
  return concat_cols<T>({pos, cov, clamp(col, T(0), T(1)), clamp(opa, T(0), T(1))});
}

DeformedPrimitive compose(const NeuralPrimitive& p, const CoarseDeformation& coarse,
                          const FineDeformation& fine) {
  if (p.anchor_id != coarse.anchor_id) {
    throw ContractError("coarse deformation of anchor " + std::to_string(coarse.anchor_id) +
                        " applied to a primitive of anchor " + std::to_string(p.anchor_id));
  }
  DeformedPrimitive d;
  for (int c = 0; c < 3; ++c) d.position[c] = p.position[c] + coarse.d_position[c];
  for (int c = 0; c < 6; ++c) d.covariance[c] = p.covariance[c] + coarse.d_covariance[c];
  d.opacity = std::clamp(p.opacity + fine.d_opacity, 0.0, 1.0);
  for (int c = 0; c < 3; ++c) {
    d.color[c] = std::clamp(p.color[c] + coarse.d_color[c] + fine.d_color[c], 0.0, 1.0);
  }
  return d;
}

template <typename T>
FrameGraph<T> deform_frame(Tape<T>& tape, Mlp<T>& f_theta, DeformationNets<T>& nets,
                           const AnchorVars<T>& anchors, std::size_t K, double t,
                           const DeformOptions& opts) {
  FrameGraph<T> g;
  g.canonical = derive_primitives(tape, f_theta, anchors, K);
  if (!opts.coarse && !opts.fine) {
    g.deformed = compose(g.canonical, Var<T>(), Var<T>(), K);
    return g;
  }
  Var<T> f_t = time_embedding(tape, nets.time, t, opts.policy, &g.time_clamped);
  Var<T> anchor_pos = anchors.position;
  if (opts.coarse) {
    g.coarse = coarse_deform(tape, nets.f_omega, anchors.f_v, f_t);
    anchor_pos = add(anchor_pos, slice_cols(g.coarse, 0, 3));
  }
  if (opts.fine) {
    if (opts.detach_position_embedding) anchor_pos = detach(anchor_pos);
    const std::size_t bands = (nets.f_varpi.spec().input_width() - f_t.cols() - K) / 6;
    g.fine = fine_deform(tape, nets.f_varpi, sinusoidal_embedding(anchor_pos, bands), f_t, K);
  }
  g.deformed = compose(g.canonical, g.coarse, g.fine, K);
  return g;
}

template <typename T>
std::vector<DeformedPrimitive> to_deformed(const Tensor<T>& prims) {
  std::vector<DeformedPrimitive> out(prims.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    DeformedPrimitive& p = out[i];
    for (int c = 0; c < 3; ++c) p.position[c] = prims.at(i, kPosOffset + c);
    for (int c = 0; c < 6; ++c) p.covariance[c] = prims.at(i, kCovOffset + c);
    for (int c = 0; c < 3; ++c) p.color[c] = prims.at(i, kColorOffset + c);
    p.opacity = prims.at(i, kOpacityOffset);
  }
  return out;
}

#define ADCGS_INSTANTIATE(T)                                                                    \
  template Var<T> coarse_deform(Tape<T>&, Mlp<T>&, Var<T>, Var<T>);                             \
  template Var<T> coarse_deform_per_primitive(Tape<T>&, Mlp<T>&, Var<T>, Var<T>, std::size_t); \
  template Var<T> fine_deform(Tape<T>&, Mlp<T>&, Var<T>, Var<T>, std::size_t);                 \
  template Var<T> compose(Var<T>, Var<T>, Var<T>, std::size_t);                                 \
  template FrameGraph<T> deform_frame(Tape<T>&, Mlp<T>&, DeformationNets<T>&,                   \
                                      const AnchorVars<T>&, std::size_t, double,                \
                                      const DeformOptions&);                                    \
  template std::vector<DeformedPrimitive> to_deformed(const Tensor<T>&);

ADCGS_INSTANTIATE(float)
ADCGS_INSTANTIATE(double)
#undef ADCGS_INSTANTIATE

}  // namespace adcgs
