#include "adcgs/codec/entropy_model.h"

#include <random>

#include "adcgs/codec/symbols.h"
#include "adcgs/error.h"

namespace adcgs {

const char* stream_name(Stream s) {
  switch (s) {
    case Stream::kFv: return "f_v";
    case Stream::kFg: return "f_g";
    case Stream::kCov: return "cov";
    case Stream::kColor: return "color";
  }
  return "?";
}

Stream stream_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kStreamCount; ++i) {
    if (name == stream_name(static_cast<Stream>(i))) return static_cast<Stream>(i);
  }
  throw ConfigError("unknown quantization stream '" + name + "'");
}

void QuantizerConfig::validate() const {
  for (double q : base_steps) {
    if (!(q > 0.0)) throw ConfigError("quantization base steps must be positive");
  }
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> EntropyModel<T>::parameters() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  auto add = [&](Mlp<T>& m) {
    for (auto& p : m.parameters()) out.push_back(p);
  };
  add(hyper_encoder);
  out.emplace_back("hyper.loc", &hyper_loc);
  out.emplace_back("hyper.log_scale", &hyper_log_scale);
  add(e_fv);
  add(e_cov);
  add(e_color);
  add(e_fg);
  for (auto& m : f_q) add(m);
  return out;
}

template <typename T>
template <typename U>
EntropyModel<U> EntropyModel<T>::cast() const {
  EntropyModel<U> o;
  o.quant = quant;
  o.hyper_encoder = hyper_encoder.template cast<U>();
  o.hyper_loc = hyper_loc.template cast<U>();
  o.hyper_log_scale = hyper_log_scale.template cast<U>();
  o.e_fv = e_fv.template cast<U>();
  o.e_cov = e_cov.template cast<U>();
  o.e_color = e_color.template cast<U>();
  o.e_fg = e_fg.template cast<U>();
  for (std::size_t i = 0; i < kStreamCount; ++i) o.f_q[i] = f_q[i].template cast<U>();
  return o;
}

template struct EntropyModel<float>;
template struct EntropyModel<double>;
template EntropyModel<double> EntropyModel<float>::cast<double>() const;
template EntropyModel<float> EntropyModel<double>::cast<float>() const;

EntropyModel<float> init_entropy_model(const ModelConfig& cfg, const QuantizerConfig& q, Rng& rng) {
  q.validate();
  const std::size_t h = cfg.entropy_hidden, ch = cfg.chunk_hidden;
  EntropyModel<float> em;
  em.quant = q;
  em.hyper_encoder = Mlp<float>(MlpSpec{{cfg.n_v, h, cfg.hyper_dim}, Activation::kRelu, false}, "hyper_enc");
  em.hyper_loc = Tensor<float>({1, cfg.hyper_dim});
  em.hyper_log_scale = Tensor<float>({1, cfg.hyper_dim});
  em.e_fv = Mlp<float>(MlpSpec{{cfg.hyper_dim, h, h, 2 * cfg.n_v}, Activation::kRelu, true}, "e_fv");
  em.e_cov = Mlp<float>(MlpSpec{{cfg.n_v, h, h, 12}, Activation::kRelu, true}, "e_cov");
  em.e_color = Mlp<float>(MlpSpec{{cfg.n_v, h, h, 6}, Activation::kRelu, true}, "e_color");
  em.e_fg = Mlp<float>(
      MlpSpec{{cfg.n_v + cfg.residual_width(), ch, ch, 2 * cfg.chunk_width()}, Activation::kRelu, true},
      "e_fg");
  for (Mlp<float>* m : {&em.hyper_encoder, &em.e_fv, &em.e_cov, &em.e_color, &em.e_fg}) m->init(rng);
  const std::array<std::size_t, kStreamCount> in{cfg.hyper_dim, cfg.n_v, cfg.n_v, cfg.n_v};
  const std::array<std::size_t, kStreamCount> out{cfg.n_v, cfg.residual_width(), 6, 3};
  for (std::size_t i = 0; i < kStreamCount; ++i) {
    em.f_q[i] = Mlp<float>(MlpSpec{{in[i], 16, out[i]}, Activation::kRelu, false},
                           std::string("f_q.") + stream_name(static_cast<Stream>(i)));
    em.f_q[i].init(rng);
    em.f_q[i].zero_output_layer();
  }
  return em;
}

template <typename T>
Var<T> adaptive_step(Tape<T>& tape, EntropyModel<T>& em, Stream s, Var<T> context) {
  const auto i = static_cast<std::size_t>(s);
  if (i >= kStreamCount) throw ConfigError("unregistered quantization stream");
  Var<T> m = em.f_q[i].forward(tape, detach(context));
  return scale(add_scalar(tanh(m), T(1)), static_cast<T>(em.quant.base_steps[i]));
}

template <typename T>
Var<T> adaptive_quantize(Tape<T>& tape, Var<T> f, Var<T> step, QuantMode mode, Rng* noise) {
  if (mode == QuantMode::kTest) return quantize_ste(f, step);
  if (noise == nullptr) throw ContractError("train-mode quantization needs a noise source");
  Tensor<T> u(f.shape());
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  for (T& v : u.values()) v = static_cast<T>(d(*noise));
  return add(f, mul(tape.constant(std::move(u)), step));
}

template <typename T>
GaussianParams<T> split_params(Var<T> head) {
  const std::size_t w = head.cols() / 2;
  return {slice_cols(head, 0, w),
          clamp(exp(slice_cols(head, w, 2 * w)), static_cast<T>(kSigmaMin), static_cast<T>(kSigmaMax))};
}

template <typename T>
GaussianParams<T> fv_params(Tape<T>& tape, EntropyModel<T>& em, Var<T> eta_hat) {
  return split_params(em.e_fv.forward(tape, eta_hat));
}

template <typename T>
GaussianParams<T> cov_params(Tape<T>& tape, EntropyModel<T>& em, Var<T> fv_hat) {
  return split_params(em.e_cov.forward(tape, fv_hat));
}

template <typename T>
GaussianParams<T> color_params(Tape<T>& tape, EntropyModel<T>& em, Var<T> fv_hat) {
  return split_params(em.e_color.forward(tape, fv_hat));
}

template <typename T>
GaussianParams<T> chunk_context_params(Tape<T>& tape, EntropyModel<T>& em, Var<T> fv_hat,
                                       const std::vector<Var<T>>& decoded_chunks, std::size_t ch,
                                       std::size_t M) {
  if (ch < 1 || ch > M) {
    throw ContractError("chunk index " + std::to_string(ch) + " outside [1, " + std::to_string(M) + "]");
  }
  if (decoded_chunks.size() != ch - 1) {
    throw ContractError("chunk " + std::to_string(ch) + " needs exactly the " + std::to_string(ch - 1) +
                        " preceding chunks as context");
  }
  const std::size_t nv = fv_hat.cols();
  const std::size_t cw = (em.e_fg.spec().input_width() - nv) / M;
  Var<T> w = tape.param(em.e_fg.weight(0));
  Var<T> pre = matmul(fv_hat, slice_rows(w, 0, nv));
  for (std::size_t j = 0; j < decoded_chunks.size(); ++j) {
    if (decoded_chunks[j].cols() != cw) throw DimensionError("f_g chunk width mismatch");
    pre = add(pre, matmul(decoded_chunks[j], slice_rows(w, nv + j * cw, nv + (j + 1) * cw)));
  }
  pre = add_row(pre, tape.param(em.e_fg.bias(0)));
  return split_params(em.e_fg.forward_from_first(tape, pre, Var<T>()));
}

template <typename T>
QuantizedAnchors<T> quantize_anchors(Tape<T>& tape, EntropyModel<T>& em, const AnchorVars<T>& anchors,
                                     std::size_t M, QuantMode mode, Rng* noise) {
  QuantizedAnchors<T> q;
  const T floor_p = static_cast<T>(kProbFloor);
  Var<T> eta = em.hyper_encoder.forward(tape, anchors.f_v);
  if (mode == QuantMode::kTest) {
    q.eta = quantize_ste(eta, tape.constant(Tensor<T>(eta.shape(), T(1))));
  } else {
    q.eta = adaptive_quantize(tape, eta, tape.constant(Tensor<T>(eta.shape(), T(1))), mode, noise);
  }
  q.eta_bits = logistic_bits(q.eta, tape.param(em.hyper_loc), exp(tape.param(em.hyper_log_scale)), floor_p);

  auto code = [&](Stream s, Var<T> value, Var<T> context, GaussianParams<T> params) {
    const auto i = static_cast<std::size_t>(s);
    q.step[i] = adaptive_step(tape, em, s, context);
    Var<T> hat = adaptive_quantize(tape, value, q.step[i], mode, noise);
    q.params[i] = params;
    q.bits[i] = gaussian_bits(hat, params.mu, params.sigma, q.step[i], floor_p);
    q.coded_elements += hat.size();
    return hat;
  };
  q.f_v = code(Stream::kFv, anchors.f_v, q.eta, fv_params(tape, em, q.eta));
  q.covariance = code(Stream::kCov, anchors.covariance, q.f_v, cov_params(tape, em, q.f_v));
  q.color = code(Stream::kColor, anchors.color, q.f_v, color_params(tape, em, q.f_v));

  // f_g: one step tensor for the whole stream, entropy params chunk by chunk.
  const auto ig = static_cast<std::size_t>(Stream::kFg);
  q.step[ig] = adaptive_step(tape, em, Stream::kFg, q.f_v);
  q.f_g = adaptive_quantize(tape, anchors.f_g, q.step[ig], mode, noise);
  const std::size_t cw = anchors.f_g.cols() / M;
  std::vector<Var<T>> chunks, mus, sigmas;
  for (std::size_t ch = 1; ch <= M; ++ch) {
    GaussianParams<T> p = chunk_context_params(tape, em, q.f_v, chunks, ch, M);
    mus.push_back(p.mu);
    sigmas.push_back(p.sigma);
    chunks.push_back(slice_cols(q.f_g, (ch - 1) * cw, ch * cw));
  }
  q.params[ig] = {concat_cols(mus), concat_cols(sigmas)};
  q.bits[ig] = gaussian_bits(q.f_g, q.params[ig].mu, q.params[ig].sigma, q.step[ig], floor_p);
  q.coded_elements += q.f_g.size() + q.eta.size();
  return q;
}

template <typename T>
Var<T> total_bits(const QuantizedAnchors<T>& q) {
  Var<T> r = sum(q.eta_bits);
  for (const Var<T>& b : q.bits) r = add(r, sum(b));
  return r;
}

template <typename T>
RateBreakdown rate_breakdown(const QuantizedAnchors<T>& q) {
  auto total = [](const Var<T>& v) {
    double s = 0;
    for (T x : v.value().values()) s += x;
    return s;
  };
  RateBreakdown r;
  r.hyperprior = total(q.eta_bits);
  r.f_v = total(q.bits[static_cast<std::size_t>(Stream::kFv)]);
  r.f_g = total(q.bits[static_cast<std::size_t>(Stream::kFg)]);
  r.covariance = total(q.bits[static_cast<std::size_t>(Stream::kCov)]);
  r.color = total(q.bits[static_cast<std::size_t>(Stream::kColor)]);
  r.symbols = q.coded_elements;
  return r;
}

#define ADCGS_INSTANTIATE(T)                                                                        \
  template Var<T> adaptive_step(Tape<T>&, EntropyModel<T>&, Stream, Var<T>);                        \
  template Var<T> adaptive_quantize(Tape<T>&, Var<T>, Var<T>, QuantMode, Rng*);                     \
  template GaussianParams<T> split_params(Var<T>);                                                  \
  template GaussianParams<T> fv_params(Tape<T>&, EntropyModel<T>&, Var<T>);                         \
  template GaussianParams<T> cov_params(Tape<T>&, EntropyModel<T>&, Var<T>);                        \
  template GaussianParams<T> color_params(Tape<T>&, EntropyModel<T>&, Var<T>);                      \
  template GaussianParams<T> chunk_context_params(Tape<T>&, EntropyModel<T>&, Var<T>,               \
                                                  const std::vector<Var<T>>&, std::size_t,          \
                                                  std::size_t);                                     \
  template QuantizedAnchors<T> quantize_anchors(Tape<T>&, EntropyModel<T>&, const AnchorVars<T>&,   \
                                                std::size_t, QuantMode, Rng*);                      \
  template Var<T> total_bits(const QuantizedAnchors<T>&);                                           \
  template RateBreakdown rate_breakdown(const QuantizedAnchors<T>&);

ADCGS_INSTANTIATE(float)
ADCGS_INSTANTIATE(double)
#undef ADCGS_INSTANTIATE

}  // namespace adcgs
