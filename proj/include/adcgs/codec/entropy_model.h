#ifndef ADCGS_CODEC_ENTROPY_MODEL_H_
#define ADCGS_CODEC_ENTROPY_MODEL_H_

#include <array>
#include <string>
#include <vector>

#include "adcgs/model/canonical.h"

namespace adcgs {

enum class Stream { kFv = 0, kFg = 1, kCov = 2, kColor = 3 };
inline constexpr std::size_t kStreamCount = 4;
const char* stream_name(Stream s);
// Throws ConfigError for names other than f_v, f_g, cov, color.
Stream stream_from_name(const std::string& name);

struct QuantizerConfig {
  std::array<double, kStreamCount> base_steps{0.1, 0.1, 0.01, 0.01};
  void validate() const;
};

enum class QuantMode { kTrain, kTest };

// Networks and parameters of the multi-dimension entropy model.
template <typename T>
struct EntropyModel {
  QuantizerConfig quant;
  Mlp<T> hyper_encoder;  // f_v → η
  Tensor<T> hyper_loc;        // [1×hyper_dim]
  Tensor<T> hyper_log_scale;  // [1×hyper_dim]
  Mlp<T> e_fv;     // η̂ → (μ, σ) of f_v
  Mlp<T> e_cov;    // f̂_v → (μ, σ) of Σ_v
  Mlp<T> e_color;  // f̂_v → (μ, σ) of C_v
  Mlp<T> e_fg;     // chunk context → (μ, σ) of one f_g chunk
  std::array<Mlp<T>, kStreamCount> f_q;  // step modulation per stream

  std::vector<std::pair<std::string, Tensor<T>*>> parameters();
  template <typename U>
  EntropyModel<U> cast() const;
};

EntropyModel<float> init_entropy_model(const ModelConfig& cfg, const QuantizerConfig& q, Rng& rng);

// Per-element effective step Q·(1 + tanh(F_q(context))), context detached.
template <typename T>
Var<T> adaptive_step(Tape<T>& tape, EntropyModel<T>& em, Stream s, Var<T> context);

// Train: f + U(−½,½)·step drawn from `noise`; test: round(f/step)·step.
// Gradients pass straight through to f in both modes.
template <typename T>
Var<T> adaptive_quantize(Tape<T>& tape, Var<T> f, Var<T> step, QuantMode mode, Rng* noise);

template <typename T>
struct GaussianParams {
  Var<T> mu, sigma;
};

// Splits a head output [n×2w] into μ and σ = clamp(exp(raw), σ_min, σ_max).
template <typename T>
GaussianParams<T> split_params(Var<T> head);

template <typename T>
GaussianParams<T> fv_params(Tape<T>& tape, EntropyModel<T>& em, Var<T> eta_hat);
template <typename T>
GaussianParams<T> cov_params(Tape<T>& tape, EntropyModel<T>& em, Var<T> fv_hat);
template <typename T>
GaussianParams<T> color_params(Tape<T>& tape, EntropyModel<T>& em, Var<T> fv_hat);

// Chunk `ch` (1-based) of f_g conditioned on f̂_v and decoded chunks 1..ch−1,
// zero-padded to the fixed context width.
template <typename T>
GaussianParams<T> chunk_context_params(Tape<T>& tape, EntropyModel<T>& em, Var<T> fv_hat,
                                       const std::vector<Var<T>>& decoded_chunks, std::size_t ch,
                                       std::size_t M);

// Everything the rate term and the coder need for one set of anchors.
template <typename T>
struct QuantizedAnchors {
  Var<T> eta;  // noisy or rounded hyper latent
  Var<T> f_v, f_g, covariance, color;
  std::array<Var<T>, kStreamCount> step;
  std::array<GaussianParams<T>, kStreamCount> params;
  // −log2 p per element for η and each stream.
  Var<T> eta_bits;
  std::array<Var<T>, kStreamCount> bits;
  std::size_t coded_elements = 0;
};

template <typename T>
QuantizedAnchors<T> quantize_anchors(Tape<T>& tape, EntropyModel<T>& em, const AnchorVars<T>& anchors,
                                     std::size_t M, QuantMode mode, Rng* noise);

// Σ of all bits (η, f_v, f_g, Σ_v, C_v) as a scalar Var.
template <typename T>
Var<T> total_bits(const QuantizedAnchors<T>& q);

struct RateBreakdown {
  double hyperprior = 0, f_v = 0, f_g = 0, covariance = 0, color = 0;
  std::size_t symbols = 0;
  double total() const { return hyperprior + f_v + f_g + covariance + color; }
};

template <typename T>
RateBreakdown rate_breakdown(const QuantizedAnchors<T>& q);

}  // namespace adcgs

#endif  // ADCGS_CODEC_ENTROPY_MODEL_H_
