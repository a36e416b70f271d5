#include "adcgs/train/trainer.h"

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "adcgs/tensor/adam.h"
#include "adcgs/train/metrics.h"
#include "json.hpp"

namespace adcgs {

using nlohmann::json;

void TrainingConfig::validate() const {
  model.validate();
  quant.validate();
  refinement.validate();
  if (!(lambda_ssim >= 0.0 && lambda_ssim <= 1.0)) throw ConfigError("lambda_ssim must lie in [0, 1]");
  if (!(lambda_e > 0.0)) throw ConfigError("lambda_e must be positive");
  if (!(0.0 <= refine_start && refine_start < deform_start && deform_start < rd_start && rd_start < refine_end &&
        refine_end <= 1.0)) {
    throw ConfigError("milestones must satisfy refine_start < deform_start < rd_start < refine_end <= 1");
  }
  for (double lr : {lr_features, lr_covariance, lr_color, lr_f_theta, lr_deformation, lr_time_grid, lr_entropy}) {
    if (!(lr > 0.0)) throw ConfigError("learning rates must be positive");
  }
  if (!(grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown " + where + " field '" + it.key() + "'");
  }
}

}  // namespace

TrainingConfig TrainingConfig::from_json_text(const std::string& text) {
  TrainingConfig c;
  try {
    const json j = json::parse(text);
    check_keys(j,
               {"lambda_ssim", "lambda_e", "iterations", "refine_start", "refine_end", "deform_start", "rd_start",
                "coarse", "fine", "refine", "model", "quant", "refinement", "max_anchors", "seed", "lr_features",
                "lr_covariance", "lr_color", "lr_f_theta", "lr_deformation", "lr_time_grid", "lr_entropy",
                "grad_clip", "snapshot_path"},
               "training config");
    read_field(j, "lambda_ssim", c.lambda_ssim);
    read_field(j, "lambda_e", c.lambda_e);
    read_field(j, "iterations", c.iterations);
    read_field(j, "refine_start", c.refine_start);
    read_field(j, "refine_end", c.refine_end);
    read_field(j, "deform_start", c.deform_start);
    read_field(j, "rd_start", c.rd_start);
    read_field(j, "coarse", c.coarse);
    read_field(j, "fine", c.fine);
    read_field(j, "refine", c.refine);
    read_field(j, "max_anchors", c.max_anchors);
    read_field(j, "seed", c.seed);
    read_field(j, "lr_features", c.lr_features);
    read_field(j, "lr_covariance", c.lr_covariance);
    read_field(j, "lr_color", c.lr_color);
    read_field(j, "lr_f_theta", c.lr_f_theta);
    read_field(j, "lr_deformation", c.lr_deformation);
    read_field(j, "lr_time_grid", c.lr_time_grid);
    read_field(j, "lr_entropy", c.lr_entropy);
    read_field(j, "grad_clip", c.grad_clip);
    read_field(j, "snapshot_path", c.snapshot_path);
    if (j.contains("model")) {
      const json& m = j["model"];
      check_keys(m,
                 {"K", "n_v", "n_g", "M", "voxel_size", "hidden", "time_grid", "time_dim", "time_hidden", "pos_bands",
                  "hyper_dim", "entropy_hidden", "chunk_hidden", "offset_spread", "initial_opacity"},
                 "model");
      ModelConfig& mc = c.model;
      read_field(m, "K", mc.K);
      read_field(m, "n_v", mc.n_v);
      read_field(m, "n_g", mc.n_g);
      read_field(m, "M", mc.M);
      read_field(m, "voxel_size", mc.voxel_size);
      read_field(m, "hidden", mc.hidden);
      read_field(m, "time_grid", mc.time_grid);
      read_field(m, "time_dim", mc.time_dim);
      read_field(m, "time_hidden", mc.time_hidden);
      read_field(m, "pos_bands", mc.pos_bands);
      read_field(m, "hyper_dim", mc.hyper_dim);
      read_field(m, "entropy_hidden", mc.entropy_hidden);
      read_field(m, "chunk_hidden", mc.chunk_hidden);
      read_field(m, "offset_spread", mc.offset_spread);
      read_field(m, "initial_opacity", mc.initial_opacity);
    }
    if (j.contains("quant")) {
      check_keys(j["quant"], {"base_steps"}, "quant");
      if (j["quant"].contains("base_steps")) {
        const auto v = j["quant"]["base_steps"].get<std::vector<double>>();
        if (v.size() != kStreamCount) throw ConfigError("quant.base_steps needs four values (f_v, f_g, cov, color)");
        std::copy(v.begin(), v.end(), c.quant.base_steps.begin());
      }
    }
    if (j.contains("refinement")) {
      const json& r = j["refinement"];
      check_keys(r, {"interval", "tau_g", "tau_p"}, "refinement");
      read_field(r, "interval", c.refinement.interval);
      read_field(r, "tau_g", c.refinement.tau_g);
      read_field(r, "tau_p", c.refinement.tau_p);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainingConfig TrainingConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read training config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string TrainingConfig::to_json_text() const {
  const ModelConfig& mc = model;
  json j = {{"lambda_ssim", lambda_ssim},
            {"lambda_e", lambda_e},
            {"iterations", iterations},
            {"refine_start", refine_start},
            {"refine_end", refine_end},
            {"deform_start", deform_start},
            {"rd_start", rd_start},
            {"coarse", coarse},
            {"fine", fine},
            {"refine", refine},
            {"max_anchors", max_anchors},
            {"seed", seed},
            {"lr_features", lr_features},
            {"lr_covariance", lr_covariance},
            {"lr_color", lr_color},
            {"lr_f_theta", lr_f_theta},
            {"lr_deformation", lr_deformation},
            {"lr_time_grid", lr_time_grid},
            {"lr_entropy", lr_entropy},
            {"grad_clip", grad_clip},
            {"snapshot_path", snapshot_path},
            {"model",
             {{"K", mc.K},
              {"n_v", mc.n_v},
              {"n_g", mc.n_g},
              {"M", mc.M},
              {"voxel_size", mc.voxel_size},
              {"hidden", mc.hidden},
              {"time_grid", mc.time_grid},
              {"time_dim", mc.time_dim},
              {"time_hidden", mc.time_hidden},
              {"pos_bands", mc.pos_bands},
              {"hyper_dim", mc.hyper_dim},
              {"entropy_hidden", mc.entropy_hidden},
              {"chunk_hidden", mc.chunk_hidden},
              {"offset_spread", mc.offset_spread},
              {"initial_opacity", mc.initial_opacity}}},
            {"quant", {{"base_steps", quant.base_steps}}},
            {"refinement",
             {{"interval", refinement.interval}, {"tau_g", refinement.tau_g}, {"tau_p", refinement.tau_p}}}};
  return j.dump(2) + "\n";
}

LossTerms image_loss(const Image& rendered, const Image& target, double rate, double lambda_ssim,
                     double lambda_e, Image* grad) {
  if (rendered.width != target.width || rendered.height != target.height) {
    throw ContractError("rendered and target images differ in size");
  }
  LossTerms L;
  L.l1 = mean_abs_error(rendered, target);
  Image gs;
  L.ssim = ssim_with_grad(rendered, target, grad ? &gs : nullptr);
  L.rate = rate;
  L.total = (1.0 - lambda_ssim) * L.l1 + lambda_ssim * (1.0 - L.ssim) + lambda_e * rate;
  if (grad) {
    *grad = Image(rendered.width, rendered.height);
    const double n = static_cast<double>(rendered.rgb.size());
    for (std::size_t i = 0; i < rendered.rgb.size(); ++i) {
      const double d = rendered.rgb[i] - target.rgb[i];
      const double sign = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
      grad->rgb[i] = (1.0 - lambda_ssim) * sign / n - lambda_ssim * gs.rgb[i];
    }
  }
  return L;
}

namespace {

std::vector<PrimitiveAttributes> canonical_attributes(Model& m) {
  Tape<float> tape(false);
  Var<float> prims = derive_primitives(tape, m.canonical.f_theta, anchor_params(tape, m.canonical.anchors),
                                       m.config().K);
  const Tensor<float>& p = prims.value();
  std::vector<PrimitiveAttributes> out(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    for (int c = 0; c < 3; ++c) out[r].position[c] = p.at(r, kPosOffset + c);
    for (int c = 0; c < 6; ++c) out[r].covariance[c] = p.at(r, kCovOffset + c);
    for (int c = 0; c < 3; ++c) out[r].color[c] = p.at(r, kColorOffset + c);
  }
  return out;
}

class Trainer {
 public:
  Trainer(const SceneDataset& data, const TrainingConfig& cfg) : data_(data), cfg_(cfg), rng_(cfg.seed) {
    SceneMeta meta;
    meta.cameras = data.cameras;
    meta.frame_count = data.frames;
    meta.bbox = data.bbox;
    res_.model = init_model(data.init_points, cfg.model, cfg.quant, meta, rng_);
    Model& m = res_.model;
    m.coarse = cfg.coarse;
    m.fine = cfg.fine;
    m.lambda_e = cfg.lambda_e;
    auto group = [&](Mlp<float>& net, double lr) {
      for (auto& [name, t] : net.parameters()) opt_.add(name, t, AdamConfig{lr});
    };
    AnchorTable<float>& a = m.canonical.anchors;
    opt_.add("anchors.covariance", &a.covariance, AdamConfig{cfg.lr_covariance});
    opt_.add("anchors.color", &a.color, AdamConfig{cfg.lr_color});
    opt_.add("anchors.f_v", &a.f_v, AdamConfig{cfg.lr_features});
    opt_.add("anchors.f_g", &a.f_g, AdamConfig{cfg.lr_features});
    group(m.canonical.f_theta, cfg.lr_f_theta);
    opt_.add("time.z", &m.deform.time.z, AdamConfig{cfg.lr_time_grid});
    group(m.deform.time.f_s, cfg.lr_deformation);
    group(m.deform.f_omega, cfg.lr_deformation);
    group(m.deform.f_varpi, cfg.lr_deformation);
    for (auto& [name, t] : m.entropy.parameters()) opt_.add(name, t, AdamConfig{cfg.lr_entropy});
    acc_.reset(m.anchor_count(), cfg.model.K);
  }

  TrainResult run(const TrainProgress& progress) {
    const std::size_t N = cfg_.iterations;
    auto at = [&](double frac) { return static_cast<std::size_t>(std::llround(frac * static_cast<double>(N))); };
    const std::size_t it_deform = at(cfg_.deform_start), it_rd = at(cfg_.rd_start);
    const std::size_t it_rs = at(cfg_.refine_start), it_re = at(cfg_.refine_end);
    for (std::size_t it = 1; it <= N; ++it) {
      const bool in_window = cfg_.refine && it > it_rs && it <= it_re;
      TrainLogRow row = step(it, it > it_deform, it > it_rd, in_window);
      if (in_window && (it - it_rs) % cfg_.refinement.interval == 0) refine(it);
      res_.log.push_back(row);
      if (progress) progress(row);
    }
    return std::move(res_);
  }

 private:
  TrainLogRow step(std::size_t it, bool deform, bool rd, bool accumulate) {
    Model& m = res_.model;
    const ModelConfig& mc = m.config();
    const std::size_t cam = data_.train_cameras[rng_() % data_.train_cameras.size()];
    const std::size_t frame = rng_() % data_.frames;
    const Image& target = data_.images[cam][frame];

    opt_.zero_grad();
    Tape<float> tape;
    AnchorVars<float> vars = anchor_params(tape, m.canonical.anchors);
    Var<float> rate;
    double rate_bits = 0.0, rate_norm = 0.0;
    if (rd) {
      auto q = quantize_anchors(tape, m.entropy, vars, mc.M, QuantMode::kTrain, &rng_);
      Var<float> bits = total_bits(q);
      rate_bits = bits.item();
      rate = scale(bits, 1.0f / static_cast<float>(q.coded_elements));
      rate_norm = rate.item();
      vars = {vars.position, q.covariance, q.color, q.f_v, q.f_g};
    }
    DeformOptions opts;
    opts.coarse = deform && cfg_.coarse;
    opts.fine = deform && cfg_.fine;
    FrameGraph<float> g = deform_frame(tape, m.canonical.f_theta, m.deform, vars, mc.K, data_.frame_time(frame), opts);
    const std::vector<DeformedPrimitive> prims = to_deformed(g.deformed.value());
    const RenderResult rr = render(prims, data_.cameras[cam]);
    Image grad;
    const LossTerms L = image_loss(rr.output.image, target, rate_norm, cfg_.lambda_ssim, rd ? cfg_.lambda_e : 0.0, &grad);
    if (!std::isfinite(L.total)) abort_numeric(it, L);

    const std::vector<PrimitiveGrad> pg = render_backward(rr, prims, grad);
    Tensor<float> G({prims.size(), kPrimitiveAttrs});
    for (std::size_t i = 0; i < prims.size(); ++i) {
      for (int c = 0; c < 3; ++c) G.at(i, kPosOffset + c) = static_cast<float>(pg[i].position[c]);
      for (int c = 0; c < 6; ++c) G.at(i, kCovOffset + c) = static_cast<float>(pg[i].covariance[c]);
      for (int c = 0; c < 3; ++c) G.at(i, kColorOffset + c) = static_cast<float>(pg[i].color[c]);
      G.at(i, kOpacityOffset) = static_cast<float>(pg[i].opacity);
    }
    Var<float> surrogate = sum(mul(g.deformed, tape.constant(std::move(G))));
    if (rd) surrogate = add(surrogate, scale(rate, static_cast<float>(cfg_.lambda_e)));
    tape.backward(surrogate);
    opt_.clip_grad_norm(cfg_.grad_clip);
    opt_.step();

    if (accumulate) {
      std::vector<double> norms(prims.size()), opac(prims.size());
      for (std::size_t i = 0; i < prims.size(); ++i) {
        norms[i] = pg[i].mean2d_norm;
        opac[i] = prims[i].opacity;
      }
      acc_.record(norms, rr.weights, opac);
    }

    TrainLogRow row;
    row.iteration = it;
    row.l1 = L.l1;
    row.ssim = L.ssim;
    row.rate_bits = rate_bits;
    row.total_loss = L.total;
    row.anchors = m.anchor_count();
    row.psnr_train = psnr(rr.output.image, target);
    return row;
  }

  void refine(std::size_t it) {
    Model& m = res_.model;
    AnchorTable<float>& a = m.canonical.anchors;
    const std::size_t A = a.size();
    if (acc_.records() == 0) return;
    const auto attrs = canonical_attributes(m);
    std::vector<std::size_t> old_rows(A);
    std::iota(old_rows.begin(), old_rows.end(), 0);
    std::vector<std::size_t> keep;
    {
      AnchorTable<float> scratch = a.select(old_rows);
      try {
        keep = prune_anchors(scratch, acc_, cfg_.refinement.tau_p);
      } catch (const ContractError&) {
        keep = old_rows;
      }
    }
    const std::size_t room = cfg_.max_anchors > keep.size() ? cfg_.max_anchors - keep.size() : 0;
    const GrowResult grown = grow_anchors(a, m.config(), acc_, attrs, cfg_.refinement.tau_g, room);
    for (std::size_t i = A; i < a.size(); ++i) keep.push_back(i);
    std::vector<std::int64_t> source(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) source[i] = keep[i] < A ? static_cast<std::int64_t>(keep[i]) : -1;
    a = a.select(keep);
    for (Tensor<float>* t : a.trainable()) {
      t->set_requires_grad(true);
      opt_.remap_rows(t, source);
    }
    res_.refinements.push_back({it, grown.added, A - (keep.size() - grown.added), a.size()});
    acc_.reset(a.size(), m.config().K);
  }

  [[noreturn]] void abort_numeric(std::size_t it, const LossTerms& L) {
    if (!cfg_.snapshot_path.empty()) save_model(cfg_.snapshot_path, res_.model);
    std::ostringstream msg;
    msg << "non-finite loss at iteration " << it << " (l1 " << L.l1 << ", ssim " << L.ssim << ", rate " << L.rate
        << ", anchors " << res_.model.anchor_count() << ")";
    if (!cfg_.snapshot_path.empty()) msg << "; snapshot written to " << cfg_.snapshot_path;
    throw NumericError(msg.str());
  }

  const SceneDataset& data_;
  const TrainingConfig& cfg_;
  Rng rng_;
  TrainResult res_;
  AdamOptimizer<float> opt_;
  SignificanceAccumulator acc_;
};

}  // namespace

TrainResult train(const SceneDataset& data, const TrainingConfig& cfg, const TrainProgress& progress) {
  cfg.validate();
  data.validate();
  Trainer t(data, cfg);
  return t.run(progress);
}

void write_training_csv(const std::string& path, const std::vector<TrainLogRow>& log) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "iteration,l1,ssim,rate_bits,total_loss,anchors,psnr_train\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%zu,%.6f\n", r.iteration, r.l1, r.ssim, r.rate_bits,
                  r.total_loss, r.anchors, r.psnr_train);
    out << buf;
  }
}

}  // namespace adcgs
