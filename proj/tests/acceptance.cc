// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails. Pass criterion numbers as
// arguments to run a subset.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "adcgs/codec/container.h"
#include "adcgs/io/bytes.h"
#include "adcgs/model/refinement.h"
#include "adcgs/train/metrics.h"
#include "adcgs/train/trainer.h"
#include "adcgs/workbench/scene.h"
#include "adcgs/workbench/workbench.h"
#include "model_fixture.h"
#include "test_util.h"

namespace fs = std::filesystem;
using namespace adcgs;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path g_work;

bool same_bits(const Tensor<float>& a, const Tensor<float>& b) {
  return a.shape() == b.shape() && std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(float)) == 0;
}

bool models_bit_equal(Model x, Model y) {
  const AnchorTable<float>&a = x.canonical.anchors, &b = y.canonical.anchors;
  if (!same_bits(a.position, b.position) || !same_bits(a.covariance, b.covariance) || !same_bits(a.color, b.color) ||
      !same_bits(a.f_v, b.f_v) || !same_bits(a.f_g, b.f_g)) {
    return false;
  }
  const auto px = x.network_parameters();
  const auto py = y.network_parameters();
  if (px.size() != py.size()) return false;
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (px[i].first != py[i].first || !same_bits(*px[i].second, *py[i].second)) return false;
  }
  return true;
}

SceneDataset small_scene(std::uint64_t seed) {
  SceneSpec s;
  s.name = "small";
  BlobSpec a;
  a.scale = {0.25, 0.2, 0.2};
  a.color = {0.9, 0.3, 0.1};
  a.translation = {{-0.3, 0, 0}, {0.6, 0, 0}};
  BlobSpec b;
  b.scale = {0.2, 0.2, 0.3};
  b.color = {0.1, 0.4, 0.9};
  b.translation = {{0.3, 0.1, 0}, {0, -0.2, 0}};
  s.blobs = {a, b};
  s.cameras.count = 3;
  s.cameras.eval_count = 1;
  s.cameras.focal = 30;
  s.frames = 3;
  s.width = s.height = 24;
  s.points_per_blob = 40;
  s.seed = seed;
  return generate_scene(s);
}

// 1. decode(encode(m)) reproduces every quantized value bit for bit.
Outcome codec_losslessness() {
  std::size_t ok = 0, total = 0;
  std::vector<Model> models;
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    ModelConfig cfg = testing::tiny_config();
    if (seed % 4 == 1) cfg = ModelConfig{};
    if (seed % 4 == 2) cfg.M = 2;
    if (seed % 4 == 3) cfg.K = 1, cfg.M = 1, cfg.n_g = 6;
    Model m = testing::random_model(1000 + seed, 20 + 37 * seed, cfg);
    m.coarse = seed % 2 == 0;
    m.fine = seed % 3 != 0;
    m.lambda_e = 1e-3 * (seed + 1);
    models.push_back(std::move(m));
  }
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    TrainingConfig cfg;
    cfg.model = testing::tiny_config();
    cfg.iterations = 25;
    cfg.seed = seed;
    cfg.refinement.interval = 5;
    models.push_back(train(small_scene(seed), cfg).model);
  }
  for (const Model& m : models) {
    ++total;
    const EncodeResult enc = encode_model(m);
    const DecodeResult dec = decode_model(enc.bytes);
    const Model q = quantize_model(m);
    if (models_bit_equal(enc.quantized, dec.model) && models_bit_equal(q, dec.model) &&
        dec.model.lambda_e == m.lambda_e && dec.model.coarse == m.coarse && dec.model.fine == m.fine) {
      ++ok;
    }
  }
  return {ok == total, fmt("%zu/%zu models (16 random, 4 trained) decode bit-exactly", ok, total)};
}

// 2. Estimated feature bits against range-coded sizes, per section type, on
// models whose entropy networks were fitted to their features.
Outcome rate_fidelity() {
  bool pass = true;
  std::string detail;
  std::size_t symbols = 0;
  std::map<std::string, std::pair<double, double>> by_type;  // estimated, actual bits
  for (std::uint64_t seed : {1u, 2u}) {
    SceneSpec spec = builtin_scene("two-blobs-orbit");
    spec.width = spec.height = 32;
    spec.cameras.focal *= 0.5;
    spec.cameras.count = 4;
    spec.cameras.eval_count = 0;
    spec.frames = 4;
    spec.seed = seed;
    TrainingConfig cfg;
    cfg.iterations = 240;
    cfg.seed = seed;
    cfg.refine = false;
    const EncodeResult enc = encode_model(train(generate_scene(spec), cfg).model);
    for (const auto& e : enc.estimates) {
      std::string type = section_name(e.id);
      if (type.rfind("f_g", 0) == 0) type = "f_g";
      by_type[type].first += e.estimated_bits;
      by_type[type].second += 8.0 * e.coded_bytes;
      symbols += e.symbols;
    }
  }
  for (const char* type : {"hyperprior", "f_v", "cov", "color", "f_g"}) {
    auto it = by_type.find(type);
    if (it == by_type.end()) {
      pass = false;
      detail += std::string(" missing:") + type;
      continue;
    }
    const auto [est, actual] = it->second;
    const double err = std::abs(est - actual);
    pass = pass && err <= 0.02 * actual + 2 * 64 * 8;
    detail += fmt(" %s %.0f/%.0f", type, est, actual);
  }
  pass = pass && symbols >= 10000;
  return {pass, fmt("%zu symbols over 2 models; estimated/actual bits (tolerance 2%% + 64 B per model):", symbols) +
                    detail};
}

// 3. Finite-difference gradient checks in double precision, h = 1e-5.
Outcome gradient_integrity() {
  const double h = 1e-5;
  std::mt19937_64 prng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_net = 0;

  // Plain and residual MLPs with both activations.
  for (Activation act : {Activation::kRelu, Activation::kTanh}) {
    for (bool residual : {false, true}) {
      Rng rng(prng());
      Mlp<double> net(MlpSpec{{6, 8, 8, 4}, act, residual}, "net");
      net.init(rng);
      std::vector<Tensor<double>*> params;
      for (auto& [n, t] : net.parameters()) params.push_back(t);
      for (std::size_t l = 0; l < net.spec().layer_count(); ++l)
        for (double& b : net.bias(l).values()) b = 0.3 * u(prng);
      Tensor<double> x = testing::random_tensor({5, 6}, prng);
      Tensor<double> w = testing::random_tensor({5, 4}, prng);
      params.push_back(&x);
      worst_net = std::max(worst_net, testing::gradient_check(params, [&](Tape<double>& t) {
        return sum(mul(net.forward(t, t.param(x)), t.constant(w)));
      }, h));
    }
  }
  // Sinusoidal embedding.
  {
    Tensor<double> x = testing::random_tensor({3, 3}, prng, -1.5, 1.5);
    Tensor<double> w = testing::random_tensor({3, 3 * 2 * 5}, prng);
    worst_net = std::max(worst_net, testing::gradient_check({&x}, [&](Tape<double>& t) {
      return sum(mul(sinusoidal_embedding(t.param(x), 5), t.constant(w)));
    }, h));
  }
  // Canonical derivation, time embedding, coarse and fine deformation.
  {
    ModelConfig cfg = testing::tiny_config();
    cfg.K = 3;
    cfg.M = 1;
    std::vector<Vec3> pts(15);
    for (auto& p : pts) p = {u(prng), u(prng), u(prng)};
    Rng rng(3);
    auto space32 = init_canonical(pts, cfg, rng);
    auto nets = init_deformation(cfg, rng).cast<double>();
    nets.f_omega.init(rng, 0.5);
    nets.f_varpi.init(rng, 0.5);
    CanonicalSpace<double> space{cfg, space32.anchors.cast<double>(), space32.f_theta.cast<double>()};
    for (double& v : space.anchors.f_v.values()) v = u(prng);
    for (double& v : space.anchors.f_g.values()) v = u(prng);
    for (Mlp<double>* net : {&space.f_theta, &nets.time.f_s, &nets.f_omega, &nets.f_varpi}) {
      for (std::size_t l = 0; l < net->spec().layer_count(); ++l)
        for (double& b : net->bias(l).values()) b = 0.2 * u(prng);
    }
    const Tensor<double> weight = testing::random_tensor({space.primitive_count(), kPrimitiveAttrs}, prng);
    std::vector<Tensor<double>*> params;
    for (Tensor<double>* t : space.anchors.trainable()) params.push_back(t);
    for (auto& [n, t] : space.f_theta.parameters()) params.push_back(t);
    params.push_back(&nets.time.z);
    for (auto* net : {&nets.time.f_s, &nets.f_omega, &nets.f_varpi})
      for (auto& [n, t] : net->parameters()) params.push_back(t);
    worst_net = std::max(worst_net, testing::gradient_check(params, [&](Tape<double>& tape) {
      AnchorVars<double> vars = anchor_params(tape, space.anchors);
      DeformOptions opts;
      opts.detach_position_embedding = false;
      FrameGraph<double> g = deform_frame(tape, space.f_theta, nets, vars, cfg.K, 0.37, opts);
      return sum(mul(g.deformed, tape.constant(weight)));
    }, h));
  }
  // Entropy model rate with fixed training noise.
  {
    ModelConfig cfg = testing::tiny_config();
    cfg.K = 2, cfg.n_v = 4, cfg.n_g = 3, cfg.M = 3, cfg.hyper_dim = 2, cfg.entropy_hidden = 6, cfg.chunk_hidden = 8;
    Rng rng(8);
    EntropyModel<double> em = init_entropy_model(cfg, QuantizerConfig{}, rng).cast<double>();
    AnchorTable<double> anchors;
    anchors.position = testing::random_tensor({5, 3}, prng);
    anchors.covariance = testing::random_tensor({5, 6}, prng, -0.05, 0.05);
    anchors.color = testing::random_tensor({5, 3}, prng, 0.2, 0.8);
    anchors.f_v = testing::random_tensor({5, cfg.n_v}, prng, -0.5, 0.5);
    anchors.f_g = testing::random_tensor({5, cfg.residual_width()}, prng, -0.5, 0.5);
    std::vector<Tensor<double>*> params{&anchors.f_g, &anchors.covariance, &anchors.color, &anchors.f_v};
    for (auto& [name, t] : em.parameters()) {
      if (name.find("bias") != std::string::npos || name.find(".b") != std::string::npos) {
        *t = testing::random_tensor(t->shape(), prng, -0.2, 0.2);
      }
      params.push_back(t);
    }
    worst_net = std::max(worst_net, testing::gradient_check(params, [&](Tape<double>& tape) {
      Rng noise(10);
      auto vars = anchor_params(tape, anchors);
      auto q = quantize_anchors(tape, em, vars, cfg.M, QuantMode::kTrain, &noise);
      return total_bits(q);
    }, h));
  }

  // Rasterizer: random 16×16 scenes with up to five primitives.
  double worst_render = 0;
  for (int scene = 0; scene < 6; ++scene) {
    const Camera cam = Camera::look_at({0.4 * u(prng), 0.4 * u(prng), -3.0}, {0, 0, 0}, {0, 1, 0}, 20.0, 16, 16);
    std::vector<DeformedPrimitive> p(2 + scene % 4);
    for (auto& d : p) {
      d.position = {0.3 * u(prng), 0.3 * u(prng), 0.4 * u(prng)};
      d.covariance = {-1.1 + 0.3 * u(prng), -1.1 + 0.3 * u(prng), -1.1 + 0.3 * u(prng),
                      0.5 * u(prng),        0.5 * u(prng),        0.5 * u(prng)};
      d.color = {0.5 + 0.4 * u(prng), 0.5 + 0.4 * u(prng), 0.5 + 0.4 * u(prng)};
      d.opacity = 0.55 + 0.3 * u(prng);
    }
    Image weight(16, 16);
    for (double& v : weight.rgb) v = u(prng);
    auto loss = [&](const std::vector<DeformedPrimitive>& q) {
      const RenderResult r = render(q, cam);
      double s = 0;
      for (std::size_t i = 0; i < weight.rgb.size(); ++i) s += weight.rgb[i] * r.output.image.rgb[i];
      return s;
    };
    const RenderResult res = render(p, cam);
    const auto g = render_backward(res, p, weight);
    auto param = [](DeformedPrimitive& d, int a) -> double& {
      if (a < 3) return d.position[a];
      if (a < 9) return d.covariance[a - 3];
      if (a < 12) return d.color[a - 9];
      return d.opacity;
    };
    auto analytic = [](const PrimitiveGrad& d, int a) {
      if (a < 3) return d.position[a];
      if (a < 9) return d.covariance[a - 3];
      if (a < 12) return d.color[a - 9];
      return d.opacity;
    };
    std::vector<double> num, ana;
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (int a = 0; a < 13; ++a) {
        auto q = p;
        param(q[i], a) += h;
        const double fp = loss(q);
        param(q[i], a) -= 2 * h;
        const double fm = loss(q);
        num.push_back((fp - fm) / (2 * h));
        ana.push_back(analytic(g[i], a));
      }
    }
    worst_render = std::max(worst_render, testing::relative_error(ana, num));
  }
  return {worst_net < 1e-4 && worst_render < 1e-3,
          fmt("worst relative error: networks/embeddings %.2e (< 1e-4), rasterizer %.2e (< 1e-3)", worst_net,
              worst_render)};
}

// 4. Tile rasterizer against the brute-force oracle.
Outcome renderer_equivalence() {
  double worst_px = 0, worst_psi = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(500 + seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int w = 48, h = 40;
    std::vector<Splat2D> splats(50);
    for (std::size_t i = 0; i < splats.size(); ++i) {
      Splat2D& s = splats[i];
      s.mean = {u(rng) * w, u(rng) * h};
      const double a = 0.5 + 25 * u(rng), c = 0.5 + 25 * u(rng), b = (u(rng) - 0.5) * std::sqrt(a * c);
      s.cov = {a, b, c};
      const double det = a * c - b * b;
      s.conic = {c / det, -b / det, a / det};
      s.opacity = 0.05 + 0.9 * u(rng);
      s.color = {u(rng), u(rng), u(rng)};
      s.depth = 1.0 + u(rng);
      s.id = static_cast<std::uint32_t>(i);
    }
    const RenderOutput a = rasterize(splats, h, w), b = rasterize_bruteforce(splats, h, w);
    for (std::size_t i = 0; i < a.image.rgb.size(); ++i)
      worst_px = std::max(worst_px, std::abs(a.image.rgb[i] - b.image.rgb[i]));
    for (std::size_t k = 0; k < splats.size(); ++k)
      worst_psi = std::max(worst_psi, std::abs(a.weights[k] - b.weights[k]) / std::max(1.0, b.weights[k]));
  }
  return {worst_px <= 1e-4 && worst_psi <= 1e-4,
          fmt("10 scenes x 50 splats: max pixel error %.2e, max relative psi error %.2e", worst_px, worst_psi)};
}

// 5. Coarse deformation is shared by the K primitives of an anchor.
Outcome deformation_sharing() {
  ModelConfig cfg;  // K = 10
  const Model m = testing::random_model(77, 1000, cfg);
  Model work = m;
  bool identical = true;
  std::uint64_t anchor_evals = 0, baseline_evals = 0;
  for (double t : {0.0, 0.4, 1.0}) {
    Tape<float> tape(false);
    const Tensor<float> f_t = time_embedding(tape, work.deform.time, t).value();
    auto& fo = work.deform.f_omega;
    fo.reset_evaluations();
    const Tensor<float> shared = coarse_deform(tape, fo, tape.constant(work.canonical.anchors.f_v), tape.constant(f_t)).value();
    anchor_evals += fo.evaluations();
    fo.reset_evaluations();
    const Tensor<float> per = coarse_deform_per_primitive(tape, fo, tape.constant(work.canonical.anchors.f_v),
                                                          tape.constant(f_t), cfg.K).value();
    baseline_evals += fo.evaluations();
    for (std::size_t r = 0; r < per.rows() && identical; ++r) {
      identical = std::memcmp(&per.at(r, 0), &shared.at(r / cfg.K, 0), 12 * sizeof(float)) == 0;
    }
    // The deformed frame applies the same anchor shift to every slot.
    work.canonical.f_theta.reset_evaluations();
    AnchorVars<float> vars = anchor_params(tape, work.canonical.anchors);
    DeformOptions opts;
    opts.fine = false;
    FrameGraph<float> g = deform_frame(tape, work.canonical.f_theta, work.deform, vars, cfg.K, t, opts);
    if (g.coarse.value().rows() != m.anchor_count()) identical = false;
  }
  const DeformationBench b = bench_deformation(m, 12, 3);
  const bool counts = anchor_evals == 3 * m.anchor_count() && baseline_evals == 3 * m.anchor_count() * cfg.K &&
                      b.coarse_evals * cfg.K == b.baseline_coarse_evals;
  const bool pass = identical && counts && b.primitives >= 10000 && b.speedup() >= 2.0;
  return {pass, fmt("identical per-slot deformation: %s; coarse evals %llu vs per-primitive %llu (%zux); "
                    "%zu primitives, coarse-stage speedup %.2fx (>= 2)",
                    identical ? "yes" : "no", static_cast<unsigned long long>(b.coarse_evals),
                    static_cast<unsigned long long>(b.baseline_coarse_evals), cfg.K, b.primitives, b.speedup())};
}

SceneDataset toy_scene() { return generate_scene(builtin_scene("two-blobs-orbit")); }

// 6. Ablation direction on the standard toy scene.
Outcome ablation_direction() {
  const SceneDataset d = toy_scene();
  double psnr_base = 0, psnr_coarse = 0, psnr_full = 0;
  for (int variant = 0; variant < 3; ++variant) {
    TrainingConfig cfg;
    cfg.coarse = variant >= 1;
    cfg.fine = variant == 2;
    const TrainResult r = train(d, cfg);
    const double p = evaluate(r.model, d, Split::kTrain).mean_psnr;
    (variant == 0 ? psnr_base : variant == 1 ? psnr_coarse : psnr_full) = p;
  }
  const bool pass = psnr_coarse - psnr_base >= 3.0 && psnr_full >= psnr_coarse;
  return {pass, fmt("train-view PSNR frozen %.2f dB, +coarse %.2f dB (%+.2f, needs >= +3), +fine %.2f dB (%+.2f, "
                    "needs >= 0)",
                    psnr_base, psnr_coarse, psnr_coarse - psnr_base, psnr_full, psnr_full - psnr_coarse)};
}

// 7. Rate-distortion monotonicity across lambda.
Outcome rd_monotonicity() {
  const SceneDataset d = toy_scene();
  const std::vector<double> lambdas{1e-2, 1e-3, 1e-4};
  const auto rows = rd_sweep(d, lambdas, TrainingConfig{}, (g_work / "rd").string());
  write_sweep_csv((g_work / "rd" / "rd.csv").string(), rows);
  bool pass = rows.size() == 3;
  std::string detail;
  for (const auto& r : rows) {
    pass = pass && r.status == "ok";
    detail += fmt(" [%g: %zu B, %.2f dB]", r.lambda_e, r.size_bytes, r.psnr);
  }
  for (std::size_t i = 0; pass && i + 1 < rows.size(); ++i) {
    // rows[i] has the larger lambda.
    pass = rows[i].size_bytes < rows[i + 1].size_bytes && rows[i].psnr <= rows[i + 1].psnr;
  }
  return {pass, "size strictly decreasing and PSNR non-increasing in lambda:" + detail};
}

// 8. Grow/prune postconditions and the significance accumulator.
Outcome refinement_correctness() {
  std::mt19937_64 rng(88);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ModelConfig cfg = testing::tiny_config();
  cfg.voxel_size = 0.25;
  const double tau_g = 2e-4, tau_p = 0.05;
  bool grow_ok = true, prune_ok = true;
  double worst_acc = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t A = 40, K = cfg.K, frames = 15;
    AnchorTable<float> t(0, cfg);
    std::set<VoxelKey> used;
    while (t.size() < A) {
      VoxelKey v{int(u(rng) * 8) - 4, int(u(rng) * 8) - 4, int(u(rng) * 8) - 4};
      if (!used.insert(v).second) continue;
      Anchor a;
      a.position = voxel_center(v, cfg.voxel_size);
      a.f_v.assign(cfg.n_v, u(rng));
      a.f_g.assign(cfg.residual_width(), u(rng));
      t.append(a);
    }
    SignificanceAccumulator acc(A, K);
    std::vector<std::vector<double>> g(frames, std::vector<double>(A * K)), w = g, o = g;
    for (std::size_t f = 0; f < frames; ++f) {
      for (std::size_t p = 0; p < A * K; ++p) {
        g[f][p] = u(rng) * 4e-4;
        w[f][p] = u(rng) < 0.25 ? 0.0 : u(rng) * 3;
        o[f][p] = u(rng) * u(rng) * 0.2;
      }
      acc.record(g[f], w[f], o[f]);
    }
    for (std::size_t p = 0; p < A * K; ++p) {
      long double num = 0, den = 0;
      for (std::size_t f = 0; f < frames; ++f) {
        num += static_cast<long double>(w[f][p]) * g[f][p];
        den += w[f][p];
      }
      const double expect = den > 0 ? static_cast<double>(num / den) : 0.0;
      worst_acc = std::max(worst_acc, std::abs(acc.significance(p) - expect) / std::max(1.0, std::abs(expect)));
    }
    std::vector<PrimitiveAttributes> prims(A * K);
    for (auto& p : prims) p.position = {3 * u(rng) - 1.5, 3 * u(rng) - 1.5, 3 * u(rng) - 1.5};
    grow_anchors(t, cfg, acc, prims, tau_g);
    std::set<VoxelKey> occupied;
    for (std::size_t i = 0; i < t.size(); ++i) {
      occupied.insert(voxel_of({t.position.at(i, 0), t.position.at(i, 1), t.position.at(i, 2)}, cfg.voxel_size));
    }
    for (std::size_t p = 0; p < prims.size(); ++p) {
      if (!(acc.defined(p) && acc.significance(p) > tau_g)) continue;
      if (!occupied.count(voxel_of(prims[p].position, cfg.voxel_size))) grow_ok = false;
    }
    // Prune uses the window-max opacity of the anchors that existed while recording.
    AnchorTable<float> before = t.select([&] {
      std::vector<std::size_t> rows(A);
      std::iota(rows.begin(), rows.end(), 0);
      return rows;
    }());
    const auto keep = prune_anchors(before, acc, tau_p);
    for (std::size_t a : keep) {
      if (acc.max_opacity(a) < tau_p) prune_ok = false;
    }
    for (std::size_t a = 0; a < A; ++a) {
      const bool kept = std::find(keep.begin(), keep.end(), a) != keep.end();
      if (!kept && acc.max_opacity(a) >= tau_p) prune_ok = false;
    }
  }
  return {grow_ok && prune_ok && worst_acc <= 1e-12,
          fmt("grow covers all significant voxels: %s; prune keeps only opacity >= tau_p: %s; accumulator error "
              "%.1e (<= 1e-12)",
              grow_ok ? "yes" : "no", prune_ok ? "yes" : "no", worst_acc)};
}

fs::path g_cli;
fs::path g_pipeline_container;

int run(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// 9. generate -> train -> encode -> decode -> eval twice through the CLI.
Outcome determinism() {
  std::vector<std::vector<std::uint8_t>> streams, csvs;
  for (int round = 0; round < 2; ++round) {
    const fs::path dir = g_work / ("pipeline" + std::to_string(round));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cli = g_cli.string(), d = dir.string();
    const std::vector<std::string> steps{
        cli + " generate --spec two-blobs-orbit --out " + d + "/data",
        cli + " train --quiet --data " + d + "/data --out " + d + "/model.ckpt",
        cli + " encode --ckpt " + d + "/model.ckpt --lambda-tag 1e-3 --out " + d + "/model.adcg",
        cli + " decode --in " + d + "/model.adcg --out " + d + "/decoded.ckpt",
        cli + " eval --ckpt " + d + "/decoded.ckpt --data " + d + "/data --split eval --out " + d + "/metrics.csv"};
    for (const auto& s : steps) {
      if (const int rc = run(s); rc != 0) return {false, fmt("step failed with exit code %d: ", rc) + s};
    }
    streams.push_back(io::read_file(d + "/model.adcg"));
    csvs.push_back(io::read_file(d + "/metrics.csv"));
  }
  g_pipeline_container = g_work / "pipeline0" / "model.adcg";
  const bool pass = streams[0] == streams[1] && csvs[0] == csvs[1];
  return {pass, fmt("bitstreams %s (%zu bytes), metrics CSVs %s", streams[0] == streams[1] ? "identical" : "differ",
                    streams[0].size(), csvs[0] == csvs[1] ? "identical" : "differ")};
}

// 10. Section sizes sum to the file size and f_g dominates the feature bits.
Outcome bitstream_accounting() {
  if (g_pipeline_container.empty() || !fs::exists(g_pipeline_container)) {
    const fs::path dir = g_work / "accounting";
    fs::create_directories(dir);
    const SceneDataset d = toy_scene();
    const TrainResult r = train(d, TrainingConfig{});
    g_pipeline_container = dir / "model.adcg";
    io::write_file(g_pipeline_container.string(), encode_model(r.model).bytes);
  }
  const auto bytes = io::read_file(g_pipeline_container.string());
  const ContainerHeader h = inspect_container(bytes);
  std::size_t total = h.header_bytes, f_g = 0, largest_other = 0;
  std::string other_name;
  for (const auto& s : h.sections) {
    total += s.length;
    if (s.id >= section::kFgFirst && s.id < section::kFgFirst + h.M) {
      f_g += s.length;
    } else if (s.id != section::kPositions && s.id != section::kNetworks && s.length > largest_other) {
      largest_other = s.length;
      other_name = section_name(s.id);
    }
  }
  const int rc = run(g_cli.string() + " inspect --in " + g_pipeline_container.string());
  const bool pass = total == bytes.size() && f_g > largest_other && rc == 0;
  return {pass, fmt("sections + header = %zu of %zu bytes; f_g %zu B vs next feature section %s %zu B", total,
                    bytes.size(), f_g, other_name.c_str(), largest_other)};
}

}  // namespace

int main(int argc, char** argv) {
  g_cli = ADCGS_CLI_PATH;
  g_work = fs::temp_directory_path() / "adcgs_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  fs::create_directories(g_work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"codec losslessness", codec_losslessness},
      {"rate fidelity", rate_fidelity},
      {"gradient integrity", gradient_integrity},
      {"renderer oracle equivalence", renderer_equivalence},
      {"deformation sharing", deformation_sharing},
      {"ablation direction", ablation_direction},
      {"RD monotonicity", rd_monotonicity},
      {"refinement correctness", refinement_correctness},
      {"end-to-end determinism", determinism},
      {"bitstream accounting", bitstream_accounting},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str(), s);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
