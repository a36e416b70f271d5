#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "adcgs/error.h"
#include "adcgs/model/canonical.h"
#include "adcgs/model/deformation.h"
#include "doctest.h"
#include "test_util.h"

namespace adcgs {
namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.K = 3;
  c.n_v = 4;
  c.n_g = 2;
  c.M = 2;
  c.voxel_size = 0.25;
  c.hidden = 6;
  c.time_grid = 16;
  c.time_dim = 5;
  c.time_hidden = 4;
  c.pos_bands = 2;
  return c;
}

Anchor random_anchor(const ModelConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Anchor a;
  for (double& v : a.position) v = u(rng);
  for (double& v : a.covariance) v = 0.5 * u(rng);
  for (double& v : a.color) v = 0.5 + 0.3 * u(rng);
  a.f_v.resize(c.n_v);
  a.f_g.resize(c.residual_width());
  for (double& v : a.f_v) v = u(rng);
  for (double& v : a.f_g) v = u(rng);
  return a;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("init_canonical places one anchor per occupied voxel") {
  ModelConfig cfg = small_config();
  cfg.voxel_size = 0.5;
  Rng rng(1);
  SUBCASE("cube corners of side two voxels") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 8; ++i) {
      pts.push_back({(i & 1) ? 1.0 : 0.0, (i & 2) ? 1.0 : 0.0, (i & 4) ? 1.0 : 0.0});
    }
    // Corners at 0 and 2·voxel fall into distinct voxels.
    for (auto& p : pts) {
      for (double& v : p) v = v * 2 * cfg.voxel_size + 0.01;
    }
    CHECK(init_canonical(pts, cfg, rng).anchors.size() == 8);
  }
  SUBCASE("coincident points") {
    std::vector<Vec3> pts(100, Vec3{0.3, -0.2, 0.7});
    auto space = init_canonical(pts, cfg, rng);
    REQUIRE(space.anchors.size() == 1);
    const Anchor a = space.anchors.get(0);
    const Vec3 c = voxel_center(voxel_of(pts[0], cfg.voxel_size), cfg.voxel_size);
    for (int i = 0; i < 3; ++i) CHECK(a.position[i] == c[i]);
    CHECK(a.color[0] == doctest::Approx(0.5));
  }
  SUBCASE("empty input") {
    std::vector<Vec3> none;
    CHECK_THROWS_AS(init_canonical(none, cfg, rng), DataError);
  }
}

TEST_CASE("anchor count equals the number of distinct voxels (hashing oracle)") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts(1000);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  for (double vs : {0.05, 0.1, 0.3, 0.7, 2.5}) {
    std::set<std::tuple<long, long, long>> seen;
    for (const auto& p : pts) {
      seen.insert({std::lround(std::floor(p[0] / vs)), std::lround(std::floor(p[1] / vs)),
                   std::lround(std::floor(p[2] / vs))});
    }
    ModelConfig cfg = small_config();
    cfg.voxel_size = vs;
    Rng r(2);
    CHECK(init_canonical(pts, cfg, r).anchors.size() == seen.size());
  }
}

TEST_CASE("zero F_θ output leaves primitives on their anchor") {
  ModelConfig cfg = small_config();
  std::mt19937_64 rng(3);
  Anchor a = random_anchor(cfg, rng);
  Mlp<double> net(f_theta_spec(cfg), "f_theta");
  Rng r(4);
  net.init(r);
  net.zero_output_layer();
  auto prims = derive_primitives(a, net, cfg.K);
  REQUIRE(prims.size() == cfg.K);
  for (const auto& p : prims) {
    for (int c = 0; c < 3; ++c) CHECK(p.position[c] == a.position[c]);
    for (int c = 0; c < 6; ++c) CHECK(p.covariance[c] == a.covariance[c]);
    for (int c = 0; c < 3; ++c) CHECK(p.color[c] == a.color[c]);
    CHECK(p.opacity == 0.5);
  }
}

TEST_CASE("K=1 hand-set position residual shifts the primitive") {
  ModelConfig cfg = small_config();
  cfg.K = 1;
  cfg.M = 1;
  std::mt19937_64 rng(3);
  Anchor a = random_anchor(cfg, rng);
  Mlp<double> net(f_theta_spec(cfg), "f_theta");
  net.zero_output_layer();
  net.bias(net.spec().layer_count() - 1)[0] = 0.1;
  auto prims = derive_primitives(a, net, 1);
  CHECK(prims[0].position[0] == doctest::Approx(a.position[0] + 0.1).epsilon(1e-15));
  CHECK(prims[0].position[1] == a.position[1]);
}

TEST_CASE("derive_primitives matches the residual formulas") {
  ModelConfig cfg = small_config();
  std::mt19937_64 rng(11);
  Anchor a = random_anchor(cfg, rng);
  Mlp<double> net(f_theta_spec(cfg), "f_theta");
  Rng r(5);
  net.init(r, 2.0);
  for (double& b : net.bias(net.spec().layer_count() - 1).values()) b = 0.3;
  std::vector<double> in = a.f_v;
  in.insert(in.end(), a.f_g.begin(), a.f_g.end());
  const std::vector<double> raw = testing::mlp_reference(net, in);
  auto prims = derive_primitives(a, net, cfg.K, 7);
  for (std::size_t k = 0; k < cfg.K; ++k) {
    const double* d = raw.data() + k * kPrimitiveAttrs;
    CHECK(prims[k].anchor_id == 7);
    for (int c = 0; c < 3; ++c) CHECK(std::abs(prims[k].position[c] - (a.position[c] + d[c])) < 1e-12);
    for (int c = 0; c < 6; ++c) {
      CHECK(std::abs(prims[k].covariance[c] - (a.covariance[c] + d[3 + c])) < 1e-12);
    }
    for (int c = 0; c < 3; ++c) {
      CHECK(std::abs(prims[k].color[c] - std::clamp(a.color[c] + d[9 + c], 0.0, 1.0)) < 1e-12);
    }
    CHECK(std::abs(prims[k].opacity - sigmoid(d[12])) < 1e-12);
  }
}

TEST_CASE("F_θ with the wrong output width is a configuration error") {
  ModelConfig cfg = small_config();
  std::mt19937_64 rng(3);
  Anchor a = random_anchor(cfg, rng);
  Mlp<double> net(MlpSpec{{cfg.n_v + cfg.residual_width(), 8, 12}, Activation::kRelu, false}, "x");
  CHECK_THROWS_AS(derive_primitives(a, net, cfg.K), ConfigError);
}

TEST_CASE("time grid interpolation") {
  Tensor<double> z({1, 256});
  for (std::size_t i = 0; i < 256; ++i) z[i] = 0.37;
  for (double t : {0.0, 0.1, 0.5, 0.77, 1.0}) CHECK(interp_time_grid(z, t) == doctest::Approx(0.37));
  std::mt19937_64 rng(2);
  z = testing::random_tensor({1, 256}, rng);
  CHECK(interp_time_grid(z, 0.0) == z[0]);
  CHECK(interp_time_grid(z, 1.0) == z[255]);
  const double a = z[127], b = z[128];
  CHECK(std::abs(interp_time_grid(z, 0.5) - (a + 0.5 * (b - a))) < 1e-15);
}

TEST_CASE("time embedding feeds (Interp(Z,t), t) through F_s") {
  ModelConfig cfg = small_config();
  TimeEmbedding<double> te;
  std::mt19937_64 rng(5);
  te.z = testing::random_tensor({1, cfg.time_grid}, rng);
  te.f_s = Mlp<double>(f_s_spec(cfg), "f_s");
  Rng r(6);
  te.f_s.init(r);
  Tape<double> tape;
  const double t = 0.3;
  Var<double> ft = time_embedding(tape, te, t);
  const auto expect = testing::mlp_reference(te.f_s, {interp_time_grid(te.z, t), t});
  REQUIRE(ft.size() == cfg.time_dim);
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(std::abs(ft.value()[i] - expect[i]) < 1e-12);

  bool clamped = false;
  Tape<double> t2;
  Var<double> lo = time_embedding(t2, te, -0.5, TimePolicy::kStrict, &clamped);
  CHECK(clamped);
  Var<double> zero = time_embedding(t2, te, 0.0);
  CHECK(lo.value().values() == zero.value().values());
  CHECK_THROWS_AS(time_embedding(t2, te, 1.5, TimePolicy::kPedantic), ContractError);
}

TEST_CASE("positional embedding") {
  auto e0 = positional_embedding({0, 0, 0});
  REQUIRE(e0.size() == 72);
  for (std::size_t i = 0; i < 72; i += 2) {
    CHECK(e0[i] == 0.0);
    CHECK(e0[i + 1] == 1.0);
  }
  auto e1 = positional_embedding({std::numbers::pi, 0, 0});
  CHECK(std::abs(e1[0]) < 1e-15);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Vec3 x{u(rng), u(rng), u(rng)};
  auto e = positional_embedding(x);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 12; ++b) {
      const double f = std::pow(2.0, b);
      CHECK(std::abs(e[a * 24 + b * 2] - std::sin(f * x[a])) < 1e-12);
      CHECK(std::abs(e[a * 24 + b * 2 + 1] - std::cos(f * x[a])) < 1e-12);
    }
  }
}

TEST_CASE("coarse deformation: zero network, purity, and one evaluation per anchor") {
  ModelConfig cfg = small_config();
  Rng rng(3);
  auto nets = init_deformation(cfg, rng).cast<double>();
  std::mt19937_64 r(4);
  Tensor<double> fv = testing::random_tensor({5, cfg.n_v}, r);
  for (std::size_t c = 0; c < cfg.n_v; ++c) fv.at(3, c) = fv.at(1, c);
  Tape<double> tape;
  Var<double> ft = time_embedding(tape, nets.time, 0.4);
  Var<double> zero = coarse_deform(tape, nets.f_omega, tape.constant(fv), ft);
  for (double v : zero.value().values()) CHECK(v == 0.0);

  nets.f_omega.init(rng);
  nets.f_omega.reset_evaluations();
  Var<double> d = coarse_deform(tape, nets.f_omega, tape.constant(fv), ft);
  CHECK(nets.f_omega.evaluations() == 5);
  for (std::size_t c = 0; c < 12; ++c) CHECK(d.value().at(1, c) == d.value().at(3, c));
  std::vector<double> in(fv.values().begin(), fv.values().begin() + cfg.n_v);
  in.insert(in.end(), ft.value().values().begin(), ft.value().values().end());
  auto expect = testing::mlp_reference(nets.f_omega, in);
  for (std::size_t c = 0; c < 12; ++c) CHECK(std::abs(d.value().at(0, c) - expect[c]) < 1e-12);

  nets.f_omega.reset_evaluations();
  coarse_deform_per_primitive(tape, nets.f_omega, tape.constant(fv), ft, cfg.K);
  CHECK(nets.f_omega.evaluations() == 5 * cfg.K);
}

TEST_CASE("fine deformation matches a plain MLP over concat(f_p, f_t, onehot)") {
  ModelConfig cfg = small_config();
  Rng rng(3);
  auto nets = init_deformation(cfg, rng).cast<double>();
  std::mt19937_64 r(4);
  Tensor<double> pos = testing::random_tensor({2, 3}, r);
  Tensor<double> fp = positional_embedding_rows(pos, cfg.pos_bands);
  Tape<double> tape;
  Var<double> ft = time_embedding(tape, nets.time, 0.8);
  Var<double> zero = fine_deform(tape, nets.f_varpi, tape.constant(fp), ft, cfg.K);
  for (double v : zero.value().values()) CHECK(v == 0.0);

  nets.f_varpi.init(rng);
  for (double& b : nets.f_varpi.bias(0).values()) b = 0.1;
  nets.f_varpi.reset_evaluations();
  Var<double> d = fine_deform(tape, nets.f_varpi, tape.constant(fp), ft, cfg.K);
  CHECK(nets.f_varpi.evaluations() == 2 * cfg.K);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t k = 0; k < cfg.K; ++k) {
      std::vector<double> in(fp.values().begin() + a * fp.cols(),
                             fp.values().begin() + (a + 1) * fp.cols());
      in.insert(in.end(), ft.value().values().begin(), ft.value().values().end());
      for (std::size_t j = 0; j < cfg.K; ++j) in.push_back(j == k ? 1.0 : 0.0);
      auto expect = testing::mlp_reference(nets.f_varpi, in);
      for (std::size_t c = 0; c < 4; ++c) {
        CHECK(std::abs(d.value().at(a * cfg.K + k, c) - expect[c]) < 1e-12);
      }
    }
  }
  bool differs = false;
  for (std::size_t c = 0; c < 4; ++c) differs = differs || d.value().at(0, c) != d.value().at(1, c);
  CHECK(differs);
}

TEST_CASE("compose: identity, shared rigid shift, and formula oracle") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  NeuralPrimitive p;
  p.anchor_id = 2;
  for (double& v : p.position) v = u(rng);
  for (double& v : p.covariance) v = u(rng);
  for (double& v : p.color) v = 0.5 + 0.5 * u(rng);
  p.opacity = 0.5 + 0.5 * u(rng);
  CoarseDeformation zero_c;
  zero_c.anchor_id = 2;
  DeformedPrimitive id = compose(p, zero_c, FineDeformation{});
  for (int c = 0; c < 3; ++c) CHECK(id.position[c] == p.position[c]);
  for (int c = 0; c < 6; ++c) CHECK(id.covariance[c] == p.covariance[c]);
  for (int c = 0; c < 3; ++c) CHECK(id.color[c] == p.color[c]);
  CHECK(id.opacity == p.opacity);

  CoarseDeformation wrong;
  wrong.anchor_id = 1;
  CHECK_THROWS_AS(compose(p, wrong, FineDeformation{}), ContractError);

  CoarseDeformation c = zero_c;
  FineDeformation f;
  for (double& v : c.d_position) v = u(rng);
  for (double& v : c.d_covariance) v = u(rng);
  for (double& v : c.d_color) v = u(rng);
  f.d_opacity = u(rng);
  for (double& v : f.d_color) v = u(rng);
  DeformedPrimitive d = compose(p, c, f);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(d.position[i] - (p.position[i] + c.d_position[i])) < 1e-12);
  for (int i = 0; i < 6; ++i) {
    CHECK(std::abs(d.covariance[i] - (p.covariance[i] + c.d_covariance[i])) < 1e-12);
  }
  CHECK(std::abs(d.opacity - std::clamp(p.opacity + f.d_opacity, 0.0, 1.0)) < 1e-12);
  for (int i = 0; i < 3; ++i) {
    const double e = std::clamp(p.color[i] + c.d_color[i] + f.d_color[i], 0.0, 1.0);
    CHECK(std::abs(d.color[i] - e) < 1e-12);
  }
}

TEST_CASE("graph compose shares the anchor shift across its K primitives") {
  const std::size_t K = 4;
  std::mt19937_64 rng(2);
  Tape<double> tape;
  Var<double> prims = tape.constant(testing::random_tensor({2 * K, 13}, rng, 0.1, 0.9));
  Tensor<double> coarse({2, 12});
  coarse.at(0, 0) = 1.0;
  Var<double> d = compose(prims, tape.constant(coarse), Var<double>(), K);
  for (std::size_t i = 0; i < 2 * K; ++i) {
    const double shift = i < K ? 1.0 : 0.0;
    CHECK(d.value().at(i, 0) == prims.value().at(i, 0) + shift);
    CHECK(d.value().at(i, 1) == prims.value().at(i, 1));
  }
}

TEST_CASE("deform_frame: identical coarse deltas per anchor and evaluation counts") {
  ModelConfig cfg = small_config();
  std::mt19937_64 prng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts(60);
  for (auto& p : pts) p = {u(prng), u(prng), u(prng)};
  Rng rng(1);
  auto space = init_canonical(pts, cfg, rng);
  auto nets = init_deformation(cfg, rng);
  nets.f_omega.init(rng, 3.0);
  nets.f_varpi.init(rng);
  Tape<float> tape(false);
  AnchorVars<float> vars = anchor_params(tape, space.anchors);
  nets.f_omega.reset_evaluations();
  nets.f_varpi.reset_evaluations();
  FrameGraph<float> g = deform_frame(tape, space.f_theta, nets, vars, cfg.K, 0.6);
  const std::size_t A = space.anchors.size();
  CHECK(nets.f_omega.evaluations() == A);
  CHECK(nets.f_varpi.evaluations() == A * cfg.K);
  // Position shift relative to the canonical primitive is the same for every slot.
  const Tensor<float>& can = g.canonical.value();
  const Tensor<float>& def = g.deformed.value();
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t k = 1; k < cfg.K; ++k) {
      for (std::size_t c = 0; c < 3; ++c) {
        const float d0 = def.at(a * cfg.K, c) - can.at(a * cfg.K, c);
        const float dk = def.at(a * cfg.K + k, c) - can.at(a * cfg.K + k, c);
        CHECK(d0 == doctest::Approx(dk).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("gradients through derivation and deformation match finite differences") {
  ModelConfig cfg = small_config();
  std::mt19937_64 prng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts(20);
  for (auto& p : pts) p = {u(prng), u(prng), u(prng)};
  Rng rng(1);
  auto space32 = init_canonical(pts, cfg, rng);
  auto nets = init_deformation(cfg, rng).cast<double>();
  nets.f_omega.init(rng, 0.5);
  nets.f_varpi.init(rng, 0.5);
  CanonicalSpace<double> space{cfg, space32.anchors.cast<double>(), space32.f_theta.cast<double>()};
  for (double& v : space.anchors.f_v.values()) v = u(prng);
  for (double& v : space.anchors.f_g.values()) v = u(prng);
  std::mt19937_64 wr(3);
  const Tensor<double> weight =
      testing::random_tensor({space.primitive_count(), kPrimitiveAttrs}, wr);

  std::vector<Tensor<double>*> params;
  for (Tensor<double>* t : space.anchors.trainable()) params.push_back(t);
  for (auto& [n, t] : space.f_theta.parameters()) params.push_back(t);
  params.push_back(&nets.time.z);
  for (auto* net : {&nets.time.f_s, &nets.f_omega, &nets.f_varpi}) {
    for (auto& [n, t] : net->parameters()) params.push_back(t);
  }
  // Non-zero biases keep relu pre-activations away from the kink at exactly 0.
  for (Mlp<double>* net : {&space.f_theta, &nets.time.f_s, &nets.f_omega, &nets.f_varpi}) {
    for (std::size_t l = 0; l < net->spec().layer_count(); ++l) {
      for (double& b : net->bias(l).values()) b = 0.2 * u(prng);
    }
  }
  const double err = testing::gradient_check(params, [&](Tape<double>& tape) {
    AnchorVars<double> vars = anchor_params(tape, space.anchors);
    DeformOptions opts;
    opts.detach_position_embedding = false;
    FrameGraph<double> g = deform_frame(tape, space.f_theta, nets, vars, cfg.K, 0.37, opts);
    return sum(mul(g.deformed, tape.constant(weight)));
  });
  CHECK(err < 1e-4);
}

}  // namespace adcgs
