#include <algorithm>
#include <cmath>
#include <random>

#include "adcgs/error.h"
#include "adcgs/render/renderer.h"
#include "doctest.h"
#include "test_util.h"

namespace adcgs {
namespace {

Splat2D make_splat(double u, double v, double var, double opacity, Vec3 color, double depth,
                   std::uint32_t id) {
  Splat2D s;
  s.mean = {u, v};
  s.cov = {var, 0.0, var};
  s.conic = {1.0 / var, 0.0, 1.0 / var};
  s.opacity = opacity;
  s.color = color;
  s.depth = depth;
  s.id = id;
  return s;
}

std::vector<Splat2D> random_splats(std::mt19937_64& rng, int n, int w, int h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Splat2D> out;
  for (int i = 0; i < n; ++i) {
    Splat2D s;
    s.mean = {u(rng) * w, u(rng) * h};
    const double a = 0.5 + 20 * u(rng), c = 0.5 + 20 * u(rng);
    const double b = (u(rng) - 0.5) * std::sqrt(a * c);
    s.cov = {a, b, c};
    const double det = a * c - b * b;
    s.conic = {c / det, -b / det, a / det};
    s.opacity = 0.05 + 0.9 * u(rng);
    s.color = {u(rng), u(rng), u(rng)};
    s.depth = 1.0 + u(rng);
    s.id = static_cast<std::uint32_t>(i);
    out.push_back(s);
  }
  return out;
}

DeformedPrimitive prim(Vec3 pos, double log_scale, double opacity, Vec3 color) {
  DeformedPrimitive p;
  p.position = pos;
  p.covariance = {log_scale, log_scale, log_scale, 0.0, 0.0, 0.0};
  p.opacity = opacity;
  p.color = color;
  return p;
}

}  // namespace

TEST_CASE("projection of a point on the optical axis lands on the principal point") {
  Camera cam;
  cam.cx = 30.5;
  cam.cy = 17.25;
  auto s = project(prim({0, 0, 3.0}, -2.0, 0.5, {1, 0, 0}), cam);
  REQUIRE(s.has_value());
  CHECK(s->mean[0] == doctest::Approx(30.5).epsilon(1e-12));
  CHECK(s->mean[1] == doctest::Approx(17.25).epsilon(1e-12));
  CHECK(s->depth == doctest::Approx(3.0));
}

TEST_CASE("isotropic covariance projects to (f·σ/d)² plus the low-pass floor") {
  Camera cam;
  cam.fx = cam.fy = 80.0;
  const double d = 2.5, log_scale = -1.7, sigma = std::exp(log_scale);
  auto s = project(prim({0, 0, d}, log_scale, 0.5, {1, 1, 1}), cam);
  REQUIRE(s.has_value());
  const double expected = std::pow(cam.fx * sigma / d, 2);
  CHECK(s->cov[0] - kLowPassFloor == doctest::Approx(expected).epsilon(1e-12));
  CHECK(s->cov[2] - kLowPassFloor == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(s->cov[1]) < 1e-12);
}

TEST_CASE("points behind the near plane or far off screen are culled") {
  Camera cam;
  CHECK_FALSE(project(prim({0, 0, 0.0}, -2, 0.5, {1, 1, 1}), cam).has_value());
  CHECK_FALSE(project(prim({0, 0, -1.0}, -2, 0.5, {1, 1, 1}), cam).has_value());
  CHECK_FALSE(project(prim({10, 0, 1.0}, -2, 0.5, {1, 1, 1}), cam).has_value());
  CHECK(project(prim({0.6, 0, 1.0}, -2, 0.5, {1, 1, 1}), cam).has_value());
}

TEST_CASE("an opaque covering splat paints its color") {
  std::vector<Splat2D> s{make_splat(8, 8, 1e12, 0.999, {0.2, 0.4, 0.8}, 1.0, 0)};
  for (bool brute : {false, true}) {
    RenderOutput out = brute ? rasterize_bruteforce(s, 16, 16) : rasterize(s, 16, 16);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        CHECK(out.image.at(x, y, 2) == doctest::Approx(0.8 * 0.999).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("two coincident splats blend front to back") {
  const Vec3 c1{1.0, 0.0, 0.5}, c2{0.0, 1.0, 0.25};
  // Back splat listed first to exercise the depth sort.
  std::vector<Splat2D> s{make_splat(4.5, 4.5, 4.0, 0.6, c2, 2.0, 0),
                         make_splat(4.5, 4.5, 4.0, 0.6, c1, 1.0, 1)};
  RenderOutput tile = rasterize(s, 9, 9), brute = rasterize_bruteforce(s, 9, 9);
  for (int ch = 0; ch < 3; ++ch) {
    const double expect = 0.6 * c1[ch] + 0.4 * 0.6 * c2[ch];
    CHECK(tile.image.at(4, 4, ch) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(brute.image.at(4, 4, ch) - tile.image.at(4, 4, ch)) < 1e-5);
  }
}

TEST_CASE("empty input renders black with no weights") {
  std::vector<Splat2D> none;
  RenderOutput out = rasterize(none, 20, 12);
  CHECK(std::all_of(out.image.rgb.begin(), out.image.rgb.end(), [](double v) { return v == 0.0; }));
  CHECK(out.weights.empty());
  CHECK(std::all_of(out.final_transmittance.begin(), out.final_transmittance.end(),
                    [](double t) { return t == 1.0; }));
}

TEST_CASE("tile path matches the brute-force oracle on random scenes") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    auto splats = random_splats(rng, 50, 40, 36);
    RenderOutput a = rasterize(splats, 36, 40), b = rasterize_bruteforce(splats, 36, 40);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.image.rgb.size(); ++i) {
      worst = std::max(worst, std::abs(a.image.rgb[i] - b.image.rgb[i]));
    }
    CHECK(worst < 1e-4);
    for (std::size_t k = 0; k < splats.size(); ++k) {
      CHECK(std::abs(a.weights[k] - b.weights[k]) <= 1e-4 * std::max(1.0, b.weights[k]));
      CHECK(a.weights[k] >= 0.0);
    }
    for (double t : a.final_transmittance) CHECK((t >= 0.0 && t <= 1.0));
  }
}

TEST_CASE("rendering weights equal the sum of stored blend weights") {
  std::mt19937_64 rng(42);
  auto splats = random_splats(rng, 30, 24, 24);
  RenderOutput out = rasterize(splats, 24, 24);
  std::vector<double> psi(splats.size(), 0.0);
  for (const BlendRecord& r : out.records) psi[r.splat] += r.alpha * r.transmittance;
  for (std::size_t k = 0; k < psi.size(); ++k) CHECK(psi[k] == doctest::Approx(out.weights[k]));
}

TEST_CASE("equal-depth splats are ordered by id regardless of input order") {
  std::vector<Splat2D> s{make_splat(5, 5, 6, 0.7, {1, 0, 0}, 1.0, 3),
                         make_splat(6, 5, 6, 0.7, {0, 1, 0}, 1.0, 1)};
  std::vector<Splat2D> r{s[1], s[0]};
  r[0].id = 1;
  r[1].id = 3;
  RenderOutput a = rasterize(s, 10, 10), b = rasterize(r, 10, 10);
  CHECK(a.image.rgb == b.image.rgb);
}

TEST_CASE("color gradient of sum(image) for a covering splat equals the pixel weight") {
  Camera cam;
  cam.width = cam.height = 16;
  cam.cx = cam.cy = 8;
  std::vector<DeformedPrimitive> p{prim({0, 0, 1.0}, 3.0, 0.999, {0.3, 0.6, 0.9})};
  RenderResult res = render(p, cam);
  Image ones(16, 16, 1.0);
  auto g = render_backward(res, p, ones);
  const Splat2D& s = res.splats[0];
  double coverage = 0.0;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const double dx = x + 0.5 - s.mean[0], dy = y + 0.5 - s.mean[1];
      const double q = s.conic[0] * dx * dx + 2 * s.conic[1] * dx * dy + s.conic[2] * dy * dy;
      coverage += std::min(kMaxAlpha, s.opacity * std::exp(-0.5 * q));
    }
  }
  CHECK(coverage > 0.99 * 256);
  for (int ch = 0; ch < 3; ++ch) CHECK(g[0].color[ch] == doctest::Approx(coverage).epsilon(1e-12));
}

TEST_CASE("culled primitives receive exactly zero gradients") {
  Camera cam;
  std::vector<DeformedPrimitive> p{prim({0, 0, 2.0}, -1.5, 0.8, {1, 0, 0}),
                                   prim({0, 0, -2.0}, -1.5, 0.8, {0, 1, 0})};
  RenderResult res = render(p, cam);
  auto g = render_backward(res, p, Image(64, 64, 1.0));
  const PrimitiveGrad& z = g[1];
  CHECK(z.opacity == 0.0);
  CHECK(z.mean2d_norm == 0.0);
  for (int k = 0; k < 3; ++k) CHECK((z.position[k] == 0.0 && z.color[k] == 0.0));
  for (int k = 0; k < 6; ++k) CHECK(z.covariance[k] == 0.0);
  CHECK(g[0].opacity != 0.0);
}

TEST_CASE("backward without a recorded forward pass is a contract violation") {
  RenderResult empty;
  std::vector<DeformedPrimitive> p;
  CHECK_THROWS_AS(render_backward(empty, p, Image(4, 4)), ContractError);
}

TEST_CASE("render backward matches finite differences on a three-splat scene") {
  Camera cam = Camera::look_at({0.3, -0.2, -3.0}, {0, 0, 0}, {0, 1, 0}, 20.0, 16, 16);
  std::vector<DeformedPrimitive> p{
      prim({0.1, 0.05, 0.0}, -1.2, 0.7, {0.9, 0.2, 0.1}),
      prim({-0.2, 0.1, 0.3}, -1.0, 0.6, {0.1, 0.8, 0.3}),
      prim({0.05, -0.2, -0.4}, -1.4, 0.5, {0.2, 0.3, 0.9}),
  };
  p[0].covariance = {-1.2, -0.9, -1.5, 0.3, -0.4, 0.2};
  p[1].covariance = {-0.8, -1.3, -1.0, -0.2, 0.5, 0.1};
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Image weight(16, 16);
  for (double& v : weight.rgb) v = u(rng);
  auto loss = [&](const std::vector<DeformedPrimitive>& q) {
    RenderResult r = render(q, cam);
    double s = 0;
    for (std::size_t i = 0; i < weight.rgb.size(); ++i) s += weight.rgb[i] * r.output.image.rgb[i];
    return s;
  };
  RenderResult res = render(p, cam);
  auto g = render_backward(res, p, weight);
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
  // Small step: the 1/255 α cutoff makes the image piecewise smooth.
  const double h = 1e-6;
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
  CHECK(testing::relative_error(ana, num) < 1e-3);
}

TEST_CASE("look_at produces an orthonormal camera that sees its target") {
  Camera cam = Camera::look_at({1, 2, -4}, {0.5, 0, 0}, {0, 1, 0}, 50, 32, 24);
  CHECK_NOTHROW(cam.validate());
  Vec3 pc = cam.to_camera({0.5, 0, 0});
  CHECK(std::abs(pc[0]) < 1e-12);
  CHECK(std::abs(pc[1]) < 1e-12);
  CHECK(pc[2] > 0);
  Vec3 c = cam.center();
  for (int i = 0; i < 3; ++i) CHECK(c[i] == doctest::Approx(std::array<double, 3>{1, 2, -4}[i]));
}

TEST_CASE("ppm round trip quantizes to 8 bits") {
  Image img(3, 2);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<double>(i) / 17.0;
  const std::string path = "render_test_roundtrip.ppm";
  write_ppm(path, img);
  Image back = read_ppm(path);
  REQUIRE(back.width == 3);
  REQUIRE(back.height == 2);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) {
    CHECK(std::abs(back.rgb[i] - std::clamp(img.rgb[i], 0.0, 1.0)) <= 0.5 / 255 + 1e-12);
  }
  std::remove(path.c_str());
}

}  // namespace adcgs
