#include "adcgs/render/renderer.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adcgs/error.h"

namespace adcgs {
namespace {

template <typename S>
struct Projection {
  S u, v;
  S cov_xx, cov_xy, cov_yy;
  S con_a, con_b, con_c;
  double depth;
};

// Pinhole mean + local-affine (EWA) covariance. Returns false when culled.
template <typename S>
bool project_generic(const std::array<S, 3>& pos, const std::array<S, 6>& params,
                     const Camera& cam, Projection<S>& out) {
  std::array<S, 3> pc;
  for (int i = 0; i < 3; ++i) {
    pc[i] = S(cam.rotation[i][0]) * pos[0] + S(cam.rotation[i][1]) * pos[1] +
            S(cam.rotation[i][2]) * pos[2] + S(cam.translation[i]);
  }
  const double z = value_of(pc[2]);
  if (!(z > kNearPlane)) return false;
  const S inv_z = S(1.0) / pc[2];
  out.u = S(cam.fx) * pc[0] * inv_z + S(cam.cx);
  out.v = S(cam.fy) * pc[1] * inv_z + S(cam.cy);
  const double half_w = 0.5 * cam.width, half_h = 0.5 * cam.height;
  if (std::abs(value_of(out.u) - half_w) > kGuardBand * half_w ||
      std::abs(value_of(out.v) - half_h) > kGuardBand * half_h) {
    return false;
  }
  out.depth = z;

  const Mat3T<S> sigma = covariance_from_params(params);
  // J (2×3) of the perspective map at pc, then T = J · W.
  const S j00 = S(cam.fx) * inv_z, j02 = -S(cam.fx) * pc[0] * inv_z * inv_z;
  const S j11 = S(cam.fy) * inv_z, j12 = -S(cam.fy) * pc[1] * inv_z * inv_z;
  std::array<std::array<S, 3>, 2> t;
  for (int c = 0; c < 3; ++c) {
    t[0][c] = j00 * S(cam.rotation[0][c]) + j02 * S(cam.rotation[2][c]);
    t[1][c] = j11 * S(cam.rotation[1][c]) + j12 * S(cam.rotation[2][c]);
  }
  std::array<std::array<S, 3>, 2> ts;  // T · Σ
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) {
      ts[r][c] = t[r][0] * sigma[0][c] + t[r][1] * sigma[1][c] + t[r][2] * sigma[2][c];
    }
  }
  auto dot3 = [](const std::array<S, 3>& a, const std::array<S, 3>& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  };
  out.cov_xx = dot3(ts[0], t[0]) + S(kLowPassFloor);
  out.cov_xy = dot3(ts[0], t[1]);
  out.cov_yy = dot3(ts[1], t[1]) + S(kLowPassFloor);
  const S det = out.cov_xx * out.cov_yy - out.cov_xy * out.cov_xy;
  if (!(value_of(det) > 0.0)) return false;
  const S inv_det = S(1.0) / det;
  out.con_a = out.cov_yy * inv_det;
  out.con_b = -out.cov_xy * inv_det;
  out.con_c = out.cov_xx * inv_det;
  return true;
}

// Screen-space radius beyond which α < kMinAlpha for every pixel.
double splat_radius(const Splat2D& s) {
  const double thresh = s.opacity / kMinAlpha;
  if (thresh <= 1.0) return -1.0;
  const double mid = 0.5 * (s.cov[0] + s.cov[2]);
  const double diff = 0.5 * (s.cov[0] - s.cov[2]);
  const double lmax = mid + std::sqrt(diff * diff + s.cov[1] * s.cov[1]);
  return std::sqrt(lmax * 2.0 * std::log(thresh));
}

std::vector<std::uint32_t> depth_order(std::span<const Splat2D> splats) {
  std::vector<std::uint32_t> order(splats.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (splats[a].depth != splats[b].depth) return splats[a].depth < splats[b].depth;
    return splats[a].id < splats[b].id;
  });
  return order;
}

struct Region {
  int x0, y0, x1, y1;  // half-open pixel bounds
  std::vector<std::uint32_t> list;
};

struct RegionResult {
  std::vector<std::vector<BlendRecord>> pixel_records;  // row-major inside the region
  std::vector<double> psi;                              // per list entry
};

void blend_region(std::span<const Splat2D> splats, const Region& reg, bool early_stop,
                  Image& image, std::vector<double>& final_t, RegionResult& res) {
  const int rw = reg.x1 - reg.x0;
  res.pixel_records.assign(static_cast<std::size_t>(rw) * (reg.y1 - reg.y0), {});
  res.psi.assign(reg.list.size(), 0.0);
  // Quadratic-form bound past which α is certainly below kMinAlpha.
  std::vector<double> q_cut(reg.list.size());
  for (std::size_t li = 0; li < reg.list.size(); ++li) {
    q_cut[li] = 2.0 * std::log(splats[reg.list[li]].opacity / kMinAlpha) + 1e-6;
  }
  for (int y = reg.y0; y < reg.y1; ++y) {
    for (int x = reg.x0; x < reg.x1; ++x) {
      auto& recs = res.pixel_records[static_cast<std::size_t>(y - reg.y0) * rw + (x - reg.x0)];
      const double px = x + 0.5, py = y + 0.5;
      double t = 1.0;
      double c[3] = {0, 0, 0};
      for (std::size_t li = 0; li < reg.list.size(); ++li) {
        const Splat2D& s = splats[reg.list[li]];
        const double dx = px - s.mean[0], dy = py - s.mean[1];
        const double q = s.conic[0] * dx * dx + 2.0 * s.conic[1] * dx * dy + s.conic[2] * dy * dy;
        if (q > q_cut[li]) continue;
        const double alpha = std::min(kMaxAlpha, s.opacity * std::exp(-0.5 * q));
        if (alpha < kMinAlpha) continue;
        const double w = alpha * t;
        for (int ch = 0; ch < 3; ++ch) c[ch] += w * s.color[ch];
        res.psi[li] += w;
        recs.push_back({reg.list[li], alpha, t});
        t *= 1.0 - alpha;
        if (early_stop && t < kTransmittanceCutoff) break;
      }
      for (int ch = 0; ch < 3; ++ch) image.at(x, y, ch) = c[ch];
      final_t[static_cast<std::size_t>(y) * image.width + x] = t;
    }
  }
}

RenderOutput assemble(std::span<const Splat2D> splats, int height, int width,
                      std::vector<Region>& regions, bool early_stop) {
  RenderOutput out;
  out.image = Image(width, height);
  out.final_transmittance.assign(static_cast<std::size_t>(width) * height, 1.0);
  std::vector<RegionResult> results(regions.size());
  const auto nreg = static_cast<std::ptrdiff_t>(regions.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t r = 0; r < nreg; ++r) {
    blend_region(splats, regions[r], early_stop, out.image, out.final_transmittance, results[r]);
  }
  // Fixed-order merge: regions ascending, then pixels in row-major order.
  out.weights.assign(splats.size(), 0.0);
  std::vector<const std::vector<BlendRecord>*> per_pixel(out.image.pixels(), nullptr);
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const Region& reg = regions[r];
    for (std::size_t li = 0; li < reg.list.size(); ++li) out.weights[reg.list[li]] += results[r].psi[li];
    const int rw = reg.x1 - reg.x0;
    for (int y = reg.y0; y < reg.y1; ++y) {
      for (int x = reg.x0; x < reg.x1; ++x) {
        per_pixel[static_cast<std::size_t>(y) * width + x] =
            &results[r].pixel_records[static_cast<std::size_t>(y - reg.y0) * rw + (x - reg.x0)];
      }
    }
  }
  out.offsets.assign(out.image.pixels() + 1, 0);
  std::size_t total = 0;
  for (std::size_t p = 0; p < per_pixel.size(); ++p) total += per_pixel[p]->size();
  out.records.reserve(total);
  for (std::size_t p = 0; p < per_pixel.size(); ++p) {
    out.offsets[p] = static_cast<std::uint32_t>(out.records.size());
    out.records.insert(out.records.end(), per_pixel[p]->begin(), per_pixel[p]->end());
  }
  out.offsets.back() = static_cast<std::uint32_t>(out.records.size());
  return out;
}

}  // namespace

std::optional<Splat2D> project(const DeformedPrimitive& p, const Camera& cam, std::uint32_t id) {
  Projection<double> pr;
  std::array<double, 3> pos = p.position;
  if (!project_generic<double>(pos, p.covariance, cam, pr)) return std::nullopt;
  Splat2D s;
  s.mean = {pr.u, pr.v};
  s.cov = {pr.cov_xx, pr.cov_xy, pr.cov_yy};
  s.conic = {pr.con_a, pr.con_b, pr.con_c};
  s.depth = pr.depth;
  s.color = p.color;
  s.opacity = p.opacity;
  s.id = id;
  return s;
}

RenderOutput rasterize(std::span<const Splat2D> splats, int height, int width) {
  const int tiles_x = (width + kTileSize - 1) / kTileSize;
  const int tiles_y = (height + kTileSize - 1) / kTileSize;
  std::vector<Region> regions(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      Region& r = regions[static_cast<std::size_t>(ty) * tiles_x + tx];
      r.x0 = tx * kTileSize;
      r.y0 = ty * kTileSize;
      r.x1 = std::min(width, r.x0 + kTileSize);
      r.y1 = std::min(height, r.y0 + kTileSize);
    }
  }
  for (std::uint32_t idx : depth_order(splats)) {
    const Splat2D& s = splats[idx];
    const double rad = splat_radius(s);
    if (rad < 0) continue;
    // Pixel centres x + 0.5 within [mean − rad, mean + rad].
    const int px0 = std::max(0, static_cast<int>(std::floor(s.mean[0] - rad - 0.5)));
    const int px1 = std::min(width - 1, static_cast<int>(std::ceil(s.mean[0] + rad - 0.5)));
    const int py0 = std::max(0, static_cast<int>(std::floor(s.mean[1] - rad - 0.5)));
    const int py1 = std::min(height - 1, static_cast<int>(std::ceil(s.mean[1] + rad - 0.5)));
    if (px0 > px1 || py0 > py1) continue;
    for (int ty = py0 / kTileSize; ty <= py1 / kTileSize; ++ty) {
      for (int tx = px0 / kTileSize; tx <= px1 / kTileSize; ++tx) {
        regions[static_cast<std::size_t>(ty) * tiles_x + tx].list.push_back(idx);
      }
    }
  }
  return assemble(splats, height, width, regions, true);
}

RenderOutput rasterize_bruteforce(std::span<const Splat2D> splats, int height, int width) {
  std::vector<Region> regions(1);
  regions[0] = Region{0, 0, width, height, depth_order(splats)};
  return assemble(splats, height, width, regions, false);
}

std::vector<SplatGrad> rasterize_backward(const RenderOutput& out, std::span<const Splat2D> splats,
                                          const Image& grad_image) {
  const int width = out.image.width, height = out.image.height;
  if (grad_image.width != width || grad_image.height != height) {
    throw DimensionError("rasterize_backward: gradient image size mismatch");
  }
  if (out.offsets.size() != out.image.pixels() + 1) {
    throw ContractError("rasterize_backward: no recorded forward pass");
  }
  const int tiles_x = (width + kTileSize - 1) / kTileSize;
  const int tiles_y = (height + kTileSize - 1) / kTileSize;
  const std::size_t ntiles = static_cast<std::size_t>(tiles_x) * tiles_y;
  struct TileGrads {
    std::vector<std::uint32_t> touched;
    std::vector<SplatGrad> grads;
  };
  std::vector<TileGrads> tiles(ntiles);
  const auto nt = static_cast<std::ptrdiff_t>(ntiles);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t ti = 0; ti < nt; ++ti) {
    const int tx = static_cast<int>(ti % tiles_x), ty = static_cast<int>(ti / tiles_x);
    TileGrads& tg = tiles[ti];
    std::vector<std::int32_t> slot(splats.size(), -1);
    for (int y = ty * kTileSize; y < std::min(height, (ty + 1) * kTileSize); ++y) {
      for (int x = tx * kTileSize; x < std::min(width, (tx + 1) * kTileSize); ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * width + x;
        const double gp[3] = {grad_image.at(x, y, 0), grad_image.at(x, y, 1), grad_image.at(x, y, 2)};
        double behind[3] = {0, 0, 0};  // Σ_{j>i} c_j α_j T_j
        for (std::uint32_t ri = out.offsets[p + 1]; ri-- > out.offsets[p];) {
          const BlendRecord& rec = out.records[ri];
          const Splat2D& s = splats[rec.splat];
          if (slot[rec.splat] < 0) {
            slot[rec.splat] = static_cast<std::int32_t>(tg.grads.size());
            tg.touched.push_back(rec.splat);
            tg.grads.emplace_back();
          }
          SplatGrad& g = tg.grads[static_cast<std::size_t>(slot[rec.splat])];
          const double w = rec.alpha * rec.transmittance;
          double dalpha = 0.0;
          for (int ch = 0; ch < 3; ++ch) {
            g.color[ch] += gp[ch] * w;
            dalpha += gp[ch] * (s.color[ch] * rec.transmittance - behind[ch] / (1.0 - rec.alpha));
            behind[ch] += s.color[ch] * w;
          }
          const double dx = x + 0.5 - s.mean[0], dy = y + 0.5 - s.mean[1];
          const double q = s.conic[0] * dx * dx + 2.0 * s.conic[1] * dx * dy + s.conic[2] * dy * dy;
          const double gauss = std::exp(-0.5 * q);
          if (s.opacity * gauss >= kMaxAlpha) continue;  // clamped α
          g.opacity += dalpha * gauss;
          const double dq = -0.5 * rec.alpha * dalpha;
          g.conic[0] += dq * dx * dx;
          g.conic[1] += dq * 2.0 * dx * dy;
          g.conic[2] += dq * dy * dy;
          // dq/dmean = −2 · conic · d
          g.mean[0] += dq * -2.0 * (s.conic[0] * dx + s.conic[1] * dy);
          g.mean[1] += dq * -2.0 * (s.conic[1] * dx + s.conic[2] * dy);
        }
      }
    }
  }
  std::vector<SplatGrad> grads(splats.size());
  for (const TileGrads& tg : tiles) {
    for (std::size_t i = 0; i < tg.touched.size(); ++i) {
      SplatGrad& d = grads[tg.touched[i]];
      const SplatGrad& s = tg.grads[i];
      for (int k = 0; k < 2; ++k) d.mean[k] += s.mean[k];
      for (int k = 0; k < 3; ++k) d.conic[k] += s.conic[k];
      for (int k = 0; k < 3; ++k) d.color[k] += s.color[k];
      d.opacity += s.opacity;
    }
  }
  return grads;
}

RenderResult render(std::span<const DeformedPrimitive> prims, const Camera& cam, bool bruteforce) {
  RenderResult res;
  res.camera = cam;
  res.splat_of.assign(prims.size(), -1);
  std::vector<std::optional<Splat2D>> projected(prims.size());
  const auto n = static_cast<std::ptrdiff_t>(prims.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    projected[i] = project(prims[i], cam, static_cast<std::uint32_t>(i));
  }
  for (std::size_t i = 0; i < prims.size(); ++i) {
    if (!projected[i]) continue;
    res.splat_of[i] = static_cast<std::int64_t>(res.splats.size());
    res.splats.push_back(*projected[i]);
  }
  res.output = bruteforce ? rasterize_bruteforce(res.splats, cam.height, cam.width)
                          : rasterize(res.splats, cam.height, cam.width);
  res.weights.assign(prims.size(), 0.0);
  for (std::size_t i = 0; i < prims.size(); ++i) {
    if (res.splat_of[i] >= 0) res.weights[i] = res.output.weights[res.splat_of[i]];
  }
  res.recorded = true;
  return res;
}

std::vector<PrimitiveGrad> render_backward(const RenderResult& result,
                                           std::span<const DeformedPrimitive> prims,
                                           const Image& grad_image) {
  if (!result.recorded) throw ContractError("render_backward called without a forward pass");
  if (result.splat_of.size() != prims.size()) {
    throw ContractError("render_backward: primitive count differs from the forward pass");
  }
  const std::vector<SplatGrad> sg = rasterize_backward(result.output, result.splats, grad_image);
  std::vector<PrimitiveGrad> out(prims.size());
  const auto n = static_cast<std::ptrdiff_t>(prims.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::int64_t si = result.splat_of[i];
    if (si < 0) continue;
    const SplatGrad& g = sg[static_cast<std::size_t>(si)];
    using D = Dual<9>;
    std::array<D, 3> pos;
    std::array<D, 6> cov;
    for (int k = 0; k < 3; ++k) pos[k] = D::variable(prims[i].position[k], k);
    for (int k = 0; k < 6; ++k) cov[k] = D::variable(prims[i].covariance[k], 3 + k);
    Projection<D> pr;
    if (!project_generic<D>(pos, cov, result.camera, pr)) continue;
    PrimitiveGrad& o = out[i];
    for (int k = 0; k < 9; ++k) {
      const double v = g.mean[0] * pr.u.d[k] + g.mean[1] * pr.v.d[k] + g.conic[0] * pr.con_a.d[k] +
                       g.conic[1] * pr.con_b.d[k] + g.conic[2] * pr.con_c.d[k];
      if (k < 3) {
        o.position[k] = v;
      } else {
        o.covariance[k - 3] = v;
      }
    }
    o.color = g.color;
    o.opacity = g.opacity;
    o.mean2d_norm = std::hypot(g.mean[0], g.mean[1]);
  }
  return out;
}

}  // namespace adcgs
