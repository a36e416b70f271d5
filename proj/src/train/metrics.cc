#include "adcgs/train/metrics.h"

#include <array>
#include <cmath>

#include "adcgs/error.h"

namespace adcgs {

namespace {

constexpr int kRadius = 5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void require_same(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) {
    throw DimensionError("image sizes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                         " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

std::array<double, 2 * kRadius + 1> gaussian_window() {
  std::array<double, 2 * kRadius + 1> w{};
  double s = 0;
  for (int i = -kRadius; i <= kRadius; ++i) s += w[i + kRadius] = std::exp(-(i * i) / (2 * 1.5 * 1.5));
  for (double& v : w) v /= s;
  return w;
}

// Separable zero-padded blur of one channel plane.
std::vector<double> blur(const std::vector<double>& in, int w, int h) {
  static const auto g = gaussian_window();
  std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int k = -kRadius; k <= kRadius; ++k) {
        const int xx = x + k;
        if (xx >= 0 && xx < w) s += g[k + kRadius] * in[y * w + xx];
      }
      tmp[y * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int k = -kRadius; k <= kRadius; ++k) {
        const int yy = y + k;
        if (yy >= 0 && yy < h) s += g[k + kRadius] * tmp[yy * w + x];
      }
      out[y * w + x] = s;
    }
  return out;
}

}  // namespace

double mean_abs_error(const Image& a, const Image& b) {
  require_same(a, b);
  double s = 0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) s += std::abs(a.rgb[i] - b.rgb[i]);
  return a.rgb.empty() ? 0.0 : s / a.rgb.size();
}

double mean_squared_error(const Image& a, const Image& b) {
  require_same(a, b);
  double s = 0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) s += (a.rgb[i] - b.rgb[i]) * (a.rgb[i] - b.rgb[i]);
  return a.rgb.empty() ? 0.0 : s / a.rgb.size();
}

double psnr(const Image& a, const Image& b) {
  const double mse = mean_squared_error(a, b);
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b) { return ssim_with_grad(a, b, nullptr); }

double ssim_with_grad(const Image& a, const Image& b, Image* grad) {
  require_same(a, b);
  const int w = a.width, h = a.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (n == 0) return 1.0;
  if (grad) *grad = Image(w, h);
  const double norm = 1.0 / (3.0 * n);
  double total = 0;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < n; ++p) {
      x[p] = a.rgb[p * 3 + c];
      y[p] = b.rgb[p * 3 + c];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto mx = blur(x, w, h), my = blur(y, w, h);
    const auto ex = blur(xx, w, h), ey = blur(yy, w, h), exy = blur(xy, w, h);
    std::vector<double> dm(n), de(n), dc(n);
    for (std::size_t p = 0; p < n; ++p) {
      const double a1 = 2 * mx[p] * my[p] + kC1;
      const double a2 = 2 * (exy[p] - mx[p] * my[p]) + kC2;
      const double b1 = mx[p] * mx[p] + my[p] * my[p] + kC1;
      const double b2 = (ex[p] - mx[p] * mx[p]) + (ey[p] - my[p] * my[p]) + kC2;
      const double s = a1 * a2 / (b1 * b2);
      total += s;
      if (grad) {
        dm[p] = norm * s * (2 * my[p] / a1 - 2 * my[p] / a2 - 2 * mx[p] / b1 + 2 * mx[p] / b2);
        de[p] = norm * s * (-1.0 / b2);
        dc[p] = norm * s * (2.0 / a2);
      }
    }
    if (grad) {
      // The blur is symmetric with zero padding, so it is its own adjoint.
      const auto gm = blur(dm, w, h), ge = blur(de, w, h), gc = blur(dc, w, h);
      for (std::size_t p = 0; p < n; ++p) grad->rgb[p * 3 + c] = gm[p] + 2 * x[p] * ge[p] + y[p] * gc[p];
    }
  }
  return total * norm;
}

}  // namespace adcgs
