#ifndef ADCGS_GEOMETRY_H_
#define ADCGS_GEOMETRY_H_

#include <array>
#include <cmath>
#include <cstdint>

namespace adcgs {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

// Gaussian covariance parameters: 3 log-scales then 3 axis-angle components.
// Decoded covariance is R · diag(exp(2s)) · Rᵀ.
using CovParams = std::array<double, 6>;

// Attribute layout of one renderable primitive, shared by the model graph
// and the renderer: position, covariance params, color, opacity.
inline constexpr std::size_t kPosOffset = 0;
inline constexpr std::size_t kCovOffset = 3;
inline constexpr std::size_t kColorOffset = 9;
inline constexpr std::size_t kOpacityOffset = 12;
inline constexpr std::size_t kPrimitiveAttrs = 13;

// Forward-mode dual number with N tangent directions.
template <int N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
  static Dual variable(double value, int i) {
    Dual x(value);
    x.d[i] = 1.0;
    return x;
  }
};

template <int N>
Dual<N> operator+(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v + b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
template <int N>
Dual<N> operator-(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v - b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
template <int N>
Dual<N> operator-(const Dual<N>& a) {
  Dual<N> r(-a.v);
  for (int i = 0; i < N; ++i) r.d[i] = -a.d[i];
  return r;
}
template <int N>
Dual<N> operator*(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v * b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
template <int N>
Dual<N> operator/(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v / b.v);
  const double inv = 1.0 / (b.v * b.v);
  for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) * inv;
  return r;
}
template <int N>
Dual<N> exp(const Dual<N>& a) {
  Dual<N> r(std::exp(a.v));
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * r.v;
  return r;
}
template <int N>
Dual<N> sqrt(const Dual<N>& a) {
  Dual<N> r(std::sqrt(a.v));
  const double f = r.v > 0 ? 0.5 / r.v : 0.0;
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * f;
  return r;
}
template <int N>
Dual<N> sin(const Dual<N>& a) {
  Dual<N> r(std::sin(a.v));
  const double c = std::cos(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * c;
  return r;
}
template <int N>
Dual<N> cos(const Dual<N>& a) {
  Dual<N> r(std::cos(a.v));
  const double s = -std::sin(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * s;
  return r;
}

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) {
  return x.v;
}

template <typename S>
using Mat3T = std::array<std::array<S, 3>, 3>;

// Rodrigues rotation from an axis-angle vector; series expansion near zero
// keeps derivatives finite.
template <typename S>
Mat3T<S> rotation_from_axis_angle(const S& rx, const S& ry, const S& rz) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const S theta2 = rx * rx + ry * ry + rz * rz;
  S a, b;  // sin θ / θ and (1 − cos θ) / θ²
  if (value_of(theta2) < 1e-6) {
    a = S(1.0) - theta2 / S(6.0) + theta2 * theta2 / S(120.0);
    b = S(0.5) - theta2 / S(24.0) + theta2 * theta2 / S(720.0);
  } else {
    const S theta = sqrt(theta2);
    a = sin(theta) / theta;
    b = (S(1.0) - cos(theta)) / theta2;
  }
  // R = I + a K + b K², K = [r]×
  const Mat3T<S> k{{{S(0.0), -rz, ry}, {rz, S(0.0), -rx}, {-ry, rx, S(0.0)}}};
  Mat3T<S> r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      S k2 = S(0.0);
      for (int m = 0; m < 3; ++m) k2 = k2 + k[i][m] * k[m][j];
      r[i][j] = S(i == j ? 1.0 : 0.0) + a * k[i][j] + b * k2;
    }
  }
  return r;
}

// Decoded 3×3 covariance from the 6 parameters.
template <typename S>
Mat3T<S> covariance_from_params(const std::array<S, 6>& p) {
  using std::exp;
  const Mat3T<S> r = rotation_from_axis_angle(p[3], p[4], p[5]);
  const std::array<S, 3> var{exp(S(2.0) * p[0]), exp(S(2.0) * p[1]), exp(S(2.0) * p[2])};
  Mat3T<S> c;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      S s = S(0.0);
      for (int m = 0; m < 3; ++m) s = s + r[i][m] * var[m] * r[j][m];
      c[i][j] = s;
    }
  }
  return c;
}

inline Mat3 covariance_matrix(const CovParams& p) { return covariance_from_params<double>(p); }

// Integer voxel coordinates on the anchor grid.
using VoxelKey = std::array<std::int32_t, 3>;

inline VoxelKey voxel_of(const Vec3& p, double voxel_size) {
  return {static_cast<std::int32_t>(std::floor(p[0] / voxel_size)),
          static_cast<std::int32_t>(std::floor(p[1] / voxel_size)),
          static_cast<std::int32_t>(std::floor(p[2] / voxel_size))};
}

// Voxel centre, rounded to f32 so that stored and decoded anchors agree.
inline Vec3 voxel_center(const VoxelKey& k, double voxel_size) {
  Vec3 c;
  for (int i = 0; i < 3; ++i) {
    c[i] = static_cast<double>(static_cast<float>((static_cast<double>(k[i]) + 0.5) * voxel_size));
  }
  return c;
}

}  // namespace adcgs

#endif  // ADCGS_GEOMETRY_H_
