#include "adcgs/render/camera.h"

#include <cmath>

#include "adcgs/error.h"

namespace adcgs {

Vec3 Camera::to_camera(const Vec3& p) const {
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    out[i] = rotation[i][0] * p[0] + rotation[i][1] * p[1] + rotation[i][2] * p[2] + translation[i];
  }
  return out;
}

Vec3 Camera::center() const {
  // c = −Rᵀ t
  Vec3 c;
  for (int i = 0; i < 3; ++i) {
    c[i] = -(rotation[0][i] * translation[0] + rotation[1][i] * translation[1] +
             rotation[2][i] * translation[2]);
  }
  return c;
}

void Camera::validate() const {
  if (width <= 0 || height <= 0) throw DataError("camera image size must be positive");
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += rotation[k][i] * rotation[k][j];
      if (std::abs(s - (i == j ? 1.0 : 0.0)) > 1e-9) {
        throw DataError("camera rotation is not orthonormal");
      }
    }
  }
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal,
                       int width, int height) {
  auto sub = [](const Vec3& a, const Vec3& b) { return Vec3{a[0] - b[0], a[1] - b[1], a[2] - b[2]}; };
  auto cross = [](const Vec3& a, const Vec3& b) {
    return Vec3{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
  };
  auto normalize = [](Vec3 v) {
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n == 0) throw DataError("degenerate camera orientation");
    for (double& x : v) x /= n;
    return v;
  };
  const Vec3 z = normalize(sub(target, eye));
  // Image y points down, so the camera's +y is the negated world up.
  const Vec3 x = normalize(cross(z, up));
  const Vec3 y = cross(z, x);
  Camera c;
  c.rotation = {{{x[0], x[1], x[2]}, {y[0], y[1], y[2]}, {z[0], z[1], z[2]}}};
  for (int i = 0; i < 3; ++i) {
    c.translation[i] = -(c.rotation[i][0] * eye[0] + c.rotation[i][1] * eye[1] +
                         c.rotation[i][2] * eye[2]);
  }
  c.fx = c.fy = focal;
  c.width = width;
  c.height = height;
  c.cx = width / 2.0;
  c.cy = height / 2.0;
  return c;
}

}  // namespace adcgs
