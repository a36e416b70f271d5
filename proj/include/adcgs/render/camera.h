#ifndef ADCGS_RENDER_CAMERA_H_
#define ADCGS_RENDER_CAMERA_H_

#include "adcgs/geometry.h"

namespace adcgs {

// Pinhole camera. x_cam = rotation · x_world + translation; the camera looks
// down +z, with +x right and +y down in the image.
struct Camera {
  Mat3 rotation{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  Vec3 translation{0, 0, 0};
  double fx = 64, fy = 64;
  double cx = 32, cy = 32;
  int width = 64, height = 64;

  Vec3 to_camera(const Vec3& p) const;
  Vec3 center() const;
  // Throws DataError unless RᵀR = I to 1e-9 and the image is non-empty.
  void validate() const;

  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal,
                        int width, int height);
};

}  // namespace adcgs

#endif  // ADCGS_RENDER_CAMERA_H_
