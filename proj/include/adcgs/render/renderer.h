#ifndef ADCGS_RENDER_RENDERER_H_
#define ADCGS_RENDER_RENDERER_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adcgs/geometry.h"
#include "adcgs/render/camera.h"

namespace adcgs {

// Renderable Gaussian at one frame.
struct DeformedPrimitive {
  Vec3 position{};
  CovParams covariance{};
  double opacity = 0.0;
  Vec3 color{};
};

struct Splat2D {
  std::array<double, 2> mean{};
  std::array<double, 3> cov{};    // (xx, xy, yy), low-pass floor included
  std::array<double, 3> conic{};  // inverse of cov
  double depth = 0.0;
  Vec3 color{};
  double opacity = 0.0;
  std::uint32_t id = 0;  // primitive index, used as the depth tie-break
};

// H×W×3, row-major, channel-last.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}
  double& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
};

inline constexpr double kLowPassFloor = 0.3;
inline constexpr double kNearPlane = 0.01;
inline constexpr double kGuardBand = 1.3;
inline constexpr double kMaxAlpha = 0.999;
inline constexpr double kMinAlpha = 1.0 / 255.0;
inline constexpr double kTransmittanceCutoff = 1e-4;
inline constexpr int kTileSize = 16;

// One contribution along a pixel ray.
struct BlendRecord {
  std::uint32_t splat;  // index into the splat list
  double alpha;
  double transmittance;  // before this splat
};

struct RenderOutput {
  Image image;
  std::vector<double> weights;          // Ψ per splat in the input list
  std::vector<std::uint32_t> offsets;   // pixel p owns records[offsets[p], offsets[p+1])
  std::vector<BlendRecord> records;
  std::vector<double> final_transmittance;
};

// Returns nullopt when the primitive is behind the near plane or its centre
// falls outside the guard band around the image.
std::optional<Splat2D> project(const DeformedPrimitive& p, const Camera& cam,
                               std::uint32_t id = 0);

// Tile-parallel front-to-back α-blending on a black background.
RenderOutput rasterize(std::span<const Splat2D> splats, int height, int width);
// Reference path: every splat at every pixel, no tiles, no early termination.
RenderOutput rasterize_bruteforce(std::span<const Splat2D> splats, int height, int width);

struct SplatGrad {
  std::array<double, 2> mean{};
  std::array<double, 3> conic{};
  Vec3 color{};
  double opacity = 0.0;
};

// Gradients w.r.t. splat attributes given dL/dimage.
std::vector<SplatGrad> rasterize_backward(const RenderOutput& out, std::span<const Splat2D> splats,
                                          const Image& grad_image);

struct PrimitiveGrad {
  Vec3 position{};
  CovParams covariance{};
  Vec3 color{};
  double opacity = 0.0;
  double mean2d_norm = 0.0;  // ‖dL/d(screen position)‖ in pixels
};

// Full forward pass: projection + tiled rasterization.
struct RenderResult {
  RenderOutput output;
  std::vector<Splat2D> splats;
  std::vector<std::int64_t> splat_of;  // primitive → splat index, −1 when culled
  std::vector<double> weights;          // Ψ per primitive (0 when culled)
  Camera camera;
  bool recorded = false;
};

RenderResult render(std::span<const DeformedPrimitive> prims, const Camera& cam,
                    bool bruteforce = false);

// Backpropagates dL/dimage to every primitive; culled primitives get zeros.
std::vector<PrimitiveGrad> render_backward(const RenderResult& result,
                                           std::span<const DeformedPrimitive> prims,
                                           const Image& grad_image);

void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);
std::vector<std::uint8_t> encode_ppm(const Image& img);

}  // namespace adcgs

#endif  // ADCGS_RENDER_RENDERER_H_
