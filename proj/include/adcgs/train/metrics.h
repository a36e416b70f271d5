#ifndef ADCGS_TRAIN_METRICS_H_
#define ADCGS_TRAIN_METRICS_H_

#include "adcgs/render/renderer.h"

namespace adcgs {

inline constexpr double kPsnrCap = 99.0;

// Mean over pixels and channels; DimensionError on a shape mismatch.
double mean_abs_error(const Image& a, const Image& b);
double mean_squared_error(const Image& a, const Image& b);
// 10·log10(1/MSE), capped at 99 dB.
double psnr(const Image& a, const Image& b);

// Single-scale SSIM: 11×11 Gaussian window (σ = 1.5) applied per channel with
// zero padding, C1 = 0.01², C2 = 0.03², averaged over pixels and channels.
double ssim(const Image& a, const Image& b);
// SSIM plus its gradient with respect to `a` (written into grad, same shape).
double ssim_with_grad(const Image& a, const Image& b, Image* grad);

}  // namespace adcgs

#endif  // ADCGS_TRAIN_METRICS_H_
