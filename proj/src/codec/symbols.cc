#include "adcgs/codec/symbols.h"

#include <algorithm>
#include <cmath>

#include "adcgs/error.h"

namespace adcgs {
namespace {

constexpr std::int32_t kMaxHalfWindow = 8191;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double logistic_cdf(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Φ(u) − Φ(l) evaluated on the side that avoids cancellation.
double normal_interval(double l, double u) {
  constexpr double k = 0.7071067811865476;
  if (l > 0) return 0.5 * (std::erfc(l * k) - std::erfc(u * k));
  return 0.5 * (std::erfc(-u * k) - std::erfc(-l * k));
}

double clamp_sigma(double s) { return std::clamp(s, kSigmaMin, kSigmaMax); }

}  // namespace

double gaussian_bin_mass(double mu, double sigma, double step, double value) {
  sigma = clamp_sigma(sigma);
  const double h = 0.5 * step;
  return std::max(normal_interval((value - h - mu) / sigma, (value + h - mu) / sigma), kProbFloor);
}

double gaussian_bin_probability(double mu, double sigma, double step, double value) {
  if (!(step > 0.0)) throw ContractError("quantization step must be positive");
  const double q = value / step;
  if (std::abs(q - std::nearbyint(q)) > 1e-4) {
    throw ContractError("value " + std::to_string(value) + " is not on the step-" +
                        std::to_string(step) + " lattice");
  }
  return gaussian_bin_mass(mu, sigma, step, value);
}

double logistic_bin_probability(double loc, double scale, double value) {
  const double l = (value - 0.5 - loc) / scale, u = (value + 0.5 - loc) / scale;
  const double p = l > 0 ? logistic_cdf(-l) - logistic_cdf(-u) : logistic_cdf(u) - logistic_cdf(l);
  return std::max(p, kProbFloor);
}

SymbolCdf SymbolCdf::gaussian(double mu, double sigma, double step) {
  if (!(step > 0.0) || !std::isfinite(mu) || !std::isfinite(sigma)) {
    throw ContractError("invalid Gaussian symbol model");
  }
  SymbolCdf c;
  c.kind_ = Kind::kGaussian;
  c.a_ = mu;
  c.b_ = clamp_sigma(sigma);
  c.step_ = step;
  const double centre = std::clamp(std::nearbyint(mu / step), -1e9, 1e9);
  const double half = std::min<double>(std::ceil(6.0 * c.b_ / step) + 2.0, kMaxHalfWindow);
  c.qmin_ = static_cast<std::int32_t>(centre - half);
  c.n_ = static_cast<std::int32_t>(2 * half + 1);
  c.base_ = c.edge(0);
  c.budget_ = kFreqTotal - static_cast<std::uint32_t>(c.n_) - 1;
  return c;
}

SymbolCdf SymbolCdf::logistic(double loc, double scale) {
  if (!(scale > 0.0) || !std::isfinite(loc)) throw ContractError("invalid logistic symbol model");
  SymbolCdf c;
  c.kind_ = Kind::kLogistic;
  c.a_ = loc;
  c.b_ = scale;
  c.step_ = 1.0;
  const double centre = std::clamp(std::nearbyint(loc), -1e9, 1e9);
  const double half = std::min<double>(std::ceil(20.0 * scale) + 2.0, kMaxHalfWindow);
  c.qmin_ = static_cast<std::int32_t>(centre - half);
  c.n_ = static_cast<std::int32_t>(2 * half + 1);
  c.base_ = c.edge(0);
  c.budget_ = kFreqTotal - static_cast<std::uint32_t>(c.n_) - 1;
  return c;
}

double SymbolCdf::edge(std::int32_t i) const {
  const double x = (static_cast<double>(qmin_) + i - 0.5) * step_;
  return kind_ == Kind::kGaussian ? normal_cdf((x - a_) / b_) : logistic_cdf((x - a_) / b_);
}

std::uint32_t SymbolCdf::cum(std::int32_t i) const {
  if (i <= 0) return 0;
  if (i > n_) return kFreqTotal;
  const double mass = std::clamp(edge(i) - base_, 0.0, 1.0);
  return static_cast<std::uint32_t>(std::floor(budget_ * mass)) + static_cast<std::uint32_t>(i);
}

void SymbolCdf::encode(RangeEncoder& enc, std::int32_t q) const {
  const std::int64_t i = static_cast<std::int64_t>(q) - qmin_;
  if (i >= 0 && i < n_) {
    const auto ii = static_cast<std::int32_t>(i);
    const std::uint32_t lo = cum(ii);
    enc.encode(lo, cum(ii + 1) - lo);
    return;
  }
  const std::uint32_t lo = cum(n_);
  enc.encode(lo, kFreqTotal - lo);
  enc.encode_bits(static_cast<std::uint32_t>(q), 32);
}

std::int32_t SymbolCdf::decode(RangeDecoder& dec) const {
  const std::uint32_t target = dec.peek();
  std::int32_t lo = 0, hi = n_;  // invariant: cum(lo) ≤ target < cum(hi + 1)
  while (lo < hi) {
    const std::int32_t mid = lo + (hi - lo + 1) / 2;
    if (cum(mid) <= target) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  const std::uint32_t start = cum(lo);
  dec.consume(start, cum(lo + 1) - start);
  if (lo < n_) return qmin_ + lo;
  return static_cast<std::int32_t>(dec.decode_bits(32));
}

}  // namespace adcgs
