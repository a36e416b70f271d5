#ifndef ADCGS_CODEC_SYMBOLS_H_
#define ADCGS_CODEC_SYMBOLS_H_

#include <cstdint>

#include "adcgs/codec/range_coder.h"

namespace adcgs {

inline constexpr double kSigmaMin = 1e-3;
inline constexpr double kSigmaMax = 1e3;
inline constexpr double kProbFloor = 1.0 / 16777216.0;  // 2^-24

// Φ((v+step/2−μ)/σ) − Φ((v−step/2−μ)/σ), floored at 2^-24. Throws
// ContractError when `value` is not on the step lattice.
double gaussian_bin_probability(double mu, double sigma, double step, double value);
// Same mass without the lattice check.
double gaussian_bin_mass(double mu, double sigma, double step, double value);
// Unit-width bin of a logistic(loc, scale) at integer `value`, floored at 2^-24.
double logistic_bin_probability(double loc, double scale, double value);

// Integer-frequency model of one symbol. Symbols near the mode get a
// frequency proportional to their mass (at least 1); anything outside the
// coded window is sent as an escape followed by 32 raw bits.
class SymbolCdf {
 public:
  static SymbolCdf gaussian(double mu, double sigma, double step);
  static SymbolCdf logistic(double loc, double scale);

  std::int32_t min_symbol() const { return qmin_; }
  std::int32_t window() const { return n_; }
  // Cumulative frequency below window index i ∈ [0, n+1].
  std::uint32_t cum(std::int32_t i) const;

  void encode(RangeEncoder& enc, std::int32_t q) const;
  std::int32_t decode(RangeDecoder& dec) const;

 private:
  enum class Kind { kGaussian, kLogistic };
  double edge(std::int32_t i) const;  // CDF at the lower edge of window index i

  Kind kind_ = Kind::kGaussian;
  double a_ = 0, b_ = 1, step_ = 1;  // (μ, σ) or (loc, scale)
  std::int32_t qmin_ = 0;
  std::int32_t n_ = 1;
  double base_ = 0.0;
  std::uint32_t budget_ = 0;
};

}  // namespace adcgs

#endif  // ADCGS_CODEC_SYMBOLS_H_
