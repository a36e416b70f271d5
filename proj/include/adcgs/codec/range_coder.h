#ifndef ADCGS_CODEC_RANGE_CODER_H_
#define ADCGS_CODEC_RANGE_CODER_H_

#include <cstdint>
#include <span>
#include <vector>

namespace adcgs {

// Frequencies in every CDF handed to the coder sum to 2^kFreqBits.
inline constexpr int kFreqBits = 16;
inline constexpr std::uint32_t kFreqTotal = 1u << kFreqBits;

// Adaptive probability of a zero bit, 11-bit fixed point.
struct BitModel {
  std::uint16_t p0 = 1024;
};

// Byte-oriented range coder (carry-propagating, 32-bit range).
class RangeEncoder {
 public:
  // Codes the interval [start, start + freq) out of kFreqTotal.
  void encode(std::uint32_t start, std::uint32_t freq);
  void encode_bit(BitModel& m, int bit);
  // Equiprobable bits, most significant first; nbits ≤ 32.
  void encode_bits(std::uint32_t value, int nbits);
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();
  void normalize();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  // Throws DecodeError(kTruncated) when the stream is shorter than the header.
  explicit RangeDecoder(std::span<const std::uint8_t> data);

  // Target frequency in [0, kFreqTotal); follow with consume().
  std::uint32_t peek();
  void consume(std::uint32_t start, std::uint32_t freq);
  int decode_bit(BitModel& m);
  std::uint32_t decode_bits(int nbits);

  // Bytes read past the end of the buffer (zeros were substituted).
  std::size_t overrun() const { return overrun_; }

 private:
  std::uint8_t next_byte();
  void normalize();

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::size_t overrun_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

}  // namespace adcgs

#endif  // ADCGS_CODEC_RANGE_CODER_H_
