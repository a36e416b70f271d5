#include "adcgs/codec/range_coder.h"

#include <algorithm>

#include "adcgs/error.h"

namespace adcgs {
namespace {

constexpr std::uint32_t kTop = 1u << 24;
constexpr int kModelBits = 11;
constexpr int kMoveBits = 5;

}  // namespace

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t temp = cache_;
    do {
      out_.push_back(static_cast<std::uint8_t>(temp + carry));
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

void RangeEncoder::normalize() {
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::encode(std::uint32_t start, std::uint32_t freq) {
  if (freq == 0 || start + freq > kFreqTotal) throw ContractError("range coder: empty or invalid interval");
  range_ >>= kFreqBits;
  low_ += static_cast<std::uint64_t>(start) * range_;
  range_ *= freq;
  normalize();
}

void RangeEncoder::encode_bit(BitModel& m, int bit) {
  const std::uint32_t bound = (range_ >> kModelBits) * m.p0;
  if (bit == 0) {
    range_ = bound;
    m.p0 = static_cast<std::uint16_t>(m.p0 + (((1u << kModelBits) - m.p0) >> kMoveBits));
  } else {
    low_ += bound;
    range_ -= bound;
    m.p0 = static_cast<std::uint16_t>(m.p0 - (m.p0 >> kMoveBits));
  }
  normalize();
}

void RangeEncoder::encode_bits(std::uint32_t value, int nbits) {
  for (int i = nbits - 1; i >= 0; --i) {
    range_ >>= 1;
    if ((value >> i) & 1u) low_ += range_;
    normalize();
  }
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  std::vector<std::uint8_t> out = std::move(out_);
  *this = RangeEncoder();
  return out;
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> data) : data_(data) {
  if (data.size() < 5) throw DecodeError(DecodeFailure::kTruncated, "range-coded payload too short");
  next_byte();  // the encoder's leading cache byte is always 0
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ < data_.size()) return data_[pos_++];
  ++overrun_;
  return 0;
}

void RangeDecoder::normalize() {
  while (range_ < kTop) {
    range_ <<= 8;
    code_ = (code_ << 8) | next_byte();
  }
}

std::uint32_t RangeDecoder::peek() {
  range_ >>= kFreqBits;
  return std::min(code_ / range_, kFreqTotal - 1);
}

void RangeDecoder::consume(std::uint32_t start, std::uint32_t freq) {
  code_ -= start * range_;
  range_ *= freq;
  normalize();
}

int RangeDecoder::decode_bit(BitModel& m) {
  const std::uint32_t bound = (range_ >> kModelBits) * m.p0;
  int bit;
  if (code_ < bound) {
    range_ = bound;
    m.p0 = static_cast<std::uint16_t>(m.p0 + (((1u << kModelBits) - m.p0) >> kMoveBits));
    bit = 0;
  } else {
    code_ -= bound;
    range_ -= bound;
    m.p0 = static_cast<std::uint16_t>(m.p0 - (m.p0 >> kMoveBits));
    bit = 1;
  }
  normalize();
  return bit;
}

std::uint32_t RangeDecoder::decode_bits(int nbits) {
  std::uint32_t v = 0;
  for (int i = 0; i < nbits; ++i) {
    range_ >>= 1;
    const std::uint32_t bit = code_ >= range_ ? 1u : 0u;
    if (bit) code_ -= range_;
    v = (v << 1) | bit;
    normalize();
  }
  return v;
}

}  // namespace adcgs
