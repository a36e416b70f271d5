#ifndef ADCGS_CODEC_CONTAINER_H_
#define ADCGS_CODEC_CONTAINER_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adcgs/model/model.h"

namespace adcgs {

inline constexpr std::uint16_t kContainerVersion = 1;

namespace section {
inline constexpr std::uint8_t kPositions = 1;
inline constexpr std::uint8_t kHyperprior = 2;
inline constexpr std::uint8_t kFv = 3;
inline constexpr std::uint8_t kCovariance = 4;
inline constexpr std::uint8_t kColor = 5;
inline constexpr std::uint8_t kFgFirst = 6;  // chunk ch has id kFgFirst + ch − 1
inline constexpr std::uint8_t kNetworks = 16;
}  // namespace section

std::string section_name(std::uint8_t id);

struct SectionInfo {
  std::uint8_t id = 0;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  std::uint32_t crc = 0;
};

// Fixed header fields plus the section table.
struct ContainerHeader {
  std::uint16_t version = kContainerVersion;
  std::uint16_t flags = 0;  // bit 0 coarse, bit 1 fine deformation
  std::uint32_t anchors = 0, K = 0, n_v = 0, n_g = 0, M = 0;
  float voxel_size = 0;
  std::array<float, 6> bbox{};
  std::vector<SectionInfo> sections;
  std::size_t header_bytes = 0;  // everything before the first section
};

struct SectionEstimate {
  std::uint8_t id = 0;
  double estimated_bits = 0;  // Σ −log2 p of the section's symbols
  std::size_t symbols = 0;
  std::size_t coded_bytes = 0;  // range-coded payload, excluding the 8-byte preamble
};

struct EncodeResult {
  std::vector<std::uint8_t> bytes;
  Model quantized;  // encoder-side model the decoder reproduces
  RateBreakdown rate;
  std::vector<SectionEstimate> estimates;
  std::vector<std::uint64_t> transcript;  // hash of (μ, σ) per f_g chunk
};

struct DecodeResult {
  Model model;
  ContainerHeader header;
  std::vector<std::uint64_t> transcript;
};

EncodeResult encode_model(const Model& m);
// Throws DecodeError: kBadMagic, kBadVersion, kChecksum, kTruncated or kCorrupt.
DecodeResult decode_model(std::span<const std::uint8_t> bytes);
// Parses and checksums the header and section table without decoding.
ContainerHeader inspect_container(std::span<const std::uint8_t> bytes);

}  // namespace adcgs

#endif  // ADCGS_CODEC_CONTAINER_H_
