#include "adcgs/codec/octree.h"

#include <algorithm>
#include <cmath>

#include "adcgs/codec/range_coder.h"
#include "adcgs/error.h"
#include "adcgs/io/bytes.h"

namespace adcgs {
namespace {

std::uint64_t spread_bits(std::uint64_t v) {
  v &= 0x1FFFFF;
  v = (v | v << 32) & 0x1F00000000FFFFull;
  v = (v | v << 16) & 0x1F0000FF0000FFull;
  v = (v | v << 8) & 0x100F00F00F00F00Full;
  v = (v | v << 4) & 0x10C30C30C30C30C3ull;
  v = (v | v << 2) & 0x1249249249249249ull;
  return v;
}

// x occupies the most significant slot of each triple, matching octree_child.
std::uint64_t morton(const VoxelKey& k) {
  return spread_bits(static_cast<std::uint32_t>(k[0])) << 2 |
         spread_bits(static_cast<std::uint32_t>(k[1])) << 1 |
         spread_bits(static_cast<std::uint32_t>(k[2]));
}

VoxelKey origin_of(std::span<const VoxelKey> keys) {
  VoxelKey o = keys.front();
  for (const VoxelKey& k : keys) {
    for (int c = 0; c < 3; ++c) o[c] = std::min(o[c], k[c]);
  }
  return o;
}

std::vector<VoxelKey> relative(std::span<const VoxelKey> keys, const VoxelKey& o) {
  std::vector<VoxelKey> rel(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const std::int64_t d = static_cast<std::int64_t>(keys[i][c]) - o[c];
      if (d >= (1 << 21)) throw ContractError("anchor grid extent exceeds 2^21 voxels");
      rel[i][c] = static_cast<std::int32_t>(d);
    }
  }
  return rel;
}

void sort_morton(std::vector<VoxelKey>& rel) {
  std::sort(rel.begin(), rel.end(),
            [](const VoxelKey& a, const VoxelKey& b) { return morton(a) < morton(b); });
}

}  // namespace

int octree_child(const VoxelKey& rel, int depth, int level) {
  const int bit = depth - 1 - level;
  return ((rel[0] >> bit) & 1) << 2 | ((rel[1] >> bit) & 1) << 1 | ((rel[2] >> bit) & 1);
}

std::vector<VoxelKey> octree_order(std::span<const VoxelKey> keys) {
  if (keys.empty()) return {};
  const VoxelKey o = origin_of(keys);
  std::vector<VoxelKey> rel = relative(keys, o);
  sort_morton(rel);
  for (VoxelKey& k : rel) {
    for (int c = 0; c < 3; ++c) k[c] += o[c];
  }
  return rel;
}

std::vector<std::uint8_t> octree_occupancy(std::span<const VoxelKey> rel_keys, int depth) {
  std::vector<VoxelKey> keys(rel_keys.begin(), rel_keys.end());
  for (const VoxelKey& k : keys) {
    for (int c = 0; c < 3; ++c) {
      if (k[c] < 0 || (depth < 31 && k[c] >= (1 << depth))) {
        throw ContractError("voxel key outside the octree");
      }
    }
  }
  sort_morton(keys);
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::vector<std::uint8_t> out;
  if (keys.empty()) return out;
  std::vector<std::pair<std::size_t, std::size_t>> ranges{{0, keys.size()}}, next;
  for (int level = 0; level < depth; ++level) {
    next.clear();
    for (auto [b, e] : ranges) {
      std::uint8_t byte = 0;
      std::size_t i = b;
      while (i < e) {
        const int child = octree_child(keys[i], depth, level);
        std::size_t j = i;
        while (j < e && octree_child(keys[j], depth, level) == child) ++j;
        byte |= static_cast<std::uint8_t>(0x80u >> child);
        next.emplace_back(i, j);
        i = j;
      }
      out.push_back(byte);
    }
    ranges.swap(next);
  }
  return out;
}

std::vector<VoxelKey> octree_leaves(std::span<const std::uint8_t> occupancy, int depth) {
  std::vector<VoxelKey> nodes{{0, 0, 0}}, next;
  std::size_t pos = 0;
  if (occupancy.empty()) return {};
  for (int level = 0; level < depth; ++level) {
    next.clear();
    for (const VoxelKey& n : nodes) {
      if (pos >= occupancy.size()) {
        throw DecodeError(DecodeFailure::kTruncated, "octree occupancy stream ended early");
      }
      const std::uint8_t byte = occupancy[pos++];
      if (byte == 0) throw DecodeError(DecodeFailure::kCorrupt, "empty octree node");
      for (int c = 0; c < 8; ++c) {
        if (!(byte & (0x80u >> c))) continue;
        next.push_back({n[0] << 1 | ((c >> 2) & 1), n[1] << 1 | ((c >> 1) & 1), n[2] << 1 | (c & 1)});
      }
    }
    nodes.swap(next);
  }
  if (pos != occupancy.size()) throw DecodeError(DecodeFailure::kCorrupt, "trailing octree bytes");
  return nodes;
}

std::vector<std::uint8_t> encode_positions(std::span<const VoxelKey> keys, int min_depth) {
  io::ByteWriter w;
  VoxelKey origin{0, 0, 0};
  int depth = std::max(1, min_depth);
  std::vector<VoxelKey> rel;
  if (!keys.empty()) {
    origin = origin_of(keys);
    rel = relative(keys, origin);
    std::int32_t extent = 0;
    for (const VoxelKey& k : rel) extent = std::max({extent, k[0], k[1], k[2]});
    while (depth < 31 && extent >= (1 << depth)) ++depth;
  }
  const std::vector<std::uint8_t> occ = octree_occupancy(rel, depth);
  w.u8(static_cast<std::uint8_t>(depth));
  for (int c = 0; c < 3; ++c) w.i32(origin[c]);
  w.u32(static_cast<std::uint32_t>(octree_leaves(occ, depth).size()));
  RangeEncoder enc;
  BitModel models[8];
  for (std::uint8_t byte : occ) {
    for (int b = 0; b < 8; ++b) enc.encode_bit(models[b], (byte >> (7 - b)) & 1);
  }
  w.bytes(enc.finish());
  return w.take();
}

std::vector<VoxelKey> decode_positions(std::span<const std::uint8_t> payload) {
  io::ByteReader r(payload);
  const int depth = r.u8();
  if (depth < 1 || depth > 31) throw DecodeError(DecodeFailure::kCorrupt, "bad octree depth");
  VoxelKey origin;
  for (int c = 0; c < 3; ++c) origin[c] = r.i32();
  const std::uint32_t count = r.u32();
  RangeDecoder dec(r.bytes(r.remaining()));
  BitModel models[8];
  // Walk the tree while decoding so the byte count is known level by level.
  std::vector<VoxelKey> nodes, next;
  if (count > 0) nodes.push_back({0, 0, 0});
  for (int level = 0; level < depth && !nodes.empty(); ++level) {
    next.clear();
    for (const VoxelKey& n : nodes) {
      int byte = 0;
      for (int b = 0; b < 8; ++b) byte = byte << 1 | dec.decode_bit(models[b]);
      if (byte == 0) throw DecodeError(DecodeFailure::kCorrupt, "empty octree node");
      for (int c = 0; c < 8; ++c) {
        if (!(byte & (0x80 >> c))) continue;
        next.push_back({n[0] << 1 | ((c >> 2) & 1), n[1] << 1 | ((c >> 1) & 1), n[2] << 1 | (c & 1)});
      }
      if (next.size() > count) throw DecodeError(DecodeFailure::kCorrupt, "octree node count overflow");
    }
    nodes.swap(next);
  }
  if (nodes.size() != count || dec.overrun() > 4) {
    throw DecodeError(DecodeFailure::kCorrupt, "octree leaf count does not match the header");
  }
  for (VoxelKey& k : nodes) {
    for (int c = 0; c < 3; ++c) k[c] += origin[c];
  }
  return nodes;
}

std::vector<VoxelKey> keys_on_grid(std::span<const Vec3> positions, double voxel_size) {
  std::vector<VoxelKey> keys;
  keys.reserve(positions.size());
  for (const Vec3& p : positions) {
    const VoxelKey k = voxel_of(p, voxel_size);
    const Vec3 c = voxel_center(k, voxel_size);
    for (int i = 0; i < 3; ++i) {
      if (static_cast<float>(p[i]) != static_cast<float>(c[i])) {
        throw ContractError("anchor position is not a voxel centre");
      }
    }
    keys.push_back(k);
  }
  return keys;
}

}  // namespace adcgs
