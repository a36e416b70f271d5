#ifndef ADCGS_CODEC_OCTREE_H_
#define ADCGS_CODEC_OCTREE_H_

#include <cstdint>
#include <span>
#include <vector>

#include "adcgs/geometry.h"

namespace adcgs {

inline constexpr int kDefaultOctreeDepth = 10;

// Child index of a key at tree level `level` (0 = root split).
int octree_child(const VoxelKey& rel, int depth, int level);

// Keys sorted into the order the octree decoder emits them (depth-first
// Morton order of the leaves).
std::vector<VoxelKey> octree_order(std::span<const VoxelKey> keys);

// Breadth-first occupancy bytes of non-negative keys below 2^depth.
std::vector<std::uint8_t> octree_occupancy(std::span<const VoxelKey> rel_keys, int depth);
std::vector<VoxelKey> octree_leaves(std::span<const std::uint8_t> occupancy, int depth);

// Section payload: u8 depth, 3×i32 origin, u32 count, then range-coded
// occupancy bits with one adaptive model per bit position. The depth grows
// beyond `min_depth` when the keys need it.
std::vector<std::uint8_t> encode_positions(std::span<const VoxelKey> keys,
                                           int min_depth = kDefaultOctreeDepth);
std::vector<VoxelKey> decode_positions(std::span<const std::uint8_t> payload);

// Voxel keys of positions that must already be voxel centres; ContractError otherwise.
std::vector<VoxelKey> keys_on_grid(std::span<const Vec3> positions, double voxel_size);

}  // namespace adcgs

#endif  // ADCGS_CODEC_OCTREE_H_
