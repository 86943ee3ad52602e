#ifndef BOXSEG_VOXEL_HPP
#define BOXSEG_VOXEL_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "boxseg/scene.hpp"

namespace boxseg {

using VoxelIndex = std::array<int, 3>;

struct Voxel {
    VoxelIndex index{};
    std::vector<std::uint32_t> points;  // indices into the voxelized span
    Vec3 centroid;
    std::optional<Color> mean_color;
};

struct VoxelGrid {
    double voxel_size = 0.0;
    Vec3 origin;                // componentwise min of the input points
    std::vector<Voxel> voxels;  // sorted by index (lexicographic)

    // Position of the voxel with this index in `voxels`, or -1.
    int find(const VoxelIndex& idx) const;
    std::size_t point_count() const;

    std::unordered_map<std::uint64_t, int> lookup;
};

std::uint64_t pack_voxel_index(const VoxelIndex& idx);

// Each point lands in voxel floor((p - origin) / voxel_size).
VoxelGrid voxelize(std::span<const Point> points, double voxel_size);

}  // namespace boxseg

#endif
