#ifndef BOXSEG_SLIC_HPP
#define BOXSEG_SLIC_HPP

#include <optional>
#include <vector>

#include "boxseg/voxel.hpp"

namespace boxseg {

struct SlicParams {
    int target_count = 8;
    double compactness = 1.0;  // weight of the color term against normalized spatial distance
    int max_iters = 10;
};

struct Superpoint {
    Vec3 centroid;
    std::optional<Color> mean_color;
    std::vector<std::uint32_t> voxels;  // positions in VoxelGrid::voxels
};

struct SuperpointSeg {
    std::vector<int> voxel_label;  // superpoint id per voxel
    std::vector<Superpoint> superpoints;
    int iterations = 0;
};

// 3D SLIC over occupied voxels: lattice seeds snapped to the nearest occupied
// voxel, then alternating local assignment and center update.
SuperpointSeg slic_superpoints(const VoxelGrid& grid, const SlicParams& params);

}  // namespace boxseg

#endif
