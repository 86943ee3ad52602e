#include "boxseg/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace boxseg {

std::uint64_t pack_voxel_index(const VoxelIndex& idx) {
    // 21 bits per axis, offset so small negative indices stay valid.
    constexpr std::int64_t offset = 1 << 20;
    std::uint64_t key = 0;
    for (int a = 0; a < 3; ++a) {
        key = (key << 21) | static_cast<std::uint64_t>((idx[static_cast<std::size_t>(a)] + offset) & 0x1FFFFF);
    }
    return key;
}

int VoxelGrid::find(const VoxelIndex& idx) const {
    auto it = lookup.find(pack_voxel_index(idx));
    return it == lookup.end() ? -1 : it->second;
}

std::size_t VoxelGrid::point_count() const {
    std::size_t n = 0;
    for (const auto& v : voxels) n += v.points.size();
    return n;
}

VoxelGrid voxelize(std::span<const Point> points, double voxel_size) {
    if (!(voxel_size > 0.0)) throw Error("voxel size must be positive");
    if (points.empty()) throw Error("cannot voxelize an empty point set");

    VoxelGrid grid;
    grid.voxel_size = voxel_size;
    grid.origin = points[0].pos;
    for (const auto& p : points) {
        for (int a = 0; a < 3; ++a) grid.origin[a] = std::min(grid.origin[a], p.pos[a]);
    }

    std::map<VoxelIndex, std::vector<std::uint32_t>> cells;
    for (std::size_t i = 0; i < points.size(); ++i) {
        VoxelIndex idx{};
        for (int a = 0; a < 3; ++a)
            idx[static_cast<std::size_t>(a)] =
                static_cast<int>(std::floor((points[i].pos[a] - grid.origin[a]) / voxel_size));
        cells[idx].push_back(static_cast<std::uint32_t>(i));
    }

    grid.voxels.reserve(cells.size());
    for (auto& [idx, members] : cells) {
        Voxel v;
        v.index = idx;
        v.points = std::move(members);
        Vec3 sum{};
        Color csum{};
        bool all_colored = true;
        for (auto i : v.points) {
            sum = sum + points[i].pos;
            if (points[i].color) {
                csum.r += points[i].color->r;
                csum.g += points[i].color->g;
                csum.b += points[i].color->b;
            } else {
                all_colored = false;
            }
        }
        const double inv = 1.0 / static_cast<double>(v.points.size());
        v.centroid = sum * inv;
        if (all_colored) v.mean_color = Color{csum.r * inv, csum.g * inv, csum.b * inv};
        grid.lookup.emplace(pack_voxel_index(idx), static_cast<int>(grid.voxels.size()));
        grid.voxels.push_back(std::move(v));
    }
    return grid;
}

}  // namespace boxseg
