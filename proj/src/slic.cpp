#include "boxseg/slic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace boxseg {

namespace {

struct Center {
    Vec3 pos;
    Color color;
};

double color_dist(const Color& a, const Color& b) {
    const double dr = a.r - b.r, dg = a.g - b.g, db = a.b - b.b;
    return std::sqrt(dr * dr + dg * dg + db * db);
}

// Lattice resolution per axis with product <= k, refining the coarsest axis first.
std::array<int, 3> lattice_counts(const Vec3& extent, int k) {
    std::array<int, 3> n{1, 1, 1};
    while (true) {
        std::array<int, 3> order{0, 1, 2};
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const double sa = extent[a] / n[static_cast<std::size_t>(a)];
            const double sb = extent[b] / n[static_cast<std::size_t>(b)];
            return sa != sb ? sa > sb : a < b;
        });
        bool grown = false;
        const long long product = static_cast<long long>(n[0]) * n[1] * n[2];
        for (int a : order) {
            const auto ua = static_cast<std::size_t>(a);
            if (product / n[ua] * (n[ua] + 1) <= k) {
                ++n[ua];
                grown = true;
                break;
            }
        }
        if (!grown) return n;
    }
}

SuperpointSeg finalize(const VoxelGrid& grid, const std::vector<int>& assign, std::size_t num_centers, bool colored) {
    std::vector<int> remap(num_centers, -1);
    SuperpointSeg seg;
    seg.voxel_label.resize(grid.voxels.size());
    for (std::size_t v = 0; v < grid.voxels.size(); ++v) {
        auto c = static_cast<std::size_t>(assign[v]);
        if (remap[c] < 0) {
            remap[c] = static_cast<int>(seg.superpoints.size());
            seg.superpoints.emplace_back();
        }
        seg.voxel_label[v] = remap[c];
        seg.superpoints[static_cast<std::size_t>(remap[c])].voxels.push_back(static_cast<std::uint32_t>(v));
    }
    for (auto& sp : seg.superpoints) {
        Vec3 sum{};
        Color csum{};
        for (auto v : sp.voxels) {
            sum = sum + grid.voxels[v].centroid;
            if (colored) {
                csum.r += grid.voxels[v].mean_color->r;
                csum.g += grid.voxels[v].mean_color->g;
                csum.b += grid.voxels[v].mean_color->b;
            }
        }
        const double inv = 1.0 / static_cast<double>(sp.voxels.size());
        sp.centroid = sum * inv;
        if (colored) sp.mean_color = Color{csum.r * inv, csum.g * inv, csum.b * inv};
    }
    return seg;
}

}  // namespace

SuperpointSeg slic_superpoints(const VoxelGrid& grid, const SlicParams& params) {
    const std::size_t nvox = grid.voxels.size();
    if (params.target_count < 1 || static_cast<std::size_t>(params.target_count) > nvox)
        throw Error("superpoint target count out of range: " + std::to_string(params.target_count));
    const bool colored =
        std::all_of(grid.voxels.begin(), grid.voxels.end(), [](const Voxel& v) { return v.mean_color.has_value(); });

    if (static_cast<std::size_t>(params.target_count) == nvox) {
        std::vector<int> assign(nvox);
        for (std::size_t v = 0; v < nvox; ++v) assign[v] = static_cast<int>(v);
        return finalize(grid, assign, nvox, colored);
    }

    Vec3 lo = grid.voxels[0].centroid, hi = lo;
    for (const auto& v : grid.voxels) {
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], v.centroid[a]);
            hi[a] = std::max(hi[a], v.centroid[a]);
        }
    }
    Vec3 extent{};
    for (int a = 0; a < 3; ++a) extent[a] = std::max(hi[a] - lo[a], grid.voxel_size);
    const double step = std::cbrt(extent.x * extent.y * extent.z / params.target_count);

    // Seeds on a regular lattice, each snapped to the nearest occupied voxel.
    const auto counts = lattice_counts(extent, params.target_count);
    std::vector<Center> centers;
    std::vector<char> taken(nvox, 0);
    for (int i = 0; i < counts[0]; ++i) {
        for (int j = 0; j < counts[1]; ++j) {
            for (int k = 0; k < counts[2]; ++k) {
                const Vec3 target{lo.x + extent.x * (i + 0.5) / counts[0], lo.y + extent.y * (j + 0.5) / counts[1],
                                  lo.z + extent.z * (k + 0.5) / counts[2]};
                std::size_t best = 0;
                double best_d = std::numeric_limits<double>::infinity();
                for (std::size_t v = 0; v < nvox; ++v) {
                    const double d = squared_norm(grid.voxels[v].centroid - target);
                    if (d < best_d) {
                        best_d = d;
                        best = v;
                    }
                }
                if (taken[best]) continue;
                taken[best] = 1;
                centers.push_back({grid.voxels[best].centroid, colored ? *grid.voxels[best].mean_color : Color{}});
            }
        }
    }

    std::vector<int> assign(nvox, -1);
    const double window = 2.0 * step;
    int iter = 0;
    const int max_iters = std::max(1, params.max_iters);
    for (; iter < max_iters; ++iter) {
        std::size_t changed = 0;
        for (std::size_t v = 0; v < nvox; ++v) {
            const auto& vox = grid.voxels[v];
            int best = -1;
            double best_d = std::numeric_limits<double>::infinity();
            int fallback = -1;
            double fallback_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < centers.size(); ++c) {
                const Vec3 diff = vox.centroid - centers[c].pos;
                double d = std::sqrt(squared_norm(diff)) / step;
                if (colored) d += params.compactness * color_dist(*vox.mean_color, centers[c].color);
                if (d < fallback_d) {
                    fallback_d = d;
                    fallback = static_cast<int>(c);
                }
                if (std::abs(diff.x) > window || std::abs(diff.y) > window || std::abs(diff.z) > window) continue;
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(c);
                }
            }
            if (best < 0) best = fallback;
            if (assign[v] != best) {
                assign[v] = best;
                ++changed;
            }
        }
        if (changed == 0) break;

        // Update, then drop empty clusters.
        std::vector<Center> sums(centers.size(), Center{{0, 0, 0}, {0, 0, 0}});
        std::vector<std::size_t> sizes(centers.size(), 0);
        for (std::size_t v = 0; v < nvox; ++v) {
            auto c = static_cast<std::size_t>(assign[v]);
            sums[c].pos = sums[c].pos + grid.voxels[v].centroid;
            if (colored) {
                sums[c].color.r += grid.voxels[v].mean_color->r;
                sums[c].color.g += grid.voxels[v].mean_color->g;
                sums[c].color.b += grid.voxels[v].mean_color->b;
            }
            ++sizes[c];
        }
        std::vector<Center> next;
        std::vector<int> remap(centers.size(), -1);
        for (std::size_t c = 0; c < centers.size(); ++c) {
            if (sizes[c] == 0) continue;
            const double inv = 1.0 / static_cast<double>(sizes[c]);
            remap[c] = static_cast<int>(next.size());
            next.push_back({sums[c].pos * inv, Color{sums[c].color.r * inv, sums[c].color.g * inv, sums[c].color.b * inv}});
        }
        for (auto& a : assign) a = remap[static_cast<std::size_t>(a)];
        centers = std::move(next);
    }

    auto seg = finalize(grid, assign, centers.size(), colored);
    seg.iterations = iter;
    return seg;
}

}  // namespace boxseg
