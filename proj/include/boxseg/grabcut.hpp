#ifndef BOXSEG_GRABCUT_HPP
#define BOXSEG_GRABCUT_HPP

#include <cstdint>
#include <vector>

#include "boxseg/maxflow.hpp"
#include "boxseg/partition.hpp"
#include "boxseg/scene.hpp"
#include "boxseg/slic.hpp"
#include "boxseg/voxel.hpp"

namespace boxseg {

struct GrabCutParams {
    double voxel_size = 0.05;
    int k_sp = 0;  // 0 selects max(8, voxels / 64)
    double compactness = 1.0;
    int slic_iters = 10;
    int k_gmm = 3;
    int gmm_iters = 20;
    double lambda_pair = 1.0;
    double beta_scale = 0.5;
    int outer_iters = 5;
    double core_fraction = 0.75;  // per-axis size of the foreground seed core
    bool use_color = true;        // append mean rgb to superpoint features when present
    std::uint64_t seed = 0;

    void validate() const;
};

// Superpoint adjacency graph with contrast-sensitive Potts weights; unaries
// are left at zero.
struct SuperpointGraph {
    CutGraph cut;
    std::vector<std::vector<double>> features;
};

// Features are superpoint centroids relative to `anchor`, plus mean color
// when requested and available.
SuperpointGraph build_superpoint_graph(const VoxelGrid& grid, const SuperpointSeg& seg, const Vec3& anchor,
                                       const GrabCutParams& params);

struct GrabCutResult {
    std::vector<std::uint32_t> points;  // scene indices of the in-box points
    std::vector<char> foreground;       // one flag per entry of points
    std::size_t superpoints = 0;
    bool fallback = false;  // the cut emptied the foreground and the core seed was kept
};

// Unsupervised foreground extraction for one box. Throws on an empty box.
GrabCutResult grabcut_box(const Scene& scene, const BoundingBox& box, const GrabCutParams& params);

// Runs grabcut_box for every box (in parallel) and labels each
// PotentialForeground point with its box class when the cut keeps it.
// Ambiguous points are skipped.
PseudoLabelMap grabcut_foreground_labels(const Scene& scene, const PartitionMap& partition,
                                         const GrabCutParams& params);

}  // namespace boxseg

#endif
