#ifndef BOXSEG_BATCHES_HPP
#define BOXSEG_BATCHES_HPP

#include <cstdint>
#include <vector>

#include "boxseg/kernels.hpp"
#include "boxseg/matrix.hpp"
#include "boxseg/scene.hpp"

namespace boxseg {

// A set of scene points fed through the network together. Inputs are xyz in
// the frame of the owning subcloud: x and y relative to the subcloud's
// horizontal bounding-box center, z relative to its lowest point.
struct Batch {
    std::vector<std::uint32_t> points;
    Matrix inputs;
    NeighborTable neighbors;
    int subcloud = -1;  // -1 for points outside every subcloud
};

struct BatchOptions {
    std::size_t max_points = 0;  // 0 keeps each subcloud whole
    std::size_t knn_k = 8;       // 0 skips the neighbor table
    std::uint64_t seed = 0;      // chunking permutation
    // When non-empty, only points with a nonzero flag are batched. The input
    // frame is still that of the whole subcloud.
    std::vector<char> include;
};

// One batch per subcloud (or per chunk of at most max_points of it), plus one
// for points outside every subcloud. Deterministic given the options.
std::vector<Batch> make_batches(const Scene& scene, const BatchOptions& options);

// Inputs rotated by `angle` radians about the z axis. Distances, and so the
// neighbor table, are unchanged.
Matrix rotate_about_z(const Matrix& inputs, double angle);

}  // namespace boxseg

#endif
