#ifndef BOXSEG_KERNELS_HPP
#define BOXSEG_KERNELS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "boxseg/matrix.hpp"
#include "boxseg/scene.hpp"

// Per-point data-parallel kernels. Every OpenMP kernel here writes disjoint
// outputs or reduces in a fixed order, so results do not depend on the
// thread count. The serial versions in boxseg::reference are kept as test
// oracles and benchmark baselines.
namespace boxseg {

// Fixed-k neighbor table, row-major (num_points x k).
struct NeighborTable {
    std::size_t k = 0;
    std::vector<std::uint32_t> index;

    std::size_t size() const { return k == 0 ? 0 : index.size() / k; }
    std::span<const std::uint32_t> of(std::size_t i) const { return {index.data() + i * k, k}; }
};

// out = act(in * weight + bias); weight is (in_dim x out_dim).
void dense_forward(const Matrix& in, const Matrix& weight, std::span<const double> bias, Matrix& out, bool relu);

// Accumulates d_weight += in^T * d_out and d_bias += colsum(d_out). When
// d_in is non-null it is overwritten with d_out * weight^T.
void dense_backward(const Matrix& d_out, const Matrix& in, const Matrix& weight, Matrix& d_weight,
                    std::span<double> d_bias, Matrix* d_in);

// Exact k nearest neighbors (self excluded, ties by lower index). When a
// cloud has at most k points the table is padded by repeating the farthest
// available neighbor; a single point is its own neighbor.
NeighborTable knn(std::span<const Vec3> points, std::size_t k);

// out(i) = mean of features over the neighbors of i.
void neighbor_mean(const Matrix& features, const NeighborTable& nbrs, Matrix& out);

// Adjoint of neighbor_mean: d_features(j) += sum over i with j in nbrs(i) of d_out(i)/k.
// reverse lists the (i) for each j in ascending order, built by reverse_neighbors.
std::vector<std::vector<std::uint32_t>> reverse_neighbors(const NeighborTable& nbrs);
void neighbor_mean_backward(const Matrix& d_out, const NeighborTable& nbrs,
                            const std::vector<std::vector<std::uint32_t>>& reverse, Matrix& d_features);

namespace reference {

void dense_forward(const Matrix& in, const Matrix& weight, std::span<const double> bias, Matrix& out, bool relu);
void dense_backward(const Matrix& d_out, const Matrix& in, const Matrix& weight, Matrix& d_weight,
                    std::span<double> d_bias, Matrix* d_in);
NeighborTable knn(std::span<const Vec3> points, std::size_t k);

}  // namespace reference

}  // namespace boxseg

#endif
