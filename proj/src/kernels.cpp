#include "boxseg/kernels.hpp"

#include <algorithm>
#include <numeric>

namespace boxseg {

namespace {

void check_dense_shapes(const Matrix& in, const Matrix& weight, std::span<const double> bias) {
    if (in.cols() != weight.rows() || bias.size() != weight.cols()) throw Error("dense layer shape mismatch");
}

inline void dense_row(const double* x, std::size_t in_dim, const Matrix& weight, std::span<const double> bias,
                      double* y, bool relu) {
    const std::size_t out_dim = weight.cols();
    std::copy(bias.begin(), bias.end(), y);
    for (std::size_t i = 0; i < in_dim; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* w = &weight(i, 0);
        for (std::size_t j = 0; j < out_dim; ++j) y[j] += xi * w[j];
    }
    if (relu) {
        for (std::size_t j = 0; j < out_dim; ++j) y[j] = y[j] > 0.0 ? y[j] : 0.0;
    }
}

inline void input_grad_row(const double* dy, const Matrix& weight, double* dx) {
    const std::size_t in_dim = weight.rows();
    const std::size_t out_dim = weight.cols();
    for (std::size_t i = 0; i < in_dim; ++i) {
        const double* w = &weight(i, 0);
        double acc = 0.0;
        for (std::size_t j = 0; j < out_dim; ++j) acc += dy[j] * w[j];
        dx[i] = acc;
    }
}

// Sorts candidate (distance, index) pairs and keeps the k best.
void select_nearest(std::vector<std::pair<double, std::uint32_t>>& cand, std::size_t k, std::uint32_t self,
                    std::uint32_t* out) {
    if (cand.empty()) {
        std::fill(out, out + k, self);
        return;
    }
    const std::size_t keep = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end());
    for (std::size_t j = 0; j < k; ++j) out[j] = cand[std::min(j, keep - 1)].second;
}

}  // namespace

void dense_forward(const Matrix& in, const Matrix& weight, std::span<const double> bias, Matrix& out, bool relu) {
    check_dense_shapes(in, weight, bias);
    if (out.rows() != in.rows() || out.cols() != weight.cols()) out = Matrix(in.rows(), weight.cols());
    const auto n = static_cast<std::ptrdiff_t>(in.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < n; ++p) {
        dense_row(&in(static_cast<std::size_t>(p), 0), in.cols(), weight, bias, &out(static_cast<std::size_t>(p), 0),
                  relu);
    }
}

void dense_backward(const Matrix& d_out, const Matrix& in, const Matrix& weight, Matrix& d_weight,
                    std::span<double> d_bias, Matrix* d_in) {
    const std::size_t n = in.rows();
    const std::size_t in_dim = weight.rows();
    const std::size_t out_dim = weight.cols();
    if (d_out.rows() != n || d_out.cols() != out_dim || d_weight.rows() != in_dim || d_weight.cols() != out_dim ||
        d_bias.size() != out_dim)
        throw Error("dense backward shape mismatch");

    // Each weight row is owned by one thread and summed over points in order.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(in_dim); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double* dw = &d_weight(i, 0);
        for (std::size_t p = 0; p < n; ++p) {
            const double x = in(p, i);
            if (x == 0.0) continue;
            const double* dy = &d_out(p, 0);
            for (std::size_t j = 0; j < out_dim; ++j) dw[j] += x * dy[j];
        }
    }
    for (std::size_t p = 0; p < n; ++p) {
        const double* dy = &d_out(p, 0);
        for (std::size_t j = 0; j < out_dim; ++j) d_bias[j] += dy[j];
    }
    if (d_in != nullptr) {
        if (d_in->rows() != n || d_in->cols() != in_dim) *d_in = Matrix(n, in_dim);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(n); ++p) {
            input_grad_row(&d_out(static_cast<std::size_t>(p), 0), weight, &(*d_in)(static_cast<std::size_t>(p), 0));
        }
    }
}

NeighborTable knn(std::span<const Vec3> points, std::size_t k) {
    NeighborTable table;
    table.k = k;
    table.index.assign(points.size() * k, 0);
    if (k == 0) return table;
    const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel
    {
        std::vector<std::pair<double, std::uint32_t>> cand;
        cand.reserve(points.size());
#pragma omp for schedule(static)
        for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            cand.clear();
            for (std::size_t j = 0; j < points.size(); ++j) {
                if (j == i) continue;
                cand.emplace_back(squared_norm(points[j] - points[i]), static_cast<std::uint32_t>(j));
            }
            select_nearest(cand, k, static_cast<std::uint32_t>(i), &table.index[i * k]);
        }
    }
    return table;
}

void neighbor_mean(const Matrix& features, const NeighborTable& nbrs, Matrix& out) {
    const std::size_t n = features.rows();
    const std::size_t dim = features.cols();
    if (nbrs.size() != n) throw Error("neighbor table size mismatch");
    if (out.rows() != n || out.cols() != dim) out = Matrix(n, dim);
    const double inv_k = 1.0 / static_cast<double>(nbrs.k);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double* o = &out(i, 0);
        std::fill(o, o + dim, 0.0);
        for (auto j : nbrs.of(i)) {
            const double* f = &features(j, 0);
            for (std::size_t d = 0; d < dim; ++d) o[d] += f[d];
        }
        for (std::size_t d = 0; d < dim; ++d) o[d] *= inv_k;
    }
}

std::vector<std::vector<std::uint32_t>> reverse_neighbors(const NeighborTable& nbrs) {
    std::vector<std::vector<std::uint32_t>> rev(nbrs.size());
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
        for (auto j : nbrs.of(i)) rev[j].push_back(static_cast<std::uint32_t>(i));
    }
    return rev;
}

void neighbor_mean_backward(const Matrix& d_out, const NeighborTable& nbrs,
                            const std::vector<std::vector<std::uint32_t>>& reverse, Matrix& d_features) {
    const std::size_t dim = d_out.cols();
    const double inv_k = 1.0 / static_cast<double>(nbrs.k);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t jj = 0; jj < static_cast<std::ptrdiff_t>(reverse.size()); ++jj) {
        const auto j = static_cast<std::size_t>(jj);
        double* df = &d_features(j, 0);
        for (auto i : reverse[j]) {
            const double* g = &d_out(i, 0);
            for (std::size_t d = 0; d < dim; ++d) df[d] += g[d] * inv_k;
        }
    }
}

namespace reference {

void dense_forward(const Matrix& in, const Matrix& weight, std::span<const double> bias, Matrix& out, bool relu) {
    check_dense_shapes(in, weight, bias);
    out = Matrix(in.rows(), weight.cols());
    for (std::size_t p = 0; p < in.rows(); ++p) {
        for (std::size_t j = 0; j < weight.cols(); ++j) {
            double acc = bias[j];
            for (std::size_t i = 0; i < in.cols(); ++i) acc += in(p, i) * weight(i, j);
            out(p, j) = relu ? std::max(acc, 0.0) : acc;
        }
    }
}

void dense_backward(const Matrix& d_out, const Matrix& in, const Matrix& weight, Matrix& d_weight,
                    std::span<double> d_bias, Matrix* d_in) {
    for (std::size_t p = 0; p < in.rows(); ++p) {
        for (std::size_t i = 0; i < weight.rows(); ++i) {
            for (std::size_t j = 0; j < weight.cols(); ++j) d_weight(i, j) += in(p, i) * d_out(p, j);
        }
        for (std::size_t j = 0; j < weight.cols(); ++j) d_bias[j] += d_out(p, j);
    }
    if (d_in != nullptr) {
        *d_in = Matrix(in.rows(), weight.rows());
        for (std::size_t p = 0; p < in.rows(); ++p) {
            for (std::size_t i = 0; i < weight.rows(); ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < weight.cols(); ++j) acc += d_out(p, j) * weight(i, j);
                (*d_in)(p, i) = acc;
            }
        }
    }
}

NeighborTable knn(std::span<const Vec3> points, std::size_t k) {
    NeighborTable table;
    table.k = k;
    table.index.assign(points.size() * k, 0);
    if (k == 0) return table;
    std::vector<std::pair<double, std::uint32_t>> cand;
    for (std::size_t i = 0; i < points.size(); ++i) {
        cand.clear();
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j != i) cand.emplace_back(squared_norm(points[j] - points[i]), static_cast<std::uint32_t>(j));
        }
        std::sort(cand.begin(), cand.end());
        for (std::size_t j = 0; j < k; ++j) {
            table.index[i * k + j] = cand.empty() ? static_cast<std::uint32_t>(i) : cand[std::min(j, cand.size() - 1)].second;
        }
    }
    return table;
}

}  // namespace reference

}  // namespace boxseg
