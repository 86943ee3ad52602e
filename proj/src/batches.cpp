#include "boxseg/batches.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace boxseg {

namespace {

Vec3 frame_origin(const Scene& scene, const std::vector<std::uint32_t>& idx) {
    Vec3 lo = scene.points[idx[0]].pos, hi = lo;
    for (auto i : idx) {
        const Vec3& p = scene.points[i].pos;
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    }
    return {(lo.x + hi.x) * 0.5, (lo.y + hi.y) * 0.5, lo.z};
}

void append_batches(const Scene& scene, std::vector<std::uint32_t> idx, int subcloud, const BatchOptions& opt,
                    std::vector<Batch>& out) {
    if (idx.empty()) return;
    const Vec3 origin = frame_origin(scene, idx);
    if (!opt.include.empty()) {
        std::erase_if(idx, [&](std::uint32_t i) { return !opt.include[i]; });
        if (idx.empty()) return;
    }
    std::vector<std::vector<std::uint32_t>> chunks;
    if (opt.max_points == 0 || idx.size() <= opt.max_points) {
        chunks.push_back(std::move(idx));
    } else {
        std::mt19937_64 rng(opt.seed * 1000003u + static_cast<std::uint64_t>(subcloud + 1));
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::size_t count = (idx.size() + opt.max_points - 1) / opt.max_points;
        for (std::size_t c = 0; c < count; ++c) {
            const std::size_t b = idx.size() * c / count, e = idx.size() * (c + 1) / count;
            std::vector<std::uint32_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(b),
                                             idx.begin() + static_cast<std::ptrdiff_t>(e));
            std::sort(chunk.begin(), chunk.end());
            chunks.push_back(std::move(chunk));
        }
    }
    for (auto& chunk : chunks) {
        Batch batch;
        batch.subcloud = subcloud;
        batch.inputs = Matrix(chunk.size(), 3);
        std::vector<Vec3> local(chunk.size());
        for (std::size_t r = 0; r < chunk.size(); ++r) {
            local[r] = scene.points[chunk[r]].pos - origin;
            batch.inputs(r, 0) = local[r].x;
            batch.inputs(r, 1) = local[r].y;
            batch.inputs(r, 2) = local[r].z;
        }
        if (opt.knn_k > 0) batch.neighbors = knn(local, opt.knn_k);
        batch.points = std::move(chunk);
        out.push_back(std::move(batch));
    }
}

}  // namespace

std::vector<Batch> make_batches(const Scene& scene, const BatchOptions& options) {
    if (!options.include.empty() && options.include.size() != scene.points.size())
        throw Error("batch mask does not match the scene");
    std::vector<Batch> out;
    std::vector<char> covered(scene.points.size(), 0);
    for (std::size_t s = 0; s < scene.subclouds.size(); ++s) {
        const auto& sc = scene.subclouds[s];
        std::vector<std::uint32_t> idx(sc.end - sc.begin);
        std::iota(idx.begin(), idx.end(), static_cast<std::uint32_t>(sc.begin));
        for (auto i : idx) covered[i] = 1;
        append_batches(scene, std::move(idx), static_cast<int>(s), options, out);
    }
    std::vector<std::uint32_t> rest;
    for (std::size_t i = 0; i < covered.size(); ++i) {
        if (!covered[i]) rest.push_back(static_cast<std::uint32_t>(i));
    }
    append_batches(scene, std::move(rest), -1, options, out);
    return out;
}

Matrix rotate_about_z(const Matrix& inputs, double angle) {
    if (inputs.cols() != 3) throw Error("rotation needs xyz inputs");
    const double c = std::cos(angle), s = std::sin(angle);
    Matrix out = inputs;
    for (std::size_t r = 0; r < inputs.rows(); ++r) {
        out(r, 0) = c * inputs(r, 0) - s * inputs(r, 1);
        out(r, 1) = s * inputs(r, 0) + c * inputs(r, 1);
    }
    return out;
}

}  // namespace boxseg
