#include "boxseg/grabcut.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "boxseg/gmm.hpp"

namespace boxseg {

void GrabCutParams::validate() const {
    if (!(voxel_size > 0.0)) throw Error("grabcut: voxel size must be positive");
    if (k_sp < 0 || k_gmm < 1 || outer_iters < 0 || slic_iters < 0 || gmm_iters < 0)
        throw Error("grabcut: counts must be non-negative (k_gmm >= 1)");
    if (!(lambda_pair >= 0.0) || !(beta_scale >= 0.0)) throw Error("grabcut: lambda and beta must be >= 0");
    if (!(core_fraction > 0.0 && core_fraction <= 1.0)) throw Error("grabcut: core fraction must be in (0,1]");
}

SuperpointGraph build_superpoint_graph(const VoxelGrid& grid, const SuperpointSeg& seg, const Vec3& anchor,
                                       const GrabCutParams& params) {
    SuperpointGraph g;
    const std::size_t n = seg.superpoints.size();
    g.cut.cost_fg.assign(n, 0.0);
    g.cut.cost_bg.assign(n, 0.0);
    for (const auto& sp : seg.superpoints) {
        const Vec3 rel = sp.centroid - anchor;
        std::vector<double> f{rel.x, rel.y, rel.z};
        if (params.use_color && sp.mean_color) {
            f.push_back(sp.mean_color->r);
            f.push_back(sp.mean_color->g);
            f.push_back(sp.mean_color->b);
        }
        g.features.push_back(std::move(f));
    }

    // Superpoints owning 6-adjacent voxels are connected.
    std::map<std::pair<int, int>, int> pairs;
    static constexpr int kOffsets[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (std::size_t v = 0; v < grid.voxels.size(); ++v) {
        for (const auto& off : kOffsets) {
            VoxelIndex nb = grid.voxels[v].index;
            for (int a = 0; a < 3; ++a) nb[static_cast<std::size_t>(a)] += off[a];
            const int w = grid.find(nb);
            if (w < 0) continue;
            int a = seg.voxel_label[v], b = seg.voxel_label[static_cast<std::size_t>(w)];
            if (a == b) continue;
            if (a > b) std::swap(a, b);
            pairs.emplace(std::make_pair(a, b), 0);
        }
    }
    std::vector<double> dist2;
    for (const auto& [uv, unused] : pairs) {
        const auto& fu = g.features[static_cast<std::size_t>(uv.first)];
        const auto& fv = g.features[static_cast<std::size_t>(uv.second)];
        double d = 0.0;
        for (std::size_t k = 0; k < fu.size(); ++k) d += (fu[k] - fv[k]) * (fu[k] - fv[k]);
        dist2.push_back(d);
    }
    double mean = 0.0;
    for (double d : dist2) mean += d;
    mean = dist2.empty() ? 0.0 : mean / static_cast<double>(dist2.size());
    const double beta = mean > 0.0 ? params.beta_scale / mean : 0.0;
    std::size_t e = 0;
    for (const auto& [uv, unused] : pairs) {
        g.cut.edges.push_back({static_cast<std::uint32_t>(uv.first), static_cast<std::uint32_t>(uv.second),
                               params.lambda_pair * std::exp(-beta * dist2[e])});
        ++e;
    }
    return g;
}

namespace {

Gmm fit_side(const std::vector<std::vector<double>>& features, const std::vector<Side>& labels, Side side,
             const GrabCutParams& params, std::uint64_t seed) {
    std::vector<std::vector<double>> samples;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == side) samples.push_back(features[i]);
    }
    const int k = std::min(params.k_gmm, static_cast<int>(samples.size()));
    return fit_gmm(samples, k, params.gmm_iters, seed).model;
}

}  // namespace

GrabCutResult grabcut_box(const Scene& scene, const BoundingBox& box, const GrabCutParams& params) {
    params.validate();
    GrabCutResult result;
    std::vector<Point> pts;
    for (std::size_t i = 0; i < scene.points.size(); ++i) {
        if (point_in_box(scene.points[i].pos, box)) {
            result.points.push_back(static_cast<std::uint32_t>(i));
            pts.push_back(scene.points[i]);
        }
    }
    if (pts.empty()) throw Error("grabcut: box contains no points");

    const VoxelGrid grid = voxelize(pts, params.voxel_size);
    const int nvox = static_cast<int>(grid.voxels.size());
    SlicParams slic;
    slic.target_count = params.k_sp > 0 ? std::min(params.k_sp, nvox) : std::min(nvox, std::max(8, nvox / 64));
    slic.compactness = params.compactness;
    slic.max_iters = params.slic_iters;
    const SuperpointSeg seg = slic_superpoints(grid, slic);
    const std::size_t nsp = seg.superpoints.size();
    result.superpoints = nsp;

    const Vec3 center = box.center();
    SuperpointGraph graph = build_superpoint_graph(grid, seg, center, params);

    // Seeds: centroid inside the shrunken core -> Foreground; otherwise a
    // superpoint owning a voxel within one voxel of a box face -> Background.
    const Vec3 half = box.size() * 0.5;
    std::vector<Side> init(nsp, Side::Background);
    std::vector<char> seeded(nsp, 0);
    bool any_fg = false, any_bg = false;
    for (std::size_t s = 0; s < nsp; ++s) {
        const Vec3 rel = seg.superpoints[s].centroid - center;
        bool core = true;
        for (int a = 0; a < 3; ++a) core = core && std::abs(rel[a]) <= params.core_fraction * half[a];
        if (core) {
            init[s] = Side::Foreground;
            seeded[s] = 1;
            any_fg = true;
        }
    }
    const double shell = params.voxel_size;
    for (std::size_t s = 0; s < nsp; ++s) {
        if (init[s] == Side::Foreground) continue;
        for (auto v : seg.superpoints[s].voxels) {
            const Vec3 c = grid.voxels[v].centroid;
            bool touches = false;
            for (int a = 0; a < 3; ++a) {
                touches = touches || c[a] - box.min_corner[a] <= shell || box.max_corner[a] - c[a] <= shell;
            }
            if (touches) {
                seeded[s] = 1;
                any_bg = true;
                break;
            }
        }
    }
    if (!any_fg) {
        std::size_t best = 0;
        double best_d = squared_norm(seg.superpoints[0].centroid - center);
        for (std::size_t s = 1; s < nsp; ++s) {
            const double d = squared_norm(seg.superpoints[s].centroid - center);
            if (d < best_d) {
                best_d = d;
                best = s;
            }
        }
        init[best] = Side::Foreground;
        seeded[best] = 1;
    }

    std::vector<Side> labels = init;
    if (any_bg) {
        for (int it = 0; it < params.outer_iters; ++it) {
            const auto seed = params.seed + static_cast<std::uint64_t>(it) * 7919u;
            std::vector<std::vector<double>> feats;
            std::vector<Side> lab;
            for (std::size_t s = 0; s < nsp; ++s) {
                // Unseeded superpoints sit out the first fit.
                if (it == 0 && !seeded[s]) continue;
                feats.push_back(graph.features[s]);
                lab.push_back(labels[s]);
            }
            const bool has_fg = std::find(lab.begin(), lab.end(), Side::Foreground) != lab.end();
            const bool has_bg = std::find(lab.begin(), lab.end(), Side::Background) != lab.end();
            if (!has_fg || !has_bg) break;
            const Gmm fg = fit_side(feats, lab, Side::Foreground, params, seed);
            const Gmm bg = fit_side(feats, lab, Side::Background, params, seed + 1);
            for (std::size_t s = 0; s < nsp; ++s) {
                graph.cut.cost_fg[s] = -fg.log_density(graph.features[s]);
                graph.cut.cost_bg[s] = -bg.log_density(graph.features[s]);
            }
            const CutResult cut = min_cut(graph.cut);
            if (std::none_of(cut.labels.begin(), cut.labels.end(), [](Side x) { return x == Side::Foreground; })) {
                labels = init;
                result.fallback = true;
                break;
            }
            const bool stable = cut.labels == labels && it > 0;
            labels = cut.labels;
            if (stable) break;
        }
    } else {
        // No boundary evidence at all: everything stays foreground.
        std::fill(labels.begin(), labels.end(), Side::Foreground);
        result.fallback = true;
    }

    // Back-project superpoint labels to the raw points.
    result.foreground.assign(result.points.size(), 0);
    for (std::size_t v = 0; v < grid.voxels.size(); ++v) {
        const bool fg = labels[static_cast<std::size_t>(seg.voxel_label[v])] == Side::Foreground;
        for (auto local : grid.voxels[v].points) result.foreground[local] = fg ? 1 : 0;
    }
    return result;
}

PseudoLabelMap grabcut_foreground_labels(const Scene& scene, const PartitionMap& partition,
                                         const GrabCutParams& params) {
    params.validate();
    const std::size_t nb = scene.boxes.size();
    std::vector<GrabCutResult> results(nb);
    std::vector<char> has_points(nb, 0);
    for (std::size_t i = 0; i < partition.size(); ++i) {
        for (auto b : partition.member_boxes[i]) has_points[b] = 1;
    }
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t bb = 0; bb < static_cast<std::ptrdiff_t>(nb); ++bb) {
        const auto b = static_cast<std::size_t>(bb);
        if (!has_points[b]) continue;
        GrabCutParams p = params;
        p.seed = params.seed + b;
        results[b] = grabcut_box(scene, scene.boxes[b], p);
    }

    PseudoLabelMap labels(scene.points.size());
    for (std::size_t b = 0; b < nb; ++b) {
        const auto& r = results[b];
        for (std::size_t j = 0; j < r.points.size(); ++j) {
            const auto i = r.points[j];
            if (partition.category[i] != Category::PotentialForeground || !r.foreground[j]) continue;
            labels[i] = PseudoLabel{scene.boxes[b].class_id, 1.0, Provenance::GrabCut};
        }
    }
    return labels;
}

}  // namespace boxseg
