// Independent oracles shared by the unit tests and the acceptance run.
#ifndef BOXSEG_TEST_ORACLES_HPP
#define BOXSEG_TEST_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "boxseg/ast.hpp"
#include "boxseg/gmm.hpp"
#include "boxseg/maxflow.hpp"
#include "boxseg/net.hpp"
#include "boxseg/scene.hpp"
#include "support.hpp"

namespace testing {

// Minimum energy over all 2^n labelings.
inline double brute_min_energy(const CutGraph& g) {
    const std::size_t n = g.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::vector<Side> x(n);
        for (std::size_t v = 0; v < n; ++v) x[v] = (mask >> v) & 1u ? Side::Foreground : Side::Background;
        double e = 0.0;
        for (std::size_t v = 0; v < n; ++v) e += x[v] == Side::Foreground ? g.cost_fg[v] : g.cost_bg[v];
        for (const auto& ed : g.edges) e += x[ed.u] != x[ed.v] ? ed.weight : 0.0;
        best = std::min(best, e);
    }
    return best;
}

// Integer unaries and pairwise weights, so energies compare exactly.
inline CutGraph random_graph(std::mt19937_64& rng, int n) {
    CutGraph g;
    for (int v = 0; v < n; ++v) {
        g.cost_fg.push_back(uniform_int(rng, 0, 20));
        g.cost_bg.push_back(uniform_int(rng, 0, 20));
    }
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            if (uniform(rng, 0, 1) < 0.4)
                g.edges.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v),
                                   static_cast<double>(uniform_int(rng, 0, 15))});
        }
    }
    return g;
}

// Membership straight from the definition, written independently of the
// library's reference path.
inline std::vector<std::vector<std::uint32_t>> brute_membership(const Scene& s) {
    std::vector<std::vector<std::uint32_t>> m(s.points.size());
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        const Vec3& p = s.points[i].pos;
        for (std::size_t b = 0; b < s.boxes.size(); ++b) {
            const auto& box = s.boxes[b];
            bool in = true;
            for (int a = 0; a < 3; ++a) in = in && p[a] >= box.min_corner[a] && p[a] <= box.max_corner[a];
            if (in) m[i].push_back(static_cast<std::uint32_t>(b));
        }
    }
    return m;
}

inline Category expected_category(std::size_t members) {
    if (members == 0) return Category::Background;
    return members == 1 ? Category::PotentialForeground : Category::Ambiguous;
}

// Two clusters 10 apart; true when both fitted means land within 0.1 of the
// sample means of the clusters they came from, which is what EM can recover
// from 50 draws each.
inline bool gmm_recovers_two_clusters(std::uint64_t seed) {
    std::mt19937_64 rng(seed + 100);
    std::normal_distribution<double> n01;
    std::vector<std::vector<double>> xs;
    for (int i = 0; i < 50; ++i) xs.push_back({n01(rng), n01(rng)});
    for (int i = 0; i < 50; ++i) xs.push_back({10.0 + n01(rng), n01(rng)});
    const auto fit = fit_gmm(xs, 2, 100, seed);
    auto m = fit.model.means;
    std::sort(m.begin(), m.end());
    double a0 = 0, a1 = 0, b0 = 0, b1 = 0;
    for (std::size_t i = 0; i < 50; ++i) {
        a0 += xs[i][0] / 50;
        a1 += xs[i][1] / 50;
        b0 += xs[i + 50][0] / 50;
        b1 += xs[i + 50][1] / 50;
    }
    return std::abs(m[0][0] - a0) < 0.1 && std::abs(m[0][1] - a1) < 0.1 && std::abs(m[1][0] - b0) < 0.1 &&
           std::abs(m[1][1] - b1) < 0.1;
}

// Mixed 3-d data fitted with k in [1, 4]; true when every EM step keeps the
// log-likelihood within 1e-9 of the previous one.
inline bool em_monotone(std::mt19937_64& rng) {
    const int k = uniform_int(rng, 1, 4);
    std::vector<std::vector<double>> xs;
    std::normal_distribution<double> n01;
    for (int i = 0; i < 150; ++i) {
        const double c = uniform_int(rng, 0, 3) * 3.0;
        xs.push_back({c + n01(rng), n01(rng) * 0.5, c * 0.5 + n01(rng)});
    }
    const auto fit = fit_gmm(xs, k, 40, rng());
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
        if (fit.log_likelihood[i] < fit.log_likelihood[i - 1] - 1e-9) return false;
    return true;
}

inline NetConfig small_net_config(int classes, bool context) {
    NetConfig c;
    c.widths = {3, 6, 8, 7};
    c.class_count = classes;
    c.knn_context = context;
    c.context_after = 1;
    c.knn_k = 3;
    return c;
}

inline Matrix random_inputs(std::mt19937_64& rng, std::size_t n) {
    Matrix m(n, 3);
    for (auto& v : m.values()) v = uniform(rng, -1, 1);
    return m;
}

// Smallest |pre-activation| over every encoder unit and point.
inline double relu_margin(const PointNetLite& net, const Matrix& x) {
    const auto f = forward(net, x);
    const auto& cfg = net.config();
    double margin = 1e300;
    for (int l = 0; l < cfg.encoder_layers(); ++l) {
        const auto ul = static_cast<std::size_t>(l);
        const Matrix& in = cfg.knn_context && l == cfg.context_after ? f.context_input : f.activations[ul];
        Matrix pre;
        dense_forward(in, net.encoder()[ul].weight, net.encoder()[ul].bias, pre, false);
        for (double v : pre.values()) margin = std::min(margin, std::abs(v));
    }
    return margin;
}

// Inputs that keep every unit well away from its ReLU kink, so a step of h
// in any parameter stays on one linear piece and central differences are
// exact up to rounding and curvature.
inline Matrix smooth_inputs(std::mt19937_64& rng, const PointNetLite& net, std::size_t n) {
    for (int attempt = 0; attempt < 100000; ++attempt) {
        Matrix x = random_inputs(rng, n);
        if (relu_margin(net, x) > 2e-3) return x;
    }
    throw Error("no kink-free input found");
}

// Loss and its gradient with respect to the heads, for one network state.
using LossFn = std::function<double(const ForwardResult&, std::vector<double>* d_class, Matrix* d_z)>;

// Central differences (h = 1e-4) over every parameter, compared with
// backward at relative 1e-4 or absolute 1e-7.
inline std::size_t gradient_mismatches(PointNetLite& net, const Matrix& x, const LossFn& loss) {
    const auto fwd = forward(net, x);
    std::vector<double> d_class(static_cast<std::size_t>(net.config().class_count), 0.0);
    Matrix d_z(fwd.size(), static_cast<std::size_t>(net.config().class_count));
    loss(fwd, &d_class, &d_z);
    const Gradients g = backward(net, fwd, d_class, &d_z);

    const double h = 1e-4;
    std::size_t bad = 0;
    auto params = net.parameter_blocks();
    const auto grads = g.blocks();
    if (params.size() != grads.size()) throw Error("parameter and gradient blocks differ");
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            const double saved = params[b][i];
            params[b][i] = saved + h;
            const double up = loss(forward(net, x), nullptr, nullptr);
            params[b][i] = saved - h;
            const double down = loss(forward(net, x), nullptr, nullptr);
            params[b][i] = saved;
            const double numeric = (up - down) / (2 * h);
            const double analytic = grads[b][i];
            const double err = std::abs(numeric - analytic);
            if (err > 1e-7 && err > 1e-4 * std::max(std::abs(numeric), std::abs(analytic))) ++bad;
        }
    }
    return bad;
}

enum class CheckedLoss { CrossEntropy, Attention, SigmoidTag };

// One seeded gradient check of a small net (under 2000 parameters) against
// the named loss. Even and odd seeds alternate the neighborhood context step.
inline std::size_t loss_gradient_mismatches(CheckedLoss which, std::uint64_t seed) {
    switch (which) {
    case CheckedLoss::CrossEntropy: {
        std::mt19937_64 rng(seed);
        PointNetLite net(small_net_config(4, seed % 2 == 0), seed);
        const Matrix x = smooth_inputs(rng, net, 12);
        const std::vector<std::uint32_t> rows{0, 2, 3, 7, 11};
        std::vector<ClassId> targets;
        for (std::size_t i = 0; i < rows.size(); ++i) targets.push_back(static_cast<ClassId>(rng() % 4));
        return gradient_mismatches(net, x, [&](const ForwardResult& f, std::vector<double>*, Matrix* dz) {
            return cross_entropy_loss(f.probs, rows, targets, dz);
        });
    }
    case CheckedLoss::Attention: {
        std::mt19937_64 rng(seed + 50);
        PointNetLite net(small_net_config(3, seed % 2 == 1), seed + 50);
        const Matrix x = smooth_inputs(rng, net, 10);
        const std::vector<std::uint32_t> rows{1, 4, 5, 9};
        const std::vector<ClassId> box{0, 2, 1, 2};
        return gradient_mismatches(net, x, [&](const ForwardResult& f, std::vector<double>*, Matrix* dz) {
            return attention_loss(f.attention, f.probs, rows, box, dz, 1.0, true);
        });
    }
    case CheckedLoss::SigmoidTag: {
        std::mt19937_64 rng(seed + 100);
        PointNetLite net(small_net_config(5, seed % 2 == 0), seed + 100);
        const Matrix x = smooth_inputs(rng, net, 9);
        const SubcloudTag tag{{1, 0, 1, 1, 0}};
        return gradient_mismatches(net, x, [&](const ForwardResult& f, std::vector<double>* dc, Matrix*) {
            return sigmoid_ce_loss(f.class_logits, tag, dc);
        });
    }
    }
    throw Error("unknown loss");
}

}  // namespace testing

#endif
