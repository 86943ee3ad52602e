#include "boxseg/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "boxseg/scene.hpp"

namespace boxseg {

namespace {

double log_gaussian(std::span<const double> x, const std::vector<double>& mean, const std::vector<double>& var) {
    double acc = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double diff = x[d] - mean[d];
        acc += std::log(2.0 * std::numbers::pi * var[d]) + diff * diff / var[d];
    }
    return -0.5 * acc;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) acc += (a[d] - b[d]) * (a[d] - b[d]);
    return acc;
}

std::vector<std::vector<double>> kmeans_pp_centers(const std::vector<std::vector<double>>& samples, int k,
                                                   std::mt19937_64& rng) {
    const std::size_t n = samples.size();
    std::vector<std::vector<double>> centers;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    centers.push_back(samples[pick(rng)]);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(samples[i], centers.back()));
            total += d2[i];
        }
        std::size_t chosen = 0;
        if (total > 0.0) {
            double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (chosen = 0; chosen + 1 < n; ++chosen) {
                u -= d2[chosen];
                if (u < 0.0) break;
            }
        } else {
            chosen = pick(rng);
        }
        centers.push_back(samples[chosen]);
    }
    return centers;
}

// M-step from responsibilities resp (n x k, row-major).
void maximize(const std::vector<std::vector<double>>& samples, const std::vector<double>& resp, Gmm& g) {
    const std::size_t n = samples.size();
    const std::size_t k = g.components();
    const std::size_t dim = samples[0].size();
    for (std::size_t c = 0; c < k; ++c) {
        double nk = 0.0;
        std::vector<double> mean(dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = resp[i * k + c];
            nk += r;
            for (std::size_t d = 0; d < dim; ++d) mean[d] += r * samples[i][d];
        }
        if (nk <= std::numeric_limits<double>::min()) {
            g.weights[c] = 0.0;
            continue;
        }
        for (auto& m : mean) m /= nk;
        std::vector<double> var(dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = resp[i * k + c];
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = samples[i][d] - mean[d];
                var[d] += r * diff * diff;
            }
        }
        for (auto& v : var) v = std::max(v / nk, kVarianceFloor);
        g.weights[c] = nk / static_cast<double>(n);
        g.means[c] = std::move(mean);
        g.variances[c] = std::move(var);
    }
}

// E-step; returns the total log-likelihood under g.
double expect(const std::vector<std::vector<double>>& samples, const Gmm& g, std::vector<double>& resp) {
    const std::size_t k = g.components();
    double total = 0.0;
    std::vector<double> logp(k);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            logp[c] = g.weights[c] > 0.0 ? std::log(g.weights[c]) + log_gaussian(samples[i], g.means[c], g.variances[c])
                                         : -std::numeric_limits<double>::infinity();
            mx = std::max(mx, logp[c]);
        }
        double s = 0.0;
        for (std::size_t c = 0; c < k; ++c) s += std::exp(logp[c] - mx);
        const double lse = mx + std::log(s);
        total += lse;
        for (std::size_t c = 0; c < k; ++c) resp[i * k + c] = std::exp(logp[c] - lse);
    }
    return total;
}

}  // namespace

double Gmm::log_density(std::span<const double> x) const {
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> logp(components());
    for (std::size_t c = 0; c < components(); ++c) {
        logp[c] = weights[c] > 0.0 ? std::log(weights[c]) + log_gaussian(x, means[c], variances[c])
                                   : -std::numeric_limits<double>::infinity();
        mx = std::max(mx, logp[c]);
    }
    double s = 0.0;
    for (double lp : logp) s += std::exp(lp - mx);
    return mx + std::log(s);
}

GmmFit fit_gmm(const std::vector<std::vector<double>>& samples, int k, int max_iters, std::uint64_t seed) {
    if (k < 1) throw Error("GMM needs at least one component");
    if (samples.size() < static_cast<std::size_t>(k))
        throw Error("GMM fit needs at least " + std::to_string(k) + " samples, got " + std::to_string(samples.size()));
    const std::size_t dim = samples[0].size();
    for (const auto& s : samples) {
        if (s.size() != dim) throw Error("GMM samples must share one dimension");
    }

    std::mt19937_64 rng(seed);
    const auto uk = static_cast<std::size_t>(k);
    GmmFit fit;
    Gmm& g = fit.model;
    g.weights.assign(uk, 0.0);
    g.means = kmeans_pp_centers(samples, k, rng);
    g.variances.assign(uk, std::vector<double>(dim, 1.0));

    // Hard assignment to the seeded centers gives the starting parameters.
    std::vector<double> resp(samples.size() * uk, 0.0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < uk; ++c) {
            const double d = squared_distance(samples[i], g.means[c]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        resp[i * uk + best] = 1.0;
    }
    maximize(samples, resp, g);

    double ll = expect(samples, g, resp);
    fit.log_likelihood.push_back(ll);
    for (int it = 0; it < max_iters; ++it) {
        maximize(samples, resp, g);
        const double next = expect(samples, g, resp);
        fit.log_likelihood.push_back(next);
        const bool converged = next - ll <= 1e-10 * std::max(1.0, std::abs(next));
        ll = next;
        if (converged) break;
    }
    return fit;
}

}  // namespace boxseg
