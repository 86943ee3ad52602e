#ifndef BOXSEG_GMM_HPP
#define BOXSEG_GMM_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace boxseg {

inline constexpr double kVarianceFloor = 1e-6;

// Diagonal-covariance Gaussian mixture.
struct Gmm {
    std::vector<double> weights;
    std::vector<std::vector<double>> means;
    std::vector<std::vector<double>> variances;

    std::size_t components() const { return weights.size(); }
    std::size_t dim() const { return means.empty() ? 0 : means[0].size(); }
    double log_density(std::span<const double> x) const;
};

struct GmmFit {
    Gmm model;
    // Total log-likelihood of the samples: entry 0 for the k-means++
    // initialization, then one entry per EM iteration.
    std::vector<double> log_likelihood;
};

// EM from a k-means++ start. Variances are floored at kVarianceFloor.
GmmFit fit_gmm(const std::vector<std::vector<double>>& samples, int k, int max_iters, std::uint64_t seed);

}  // namespace boxseg

#endif
