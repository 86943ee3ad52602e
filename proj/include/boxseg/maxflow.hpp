#ifndef BOXSEG_MAXFLOW_HPP
#define BOXSEG_MAXFLOW_HPP

#include <cstdint>
#include <vector>

namespace boxseg {

enum class Side : std::uint8_t { Foreground, Background };

struct CutEdge {
    std::uint32_t u = 0;
    std::uint32_t v = 0;
    double weight = 0.0;
};

// Binary labeling problem: per-node unary costs plus Potts pairwise terms.
struct CutGraph {
    std::vector<double> cost_fg;  // unary cost of labeling the node Foreground
    std::vector<double> cost_bg;
    std::vector<CutEdge> edges;

    std::size_t size() const { return cost_fg.size(); }
};

struct CutResult {
    std::vector<Side> labels;
    double energy = 0.0;
};

// E(x) = sum_v unary_v(x_v) + sum_(u,v) w_uv [x_u != x_v]
double cut_energy(const CutGraph& graph, const std::vector<Side>& labels);

// Exact minimizer via max-flow on the s/t graph (source side = Foreground).
// Throws on negative or non-finite weights, self-loops, or non-finite unaries.
CutResult min_cut(const CutGraph& graph);

}  // namespace boxseg

#endif
