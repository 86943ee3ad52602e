#include "boxseg/maxflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "boxseg/scene.hpp"

namespace boxseg {

namespace {

// Dinic's algorithm over an adjacency-list residual graph.
class FlowNetwork {
  public:
    explicit FlowNetwork(std::size_t n) : head_(n, -1), level_(n), iter_(n) {}

    void add_edge(std::size_t u, std::size_t v, double cap_uv, double cap_vu) {
        arcs_.push_back({static_cast<int>(v), head_[u], cap_uv});
        head_[u] = static_cast<int>(arcs_.size()) - 1;
        arcs_.push_back({static_cast<int>(u), head_[v], cap_vu});
        head_[v] = static_cast<int>(arcs_.size()) - 1;
    }

    double max_flow(std::size_t s, std::size_t t) {
        double flow = 0.0;
        while (bfs(s, t)) {
            std::copy(head_.begin(), head_.end(), iter_.begin());
            while (true) {
                const double f = dfs(static_cast<int>(s), static_cast<int>(t), std::numeric_limits<double>::infinity());
                if (f <= 0.0) break;
                flow += f;
            }
        }
        return flow;
    }

    // Nodes reachable from s in the residual graph after max_flow.
    std::vector<char> source_side(std::size_t s) const {
        std::vector<char> seen(head_.size(), 0);
        std::vector<int> stack{static_cast<int>(s)};
        seen[s] = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int e = head_[static_cast<std::size_t>(u)]; e >= 0; e = arcs_[static_cast<std::size_t>(e)].next) {
                const auto& a = arcs_[static_cast<std::size_t>(e)];
                if (a.cap > kEps && !seen[static_cast<std::size_t>(a.to)]) {
                    seen[static_cast<std::size_t>(a.to)] = 1;
                    stack.push_back(a.to);
                }
            }
        }
        return seen;
    }

  private:
    static constexpr double kEps = 1e-12;

    struct Arc {
        int to;
        int next;
        double cap;
    };

    bool bfs(std::size_t s, std::size_t t) {
        std::fill(level_.begin(), level_.end(), -1);
        std::queue<int> q;
        level_[s] = 0;
        q.push(static_cast<int>(s));
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int e = head_[static_cast<std::size_t>(u)]; e >= 0; e = arcs_[static_cast<std::size_t>(e)].next) {
                const auto& a = arcs_[static_cast<std::size_t>(e)];
                if (a.cap > kEps && level_[static_cast<std::size_t>(a.to)] < 0) {
                    level_[static_cast<std::size_t>(a.to)] = level_[static_cast<std::size_t>(u)] + 1;
                    q.push(a.to);
                }
            }
        }
        return level_[t] >= 0;
    }

    double dfs(int u, int t, double pushed) {
        if (u == t) return pushed;
        for (int& e = iter_[static_cast<std::size_t>(u)]; e >= 0; e = arcs_[static_cast<std::size_t>(e)].next) {
            auto& a = arcs_[static_cast<std::size_t>(e)];
            if (a.cap <= kEps || level_[static_cast<std::size_t>(a.to)] != level_[static_cast<std::size_t>(u)] + 1)
                continue;
            const double got = dfs(a.to, t, std::min(pushed, a.cap));
            if (got > 0.0) {
                a.cap -= got;
                arcs_[static_cast<std::size_t>(e ^ 1)].cap += got;
                return got;
            }
        }
        return 0.0;
    }

    std::vector<int> head_;
    std::vector<Arc> arcs_;
    std::vector<int> level_;
    std::vector<int> iter_;
};

}  // namespace

double cut_energy(const CutGraph& graph, const std::vector<Side>& labels) {
    double e = 0.0;
    for (std::size_t v = 0; v < graph.size(); ++v)
        e += labels[v] == Side::Foreground ? graph.cost_fg[v] : graph.cost_bg[v];
    for (const auto& edge : graph.edges) {
        if (labels[edge.u] != labels[edge.v]) e += edge.weight;
    }
    return e;
}

CutResult min_cut(const CutGraph& graph) {
    const std::size_t n = graph.size();
    if (graph.cost_bg.size() != n) throw Error("unary cost vectors differ in length");
    for (std::size_t v = 0; v < n; ++v) {
        if (!std::isfinite(graph.cost_fg[v]) || !std::isfinite(graph.cost_bg[v])) throw Error("non-finite unary cost");
    }
    for (const auto& e : graph.edges) {
        if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) throw Error("negative or non-finite edge weight");
        if (e.u == e.v) throw Error("self-loop in cut graph");
        if (e.u >= n || e.v >= n) throw Error("edge endpoint out of range");
    }

    const std::size_t s = n, t = n + 1;
    FlowNetwork net(n + 2);
    for (std::size_t v = 0; v < n; ++v) {
        // Shift both unaries so the smaller is zero; the constant does not move the minimizer.
        const double base = std::min(graph.cost_fg[v], graph.cost_bg[v]);
        const double fg = graph.cost_fg[v] - base;
        const double bg = graph.cost_bg[v] - base;
        if (bg > 0.0) net.add_edge(s, v, bg, 0.0);  // cut when v ends on the sink (Background) side
        if (fg > 0.0) net.add_edge(v, t, fg, 0.0);  // cut when v stays on the source (Foreground) side
    }
    for (const auto& e : graph.edges) {
        if (e.weight > 0.0) net.add_edge(e.u, e.v, e.weight, e.weight);
    }
    net.max_flow(s, t);
    const auto reach = net.source_side(s);

    CutResult result;
    result.labels.resize(n);
    for (std::size_t v = 0; v < n; ++v) result.labels[v] = reach[v] ? Side::Foreground : Side::Background;
    result.energy = cut_energy(graph, result.labels);
    return result;
}

}  // namespace boxseg
