#include "boxseg/partition.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace boxseg {

const char* to_string(Category c) {
    switch (c) {
        case Category::PotentialForeground: return "foreground";
        case Category::Ambiguous: return "ambiguous";
        case Category::Background: return "background";
    }
    return "?";
}

std::array<std::size_t, 3> PartitionMap::counts() const {
    std::array<std::size_t, 3> c{0, 0, 0};
    for (auto cat : category) ++c[static_cast<std::size_t>(cat)];
    return c;
}

namespace {

Category categorize(std::size_t members) {
    if (members == 0) return Category::Background;
    return members == 1 ? Category::PotentialForeground : Category::Ambiguous;
}

// Uniform grid over the union of box extents. Each cell lists the boxes whose
// extent overlaps it, so a point only tests the boxes of its own cell.
class BoxGrid {
  public:
    explicit BoxGrid(const std::vector<BoundingBox>& boxes) : boxes_(boxes) {
        if (boxes.empty()) return;
        lo_ = boxes[0].min_corner;
        hi_ = boxes[0].max_corner;
        Vec3 mean_size{};
        for (const auto& b : boxes) {
            for (int a = 0; a < 3; ++a) {
                lo_[a] = std::min(lo_[a], b.min_corner[a]);
                hi_[a] = std::max(hi_[a], b.max_corner[a]);
            }
            mean_size = mean_size + b.size();
        }
        mean_size = mean_size * (1.0 / static_cast<double>(boxes.size()));
        for (int a = 0; a < 3; ++a) {
            double extent = hi_[a] - lo_[a];
            cell_[a] = std::max({mean_size[a], extent / 64.0, 1e-9});
            dims_[a] = std::max(1, static_cast<int>(std::floor(extent / cell_[a])) + 1);
        }
        cells_.resize(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]);
        for (std::size_t b = 0; b < boxes.size(); ++b) {
            std::array<int, 3> c0{}, c1{};
            for (int a = 0; a < 3; ++a) {
                c0[a] = clamp_index(a, boxes[b].min_corner[a]);
                c1[a] = clamp_index(a, boxes[b].max_corner[a]);
            }
            for (int i = c0[0]; i <= c1[0]; ++i)
                for (int j = c0[1]; j <= c1[1]; ++j)
                    for (int k = c0[2]; k <= c1[2]; ++k) cells_[flat(i, j, k)].push_back(static_cast<std::uint32_t>(b));
        }
    }

    void members(const Vec3& p, std::vector<std::uint32_t>& out) const {
        out.clear();
        if (boxes_.empty()) return;
        for (int a = 0; a < 3; ++a) {
            if (p[a] < lo_[a] || p[a] > hi_[a]) return;
        }
        const auto& cell = cells_[flat(clamp_index(0, p.x), clamp_index(1, p.y), clamp_index(2, p.z))];
        for (auto b : cell) {
            if (point_in_box(p, boxes_[b])) out.push_back(b);
        }
    }

  private:
    int clamp_index(int axis, double v) const {
        int idx = static_cast<int>(std::floor((v - lo_[axis]) / cell_[axis]));
        return std::clamp(idx, 0, dims_[axis] - 1);
    }
    std::size_t flat(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k;
    }

    const std::vector<BoundingBox>& boxes_;
    Vec3 lo_{}, hi_{}, cell_{1, 1, 1};
    std::array<int, 3> dims_{1, 1, 1};
    std::vector<std::vector<std::uint32_t>> cells_;  // box indices ascending per cell
};

}  // namespace

PartitionMap partition_points(const Scene& scene) {
    const std::size_t n = scene.points.size();
    PartitionMap map;
    map.category.resize(n);
    map.member_boxes.resize(n);
    BoxGrid grid(scene.boxes);
#pragma omp parallel
    {
        std::vector<std::uint32_t> scratch;
#pragma omp for schedule(static)
        for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            grid.members(scene.points[i].pos, scratch);
            map.member_boxes[i] = scratch;
            map.category[i] = categorize(scratch.size());
        }
    }
    return map;
}

void write_partition_csv(const PartitionMap& map, std::ostream& out) {
    out << "point_index,category,member_box_indices\n";
    for (std::size_t i = 0; i < map.size(); ++i) {
        out << i << ',' << to_string(map.category[i]) << ',';
        for (std::size_t j = 0; j < map.member_boxes[i].size(); ++j) {
            if (j) out << ';';
            out << map.member_boxes[i][j];
        }
        out << '\n';
    }
}

namespace reference {

PartitionMap partition_points(const Scene& scene) {
    PartitionMap map;
    map.category.resize(scene.points.size());
    map.member_boxes.resize(scene.points.size());
    for (std::size_t i = 0; i < scene.points.size(); ++i) {
        for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
            if (point_in_box(scene.points[i].pos, scene.boxes[b])) map.member_boxes[i].push_back(static_cast<std::uint32_t>(b));
        }
        map.category[i] = categorize(map.member_boxes[i].size());
    }
    return map;
}

}  // namespace reference

}  // namespace boxseg
