#ifndef BOXSEG_PARTITION_HPP
#define BOXSEG_PARTITION_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "boxseg/scene.hpp"

namespace boxseg {

enum class Category : std::uint8_t { PotentialForeground, Ambiguous, Background };

const char* to_string(Category c);

struct PartitionMap {
    std::vector<Category> category;
    std::vector<std::vector<std::uint32_t>> member_boxes;  // ascending box indices

    std::size_t size() const { return category.size(); }
    // Counts indexed by Category.
    std::array<std::size_t, 3> counts() const;

    friend bool operator==(const PartitionMap&, const PartitionMap&) = default;
};

// Tri-partition of the scene's points by box membership. Uses a uniform
// grid over the box extents and runs in parallel over points.
PartitionMap partition_points(const Scene& scene);

// Writes `point_index,category,member_box_indices` rows (indices joined by ';').
void write_partition_csv(const PartitionMap& map, std::ostream& out);

namespace reference {

// O(N*B) definition used as the oracle for partition_points.
PartitionMap partition_points(const Scene& scene);

}  // namespace reference

}  // namespace boxseg

#endif
