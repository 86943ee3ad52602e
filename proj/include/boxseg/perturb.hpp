#ifndef BOXSEG_PERTURB_HPP
#define BOXSEG_PERTURB_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "boxseg/scene.hpp"

namespace boxseg {

enum class PerturbMode { None, Translate, Scale, Discard };

PerturbMode parse_perturb_mode(const std::string& s);
const char* to_string(PerturbMode m);

struct PerturbSpec {
    PerturbMode mode = PerturbMode::None;
    double fraction = 0.0;   // translate: max shift as a fraction of the box size, per axis
    double scale_lo = 1.0;   // scale: extent factor drawn from [scale_lo, scale_hi]
    double scale_hi = 1.0;
    double drop = 0.0;       // discard: per-box drop probability
    std::uint64_t seed = 0;

    void validate() const;
};

// Deterministic given spec.seed. Translation keeps extents, scaling keeps
// centers.
std::vector<BoundingBox> perturb_boxes(std::span<const BoundingBox> boxes, const PerturbSpec& spec);

}  // namespace boxseg

#endif
