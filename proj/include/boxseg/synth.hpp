#ifndef BOXSEG_SYNTH_HPP
#define BOXSEG_SYNTH_HPP

#include <cstdint>

#include "boxseg/scene.hpp"

namespace boxseg {

// Indoor-like test scenes. Class 0 is floor and class 1 is wall (the
// background classes); classes 2.. are table, chair, bin and bookcase, each
// with its own shape and placement zone. Rooms sit side by side along x and
// each room is one subcloud.
struct SynthSpec {
    int rooms = 5;
    int objects_per_room = 4;  // at most two instances per foreground class
    int classes = 6;           // 2..6
    double noise_sigma = 0.005;
    std::uint64_t seed = 0;

    double background_spacing = 0.25;
    double object_spacing = 0.1;
    double walled_fraction = 0.5;  // rounded; at least one open and one walled room when rooms >= 2
    double box_dilation = 0.03;

    void validate() const;
};

Scene generate_synthetic_scene(const SynthSpec& spec);

}  // namespace boxseg

#endif
