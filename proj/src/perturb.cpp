#include "boxseg/perturb.hpp"

#include <cmath>
#include <random>

namespace boxseg {

PerturbMode parse_perturb_mode(const std::string& s) {
    if (s == "none") return PerturbMode::None;
    if (s == "translate") return PerturbMode::Translate;
    if (s == "scale") return PerturbMode::Scale;
    if (s == "discard") return PerturbMode::Discard;
    throw Error("unknown perturbation mode '" + s + "'");
}

const char* to_string(PerturbMode m) {
    switch (m) {
        case PerturbMode::None: return "none";
        case PerturbMode::Translate: return "translate";
        case PerturbMode::Scale: return "scale";
        case PerturbMode::Discard: return "discard";
    }
    return "?";
}

void PerturbSpec::validate() const {
    if (!(fraction >= 0.0) || !std::isfinite(fraction)) throw Error("translation fraction must be >= 0");
    if (!(scale_lo > 0.0) || !std::isfinite(scale_hi)) throw Error("scale interval must be positive");
    if (scale_lo > scale_hi) throw Error("inverted scale interval");
    if (!(drop >= 0.0 && drop <= 1.0)) throw Error("drop probability must be in [0,1]");
}

std::vector<BoundingBox> perturb_boxes(std::span<const BoundingBox> boxes, const PerturbSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::vector<BoundingBox> out;
    out.reserve(boxes.size());
    for (const auto& box : boxes) {
        BoundingBox b = box;
        switch (spec.mode) {
            case PerturbMode::None: break;
            case PerturbMode::Translate: {
                if (spec.fraction == 0.0) break;
                std::uniform_real_distribution<double> u(-spec.fraction, spec.fraction);
                const Vec3 size = box.size();
                Vec3 shift;
                for (int a = 0; a < 3; ++a) shift[a] = u(rng) * size[a];
                b.min_corner = box.min_corner + shift;
                b.max_corner = box.max_corner + shift;
                break;
            }
            case PerturbMode::Scale: {
                if (spec.scale_lo == 1.0 && spec.scale_hi == 1.0) break;
                std::uniform_real_distribution<double> u(spec.scale_lo, spec.scale_hi);
                const double s = u(rng);
                const Vec3 c = box.center();
                const Vec3 half = box.size() * (0.5 * s);
                b.min_corner = c - half;
                b.max_corner = c + half;
                break;
            }
            case PerturbMode::Discard: {
                std::bernoulli_distribution drop(spec.drop);
                if (drop(rng)) continue;
                break;
            }
        }
        out.push_back(b);
    }
    return out;
}

}  // namespace boxseg
