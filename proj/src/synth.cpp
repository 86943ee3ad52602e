#include "boxseg/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace boxseg {

namespace {

constexpr ClassId kFloor = 0;
constexpr ClassId kWall = 1;
constexpr ClassId kTable = 2;
constexpr ClassId kChair = 3;
constexpr ClassId kBin = 4;
constexpr ClassId kBookcase = 5;

constexpr double kRoomWidth = 5.0;
constexpr double kRoomDepth = 4.0;
constexpr double kRoomJitter = 0.3;
constexpr double kRoomGap = 2.0;
constexpr double kWallHeight = 2.0;
constexpr double kObjectJitter = 0.1;

using Cloud = std::vector<Vec3>;

int steps(double length, double spacing) { return std::max(1, static_cast<int>(std::lround(length / spacing))); }

// Grid of cell centers on the parallelogram origin + [0,lu]*u + [0,lv]*v.
void sample_plane(Vec3 origin, Vec3 u, double lu, Vec3 v, double lv, double spacing, Cloud& out) {
    const int nu = steps(lu, spacing), nv = steps(lv, spacing);
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
            out.push_back(origin + u * ((i + 0.5) * lu / nu) + v * ((j + 0.5) * lv / nv));
        }
    }
}

const Vec3 kX{1, 0, 0}, kY{0, 1, 0}, kZ{0, 0, 1};

// Top and four sides of an axis-aligned block standing on z = lo.z.
void sample_block(Vec3 lo, Vec3 hi, double s, Cloud& out) {
    const Vec3 d = hi - lo;
    sample_plane({lo.x, lo.y, hi.z}, kX, d.x, kY, d.y, s, out);
    sample_plane({lo.x, lo.y, lo.z}, kY, d.y, kZ, d.z, s, out);
    sample_plane({hi.x, lo.y, lo.z}, kY, d.y, kZ, d.z, s, out);
    sample_plane({lo.x, lo.y, lo.z}, kX, d.x, kZ, d.z, s, out);
    sample_plane({lo.x, hi.y, lo.z}, kX, d.x, kZ, d.z, s, out);
}

void sample_cylinder(double cx, double cy, double r, double h, double s, Cloud& out) {
    const double two_pi = 2.0 * std::numbers::pi;
    const int nt = std::max(3, steps(two_pi * r, s)), nz = steps(h, s);
    for (int t = 0; t < nt; ++t) {
        const double a = two_pi * (t + 0.5) / nt;
        for (int k = 0; k < nz; ++k) out.push_back({cx + r * std::cos(a), cy + r * std::sin(a), (k + 0.5) * h / nz});
    }
    const int nr = steps(r, s);
    for (int k = 1; k <= nr; ++k) {
        const double rr = (k - 0.5) * r / nr;
        const int n = std::max(1, steps(two_pi * rr, s));
        for (int t = 0; t < n; ++t) {
            const double a = two_pi * (t + 0.5) / n;
            out.push_back({cx + rr * std::cos(a), cy + rr * std::sin(a), h});
        }
    }
}

// Object shapes in the room frame (room center at the origin, floor at z=0).
Cloud canonical_object(ClassId cls, double s) {
    Cloud pts;
    switch (cls) {
        case kTable: sample_block({-2.1, -1.0, 0.0}, {-0.9, -0.2, 0.75}, s, pts); break;
        case kChair:
            // seat block flush against the table's +x side (2 cm gap) with a back plate on the far side
            sample_block({-0.88, -0.825, 0.0}, {-0.43, -0.375, 0.45}, s, pts);
            sample_plane({-0.48, -0.825, 0.45}, kY, 0.45, kZ, 0.45, s, pts);
            sample_plane({-0.43, -0.825, 0.45}, kY, 0.45, kZ, 0.45, s, pts);
            break;
        case kBin: sample_cylinder(-1.3, 1.2, 0.25, 0.9, s, pts); break;
        case kBookcase: sample_block({-0.5, 1.2, 0.0}, {0.5, 1.6, 1.6}, s, pts); break;
        default: throw Error("no synthetic shape for class " + std::to_string(cls));
    }
    return pts;
}

struct Footprint {
    double x0, y0, x1, y1;
    bool covers(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

}  // namespace

void SynthSpec::validate() const {
    if (rooms < 1) throw Error("synthetic scene needs at least one room");
    if (classes < 2 || classes > 6) throw Error("synthetic scenes support 2 to 6 classes");
    const int fg = classes - 2;
    if (objects_per_room < 0 || objects_per_room > 2 * fg)
        throw Error("objects per room must be in [0, " + std::to_string(2 * fg) + "]");
    if (!(noise_sigma >= 0.0)) throw Error("noise sigma must be >= 0");
    if (!(background_spacing > 0.0) || !(object_spacing > 0.0)) throw Error("sample spacing must be positive");
    if (!(walled_fraction >= 0.0 && walled_fraction <= 1.0)) throw Error("walled fraction must be in [0,1]");
    if (!(box_dilation >= 0.0)) throw Error("box dilation must be >= 0");
}

Scene generate_synthetic_scene(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
    auto jitter = [&](Vec3 p) {
        if (spec.noise_sigma > 0.0) {
            p.x += noise(rng);
            p.y += noise(rng);
            p.z += noise(rng);
        }
        return p;
    };

    int walled_rooms = static_cast<int>(std::lround(spec.walled_fraction * spec.rooms));
    if (spec.rooms >= 2) walled_rooms = std::clamp(walled_rooms, 1, spec.rooms - 1);
    std::vector<char> walled(static_cast<std::size_t>(spec.rooms), 0);
    std::fill_n(walled.begin(), walled_rooms, 1);
    std::shuffle(walled.begin(), walled.end(), rng);

    Scene scene;
    scene.class_count = spec.classes;
    scene.background_classes = {kFloor, kWall};
    scene.ground_truth.emplace();
    auto& gt = *scene.ground_truth;
    auto emit = [&](Vec3 p, ClassId c) {
        scene.points.push_back({p, std::nullopt});
        gt.push_back(c);
    };

    const int fg = spec.classes - 2;
    double right_edge = 0.0;
    for (int r = 0; r < spec.rooms; ++r) {
        const double width = kRoomWidth + kRoomJitter * unit(rng);
        const double depth = kRoomDepth + kRoomJitter * unit(rng);
        const double cx = (r == 0 ? 0.0 : right_edge + kRoomGap) + width / 2.0;
        right_edge = cx + width / 2.0;
        const Vec3 offset{cx, 0.0, 0.0};

        // Objects: instance j has class 2 + j % fg; the second copy of a class
        // is the first rotated half a turn about the room center. Table and
        // chair of one copy share their shift.
        std::array<std::array<Vec3, 2>, 4> shift{};
        for (auto& copy : shift) {
            for (auto& sh : copy) sh = {kObjectJitter * unit(rng), kObjectJitter * unit(rng), 0.0};
        }
        std::vector<Cloud> objects;
        std::vector<ClassId> object_class;
        std::vector<Footprint> footprints;
        for (int j = 0; j < spec.objects_per_room; ++j) {
            const auto cls = static_cast<ClassId>(2 + j % fg);
            const int copy = j / fg;
            const int group = cls == kChair ? kTable - 2 : cls - 2;
            Cloud pts = canonical_object(cls, spec.object_spacing);
            Footprint fp{1e300, 1e300, -1e300, -1e300};
            for (auto& p : pts) {
                if (copy == 1) p = {-p.x, -p.y, p.z};
                p = p + shift[static_cast<std::size_t>(group)][static_cast<std::size_t>(copy)];
                fp = {std::min(fp.x0, p.x), std::min(fp.y0, p.y), std::max(fp.x1, p.x), std::max(fp.y1, p.y)};
            }
            objects.push_back(std::move(pts));
            object_class.push_back(cls);
            footprints.push_back(fp);
        }

        const std::size_t begin = scene.points.size();
        Cloud floor;
        sample_plane({-width / 2, -depth / 2, 0.0}, kX, width, kY, depth, spec.background_spacing, floor);
        for (const auto& p : floor) {
            if (std::any_of(footprints.begin(), footprints.end(), [&](const Footprint& f) { return f.covers(p.x, p.y); }))
                continue;
            emit(jitter(p + offset), kFloor);
        }
        if (walled[static_cast<std::size_t>(r)]) {
            Cloud walls;
            const double s = spec.background_spacing;
            sample_plane({-width / 2, -depth / 2, 0.0}, kY, depth, kZ, kWallHeight, s, walls);
            sample_plane({width / 2, -depth / 2, 0.0}, kY, depth, kZ, kWallHeight, s, walls);
            sample_plane({-width / 2, -depth / 2, 0.0}, kX, width, kZ, kWallHeight, s, walls);
            sample_plane({-width / 2, depth / 2, 0.0}, kX, width, kZ, kWallHeight, s, walls);
            for (const auto& p : walls) emit(jitter(p + offset), kWall);
        }
        for (std::size_t o = 0; o < objects.size(); ++o) {
            BoundingBox box{{1e300, 1e300, 1e300}, {-1e300, -1e300, -1e300}, object_class[o]};
            for (const auto& p : objects[o]) {
                const Vec3 q = jitter(p + offset);
                emit(q, object_class[o]);
                for (int a = 0; a < 3; ++a) {
                    box.min_corner[a] = std::min(box.min_corner[a], q[a]);
                    box.max_corner[a] = std::max(box.max_corner[a], q[a]);
                }
            }
            const Vec3 pad{spec.box_dilation, spec.box_dilation, spec.box_dilation};
            box.min_corner = box.min_corner - pad;
            box.max_corner = box.max_corner + pad;
            scene.boxes.push_back(box);
        }

        Subcloud sub{begin, scene.points.size(), {}};
        sub.tag.bits.assign(static_cast<std::size_t>(spec.classes), 0);
        for (std::size_t i = begin; i < scene.points.size(); ++i) sub.tag.bits[gt[i]] = 1;
        scene.subclouds.push_back(std::move(sub));
    }
    scene.validate();
    return scene;
}

}  // namespace boxseg
