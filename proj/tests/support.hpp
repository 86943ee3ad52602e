// Shared generators and oracles for the test binaries.
#ifndef BOXSEG_TEST_SUPPORT_HPP
#define BOXSEG_TEST_SUPPORT_HPP

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "boxseg/scene.hpp"

namespace testing {

using namespace boxseg;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Points uniform in [0, extent]^3; boxes with random corners inside the same
// cube, some of them degenerate (zero extent on one axis) or duplicated.
inline Scene random_scene(std::mt19937_64& rng, int points, int boxes, double extent = 10.0, int classes = 6) {
    Scene s;
    s.class_count = classes;
    for (int i = 0; i < points; ++i) s.points.push_back({{uniform(rng, 0, extent), uniform(rng, 0, extent), uniform(rng, 0, extent)}, {}});
    for (int b = 0; b < boxes; ++b) {
        if (b > 0 && uniform(rng, 0, 1) < 0.05) {
            s.boxes.push_back(s.boxes.back());
            continue;
        }
        BoundingBox box;
        for (int a = 0; a < 3; ++a) {
            double lo = uniform(rng, 0, extent), len = uniform(rng, 0, extent * 0.4);
            if (uniform(rng, 0, 1) < 0.05) len = 0.0;
            box.min_corner[a] = lo;
            box.max_corner[a] = lo + len;
        }
        box.class_id = static_cast<ClassId>(uniform_int(rng, 0, classes - 1));
        s.boxes.push_back(box);
    }
    // Snap a few points onto box faces to exercise the inclusive test.
    for (int i = 0; i < points / 20 && !s.boxes.empty(); ++i) {
        const auto& box = s.boxes[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(s.boxes.size()) - 1))];
        auto& p = s.points[static_cast<std::size_t>(uniform_int(rng, 0, points - 1))].pos;
        for (int a = 0; a < 3; ++a) p[a] = uniform(rng, box.min_corner[a], box.max_corner[a]);
        const int face = uniform_int(rng, 0, 2);
        p[face] = uniform(rng, 0, 1) < 0.5 ? box.min_corner[face] : box.max_corner[face];
    }
    return s;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) {
        path = std::filesystem::temp_directory_path() /
               (name + "_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& f) const { return path / f; }
};

inline bool close(double a, double b, double rel, double abs_tol) {
    const double d = std::abs(a - b);
    return d <= abs_tol || d <= rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace testing

#endif
