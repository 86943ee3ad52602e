#ifndef BOXSEG_SCENE_HPP
#define BOXSEG_SCENE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace boxseg {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Raised by the scene and label readers; the message names the offending
// record (line number and record kind).
class ParseError : public Error {
  public:
    using Error::Error;
};

using ClassId = std::uint8_t;

// Sentinel written for unlabeled points. Limits the class count to 255.
inline constexpr ClassId kUnlabeled = 255;
inline constexpr int kMaxClasses = 255;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
    double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

double squared_norm(Vec3 v);

struct Color {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
    friend bool operator==(const Color&, const Color&) = default;
};

struct Point {
    Vec3 pos;
    std::optional<Color> color;
    friend bool operator==(const Point&, const Point&) = default;
};

// Axis-aligned box annotation.
struct BoundingBox {
    Vec3 min_corner;
    Vec3 max_corner;
    ClassId class_id = 0;

    Vec3 center() const { return (min_corner + max_corner) * 0.5; }
    Vec3 size() const { return max_corner - min_corner; }
    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Class-presence vector for one subcloud.
struct SubcloudTag {
    std::vector<std::uint8_t> bits;

    bool has(int c) const { return bits.at(static_cast<std::size_t>(c)) != 0; }
    int count() const;
    friend bool operator==(const SubcloudTag&, const SubcloudTag&) = default;
};

// Half-open point index range [begin, end) with its tag.
struct Subcloud {
    std::size_t begin = 0;
    std::size_t end = 0;
    SubcloudTag tag;
    friend bool operator==(const Subcloud&, const Subcloud&) = default;
};

struct Scene {
    std::vector<Point> points;
    std::vector<BoundingBox> boxes;
    std::vector<Subcloud> subclouds;
    int class_count = 0;
    std::vector<ClassId> background_classes;  // sorted, unique
    // Evaluation-only labels; kUnlabeled marks points without a G record.
    std::optional<std::vector<ClassId>> ground_truth;

    bool is_background_class(ClassId c) const;
    // Index of the subcloud containing point i, or -1.
    int subcloud_of(std::size_t i) const;
    // Throws Error if any type invariant is violated.
    void validate() const;

    friend bool operator==(const Scene&, const Scene&) = default;
};

enum class Provenance : std::uint8_t {
    BoxPrior,
    GrabCut,
    AstPseudo,
    Pcam,
    RefinedPcam,
    Predicted,  // inference output of a trained network
    External,   // read back from a label file (the format carries no provenance)
};

const char* to_string(Provenance p);

struct PseudoLabel {
    ClassId class_id = 0;
    double confidence = 1.0;
    Provenance provenance = Provenance::External;
};

// One optional label per point; an empty slot is an unlabeled point.
using PseudoLabelMap = std::vector<std::optional<PseudoLabel>>;

// Inclusive containment test.
bool point_in_box(const Vec3& p, const BoundingBox& b);

Scene parse_scene(std::istream& in);
void serialize_scene(const Scene& scene, std::ostream& out);

PseudoLabelMap parse_labels(std::istream& in);
// Throws Error when labels.size() != num_points.
void serialize_labels(const PseudoLabelMap& labels, std::size_t num_points, std::ostream& out);

// Class and confidence equality; provenance is not part of the file format.
bool same_labels(const PseudoLabelMap& a, const PseudoLabelMap& b);

Scene load_scene(const std::filesystem::path& path);
void save_scene(const Scene& scene, const std::filesystem::path& path);
PseudoLabelMap load_labels(const std::filesystem::path& path);
void save_labels(const PseudoLabelMap& labels, std::size_t num_points, const std::filesystem::path& path);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

}  // namespace boxseg

#endif
