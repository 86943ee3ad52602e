#include "boxseg/scene.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace boxseg {

double squared_norm(Vec3 v) { return v.x * v.x + v.y * v.y + v.z * v.z; }

int SubcloudTag::count() const {
    return static_cast<int>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

bool Scene::is_background_class(ClassId c) const {
    return std::binary_search(background_classes.begin(), background_classes.end(), c);
}

int Scene::subcloud_of(std::size_t i) const {
    for (std::size_t s = 0; s < subclouds.size(); ++s) {
        if (i >= subclouds[s].begin && i < subclouds[s].end) return static_cast<int>(s);
    }
    return -1;
}

namespace {

bool finite(Vec3 v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void Scene::validate() const {
    if (class_count < 1 || class_count > kMaxClasses) throw Error("class count out of range");
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (!finite(p.pos)) throw Error("point " + std::to_string(i) + ": non-finite coordinate");
        if (p.color && !(in_unit(p.color->r) && in_unit(p.color->g) && in_unit(p.color->b)))
            throw Error("point " + std::to_string(i) + ": color outside [0,1]");
    }
    for (ClassId c : background_classes) {
        if (c >= class_count) throw Error("background class out of range");
    }
    if (!std::is_sorted(background_classes.begin(), background_classes.end()) ||
        std::adjacent_find(background_classes.begin(), background_classes.end()) != background_classes.end())
        throw Error("background classes must be sorted and unique");
    for (std::size_t b = 0; b < boxes.size(); ++b) {
        const auto& box = boxes[b];
        if (!finite(box.min_corner) || !finite(box.max_corner))
            throw Error("box " + std::to_string(b) + ": non-finite corner");
        for (int a = 0; a < 3; ++a) {
            if (box.min_corner[a] > box.max_corner[a]) throw Error("box " + std::to_string(b) + ": inverted box extent");
        }
        if (box.class_id >= class_count) throw Error("box " + std::to_string(b) + ": class out of range");
        if (is_background_class(box.class_id))
            throw Error("box " + std::to_string(b) + ": class is a background class");
    }
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t s = 0; s < subclouds.size(); ++s) {
        const auto& sc = subclouds[s];
        if (sc.begin > sc.end || sc.end > points.size())
            throw Error("subcloud " + std::to_string(s) + ": index out of range");
        if (static_cast<int>(sc.tag.bits.size()) != class_count)
            throw Error("subcloud " + std::to_string(s) + ": tag length differs from class count");
        if (sc.tag.count() == 0) throw Error("subcloud " + std::to_string(s) + ": empty tag");
        ranges.emplace_back(sc.begin, sc.end);
    }
    std::sort(ranges.begin(), ranges.end());
    for (std::size_t i = 1; i < ranges.size(); ++i) {
        if (ranges[i].first < ranges[i - 1].second) throw Error("overlapping subcloud ranges");
    }
    if (ground_truth) {
        if (ground_truth->size() != points.size()) throw Error("ground truth length differs from point count");
        for (ClassId c : *ground_truth) {
            if (c != kUnlabeled && c >= class_count) throw Error("ground truth class out of range");
        }
    }
}

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::BoxPrior: return "BoxPrior";
        case Provenance::GrabCut: return "GrabCut";
        case Provenance::AstPseudo: return "AST-PL";
        case Provenance::Pcam: return "PCAM";
        case Provenance::RefinedPcam: return "Refined-PCAM";
        case Provenance::Predicted: return "Predicted";
        case Provenance::External: return "External";
    }
    return "?";
}

bool point_in_box(const Vec3& p, const BoundingBox& b) {
    return p.x >= b.min_corner.x && p.x <= b.max_corner.x && p.y >= b.min_corner.y && p.y <= b.max_corner.y &&
           p.z >= b.min_corner.z && p.z <= b.max_corner.z;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

// Whitespace tokenizer over one line that reports errors with the line number.
class LineReader {
  public:
    LineReader(std::string line, std::size_t line_no) : line_(std::move(line)), line_no_(line_no) {}

    bool next(std::string_view& tok) {
        while (pos_ < line_.size() && std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
        if (pos_ >= line_.size()) return false;
        std::size_t start = pos_;
        while (pos_ < line_.size() && !std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
        tok = std::string_view(line_).substr(start, pos_ - start);
        return true;
    }

    std::string_view token(const char* what) {
        std::string_view tok;
        if (!next(tok)) fail(std::string("missing ") + what);
        return tok;
    }

    double real(const char* what) {
        auto tok = token(what);
        double v = 0.0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
            // from_chars rejects "nan"/"inf" spellings on some inputs; report them uniformly.
            std::string s(tok);
            if (s.find("nan") != std::string::npos || s.find("NaN") != std::string::npos ||
                s.find("inf") != std::string::npos)
                fail(std::string("NaN coordinate in ") + what);
            fail(std::string("bad number for ") + what + ": '" + s + "'");
        }
        if (!std::isfinite(v)) fail(std::string("NaN coordinate in ") + what);
        return v;
    }

    long long integer(const char* what) {
        auto tok = token(what);
        long long v = 0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
            fail(std::string("bad integer for ") + what + ": '" + std::string(tok) + "'");
        return v;
    }

    bool at_end() {
        std::string_view tok;
        std::size_t saved = pos_;
        bool more = next(tok);
        pos_ = saved;
        return !more;
    }

    void expect_end() {
        if (!at_end()) fail("trailing fields");
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("line " + std::to_string(line_no_) + ": " + msg);
    }

  private:
    std::string line_;
    std::size_t line_no_;
    std::size_t pos_ = 0;
};

bool blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

Scene parse_scene(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!blank(line)) break;
    }
    if (line_no == 0 || blank(line)) throw ParseError("malformed header: empty input");

    LineReader header(line, line_no);
    if (header.token("SCENE") != "SCENE" || header.token("version") != "v1")
        throw ParseError("line " + std::to_string(line_no) + ": malformed header");
    long long num_points = 0, num_boxes = 0, num_subclouds = 0, classes = 0;
    try {
        num_points = header.integer("point count");
        num_boxes = header.integer("box count");
        num_subclouds = header.integer("subcloud count");
        classes = header.integer("class count");
        header.expect_end();
    } catch (const ParseError& e) {
        throw ParseError(std::string("malformed header: ") + e.what());
    }
    if (num_points < 0 || num_boxes < 0 || num_subclouds < 0 || classes < 1 || classes > kMaxClasses)
        throw ParseError("line " + std::to_string(line_no) + ": malformed header: counts out of range");

    Scene scene;
    scene.class_count = static_cast<int>(classes);
    scene.points.reserve(static_cast<std::size_t>(num_points));
    std::vector<ClassId> gt(static_cast<std::size_t>(num_points), kUnlabeled);
    bool has_gt = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line) || line[0] == '#') continue;
        LineReader rec(line, line_no);
        auto kind = rec.token("record kind");
        if (kind == "P") {
            if (static_cast<long long>(scene.points.size()) >= num_points) rec.fail("more P records than declared");
            Point p;
            p.pos.x = rec.real("P x");
            p.pos.y = rec.real("P y");
            p.pos.z = rec.real("P z");
            if (!rec.at_end()) {
                Color c;
                c.r = rec.real("P r");
                c.g = rec.real("P g");
                c.b = rec.real("P b");
                if (!(in_unit(c.r) && in_unit(c.g) && in_unit(c.b))) rec.fail("color outside [0,1]");
                p.color = c;
            }
            rec.expect_end();
            scene.points.push_back(p);
        } else if (kind == "B") {
            if (static_cast<long long>(scene.boxes.size()) >= num_boxes) rec.fail("more B records than declared");
            BoundingBox b;
            b.min_corner = {rec.real("B xmin"), rec.real("B ymin"), rec.real("B zmin")};
            b.max_corner = {rec.real("B xmax"), rec.real("B ymax"), rec.real("B zmax")};
            long long c = rec.integer("B class");
            rec.expect_end();
            if (c < 0 || c >= classes) rec.fail("box class out of range");
            for (int a = 0; a < 3; ++a) {
                if (b.min_corner[a] > b.max_corner[a])
                    rec.fail("inverted box extent on axis " + std::string(1, "xyz"[a]));
            }
            b.class_id = static_cast<ClassId>(c);
            scene.boxes.push_back(b);
        } else if (kind == "S") {
            if (static_cast<long long>(scene.subclouds.size()) >= num_subclouds)
                rec.fail("more S records than declared");
            long long start = rec.integer("S start");
            long long end = rec.integer("S end");
            auto bits = rec.token("S tagbits");
            rec.expect_end();
            if (start < 0 || end < start || end > num_points) rec.fail("subcloud index out of range");
            if (static_cast<long long>(bits.size()) != classes) rec.fail("tagbits length differs from class count");
            Subcloud sc;
            sc.begin = static_cast<std::size_t>(start);
            sc.end = static_cast<std::size_t>(end);
            for (char ch : bits) {
                if (ch != '0' && ch != '1') rec.fail("tagbits must be 0/1");
                sc.tag.bits.push_back(ch == '1' ? 1 : 0);
            }
            if (sc.tag.count() == 0) rec.fail("empty subcloud tag");
            scene.subclouds.push_back(std::move(sc));
        } else if (kind == "G") {
            long long i = rec.integer("G index");
            long long c = rec.integer("G class");
            rec.expect_end();
            if (i < 0 || i >= num_points) rec.fail("ground-truth index out of range");
            if (c < 0 || c >= classes) rec.fail("ground-truth class out of range");
            gt[static_cast<std::size_t>(i)] = static_cast<ClassId>(c);
            has_gt = true;
        } else if (kind == "BG") {
            while (!rec.at_end()) {
                long long c = rec.integer("BG class");
                if (c < 0 || c >= classes) rec.fail("background class out of range");
                scene.background_classes.push_back(static_cast<ClassId>(c));
            }
        } else {
            rec.fail("unknown record '" + std::string(kind) + "'");
        }
    }

    if (static_cast<long long>(scene.points.size()) != num_points)
        throw ParseError("point count " + std::to_string(scene.points.size()) + " differs from header " +
                         std::to_string(num_points));
    if (static_cast<long long>(scene.boxes.size()) != num_boxes)
        throw ParseError("box count differs from header");
    if (static_cast<long long>(scene.subclouds.size()) != num_subclouds)
        throw ParseError("subcloud count differs from header");

    std::sort(scene.background_classes.begin(), scene.background_classes.end());
    scene.background_classes.erase(std::unique(scene.background_classes.begin(), scene.background_classes.end()),
                                   scene.background_classes.end());
    if (has_gt) scene.ground_truth = std::move(gt);

    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t s = 0; s < scene.subclouds.size(); ++s) ranges.emplace_back(scene.subclouds[s].begin, s);
    std::sort(ranges.begin(), ranges.end());
    for (std::size_t i = 1; i < ranges.size(); ++i) {
        const auto& prev = scene.subclouds[ranges[i - 1].second];
        const auto& cur = scene.subclouds[ranges[i].second];
        if (cur.begin < prev.end && cur.begin != cur.end && prev.begin != prev.end)
            throw ParseError("overlapping subcloud ranges: S record " + std::to_string(ranges[i - 1].second) +
                             " and " + std::to_string(ranges[i].second));
    }
    for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
        if (scene.is_background_class(scene.boxes[b].class_id))
            throw ParseError("B record " + std::to_string(b) + ": box class is a background class");
    }
    return scene;
}

void serialize_scene(const Scene& scene, std::ostream& out) {
    out << "SCENE v1 " << scene.points.size() << ' ' << scene.boxes.size() << ' ' << scene.subclouds.size() << ' '
        << scene.class_count << '\n';
    if (!scene.background_classes.empty()) {
        out << "BG";
        for (ClassId c : scene.background_classes) out << ' ' << static_cast<int>(c);
        out << '\n';
    }
    for (const auto& p : scene.points) {
        out << "P " << format_double(p.pos.x) << ' ' << format_double(p.pos.y) << ' ' << format_double(p.pos.z);
        if (p.color)
            out << ' ' << format_double(p.color->r) << ' ' << format_double(p.color->g) << ' '
                << format_double(p.color->b);
        out << '\n';
    }
    for (const auto& b : scene.boxes) {
        out << "B " << format_double(b.min_corner.x) << ' ' << format_double(b.min_corner.y) << ' '
            << format_double(b.min_corner.z) << ' ' << format_double(b.max_corner.x) << ' '
            << format_double(b.max_corner.y) << ' ' << format_double(b.max_corner.z) << ' '
            << static_cast<int>(b.class_id) << '\n';
    }
    for (const auto& sc : scene.subclouds) {
        out << "S " << sc.begin << ' ' << sc.end << ' ';
        for (auto bit : sc.tag.bits) out << (bit ? '1' : '0');
        out << '\n';
    }
    if (scene.ground_truth) {
        const auto& gt = *scene.ground_truth;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (gt[i] != kUnlabeled) out << "G " << i << ' ' << static_cast<int>(gt[i]) << '\n';
        }
    }
}

PseudoLabelMap parse_labels(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!blank(line)) break;
    }
    if (line_no == 0 || blank(line)) throw ParseError("malformed header: empty input");
    LineReader header(line, line_no);
    long long n = 0;
    try {
        if (header.token("LABELS") != "LABELS" || header.token("version") != "v1") header.fail("malformed header");
        n = header.integer("point count");
        header.expect_end();
    } catch (const ParseError& e) {
        throw ParseError(std::string("malformed header: ") + e.what());
    }
    if (n < 0) throw ParseError("malformed header: negative point count");

    PseudoLabelMap labels;
    labels.reserve(static_cast<std::size_t>(n));
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        if (static_cast<long long>(labels.size()) >= n) throw ParseError("line " + std::to_string(line_no) + ": more records than declared");
        LineReader rec(line, line_no);
        long long c = rec.integer("class");
        double conf = rec.real("confidence");
        rec.expect_end();
        if (c == kUnlabeled) {
            labels.emplace_back(std::nullopt);
            continue;
        }
        if (c < 0 || c >= kMaxClasses) rec.fail("class out of range");
        if (conf < 0.0 || conf > 1.0) rec.fail("confidence outside [0,1]");
        labels.emplace_back(PseudoLabel{static_cast<ClassId>(c), conf, Provenance::External});
    }
    if (static_cast<long long>(labels.size()) != n) throw ParseError("label count differs from header");
    return labels;
}

void serialize_labels(const PseudoLabelMap& labels, std::size_t num_points, std::ostream& out) {
    if (labels.size() != num_points)
        throw Error("label map has " + std::to_string(labels.size()) + " entries, expected " +
                    std::to_string(num_points));
    out << "LABELS v1 " << num_points << '\n';
    for (const auto& l : labels) {
        if (l)
            out << static_cast<int>(l->class_id) << ' ' << format_double(l->confidence) << '\n';
        else
            out << static_cast<int>(kUnlabeled) << " 0\n";
    }
}

bool same_labels(const PseudoLabelMap& a, const PseudoLabelMap& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].has_value() != b[i].has_value()) return false;
        if (a[i] && (a[i]->class_id != b[i]->class_id || a[i]->confidence != b[i]->confidence)) return false;
    }
    return true;
}

Scene load_scene(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scene file " + path.string());
    try {
        return parse_scene(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    serialize_scene(scene, out);
}

PseudoLabelMap load_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open label file " + path.string());
    try {
        return parse_labels(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void save_labels(const PseudoLabelMap& labels, std::size_t num_points, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    serialize_labels(labels, num_points, out);
}

}  // namespace boxseg
