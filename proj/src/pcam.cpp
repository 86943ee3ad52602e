#include "boxseg/pcam.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace boxseg {

PointNetLite train_classifier(const Scene& scene, const std::vector<Batch>& batches, const NetConfig& net_config,
                              const TrainConfig& config, std::vector<double>* loss_history) {
    config.validate();
    std::vector<std::size_t> tagged;
    for (std::size_t b = 0; b < batches.size(); ++b) {
        if (batches[b].subcloud < 0) continue;
        const auto& tag = scene.subclouds.at(static_cast<std::size_t>(batches[b].subcloud)).tag;
        if (tag.count() == 0) throw Error("classifier training needs non-empty subcloud tags");
        tagged.push_back(b);
    }
    if (tagged.empty()) throw Error("classifier training needs at least one subcloud");

    PointNetLite net(net_config, config.seed);
    ParameterUpdater updater(net, config.optimizer);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    if (loss_history) loss_history->clear();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(tagged.begin(), tagged.end(), rng);
        const double lr = config.learning_rate_at(epoch);
        double total = 0.0;
        for (std::size_t b : tagged) {
            const Batch& batch = batches[b];
            const auto& tag = scene.subclouds[static_cast<std::size_t>(batch.subcloud)].tag;
            auto fwd = config.rotate_augment
                           ? forward(net, rotate_about_z(batch.inputs, angle(rng)), &batch.neighbors)
                           : forward(net, batch.inputs, &batch.neighbors);
            std::vector<double> grad;
            total += sigmoid_ce_loss(fwd.class_logits, tag, &grad);
            auto g = backward(net, fwd, grad, nullptr);
            updater.step(net, g, lr, config.weight_decay);
        }
        if (loss_history) loss_history->push_back(total / static_cast<double>(tagged.size()));
    }
    return net;
}

std::vector<ClassId> pcam_candidates(const Scene& scene, const SubcloudTag& tag, bool restrict_to_background) {
    std::vector<ClassId> tagged, restricted;
    for (std::size_t c = 0; c < tag.bits.size(); ++c) {
        if (!tag.bits[c]) continue;
        tagged.push_back(static_cast<ClassId>(c));
        if (scene.is_background_class(static_cast<ClassId>(c))) restricted.push_back(static_cast<ClassId>(c));
    }
    if (restrict_to_background && !restricted.empty()) return restricted;
    return tagged;
}

ClassId pcam_argmax(std::span<const double> activation, std::span<const ClassId> candidates) {
    if (candidates.empty()) throw Error("empty candidate set");
    ClassId best = candidates[0];
    for (ClassId c : candidates) {
        if (activation[c] > activation[best] || (activation[c] == activation[best] && c < best)) best = c;
    }
    return best;
}

PcamCalibration parse_pcam_calibration(const std::string& s) {
    if (s == "none") return PcamCalibration::None;
    if (s == "absence") return PcamCalibration::Absence;
    throw Error("unknown PCAM calibration '" + s + "' (expected none or absence)");
}

const char* to_string(PcamCalibration c) { return c == PcamCalibration::Absence ? "absence" : "none"; }

namespace {

// Raw head response w_c . f + b_c for every class at the Background points of
// the given batches; rows are indexed by point.
void head_response(const PointNetLite& classifier, const PartitionMap& partition, const Batch& batch, Matrix& raw) {
    const auto fwd = forward(classifier, batch.inputs, &batch.neighbors);
    const Matrix& f = fwd.features();
    const auto& head = classifier.classifier();
    const std::size_t C = raw.cols();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(batch.points.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const std::uint32_t p = batch.points[i];
        if (partition.category[p] != Category::Background) continue;
        auto m = raw.row(p);
        for (std::size_t c = 0; c < C; ++c) {
            double v = head.bias[c];
            for (std::size_t d = 0; d < f.cols(); ++d) v += head.weight(d, c) * f(i, d);
            m[c] = v;
        }
    }
}

struct AbsenceLevel {
    bool referenced = false;
    double level = 0.0;
    double spread = 1.0;
};

double quantile(std::vector<double> v, double q) {
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

}  // namespace

PcamField compute_pcam(const PointNetLite& classifier, const Scene& scene, const PartitionMap& partition,
                       const std::vector<Batch>& batches, const std::vector<std::uint32_t>& points,
                       const PcamOptions& options) {
    if (partition.size() != scene.points.size()) throw Error("partition does not match the scene");
    const auto C = static_cast<std::size_t>(classifier.config().class_count);
    if (C != static_cast<std::size_t>(scene.class_count)) throw Error("classifier class count differs from the scene");
    if (!(options.absence_quantile >= 0.0 && options.absence_quantile <= 1.0))
        throw Error("absence quantile must be in [0,1]");
    const bool calibrate = options.calibration == PcamCalibration::Absence;

    std::vector<std::int64_t> row_of(scene.points.size(), -1);
    for (std::size_t r = 0; r < points.size(); ++r) {
        const std::uint32_t p = points[r];
        if (p >= scene.points.size()) throw Error("point index out of range");
        if (partition.category[p] != Category::Background)
            throw Error("PCAM requested for point " + std::to_string(p) + " which lies inside a box");
        row_of[p] = static_cast<std::int64_t>(r);
    }

    // Calibration looks at every subcloud, requested points or not.
    Matrix raw(scene.points.size(), C);
    std::vector<char> evaluated(batches.size(), 0);
    for (std::size_t b = 0; b < batches.size(); ++b) {
        const Batch& batch = batches[b];
        if (batch.subcloud < 0) continue;
        const bool needed =
            calibrate || std::any_of(batch.points.begin(), batch.points.end(), [&](std::uint32_t p) { return row_of[p] >= 0; });
        if (!needed) continue;
        head_response(classifier, partition, batch, raw);
        evaluated[b] = 1;
    }

    std::vector<AbsenceLevel> absence(C);
    if (calibrate) {
        for (std::size_t c = 0; c < C; ++c) {
            std::vector<double> values;
            for (const Batch& batch : batches) {
                if (batch.subcloud < 0) continue;
                if (scene.subclouds[static_cast<std::size_t>(batch.subcloud)].tag.bits[c]) continue;
                for (std::uint32_t p : batch.points) {
                    if (partition.category[p] == Category::Background) values.push_back(raw(p, c));
                }
            }
            if (values.size() < 2) continue;
            double mean = 0.0, var = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            for (double v : values) var += (v - mean) * (v - mean);
            const double sd = std::sqrt(var / static_cast<double>(values.size() - 1));
            absence[c] = {true, quantile(std::move(values), options.absence_quantile), sd > 0.0 ? sd : 1.0};
        }
    }

    PcamField field;
    field.points = points;
    field.activation = Matrix(points.size(), C);
    field.label.assign(points.size(), 0);
    field.confidence.assign(points.size(), 0.0);
    std::vector<char> done(points.size(), 0);

    for (std::size_t b = 0; b < batches.size(); ++b) {
        const Batch& batch = batches[b];
        if (!evaluated[b]) continue;
        const auto& tag = scene.subclouds[static_cast<std::size_t>(batch.subcloud)].tag;
        const auto candidates = pcam_candidates(scene, tag, options.restrict_to_background);
        if (candidates.empty()) throw Error("subcloud " + std::to_string(batch.subcloud) + " has an empty tag");
        for (std::uint32_t p : batch.points) {
            if (row_of[p] < 0) continue;
            const auto row = static_cast<std::size_t>(row_of[p]);
            auto m = field.activation.row(row);
            for (ClassId c : candidates) {
                if (!calibrate)
                    m[c] = raw(p, c);
                else if (absence[c].referenced)
                    m[c] = (raw(p, c) - absence[c].level) / absence[c].spread;
                else
                    m[c] = 0.0;
            }
            const ClassId best = pcam_argmax(m, candidates);
            double denom = 0.0;
            for (ClassId c : candidates) denom += std::exp(m[c] - m[best]);
            field.label[row] = best;
            field.confidence[row] = 1.0 / denom;
            done[row] = 1;
        }
    }
    for (std::size_t r = 0; r < points.size(); ++r) {
        if (!done[r]) throw Error("point " + std::to_string(points[r]) + " lies outside every subcloud");
    }
    return field;
}

PcamField compute_pcam(const PointNetLite& classifier, const Scene& scene, const PartitionMap& partition,
                       const std::vector<Batch>& batches, const PcamOptions& options) {
    std::vector<std::uint32_t> points;
    for (std::size_t i = 0; i < scene.points.size(); ++i) {
        if (partition.category.at(i) == Category::Background && scene.subcloud_of(i) >= 0)
            points.push_back(static_cast<std::uint32_t>(i));
    }
    return compute_pcam(classifier, scene, partition, batches, points, options);
}

PseudoLabelMap background_pseudo_labels(const PcamField& field, std::size_t num_points) {
    PseudoLabelMap labels(num_points);
    for (std::size_t r = 0; r < field.points.size(); ++r) {
        labels.at(field.points[r]) = PseudoLabel{field.label[r], field.confidence[r], Provenance::Pcam};
    }
    return labels;
}

std::size_t refine_keep_count(std::size_t n, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("refine fraction must be in (0,1]");
    const double k = std::ceil(fraction * static_cast<double>(n) - 1e-9);
    return std::min(n, static_cast<std::size_t>(std::max(0.0, k)));
}

RefineScope parse_refine_scope(const std::string& s) {
    if (s == "global") return RefineScope::Global;
    if (s == "per_class") return RefineScope::PerClass;
    if (s == "local") return RefineScope::Local;
    throw Error("unknown refine scope '" + s + "' (expected global, per_class or local)");
}

const char* to_string(RefineScope s) {
    switch (s) {
        case RefineScope::PerClass: return "per_class";
        case RefineScope::Local: return "local";
        default: return "global";
    }
}

std::vector<std::size_t> refine_groups(const Scene& scene, const PseudoLabelMap& entries, RefineScope scope,
                                       double cell_size) {
    if (entries.size() != scene.points.size()) throw Error("label map does not match the scene");
    if (scope == RefineScope::Local && !(cell_size > 0.0)) throw Error("refine cell size must be positive");
    std::vector<std::size_t> groups(entries.size(), 0);
    if (scope == RefineScope::Global || entries.empty()) return groups;
    Vec3 lo = scene.points.front().pos;
    for (const auto& p : scene.points) {
        for (int a = 0; a < 3; ++a) lo[a] = std::min(lo[a], p.pos[a]);
    }
    std::map<std::array<std::int64_t, 4>, std::size_t> ids;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!entries[i]) continue;
        std::array<std::int64_t, 4> key{entries[i]->class_id, 0, 0, 0};
        if (scope == RefineScope::Local) {
            for (int a = 0; a < 3; ++a)
                key[a + 1] = static_cast<std::int64_t>(std::floor((scene.points[i].pos[a] - lo[a]) / cell_size));
        }
        groups[i] = ids.try_emplace(key, ids.size()).first->second;
    }
    return groups;
}

PseudoLabelMap refine_top_fraction(const PseudoLabelMap& entries, double fraction) {
    return refine_top_fraction(entries, fraction, std::vector<std::size_t>(entries.size(), 0));
}

PseudoLabelMap refine_top_fraction(const PseudoLabelMap& entries, double fraction, std::span<const std::size_t> groups) {
    if (groups.size() != entries.size()) throw Error("refine groups do not match the label map");
    std::vector<std::vector<std::uint32_t>> members;
    std::size_t labeled = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!entries[i]) continue;
        if (groups[i] >= members.size()) members.resize(groups[i] + 1);
        members[groups[i]].push_back(static_cast<std::uint32_t>(i));
        ++labeled;
    }

    // Split the overall count across groups by largest remainder so the total
    // stays ceil(fraction * labeled).
    const std::size_t total = refine_keep_count(labeled, fraction);
    std::vector<std::size_t> quota(members.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainder;
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < members.size(); ++g) {
        const double exact = fraction * static_cast<double>(members[g].size());
        quota[g] = std::min(members[g].size(), static_cast<std::size_t>(std::floor(exact)));
        assigned += quota[g];
        if (quota[g] < members[g].size()) remainder.emplace_back(exact - static_cast<double>(quota[g]), g);
    }
    std::stable_sort(remainder.begin(), remainder.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < total && k < remainder.size(); ++k, ++assigned) ++quota[remainder[k].second];

    PseudoLabelMap out(entries.size());
    for (std::size_t g = 0; g < members.size(); ++g) {
        auto& group = members[g];
        std::stable_sort(group.begin(), group.end(), [&](std::uint32_t a, std::uint32_t b) {
            return entries[a]->confidence > entries[b]->confidence;
        });
        for (std::size_t k = 0; k < quota[g]; ++k) {
            auto e = *entries[group[k]];
            e.provenance = Provenance::RefinedPcam;
            out[group[k]] = e;
        }
    }
    return out;
}

}  // namespace boxseg
