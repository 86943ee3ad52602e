#include "boxseg/ast.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace boxseg {

PseudoLabelMap box_prior_labels(const Scene& scene, const PartitionMap& partition) {
    if (partition.size() != scene.points.size()) throw Error("partition does not match the scene");
    PseudoLabelMap labels(scene.points.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (partition.category[i] != Category::PotentialForeground) continue;
        const auto& box = scene.boxes.at(partition.member_boxes[i].front());
        labels[i] = PseudoLabel{box.class_id, 1.0, Provenance::BoxPrior};
    }
    return labels;
}

double attention_loss(const Matrix& attention, const Matrix& probs, std::span<const std::uint32_t> rows,
                      std::span<const ClassId> box_class, Matrix* d_z, double scale, bool grad_through_s) {
    if (attention.rows() != probs.rows() || attention.cols() != probs.cols())
        throw Error("attention and probability maps differ in shape");
    if (rows.size() != box_class.size()) throw Error("attention rows and box classes differ in length");
    if (d_z != nullptr && (d_z->rows() != probs.rows() || d_z->cols() != probs.cols()))
        throw Error("attention gradient shape mismatch");
    if (rows.empty()) return 0.0;
    const std::size_t C = probs.cols();
    const double inv = 1.0 / static_cast<double>(rows.size());
    double loss = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t i = rows[r];
        const std::size_t b = box_class[r];
        if (i >= probs.rows() || b >= C) throw Error("attention row or class out of range");
        const double s = attention(i, b);
        const double y = probs(i, b);
        const bool clamped = y < kProbFloor;
        const double log_y = std::log(clamped ? kProbFloor : y);
        loss -= s * log_y;
        if (d_z == nullptr) continue;
        const double k = scale * inv;
        if (grad_through_s) (*d_z)(i, b) -= k * s * (1.0 - s) * log_y;
        if (!clamped) {
            for (std::size_t j = 0; j < C; ++j) (*d_z)(i, j) -= k * s * ((j == b ? 1.0 : 0.0) - probs(i, j));
        }
    }
    return loss * inv;
}

std::optional<PseudoLabel> pseudo_label_ambiguous(std::span<const double> probs, std::span<const ClassId> candidates,
                                                  double tau) {
    if (candidates.empty()) return std::nullopt;
    double total = 0.0;
    ClassId best = candidates[0];
    for (ClassId c : candidates) {
        if (c >= probs.size()) throw Error("candidate class out of range");
        total += probs[c];
        if (probs[c] > probs[best] || (probs[c] == probs[best] && c < best)) best = c;
    }
    const double conf = total > 0.0 ? probs[best] / total : 1.0 / static_cast<double>(candidates.size());
    if (conf < tau) return std::nullopt;
    return PseudoLabel{best, conf, Provenance::AstPseudo};
}

std::vector<ClassId> candidate_classes(const Scene& scene, const PartitionMap& partition, std::size_t i) {
    std::vector<ClassId> out;
    for (std::uint32_t b : partition.member_boxes.at(i)) out.push_back(scene.boxes.at(b).class_id);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

SegTrainResult train_segmentation(const Scene& scene, const PartitionMap& partition, const PseudoLabelMap& initial,
                                  const std::vector<Batch>& batches, const NetConfig& net_config,
                                  const TrainConfig& config, const SegTrainOptions& options) {
    config.validate();
    const std::size_t n = scene.points.size();
    if (initial.size() != n || partition.size() != n) throw Error("label map or partition does not match the scene");
    if (std::none_of(initial.begin(), initial.end(), [](const auto& l) { return l.has_value(); }))
        throw Error("segmentation training needs at least one labeled point");

    SegTrainResult result{PointNetLite(net_config, config.seed), initial, {}};
    ParameterUpdater updater(result.net, config.optimizer);
    std::mt19937_64 rng(config.seed ^ 0x2545f4914f6cdd1dULL);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::vector<std::size_t> order(batches.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<std::vector<ClassId>> candidates(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (partition.category[i] == Category::Ambiguous) candidates[i] = candidate_classes(scene, partition, i);
    }

    auto& labels = result.labels;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        const double lr = config.learning_rate_at(epoch);
        const bool refresh = options.pseudo_label && epoch % config.refresh_every == 0;
        double total = 0.0;
        std::size_t steps = 0;
        for (std::size_t b : order) {
            const Batch& batch = batches[b];
            std::vector<std::uint32_t> ce_rows, att_rows;
            std::vector<ClassId> ce_targets, att_class;
            for (std::size_t r = 0; r < batch.points.size(); ++r) {
                const std::uint32_t p = batch.points[r];
                if (labels[p]) {
                    ce_rows.push_back(static_cast<std::uint32_t>(r));
                    ce_targets.push_back(labels[p]->class_id);
                }
                if (options.attention && partition.category[p] == Category::PotentialForeground) {
                    att_rows.push_back(static_cast<std::uint32_t>(r));
                    att_class.push_back(scene.boxes[partition.member_boxes[p].front()].class_id);
                }
            }
            const bool has_ambiguous = refresh && std::any_of(batch.points.begin(), batch.points.end(), [&](std::uint32_t p) {
                return !candidates[p].empty() && !initial[p];
            });
            if (ce_rows.empty() && att_rows.empty() && !has_ambiguous) continue;

            auto fwd = config.rotate_augment
                           ? forward(result.net, rotate_about_z(batch.inputs, angle(rng)), &batch.neighbors)
                           : forward(result.net, batch.inputs, &batch.neighbors);
            if (!ce_rows.empty() || !att_rows.empty()) {
                Matrix d_z(fwd.size(), static_cast<std::size_t>(net_config.class_count));
                const double ce = cross_entropy_loss(fwd.probs, ce_rows, ce_targets, &d_z);
                const double la = options.attention ? attention_loss(fwd.attention, fwd.probs, att_rows, att_class, &d_z,
                                                                     config.alpha, config.attention_grad_through_s)
                                                    : 0.0;
                total += combined_loss(ce, la, config.alpha);
                ++steps;
                auto g = backward(result.net, fwd, {}, &d_z);
                updater.step(result.net, g, lr, config.weight_decay);
            }
            if (has_ambiguous) {
                for (std::size_t r = 0; r < batch.points.size(); ++r) {
                    const std::uint32_t p = batch.points[r];
                    if (candidates[p].empty() || initial[p]) continue;
                    labels[p] = pseudo_label_ambiguous(fwd.probs.row(r), candidates[p], config.tau);
                }
            }
        }
        result.loss_history.push_back(steps ? total / static_cast<double>(steps) : 0.0);
    }
    return result;
}

PseudoLabelMap predict_labels(const PointNetLite& net, const std::vector<Batch>& batches, std::size_t num_points) {
    PseudoLabelMap out(num_points);
    for (const Batch& batch : batches) {
        if (batch.points.empty()) continue;
        const auto fwd = forward(net, batch.inputs, &batch.neighbors);
        for (std::size_t r = 0; r < batch.points.size(); ++r) {
            const auto row = fwd.probs.row(r);
            const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
            out.at(batch.points[r]) = PseudoLabel{static_cast<ClassId>(best), row[best], Provenance::Predicted};
        }
    }
    return out;
}

}  // namespace boxseg
