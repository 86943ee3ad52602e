#ifndef BOXSEG_AST_HPP
#define BOXSEG_AST_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "boxseg/batches.hpp"
#include "boxseg/net.hpp"
#include "boxseg/partition.hpp"
#include "boxseg/scene.hpp"

namespace boxseg {

// Every PotentialForeground point labeled with its box class.
PseudoLabelMap box_prior_labels(const Scene& scene, const PartitionMap& partition);

// Attention-modulated cross entropy over `rows` (points in exactly one box),
// box_class[r] being the class of the box holding rows[r]:
//   L = -(1/N) sum_r S[row, b] log Y[row, b]
// Adds scale * dL/dZ into d_z when non-null. With grad_through_s false, S is
// treated as a constant.
double attention_loss(const Matrix& attention, const Matrix& probs, std::span<const std::uint32_t> rows,
                      std::span<const ClassId> box_class, Matrix* d_z = nullptr, double scale = 1.0,
                      bool grad_through_s = true);

inline double combined_loss(double ce, double attention, double alpha) { return ce + alpha * attention; }

// Argmax of probs over the candidate classes, renormalized over them; a
// label is produced only when that renormalized maximum reaches tau. Ties go
// to the lower class index.
std::optional<PseudoLabel> pseudo_label_ambiguous(std::span<const double> probs, std::span<const ClassId> candidates,
                                                  double tau);

// Union of the classes of the boxes holding point i, ascending.
std::vector<ClassId> candidate_classes(const Scene& scene, const PartitionMap& partition, std::size_t i);

struct SegTrainOptions {
    bool attention = true;       // include the attention term
    bool pseudo_label = true;    // relabel ambiguous points from predictions
};

struct SegTrainResult {
    PointNetLite net;
    PseudoLabelMap labels;             // initial labels merged with the final AST-PL entries
    std::vector<double> loss_history;  // mean combined loss per epoch
};

// Retrains a segmentation net on the pseudo labels. Each batch step uses
// cross entropy over currently labeled points plus alpha times the attention
// loss over unique-box points. Ambiguous points are relabeled from the
// prediction of that same forward pass every refresh_every epochs; earlier
// AST-PL entries are replaced, initial entries are never touched.
SegTrainResult train_segmentation(const Scene& scene, const PartitionMap& partition, const PseudoLabelMap& initial,
                                  const std::vector<Batch>& batches, const NetConfig& net_config,
                                  const TrainConfig& config, const SegTrainOptions& options = {});

// Argmax of Y per point (inputs built from `batches`); points outside every
// batch stay unlabeled.
PseudoLabelMap predict_labels(const PointNetLite& net, const std::vector<Batch>& batches, std::size_t num_points);

}  // namespace boxseg

#endif
