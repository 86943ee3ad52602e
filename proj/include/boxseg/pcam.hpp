#ifndef BOXSEG_PCAM_HPP
#define BOXSEG_PCAM_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "boxseg/batches.hpp"
#include "boxseg/net.hpp"
#include "boxseg/partition.hpp"
#include "boxseg/scene.hpp"

namespace boxseg {

// Trains the subcloud-tag classifier: one SGD step per tagged batch, batch
// order shuffled each epoch. Batches outside every subcloud are skipped.
// loss_history receives the mean sigmoid cross-entropy of each epoch.
PointNetLite train_classifier(const Scene& scene, const std::vector<Batch>& batches, const NetConfig& net_config,
                              const TrainConfig& config, std::vector<double>* loss_history = nullptr);

enum class PcamCalibration {
    None,  // raw head response w_c . f + b_c
    // Measure each class map against its response in subclouds whose tag
    // lacks the class: (M_c - q_c) / sd_c with q_c a high quantile of those
    // responses. A class tagged in every subcloud has no such reference and
    // is scored 0, so it wins wherever no referenced class clears its
    // absence level.
    Absence,
};

struct PcamOptions {
    bool restrict_to_background = true;  // intersect candidates with the scene's background classes
    PcamCalibration calibration = PcamCalibration::None;
    double absence_quantile = 0.99;
};

PcamCalibration parse_pcam_calibration(const std::string& s);
const char* to_string(PcamCalibration c);

// Activation maps of background points. Row r of activation belongs to
// points[r]; entries of classes outside the candidate set are zero.
struct PcamField {
    std::vector<std::uint32_t> points;
    Matrix activation;
    std::vector<ClassId> label;
    std::vector<double> confidence;  // softmax over candidates, at the label
};

// Requires every point of `points` to be Background in the partition.
PcamField compute_pcam(const PointNetLite& classifier, const Scene& scene, const PartitionMap& partition,
                       const std::vector<Batch>& batches, const std::vector<std::uint32_t>& points,
                       const PcamOptions& options = {});

// compute_pcam over every Background point that lies in a subcloud.
PcamField compute_pcam(const PointNetLite& classifier, const Scene& scene, const PartitionMap& partition,
                       const std::vector<Batch>& batches, const PcamOptions& options = {});

// Candidate classes for a subcloud: tagged classes, optionally intersected
// with the background set (falls back to the tagged classes if empty).
std::vector<ClassId> pcam_candidates(const Scene& scene, const SubcloudTag& tag, bool restrict_to_background);

// Argmax over the candidate set; ties go to the lower class index.
ClassId pcam_argmax(std::span<const double> activation, std::span<const ClassId> candidates);

PseudoLabelMap background_pseudo_labels(const PcamField& field, std::size_t num_points);

enum class RefineScope {
    Global,    // one ranking over all entries
    PerClass,  // rank each label class separately
    Local,     // rank each (label class, grid cell) separately
};

RefineScope parse_refine_scope(const std::string& s);
const char* to_string(RefineScope s);

// Ranking group of every labeled entry (unlabeled entries get 0). Local
// groups use cubic cells of side cell_size anchored at the scene minimum.
std::vector<std::size_t> refine_groups(const Scene& scene, const PseudoLabelMap& entries, RefineScope scope,
                                       double cell_size = 1.0);

// Keeps ceil(fraction * labeled) entries with the highest confidence; ties at
// the cutoff go to the lower point index. Kept entries become Refined-PCAM.
// With groups, that total is split across groups by largest remainder
// (ties to the lower group) and each group keeps its own most confident
// entries. Subclouds with a single candidate class give confidence 1
// everywhere, so a global ranking can be filled by them alone, and a
// per-class ranking favors the parts of a class the classifier responds to
// most.
PseudoLabelMap refine_top_fraction(const PseudoLabelMap& entries, double fraction);
PseudoLabelMap refine_top_fraction(const PseudoLabelMap& entries, double fraction,
                                   std::span<const std::size_t> groups);

// Number of entries refine_top_fraction keeps out of n.
std::size_t refine_keep_count(std::size_t n, double fraction);

}  // namespace boxseg

#endif
