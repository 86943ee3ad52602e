#ifndef BOXSEG_METRICS_HPP
#define BOXSEG_METRICS_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "boxseg/partition.hpp"
#include "boxseg/scene.hpp"

namespace boxseg {

// Rows are ground truth, columns predictions. Unlabeled predictions are
// counted per ground-truth class in `unlabeled`.
class ConfusionMatrix {
  public:
    explicit ConfusionMatrix(int classes);

    int classes() const { return classes_; }
    void add(ClassId truth, std::optional<ClassId> predicted);
    std::uint64_t at(ClassId truth, ClassId predicted) const;
    std::uint64_t unlabeled(ClassId truth) const;
    std::uint64_t total() const { return total_; }

  private:
    int classes_;
    std::vector<std::uint64_t> counts_;
    std::vector<std::uint64_t> unlabeled_;
    std::uint64_t total_ = 0;
};

// Points whose ground truth is kUnlabeled are skipped; mask (when given)
// selects the evaluated points.
ConfusionMatrix confusion(const std::vector<ClassId>& truth, const PseudoLabelMap& predicted, int classes,
                          const std::vector<char>* mask = nullptr);

struct IouReport {
    std::vector<std::optional<double>> per_class;  // empty when the class is absent from the ground truth
    double miou = 0.0;
};

// IoU = TP / (TP + FP + FN); the mean runs over classes present in the
// ground truth. Throws on an empty matrix.
IouReport miou(const ConfusionMatrix& cm);

struct QualityStats {
    std::size_t total = 0;
    std::size_t labeled = 0;
    std::size_t correct = 0;

    double precision() const;  // correct / labeled
    double recall() const;     // correct / total
    double accuracy() const { return precision(); }
    double labeled_fraction() const;
};

struct LabelQuality {
    QualityStats overall;
    std::array<QualityStats, 3> by_category;  // indexed by Category
    QualityStats in_box;                      // PotentialForeground and Ambiguous together
    std::vector<QualityStats> by_class;       // grouped by ground-truth class
};

LabelQuality label_quality(const PseudoLabelMap& labels, const std::vector<ClassId>& truth,
                           const PartitionMap& partition, int classes);

enum class ReportFormat { Json, Csv };

// Fields: miou, per_class_iou (null for absent classes), confusion,
// unlabeled, labeled_fraction.
nlohmann::ordered_json eval_report(const ConfusionMatrix& cm, const IouReport& iou);
nlohmann::ordered_json quality_report(const LabelQuality& quality);

void write_eval_report(const ConfusionMatrix& cm, const IouReport& iou, std::ostream& out, ReportFormat format);

}  // namespace boxseg

#endif
