#include "boxseg/metrics.hpp"

#include <json.hpp>
#include <ostream>

namespace boxseg {

ConfusionMatrix::ConfusionMatrix(int classes) : classes_(classes) {
    if (classes < 1 || classes > kMaxClasses) throw Error("confusion matrix class count out of range");
    counts_.assign(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes), 0);
    unlabeled_.assign(static_cast<std::size_t>(classes), 0);
}

void ConfusionMatrix::add(ClassId truth, std::optional<ClassId> predicted) {
    if (truth >= classes_) throw Error("ground-truth class out of range");
    if (predicted && *predicted >= classes_) throw Error("predicted class out of range");
    if (predicted)
        ++counts_[static_cast<std::size_t>(truth) * static_cast<std::size_t>(classes_) + *predicted];
    else
        ++unlabeled_[truth];
    ++total_;
}

std::uint64_t ConfusionMatrix::at(ClassId truth, ClassId predicted) const {
    return counts_.at(static_cast<std::size_t>(truth) * static_cast<std::size_t>(classes_) + predicted);
}

std::uint64_t ConfusionMatrix::unlabeled(ClassId truth) const { return unlabeled_.at(truth); }

ConfusionMatrix confusion(const std::vector<ClassId>& truth, const PseudoLabelMap& predicted, int classes,
                          const std::vector<char>* mask) {
    if (truth.size() != predicted.size()) throw Error("ground truth and predictions differ in length");
    if (mask && mask->size() != truth.size()) throw Error("evaluation mask differs in length");
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == kUnlabeled || (mask && !(*mask)[i])) continue;
        cm.add(truth[i], predicted[i] ? std::optional<ClassId>(predicted[i]->class_id) : std::nullopt);
    }
    return cm;
}

IouReport miou(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw Error("cannot compute mIoU of an empty confusion matrix");
    const int C = cm.classes();
    IouReport report;
    report.per_class.resize(static_cast<std::size_t>(C));
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < C; ++c) {
        const auto cc = static_cast<ClassId>(c);
        std::uint64_t gt = cm.unlabeled(cc), pred = 0;
        for (int k = 0; k < C; ++k) {
            gt += cm.at(cc, static_cast<ClassId>(k));
            pred += cm.at(static_cast<ClassId>(k), cc);
        }
        if (gt == 0) continue;
        const std::uint64_t tp = cm.at(cc, cc);
        const double iou = static_cast<double>(tp) / static_cast<double>(gt + pred - tp);
        report.per_class[static_cast<std::size_t>(c)] = iou;
        sum += iou;
        ++present;
    }
    report.miou = sum / present;
    return report;
}

double QualityStats::precision() const {
    return labeled ? static_cast<double>(correct) / static_cast<double>(labeled) : 0.0;
}

double QualityStats::recall() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }

double QualityStats::labeled_fraction() const {
    return total ? static_cast<double>(labeled) / static_cast<double>(total) : 0.0;
}

LabelQuality label_quality(const PseudoLabelMap& labels, const std::vector<ClassId>& truth,
                           const PartitionMap& partition, int classes) {
    if (labels.size() != truth.size() || partition.size() != truth.size())
        throw Error("labels, ground truth and partition differ in length");
    LabelQuality q;
    q.by_class.resize(static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == kUnlabeled) continue;
        if (truth[i] >= classes) throw Error("ground-truth class out of range");
        const bool labeled = labels[i].has_value();
        const bool correct = labeled && labels[i]->class_id == truth[i];
        for (QualityStats* s : {&q.overall, &q.by_category[static_cast<std::size_t>(partition.category[i])],
                                &q.by_class[truth[i]]}) {
            ++s->total;
            s->labeled += labeled;
            s->correct += correct;
        }
        if (partition.category[i] != Category::Background) {
            ++q.in_box.total;
            q.in_box.labeled += labeled;
            q.in_box.correct += correct;
        }
    }
    return q;
}

namespace {

double labeled_fraction(const ConfusionMatrix& cm) {
    std::uint64_t unlabeled = 0;
    for (int c = 0; c < cm.classes(); ++c) unlabeled += cm.unlabeled(static_cast<ClassId>(c));
    return cm.total() ? 1.0 - static_cast<double>(unlabeled) / static_cast<double>(cm.total()) : 0.0;
}

nlohmann::ordered_json stats_json(const QualityStats& s) {
    return {{"points", s.total},
            {"labeled", s.labeled},
            {"correct", s.correct},
            {"precision", s.precision()},
            {"recall", s.recall()},
            {"labeled_fraction", s.labeled_fraction()}};
}

}  // namespace

nlohmann::ordered_json eval_report(const ConfusionMatrix& cm, const IouReport& iou) {
    const int C = cm.classes();
    nlohmann::ordered_json j;
    j["miou"] = iou.miou;
    auto per_class = nlohmann::ordered_json::array();
    for (const auto& v : iou.per_class) per_class.push_back(v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json());
    j["per_class_iou"] = per_class;
    auto conf = nlohmann::ordered_json::array();
    for (int g = 0; g < C; ++g) {
        auto row = nlohmann::ordered_json::array();
        for (int p = 0; p < C; ++p) row.push_back(cm.at(static_cast<ClassId>(g), static_cast<ClassId>(p)));
        conf.push_back(row);
    }
    j["confusion"] = conf;
    auto un = nlohmann::ordered_json::array();
    for (int c = 0; c < C; ++c) un.push_back(cm.unlabeled(static_cast<ClassId>(c)));
    j["unlabeled"] = un;
    j["labeled_fraction"] = labeled_fraction(cm);
    return j;
}

nlohmann::ordered_json quality_report(const LabelQuality& quality) {
    nlohmann::ordered_json j;
    j["overall"] = stats_json(quality.overall);
    for (std::size_t k = 0; k < quality.by_category.size(); ++k)
        j[to_string(static_cast<Category>(k))] = stats_json(quality.by_category[k]);
    j["in_box"] = stats_json(quality.in_box);
    auto classes = nlohmann::ordered_json::array();
    for (const auto& s : quality.by_class) classes.push_back(stats_json(s));
    j["per_class"] = classes;
    return j;
}

void write_eval_report(const ConfusionMatrix& cm, const IouReport& iou, std::ostream& out, ReportFormat format) {
    const int C = cm.classes();

    if (format == ReportFormat::Csv) {
        out << "class,iou,ground_truth,predicted,unlabeled\n";
        for (int c = 0; c < C; ++c) {
            const auto cc = static_cast<ClassId>(c);
            std::uint64_t gt = cm.unlabeled(cc), pred = 0;
            for (int k = 0; k < C; ++k) {
                gt += cm.at(cc, static_cast<ClassId>(k));
                pred += cm.at(static_cast<ClassId>(k), cc);
            }
            const auto& v = iou.per_class[static_cast<std::size_t>(c)];
            out << c << ',' << (v ? format_double(*v) : "") << ',' << gt << ',' << pred << ',' << cm.unlabeled(cc)
                << '\n';
        }
        out << "mean," << format_double(iou.miou) << ",,,\n";
        out << "labeled_fraction," << format_double(labeled_fraction(cm)) << ",,,\n";
        return;
    }

    out << eval_report(cm, iou).dump(2) << '\n';
}

}  // namespace boxseg
