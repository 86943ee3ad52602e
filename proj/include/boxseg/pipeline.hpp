#ifndef BOXSEG_PIPELINE_HPP
#define BOXSEG_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "boxseg/ast.hpp"
#include "boxseg/config.hpp"
#include "boxseg/grabcut.hpp"
#include "boxseg/metrics.hpp"
#include "boxseg/net.hpp"
#include "boxseg/pcam.hpp"
#include "boxseg/perturb.hpp"
#include "boxseg/synth.hpp"

namespace boxseg {

enum class ForegroundMode { GrabCut, Ast };

struct PipelineConfig {
    ForegroundMode mode = ForegroundMode::Ast;
    std::uint64_t seed = 0;

    GrabCutParams grabcut;
    NetConfig net;          // class_count is taken from the scene
    std::size_t batch_points = 0;
    TrainConfig classifier;  // tag classifier used for PCAM
    TrainConfig segmentation;
    PcamOptions pcam;
    bool classifier_background_only = false;  // classifier sees only points outside boxes
    PerturbSpec perturb;

    // ablation switches
    bool refine = true;
    RefineScope refine_scope = RefineScope::Global;
    double refine_cell = 1.0;  // metres, for RefineScope::Local
    bool attention = true;
    bool pseudo_label = true;

    // optional pre-trained tag classifier; skips classifier training
    std::optional<std::filesystem::path> classifier_checkpoint;

    void validate() const;
    // One `section.key = value` line per setting, in a fixed order.
    std::string canonical() const;
};

// AST foreground, tau 0.8, alpha 0.001, top 20% refinement, Adam at 0.01
// decayed by 5% per epoch, plus the calibrated PCAM and local refinement.
PipelineConfig paper_preset();
PipelineConfig preset(const std::string& name);

// Overwrites the fields named in `file`; unknown keys are an error.
void apply_config(PipelineConfig& cfg, const ConfigFile& file);

// Per-stage seeds derived from the global seed.
TrainConfig classifier_train_config(const PipelineConfig& cfg);
TrainConfig segmentation_train_config(const PipelineConfig& cfg);
GrabCutParams grabcut_params(const PipelineConfig& cfg);
PerturbSpec perturb_spec(const PipelineConfig& cfg);
NetConfig net_config(const PipelineConfig& cfg, const Scene& scene);
BatchOptions batch_options(const PipelineConfig& cfg);

struct StageTime {
    std::string stage;
    double seconds = 0.0;
};

struct PipelineResult {
    PseudoLabelMap pseudo_labels;  // final merged training labels
    PseudoLabelMap predictions;
    std::optional<IouReport> iou;             // of the predictions, when ground truth exists
    std::optional<LabelQuality> pseudo_quality;  // of the final pseudo labels
    std::vector<StageTime> timings;
};

// Runs every stage and writes its artifacts into out_dir: scene.txt (boxes
// after perturbation), partition.csv, foreground.labels, classifier.net,
// pcam.labels, background.labels, initial.labels, pseudo.labels, model.net,
// predictions.labels, report.json (when ground truth exists) and
// manifest.json. Stage failures are rethrown with the stage name.
PipelineResult run_pipeline(const Scene& input, const PipelineConfig& cfg, const std::filesystem::path& out_dir);

// FNV-1a over the canonical config text.
std::string config_hash(const PipelineConfig& cfg);

}  // namespace boxseg

#endif
