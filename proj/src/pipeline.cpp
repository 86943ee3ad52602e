#include "boxseg/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

namespace boxseg {

namespace {

struct Binding {
    const char* key;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

std::string optimizer_name(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

Optimizer parse_optimizer(const std::string& key, const std::string& v) {
    if (v == "sgd") return Optimizer::Sgd;
    if (v == "adam") return Optimizer::Adam;
    throw Error("config key " + key + ": unknown optimizer '" + v + "'");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

template <class T>
Binding number(const char* key, T& field) {
    return {key,
            [key, &field](const std::string& v) {
                if constexpr (std::is_floating_point_v<T>)
                    field = to_double(key, v);
                else {
                    const long long x = to_integer(key, v);
                    if constexpr (std::is_unsigned_v<T>) {
                        if (x < 0) throw Error(std::string("config key ") + key + " must be >= 0");
                    }
                    field = static_cast<T>(x);
                }
            },
            [&field] {
                if constexpr (std::is_floating_point_v<T>)
                    return format_double(field);
                else
                    return std::to_string(field);
            }};
}

Binding flag(const char* key, bool& field) {
    return {key, [key, &field](const std::string& v) { field = to_bool(key, v); }, [&field] { return bool_text(field); }};
}

Binding optimizer(const char* key, Optimizer& field) {
    return {key, [key, &field](const std::string& v) { field = parse_optimizer(key, v); },
            [&field] { return optimizer_name(field); }};
}

std::vector<Binding> bindings(PipelineConfig& c) {
    return {
        {"pipeline.mode",
         [&c](const std::string& v) {
             if (v == "ast")
                 c.mode = ForegroundMode::Ast;
             else if (v == "grabcut")
                 c.mode = ForegroundMode::GrabCut;
             else
                 throw Error("config key pipeline.mode: expected ast or grabcut, got '" + v + "'");
         },
         [&c] { return std::string(c.mode == ForegroundMode::Ast ? "ast" : "grabcut"); }},
        number("pipeline.seed", c.seed),
        number("pipeline.batch_points", c.batch_points),
        flag("pipeline.refine", c.refine),
        flag("pipeline.attention", c.attention),
        flag("pipeline.pseudo_label", c.pseudo_label),
        {"pipeline.classifier_checkpoint",
         [&c](const std::string& v) {
             if (v.empty())
                 c.classifier_checkpoint.reset();
             else
                 c.classifier_checkpoint = v;
         },
         [&c] { return c.classifier_checkpoint ? c.classifier_checkpoint->string() : std::string(); }},

        number("grabcut.voxel_size", c.grabcut.voxel_size),
        number("grabcut.k_sp", c.grabcut.k_sp),
        number("grabcut.compactness", c.grabcut.compactness),
        number("grabcut.slic_iters", c.grabcut.slic_iters),
        number("grabcut.k_gmm", c.grabcut.k_gmm),
        number("grabcut.gmm_iters", c.grabcut.gmm_iters),
        number("grabcut.lambda", c.grabcut.lambda_pair),
        number("grabcut.beta_scale", c.grabcut.beta_scale),
        number("grabcut.outer_iters", c.grabcut.outer_iters),
        number("grabcut.core_fraction", c.grabcut.core_fraction),
        flag("grabcut.use_color", c.grabcut.use_color),

        {"net.widths", [&c](const std::string& v) { c.net.widths = to_int_list("net.widths", v); },
         [&c] {
             std::string s = "[";
             for (std::size_t i = 0; i < c.net.widths.size(); ++i) s += (i ? ", " : "") + std::to_string(c.net.widths[i]);
             return s + "]";
         }},
        flag("net.knn_context", c.net.knn_context),
        number("net.context_after", c.net.context_after),
        number("net.knn_k", c.net.knn_k),

        number("classifier.epochs", c.classifier.epochs),
        number("classifier.learning_rate", c.classifier.learning_rate),
        number("classifier.decay", c.classifier.decay),
        optimizer("classifier.optimizer", c.classifier.optimizer),
        number("classifier.weight_decay", c.classifier.weight_decay),
        flag("classifier.rotate_augment", c.classifier.rotate_augment),
        flag("classifier.background_only", c.classifier_background_only),

        number("pcam.refine_fraction", c.classifier.refine_fraction),
        flag("pcam.restrict_bg_classes", c.pcam.restrict_to_background),
        {"pcam.calibration", [&c](const std::string& v) { c.pcam.calibration = parse_pcam_calibration(v); },
         [&c] { return std::string(to_string(c.pcam.calibration)); }},
        number("pcam.absence_quantile", c.pcam.absence_quantile),
        {"pcam.refine_scope", [&c](const std::string& v) { c.refine_scope = parse_refine_scope(v); },
         [&c] { return std::string(to_string(c.refine_scope)); }},
        number("pcam.refine_cell", c.refine_cell),

        number("segmentation.epochs", c.segmentation.epochs),
        number("segmentation.learning_rate", c.segmentation.learning_rate),
        number("segmentation.decay", c.segmentation.decay),
        number("segmentation.alpha", c.segmentation.alpha),
        number("segmentation.tau", c.segmentation.tau),
        number("segmentation.refresh_every", c.segmentation.refresh_every),
        flag("segmentation.attention_grad", c.segmentation.attention_grad_through_s),
        optimizer("segmentation.optimizer", c.segmentation.optimizer),
        number("segmentation.weight_decay", c.segmentation.weight_decay),
        flag("segmentation.rotate_augment", c.segmentation.rotate_augment),

        {"perturb.mode", [&c](const std::string& v) { c.perturb.mode = parse_perturb_mode(v); },
         [&c] { return std::string(to_string(c.perturb.mode)); }},
        number("perturb.fraction", c.perturb.fraction),
        number("perturb.scale_lo", c.perturb.scale_lo),
        number("perturb.scale_hi", c.perturb.scale_hi),
        number("perturb.drop", c.perturb.drop),
        number("perturb.seed", c.perturb.seed),
    };
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

PseudoLabelMap merge(const PseudoLabelMap& a, const PseudoLabelMap& b) {
    PseudoLabelMap out = a;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!b[i]) continue;
        if (out[i]) throw Error("foreground and background labels overlap at point " + std::to_string(i));
        out[i] = b[i];
    }
    return out;
}

}  // namespace

void PipelineConfig::validate() const {
    grabcut.validate();
    classifier.validate();
    segmentation.validate();
    perturb.validate();
    if (!(segmentation.tau >= 0.0)) throw Error("tau must be >= 0");
}

std::string PipelineConfig::canonical() const {
    auto copy = *this;
    std::string out;
    for (const auto& b : bindings(copy)) out += std::string(b.key) + " = " + b.get() + "\n";
    return out;
}

std::string config_hash(const PipelineConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(cfg.canonical())));
    return buf;
}

PipelineConfig paper_preset() {
    PipelineConfig c;
    c.mode = ForegroundMode::Ast;
    for (TrainConfig* t : {&c.classifier, &c.segmentation}) {
        t->learning_rate = 0.01;
        t->decay = 0.95;
        t->optimizer = Optimizer::Adam;
        t->epochs = 60;
    }
    c.segmentation.alpha = 0.001;
    c.segmentation.tau = 0.8;
    c.classifier.refine_fraction = 0.2;
    c.refine = c.attention = c.pseudo_label = true;

    // Choices the method leaves open, fixed on calibration seeds.
    c.batch_points = 512;
    c.classifier_background_only = true;
    c.pcam.calibration = PcamCalibration::Absence;
    c.refine_scope = RefineScope::Local;
    c.refine_cell = 0.5;
    return c;
}

PipelineConfig preset(const std::string& name) {
    if (name == "paper") return paper_preset();
    if (name == "grabcut") {
        auto c = paper_preset();
        c.mode = ForegroundMode::GrabCut;
        return c;
    }
    if (name == "default") return PipelineConfig{};
    throw Error("unknown preset '" + name + "'");
}

void apply_config(PipelineConfig& cfg, const ConfigFile& file) {
    auto table = bindings(cfg);
    for (const auto& [key, value] : file.values()) {
        auto it = std::find_if(table.begin(), table.end(), [&](const Binding& b) { return key == b.key; });
        if (it == table.end()) throw Error("unknown config key '" + key + "'");
        it->set(value);
    }
}

TrainConfig classifier_train_config(const PipelineConfig& cfg) {
    TrainConfig t = cfg.classifier;
    t.seed = cfg.seed * 4 + 1;
    t.batch_points = cfg.batch_points;
    return t;
}

TrainConfig segmentation_train_config(const PipelineConfig& cfg) {
    TrainConfig t = cfg.segmentation;
    t.seed = cfg.seed * 4 + 2;
    t.batch_points = cfg.batch_points;
    return t;
}

GrabCutParams grabcut_params(const PipelineConfig& cfg) {
    GrabCutParams g = cfg.grabcut;
    g.seed = cfg.seed * 4 + 3;
    return g;
}

PerturbSpec perturb_spec(const PipelineConfig& cfg) { return cfg.perturb; }

NetConfig net_config(const PipelineConfig& cfg, const Scene& scene) {
    NetConfig n = cfg.net;
    n.class_count = scene.class_count;
    return n;
}

BatchOptions batch_options(const PipelineConfig& cfg) {
    BatchOptions b;
    b.max_points = cfg.batch_points;
    b.knn_k = cfg.net.knn_context ? static_cast<std::size_t>(cfg.net.knn_k) : 0;
    b.seed = cfg.seed * 4;
    return b;
}

PipelineResult run_pipeline(const Scene& input, const PipelineConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    input.validate();
    std::filesystem::create_directories(out_dir);
    PipelineResult result;
    nlohmann::ordered_json stages = nlohmann::ordered_json::array();

    auto stage = [&](const std::string& name, const std::string& artifact, auto&& body) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            body(out_dir / artifact);
        } catch (const std::exception& e) {
            throw Error("stage " + name + " (" + (out_dir / artifact).string() + "): " + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.timings.push_back({name, secs});
        stages.push_back({{"stage", name}, {"artifact", artifact}, {"wall_seconds", secs}});
    };

    Scene scene = input;
    const std::size_t n = scene.points.size();
    stage("perturb", "scene.txt", [&](const auto& path) {
        scene.boxes = perturb_boxes(input.boxes, perturb_spec(cfg));
        save_scene(scene, path);
    });

    PartitionMap partition;
    stage("partition", "partition.csv", [&](const auto& path) {
        partition = partition_points(scene);
        std::ofstream out(path);
        if (!out) throw Error("cannot write file");
        write_partition_csv(partition, out);
    });

    PseudoLabelMap foreground;
    stage("foreground", "foreground.labels", [&](const auto& path) {
        foreground = cfg.mode == ForegroundMode::Ast ? box_prior_labels(scene, partition)
                                                     : grabcut_foreground_labels(scene, partition, grabcut_params(cfg));
        save_labels(foreground, n, path);
    });

    const auto batches = make_batches(scene, batch_options(cfg));
    const NetConfig net_cfg = net_config(cfg, scene);
    std::vector<Batch> background_batches;
    if (cfg.classifier_background_only) {
        auto opts = batch_options(cfg);
        opts.include.resize(n);
        for (std::size_t i = 0; i < n; ++i) opts.include[i] = partition.category[i] == Category::Background;
        background_batches = make_batches(scene, opts);
    }
    const auto& classifier_batches = cfg.classifier_background_only ? background_batches : batches;

    PointNetLite classifier;
    stage("classifier", "classifier.net", [&](const auto& path) {
        if (cfg.classifier_checkpoint) {
            classifier = load_checkpoint(*cfg.classifier_checkpoint);
            if (classifier.config().class_count != scene.class_count)
                throw Error("checkpoint class count differs from the scene");
        } else {
            classifier = train_classifier(scene, classifier_batches, net_cfg, classifier_train_config(cfg));
        }
        save_checkpoint(classifier, path);
    });

    PseudoLabelMap pcam_labels;
    stage("pcam", "pcam.labels", [&](const auto& path) {
        const auto field = compute_pcam(classifier, scene, partition, classifier_batches, cfg.pcam);
        pcam_labels = background_pseudo_labels(field, n);
        save_labels(pcam_labels, n, path);
    });

    PseudoLabelMap background;
    stage("refine", "background.labels", [&](const auto& path) {
        background = cfg.refine ? refine_top_fraction(pcam_labels, cfg.classifier.refine_fraction,
                                                      refine_groups(scene, pcam_labels, cfg.refine_scope, cfg.refine_cell)) : pcam_labels;
        save_labels(background, n, path);
    });

    PseudoLabelMap initial;
    stage("merge", "initial.labels", [&](const auto& path) {
        initial = merge(foreground, background);
        save_labels(initial, n, path);
    });

    SegTrainResult trained;
    stage("segmentation", "model.net", [&](const auto& path) {
        SegTrainOptions opts;
        opts.attention = cfg.mode == ForegroundMode::Ast && cfg.attention;
        opts.pseudo_label = cfg.mode == ForegroundMode::Ast && cfg.pseudo_label;
        trained = train_segmentation(scene, partition, initial, batches, net_cfg, segmentation_train_config(cfg), opts);
        save_checkpoint(trained.net, path);
        save_labels(trained.labels, n, out_dir / "pseudo.labels");
    });
    result.pseudo_labels = trained.labels;

    stage("predict", "predictions.labels", [&](const auto& path) {
        result.predictions = predict_labels(trained.net, batches, n);
        save_labels(result.predictions, n, path);
    });

    if (scene.ground_truth) {
        stage("eval", "report.json", [&](const auto& path) {
            const auto& gt = *scene.ground_truth;
            const auto cm = confusion(gt, result.predictions, scene.class_count);
            result.iou = miou(cm);
            result.pseudo_quality = label_quality(result.pseudo_labels, gt, partition, scene.class_count);
            auto report = eval_report(cm, *result.iou);
            report["pseudo_labels"] = quality_report(*result.pseudo_quality);
            report["predictions"] = quality_report(label_quality(result.predictions, gt, partition, scene.class_count));
            std::ofstream out(path);
            if (!out) throw Error("cannot write file");
            out << report.dump(2) << '\n';
        });
    }

    nlohmann::ordered_json manifest;
    manifest["config_hash"] = config_hash(cfg);
    manifest["seed"] = cfg.seed;
    manifest["mode"] = cfg.mode == ForegroundMode::Ast ? "ast" : "grabcut";
    manifest["points"] = n;
    manifest["boxes"] = scene.boxes.size();
    manifest["stages"] = stages;
    std::ofstream out(out_dir / "manifest.json");
    if (!out) throw Error("cannot write " + (out_dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
    {
        std::ofstream cfg_out(out_dir / "config.txt");
        cfg_out << cfg.canonical();
    }
    return result;
}

}  // namespace boxseg
