// Command-line front end for the pseudo-label pipeline and its stages.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "boxseg/parallel.hpp"
#include "boxseg/pipeline.hpp"

using namespace boxseg;

namespace {

SynthSpec synth_spec(const ConfigFile& file) {
    SynthSpec s;
    for (const auto& [key, v] : file.values()) {
        if (key == "synth.rooms") s.rooms = static_cast<int>(to_integer(key, v));
        else if (key == "synth.objects_per_room") s.objects_per_room = static_cast<int>(to_integer(key, v));
        else if (key == "synth.classes") s.classes = static_cast<int>(to_integer(key, v));
        else if (key == "synth.noise_sigma") s.noise_sigma = to_double(key, v);
        else if (key == "synth.seed") s.seed = static_cast<std::uint64_t>(to_integer(key, v));
        else if (key == "synth.background_spacing") s.background_spacing = to_double(key, v);
        else if (key == "synth.object_spacing") s.object_spacing = to_double(key, v);
        else if (key == "synth.walled_fraction") s.walled_fraction = to_double(key, v);
        else if (key == "synth.box_dilation") s.box_dilation = to_double(key, v);
        else throw Error("unknown synth key '" + key + "'");
    }
    return s;
}

// Preset, then config file, then --set overrides, then --seed.
struct ConfigOptions {
    std::string preset = "paper";
    std::string file;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* app) {
        app->add_option("--preset", preset, "Starting preset (paper, grabcut, default)");
        app->add_option("--cfg", file, "Config file with [section] key = value entries")->check(CLI::ExistingFile);
        app->add_option("--set", overrides, "Override one entry, section.key=value");
        app->add_option("--seed", seed, "Global seed");
    }

    PipelineConfig build() const {
        PipelineConfig cfg = boxseg::preset(preset);
        ConfigFile f;
        if (!file.empty()) f = ConfigFile::load(file);
        for (const auto& o : overrides) f.set(o);
        apply_config(cfg, f);
        if (seed) cfg.seed = *seed;
        cfg.validate();
        return cfg;
    }
};

void write_text(const std::string& path, const auto& writer) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    writer(out);
}

}  // namespace

int main(int argc, char** argv) {
    configure_threads_from_env();
    CLI::App app{"Point-cloud pseudo labels from boxes and subcloud tags"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic scene with ground truth");
    std::string synth_cfg, synth_out;
    std::optional<std::uint64_t> synth_seed;
    synth->add_option("--spec", synth_cfg, "Generator config ([synth] section)")->check(CLI::ExistingFile);
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--out", synth_out, "Output scene")->required();
    synth->callback([&] {
        ConfigFile f;
        if (!synth_cfg.empty()) f = ConfigFile::load(synth_cfg);
        SynthSpec spec = synth_spec(f);
        if (synth_seed) spec.seed = *synth_seed;
        save_scene(generate_synthetic_scene(spec), synth_out);
    });

    // partition
    auto* part = app.add_subcommand("partition", "Tri-partition points by box membership");
    std::string part_scene, part_out;
    part->add_option("scene", part_scene)->required()->check(CLI::ExistingFile);
    part->add_option("--out", part_out, "CSV output")->required();
    part->callback([&] {
        const auto map = partition_points(load_scene(part_scene));
        write_text(part_out, [&](std::ostream& o) { write_partition_csv(map, o); });
    });

    // grabcut
    auto* gc = app.add_subcommand("grabcut", "Foreground labels from per-box 3D GrabCut");
    std::string gc_scene, gc_out;
    GrabCutParams gp;
    gc->add_option("scene", gc_scene)->required()->check(CLI::ExistingFile);
    gc->add_option("--voxel-size", gp.voxel_size);
    gc->add_option("--k-sp", gp.k_sp, "Superpoints per box (0 = automatic)");
    gc->add_option("--k-gmm", gp.k_gmm);
    gc->add_option("--lambda", gp.lambda_pair);
    gc->add_option("--beta-scale", gp.beta_scale);
    gc->add_option("--outer", gp.outer_iters);
    gc->add_option("--seed", gp.seed);
    gc->add_option("--out", gc_out, "Label output")->required();
    gc->callback([&] {
        const Scene scene = load_scene(gc_scene);
        const auto labels = grabcut_foreground_labels(scene, partition_points(scene), gp);
        save_labels(labels, scene.points.size(), gc_out);
    });

    // pcam-train
    auto* pt = app.add_subcommand("pcam-train", "Train the subcloud-tag classifier");
    std::string pt_scene, pt_out;
    ConfigOptions pt_cfg;
    pt->add_option("scene", pt_scene)->required()->check(CLI::ExistingFile);
    pt_cfg.attach(pt);
    pt->add_option("--out", pt_out, "Checkpoint output")->required();
    pt->callback([&] {
        const auto cfg = pt_cfg.build();
        const Scene scene = load_scene(pt_scene);
        const auto batches = make_batches(scene, batch_options(cfg));
        std::vector<double> losses;
        const auto net = train_classifier(scene, batches, net_config(cfg, scene), classifier_train_config(cfg), &losses);
        save_checkpoint(net, pt_out);
        if (!losses.empty()) std::cout << "final loss " << format_double(losses.back()) << '\n';
    });

    // pcam-label
    auto* pl = app.add_subcommand("pcam-label", "Background labels from class activation maps");
    std::string pl_scene, pl_ckpt, pl_out;
    double pl_fraction = 0.2;
    bool pl_all_classes = false;
    pl->add_option("scene", pl_scene)->required()->check(CLI::ExistingFile);
    pl->add_option("checkpoint", pl_ckpt)->required()->check(CLI::ExistingFile);
    pl->add_option("--fraction", pl_fraction, "Fraction of most confident labels kept (1 keeps all)");
    pl->add_flag("--all-classes", pl_all_classes, "Do not restrict candidates to background classes");
    pl->add_option("--out", pl_out, "Label output")->required();
    pl->callback([&] {
        const Scene scene = load_scene(pl_scene);
        const auto net = load_checkpoint(std::filesystem::path(pl_ckpt));
        BatchOptions bo;
        bo.knn_k = net.config().knn_context ? static_cast<std::size_t>(net.config().knn_k) : 0;
        const auto batches = make_batches(scene, bo);
        const auto field = compute_pcam(net, scene, partition_points(scene), batches, PcamOptions{!pl_all_classes});
        const auto labels = refine_top_fraction(background_pseudo_labels(field, scene.points.size()), pl_fraction);
        save_labels(labels, scene.points.size(), pl_out);
    });

    // ast-train
    auto* at = app.add_subcommand("ast-train", "Train the segmentation net on pseudo labels");
    std::string at_scene, at_init = "box", at_bg, at_model, at_labels;
    ConfigOptions at_cfg;
    at->add_option("scene", at_scene)->required()->check(CLI::ExistingFile);
    at->add_option("--fg-init", at_init, "Foreground labels: box priors or grabcut")
        ->check(CLI::IsMember({"box", "grabcut"}));
    at->add_option("--bg-labels", at_bg, "Background labels (from pcam-label)")->check(CLI::ExistingFile);
    at_cfg.attach(at);
    at->add_option("--out-model", at_model)->required();
    at->add_option("--out-labels", at_labels)->required();
    at->callback([&] {
        auto cfg = at_cfg.build();
        const Scene scene = load_scene(at_scene);
        const auto partition = partition_points(scene);
        const bool box = at_init == "box";
        auto labels = box ? box_prior_labels(scene, partition) : grabcut_foreground_labels(scene, partition, grabcut_params(cfg));
        if (!at_bg.empty()) {
            const auto bg = load_labels(at_bg);
            if (bg.size() != labels.size()) throw Error("background labels do not match the scene");
            for (std::size_t i = 0; i < bg.size(); ++i) {
                if (bg[i] && partition.category[i] == Category::Background) labels[i] = bg[i];
            }
        }
        SegTrainOptions opts{box && cfg.attention, box && cfg.pseudo_label};
        const auto batches = make_batches(scene, batch_options(cfg));
        const auto result = train_segmentation(scene, partition, labels, batches, net_config(cfg, scene),
                                               segmentation_train_config(cfg), opts);
        save_checkpoint(result.net, at_model);
        save_labels(result.labels, scene.points.size(), at_labels);
    });

    // predict
    auto* pr = app.add_subcommand("predict", "Label every point with a trained segmentation model");
    std::string pr_scene, pr_model, pr_out;
    pr->add_option("scene", pr_scene)->required()->check(CLI::ExistingFile);
    pr->add_option("model", pr_model)->required()->check(CLI::ExistingFile);
    pr->add_option("--out", pr_out, "Label output")->required();
    pr->callback([&] {
        const Scene scene = load_scene(pr_scene);
        const auto net = load_checkpoint(std::filesystem::path(pr_model));
        BatchOptions bo;
        bo.knn_k = net.config().knn_context ? static_cast<std::size_t>(net.config().knn_k) : 0;
        save_labels(predict_labels(net, make_batches(scene, bo), scene.points.size()), scene.points.size(), pr_out);
    });

    // eval
    auto* ev = app.add_subcommand("eval", "Score labels against the scene's ground truth");
    std::string ev_scene, ev_labels, ev_format = "json", ev_out;
    ev->add_option("scene", ev_scene)->required()->check(CLI::ExistingFile);
    ev->add_option("labels", ev_labels)->required()->check(CLI::ExistingFile);
    ev->add_option("--report", ev_format)->check(CLI::IsMember({"json", "csv"}));
    ev->add_option("--out", ev_out, "Write the report here instead of stdout");
    ev->callback([&] {
        const Scene scene = load_scene(ev_scene);
        if (!scene.ground_truth) throw Error("scene has no ground truth");
        const auto cm = confusion(*scene.ground_truth, load_labels(ev_labels), scene.class_count);
        const auto format = ev_format == "csv" ? ReportFormat::Csv : ReportFormat::Json;
        if (ev_out.empty())
            write_eval_report(cm, miou(cm), std::cout, format);
        else
            write_text(ev_out, [&](std::ostream& o) { write_eval_report(cm, miou(cm), o, format); });
    });

    // perturb
    auto* pb = app.add_subcommand("perturb", "Jitter, rescale or drop box annotations");
    std::string pb_scene, pb_mode, pb_out;
    double pb_mag = 0.0;
    std::uint64_t pb_seed = 0;
    pb->add_option("scene", pb_scene)->required()->check(CLI::ExistingFile);
    pb->add_option("--mode", pb_mode)->required()->check(CLI::IsMember({"translate", "scale", "discard"}));
    pb->add_option("--mag", pb_mag,
                   "translate: max shift per axis as a fraction of box size; scale: factor in [1-mag, 1+mag]; "
                   "discard: drop probability");
    pb->add_option("--seed", pb_seed);
    pb->add_option("--out", pb_out)->required();
    pb->callback([&] {
        Scene scene = load_scene(pb_scene);
        PerturbSpec spec;
        spec.mode = parse_perturb_mode(pb_mode);
        spec.seed = pb_seed;
        if (spec.mode == PerturbMode::Translate) spec.fraction = pb_mag;
        if (spec.mode == PerturbMode::Scale) {
            spec.scale_lo = 1.0 - pb_mag;
            spec.scale_hi = 1.0 + pb_mag;
        }
        if (spec.mode == PerturbMode::Discard) spec.drop = pb_mag;
        scene.boxes = perturb_boxes(scene.boxes, spec);
        save_scene(scene, pb_out);
    });

    // pipeline
    auto* pp = app.add_subcommand("pipeline", "Run every stage and write all artifacts");
    std::string pp_scene, pp_out;
    ConfigOptions pp_cfg;
    pp->add_option("scene", pp_scene)->required()->check(CLI::ExistingFile);
    pp_cfg.attach(pp);
    pp->add_option("--out-dir", pp_out)->required();
    pp->callback([&] {
        const auto cfg = pp_cfg.build();
        const auto result = run_pipeline(load_scene(pp_scene), cfg, pp_out);
        if (result.iou) std::cout << "miou " << format_double(result.iou->miou) << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "boxseg: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
