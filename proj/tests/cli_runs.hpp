// Runs every CLI subcommand twice with the same inputs and compares outputs.
#ifndef BOXSEG_TEST_CLI_RUNS_HPP
#define BOXSEG_TEST_CLI_RUNS_HPP

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "support.hpp"

namespace testing {

inline int run_cli(const std::string& args, const std::filesystem::path& stdout_file) {
    const std::string cmd = std::string("\"") + BOXSEG_CLI + "\" " + args + " > \"" + stdout_file.string() + "\" 2>&1";
    return std::system(cmd.c_str());
}

struct CliComparison {
    std::vector<std::string> compared;
    std::vector<std::string> differing;
    std::vector<std::string> failed;  // commands with a nonzero exit status
};

// Each run writes into its own directory; the shared inputs (synth spec and
// training config) live in `root`. manifest.json holds stage wall times and is
// left out of the byte comparison.
inline CliComparison compare_cli_runs(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    {
        std::ofstream spec(root / "synth.cfg");
        spec << "[synth]\nrooms = 2\nobjects_per_room = 3\n";
        std::ofstream cfg(root / "train.cfg");
        cfg << "[net]\nwidths = [3, 16, 16]\ncontext_after = 1\n[classifier]\nepochs = 3\n[segmentation]\nepochs = 3\n";
    }
    const std::string spec = (root / "synth.cfg").string(), cfg = (root / "train.cfg").string();

    CliComparison result;
    for (const char* run : {"a", "b"}) {
        const fs::path d = root / run;
        fs::create_directories(d);
        auto p = [&](const char* f) { return "\"" + (d / f).string() + "\""; };
        const std::vector<std::pair<std::string, std::string>> commands = {
            {"synth", "synth --spec \"" + spec + "\" --seed 4 --out " + p("scene.txt")},
            {"partition", "partition " + p("scene.txt") + " --out " + p("partition.csv")},
            {"grabcut", "grabcut " + p("scene.txt") + " --seed 2 --out " + p("grabcut.labels")},
            {"pcam-train", "pcam-train " + p("scene.txt") + " --cfg \"" + cfg + "\" --seed 3 --out " + p("classifier.net")},
            {"pcam-label", "pcam-label " + p("scene.txt") + " " + p("classifier.net") + " --out " + p("pcam.labels")},
            {"ast-train", "ast-train " + p("scene.txt") + " --bg-labels " + p("pcam.labels") + " --cfg \"" + cfg +
                              "\" --out-model " + p("model.net") + " --out-labels " + p("pseudo.labels")},
            {"predict", "predict " + p("scene.txt") + " " + p("model.net") + " --out " + p("predictions.labels")},
            {"eval", "eval " + p("scene.txt") + " " + p("predictions.labels") + " --out " + p("report.json")},
            {"eval-csv", "eval " + p("scene.txt") + " " + p("predictions.labels") + " --report csv"},
            {"perturb", "perturb " + p("scene.txt") + " --mode translate --mag 0.1 --seed 9 --out " + p("moved.txt")},
            {"pipeline", "pipeline " + p("scene.txt") + " --cfg \"" + cfg + "\" --seed 6 --out-dir " + p("run")},
        };
        for (const auto& [name, args] : commands) {
            if (run_cli(args, d / (name + ".stdout")) != 0) result.failed.push_back(std::string(run) + ":" + name);
        }
    }

    for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
        if (!entry.is_regular_file() || entry.path().filename() == "manifest.json") continue;
        const auto rel = fs::relative(entry.path(), root / "a");
        result.compared.push_back(rel.string());
        if (!fs::exists(root / "b" / rel) || read_file(entry.path()) != read_file(root / "b" / rel))
            result.differing.push_back(rel.string());
    }
    return result;
}

}  // namespace testing

#endif
