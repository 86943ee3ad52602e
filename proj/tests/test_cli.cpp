#include <doctest.h>

#include "cli_runs.hpp"

using namespace testing;

TEST_CASE("every subcommand is byte-for-byte repeatable") {
    TempDir dir("cli_runs");
    const auto r = compare_cli_runs(dir.path);
    for (const auto& f : r.failed) FAIL_CHECK("command failed: " << f);
    for (const auto& f : r.differing) FAIL_CHECK("differs between runs: " << f);
    CHECK(r.compared.size() >= 25);
}

TEST_CASE("bad input exits nonzero with a message") {
    TempDir dir("cli_errors");
    {
        std::ofstream bad(dir / "bad.txt");
        bad << "SCENE v1 1 0 0 2\nP 0 nan 0\n";
    }
    CHECK(run_cli("partition \"" + (dir / "bad.txt").string() + "\" --out \"" + (dir / "p.csv").string() + "\"",
                  dir / "err.txt") != 0);
    CHECK(read_file(dir / "err.txt").find("line 2") != std::string::npos);
    CHECK(run_cli("pipeline", dir / "usage.txt") != 0);
    CHECK(run_cli("synth --out \"" + (dir / "s.txt").string() + "\" --spec \"" + (dir / "missing.cfg").string() + "\"",
                  dir / "missing.txt") != 0);
}

TEST_CASE("pipeline artifacts from the command line match the pipeline stages") {
    TempDir dir("cli_pipeline");
    const auto r = compare_cli_runs(dir.path);
    REQUIRE(r.failed.empty());
    for (const char* f : {"scene.txt", "partition.csv", "foreground.labels", "classifier.net", "pcam.labels",
                          "background.labels", "initial.labels", "pseudo.labels", "model.net", "predictions.labels",
                          "report.json", "manifest.json", "config.txt"})
        CHECK_MESSAGE(std::filesystem::exists(dir / "a" / "run" / f), f);
    CHECK(read_file(dir / "a" / "pipeline.stdout").rfind("miou ", 0) == 0);
}
