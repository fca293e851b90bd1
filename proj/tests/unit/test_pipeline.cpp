#include <doctest.h>

#include <algorithm>

#include "infogap/config.hpp"
#include "infogap/error.hpp"
#include "infogap/pipeline.hpp"
#include "support/testing.hpp"

using namespace infogap;
using namespace infogap::pipeline;
using Names = std::vector<std::string>;

namespace {

const std::filesystem::path kSample = INFOGAP_SAMPLE_DIR;

config::PipelineConfig sample_config(const std::filesystem::path& out, const std::string& extra = "") {
    auto cfg = config::parse_config(R"({"inputs": {"novel": "novel.txt", "ratings": "ratings.tsv"},
        "embedder": {"kind": "deterministic", "dim": 512},
        "reduction": {"target_dim": 16},
        "cluster": {"min_cluster_size": 5},
        "model": {"n_permutations": 100})" + extra + "}",
                                    kSample);
    cfg.output_dir = out;
    return cfg;
}

Names stages_from(Stage first) {
    Names out;
    bool on = false;
    for (Stage s : all_stages()) {
        on = on || s == first;
        if (on) out.push_back(stage_name(s));
    }
    return out;
}

Names stages_before(Stage first) {
    Names out;
    for (Stage s : all_stages()) {
        if (s == first) break;
        out.push_back(stage_name(s));
    }
    return out;
}

}  // namespace

TEST_CASE("stage names") {
    CHECK(all_stages().size() == 10);
    for (Stage s : all_stages()) CHECK(parse_stage(stage_name(s)) == s);
    CHECK(!parse_stage("nope"));
}

TEST_CASE("network series table round trip") {
    network::TopicGraphSeries series;
    network::TopicGraph g;
    g.add_vertex(4);
    series.chapters.push_back(1);
    series.snapshots.push_back(g);
    series.chapters.push_back(2);
    series.snapshots.push_back(g);
    g.add_edge(4, 7, 0.3125);
    g.add_edge(7, 9, -0.1);
    series.chapters.push_back(3);
    series.snapshots.push_back(g);
    const auto back = parse_series(series_table(series));
    CHECK(back.chapters == series.chapters);
    REQUIRE(back.snapshots.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(back.snapshots[i] == series.snapshots[i]);
}

TEST_CASE("manifest reuse, downstream reruns and determinism") {
    testing::LogCapture quiet;
    testing::TempDir a("pipe_a"), b("pipe_b");
    const auto cfg = sample_config(a.path());

    const auto first = run(cfg);
    CHECK(first.ran == stages_from(Stage::segment));
    for (const char* f : {"features.tsv", "model_summary.json", "report.md", "manifest.json", "figures/betti.svg"})
        CHECK(std::filesystem::exists(a / f));

    SUBCASE("second run reuses everything") {
        const auto again = run(cfg);
        CHECK(again.ran.empty());
        CHECK(again.reused.size() == 10);
    }
    SUBCASE("deleting an intermediate artifact reruns it and everything after it") {
        std::filesystem::remove(a / "topics.tsv");
        const auto again = run(cfg);
        CHECK(again.reused == stages_before(Stage::cluster));
        CHECK(again.ran == stages_from(Stage::cluster));
    }
    SUBCASE("changing model settings reruns only fitting and reporting") {
        const auto changed = sample_config(a.path(), R"(, "seed": 42, "features": {"winsor_lo": 5, "winsor_hi": 95})");
        const auto again = run(changed);
        CHECK(again.ran == stages_from(Stage::features));
    }
    SUBCASE("a tampered output is detected") {
        util::write_file(a / "betti.tsv", "chapter_index\tbeta0\n");
        const auto again = run(cfg);
        CHECK(again.ran == stages_from(Stage::homology));
    }
    SUBCASE("force reruns everything") {
        CHECK(run(cfg, {std::nullopt, true}).ran.size() == 10);
    }
    SUBCASE("an identical run elsewhere produces identical artifacts") {
        run(sample_config(b.path()));
        for (const char* f : {"segments.tsv", "topics.tsv", "network_series.tsv", "diagrams.tsv", "features.tsv",
                              "model_summary.json", "correlations.tsv", "figures/betti.svg"})
            CHECK(util::read_file(a / f) == util::read_file(b / f));
    }
}

TEST_CASE("until stops after the requested stage") {
    testing::LogCapture quiet;
    testing::TempDir dir("pipe_until");
    const auto result = run(sample_config(dir.path()), {Stage::cluster, false});
    CHECK(result.ran == stages_before(Stage::network));
    CHECK(std::filesystem::exists(dir / "topics.tsv"));
    CHECK(!std::filesystem::exists(dir / "network_series.tsv"));
}

TEST_CASE("stage failures name the stage and keep earlier artifacts") {
    testing::LogCapture quiet;
    testing::TempDir dir("pipe_fail");
    util::write_file(dir / "ratings.tsv",
                     "participant_id\tchapter_index\tcuriosity\tknows_book\tknows_movie\nP1\t1\t50\tno\tno\n");
    auto cfg = sample_config(dir / "out");
    cfg.ratings_path = dir / "ratings.tsv";
    try {
        run(cfg);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "features");
    }
    CHECK(std::filesystem::exists(dir / "out" / "distances.tsv"));
    CHECK(util::read_file(dir / "out" / "manifest.json").find("\"distances\"") != std::string::npos);
}

TEST_CASE("config errors surface before any stage runs") {
    testing::TempDir dir("pipe_cfg");
    auto cfg = sample_config(dir.path());
    cfg.novel_path = dir / "missing.txt";
    CHECK_THROWS_AS(run(cfg), ConfigError);
}

TEST_CASE("sweep records one row per cell and tolerates failures") {
    testing::LogCapture quiet;
    testing::TempDir dir("pipe_sweep");
    auto cfg = sample_config(dir.path(), R"(, "sweep": {
        "embedders": [{"kind": "deterministic", "name": "h512", "dim": 512}],
        "windows": [{"window_size": 5, "overlap": 2}, {"window_size": 40, "overlap": 0, "min_cluster_size": 50}]})");
    const auto table = run_sweep(cfg);
    REQUIRE(table.rows.size() == 2);
    const auto status = table.column("status");
    CHECK(table.rows[0][status] == "ok");
    CHECK(table.rows[1][status].rfind("failed", 0) == 0);
    CHECK(std::filesystem::exists(dir / "sweep.tsv"));
    CHECK(std::filesystem::exists(dir / "sweep" / "h512_w5_o2" / "model_summary.json"));
}
