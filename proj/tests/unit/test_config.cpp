#include <doctest.h>

#include "infogap/config.hpp"
#include "infogap/error.hpp"
#include "support/testing.hpp"

using namespace infogap;
using namespace infogap::config;

namespace {

struct Inputs {
    testing::TempDir dir{"config"};
    Inputs() {
        util::write_file(dir / "novel.txt", "Chapter 1\nText.\n");
        util::write_file(dir / "ratings.tsv", "participant_id\tchapter_index\tcuriosity\tknows_book\tknows_movie\n");
    }
    PipelineConfig parse(const std::string& extra = "") const {
        return parse_config(R"({"inputs": {"novel": "novel.txt", "ratings": "ratings.tsv"})" + extra + "}", dir.path());
    }
};

}  // namespace

TEST_CASE("defaults and relative paths") {
    Inputs in;
    const auto cfg = in.parse();
    CHECK(cfg.novel_path == in.dir / "novel.txt");
    CHECK(cfg.seed == 42);
    CHECK(cfg.segmenter.window_size == 5);
    CHECK(cfg.segmenter.overlap == 2);
    CHECK(cfg.model.basis_dim == 4);
    CHECK(cfg.model.null_terms == std::vector<std::string>{"chapter_index", "n_novel_topics"});
    CHECK(cfg.model.resolved_full_terms().size() == 11);
    CHECK(cfg.sweep.embedders.size() == 1);
    CHECK(cfg.sweep.windows.size() == 4);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("sections override defaults") {
    Inputs in;
    const auto cfg = in.parse(R"(, "seed": 7, "segmenter": {"window_size": 8, "overlap": 3},
        "cluster": {"min_cluster_size": 6, "min_samples": 2},
        "embedder": {"kind": "deterministic", "name": "h2", "dim": 64},
        "model": {"n_permutations": 250, "full_terms": ["chapter_index", "n_novel_topics", "beta1"]})");
    CHECK(cfg.seed == 7);
    CHECK(cfg.segmenter.window_size == 8);
    CHECK(cfg.cluster.samples() == 2);
    CHECK(cfg.embedder.dim == 64);
    CHECK(cfg.sweep.embedders.at(0).name == "h2");
    CHECK(cfg.model.resolved_full_terms().size() == 3);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("unknown keys and bad values are config errors") {
    Inputs in;
    CHECK_THROWS_AS(in.parse(R"(, "sed": 1)"), ConfigError);
    CHECK_THROWS_AS(in.parse(R"(, "segmenter": {"windowsize": 3})"), ConfigError);
    CHECK_THROWS_AS(in.parse(R"(, "seed": "x")"), ConfigError);
    CHECK_THROWS_AS(in.parse(R"(, "embedder": {"kind": "magic"})"), ConfigError);
    CHECK_THROWS_AS(parse_config("{not json", in.dir.path()), ConfigError);
    CHECK_THROWS_AS(in.parse(R"(, "segmenter": {"window_size": 3, "overlap": 3})").validate(), ConfigError);
    CHECK_THROWS_AS(in.parse(R"(, "model": {"n_permutations": 10})").validate(), ConfigError);
    CHECK_THROWS_AS(in.parse(R"(, "model": {"null_terms": ["mean_curiosity"]})").validate(), ConfigError);
    CHECK_THROWS_AS(in.parse(R"(, "model": {"full_terms": ["beta1"]})").validate(), ConfigError);
}

TEST_CASE("missing inputs are reported") {
    Inputs in;
    auto cfg = in.parse();
    cfg.novel_path = in.dir / "nope.txt";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(load_config(in.dir / "absent.json"), ConfigError);
}

TEST_CASE("config hash ignores operational settings") {
    Inputs in;
    const auto a = in.parse();
    const auto b = in.parse(R"(, "workers": 4, "output_dir": "elsewhere")");
    const auto c = in.parse(R"(, "seed": 43)");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a) != config_hash(c));
    CHECK(config_hash(a).size() == 16);
}

TEST_CASE("config file round trip through load_config") {
    Inputs in;
    util::write_file(in.dir / "c.json",
                     R"({"inputs": {"novel": "novel.txt", "ratings": "ratings.tsv"}, "output_dir": "out"})");
    const auto cfg = load_config(in.dir / "c.json");
    CHECK(cfg.output_dir == in.dir / "out");
}
