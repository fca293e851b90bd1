#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "infogap/corpus.hpp"
#include "infogap/diagdist.hpp"
#include "infogap/embed.hpp"
#include "infogap/gam.hpp"
#include "infogap/topics.hpp"

namespace infogap::config {

struct FeatureConfig {
    double winsor_lo = 2.5;
    double winsor_hi = 97.5;
};

struct ModelConfig {
    std::size_t basis_dim = 4;
    gam::GamConfig gam;
    std::size_t n_permutations = 1000;
    std::vector<std::string> null_terms = {"chapter_index", "n_novel_topics"};
    std::vector<std::string> full_terms;  // empty: null terms plus every topological column

    std::vector<std::string> resolved_full_terms() const;
};

struct SweepWindow {
    std::size_t window_size = 5;
    std::size_t overlap = 2;
    std::optional<std::size_t> min_cluster_size;  // per-cell override
};

struct SweepGrid {
    std::vector<embed::EmbedderConfig> embedders;
    std::vector<SweepWindow> windows;

    void validate() const;
};

// Default grid: four (w, o) pairs; w=3/o=1 uses min cluster size 4.
std::vector<SweepWindow> default_sweep_windows();

struct PipelineConfig {
    std::filesystem::path novel_path;
    std::filesystem::path ratings_path;
    std::filesystem::path output_dir = "out";
    std::filesystem::path embedding_cache;  // optional, remote embedders only
    std::uint64_t seed = 42;
    std::size_t workers = 1;

    corpus::CleanConfig clean;
    corpus::SegmenterConfig segmenter;
    corpus::RatingColumns rating_columns;
    bool naive_only = true;
    embed::EmbedderConfig embedder;
    topics::ReductionConfig reduction;
    topics::ClusterConfig cluster;
    std::size_t random_baselines = 20;
    diagdist::DiagramDistanceConfig distances;
    FeatureConfig features;
    ModelConfig model;
    SweepGrid sweep;

    // Throws ConfigError; checks value ranges and that input files exist.
    void validate() const;
};

// Relative paths are resolved against base_dir. Unknown keys are rejected.
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = ".");
PipelineConfig load_config(const std::filesystem::path& path);

// Canonical JSON of every field that affects results (not output_dir or workers).
std::string canonical_json(const PipelineConfig& cfg);
std::string config_hash(const PipelineConfig& cfg);

std::string embedder_json(const embed::EmbedderConfig& cfg);

}  // namespace infogap::config
