#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "infogap/corpus.hpp"
#include "infogap/embed.hpp"
#include "infogap/util.hpp"

namespace infogap::topics {

using TopicId = std::int64_t;
inline constexpr TopicId kNoise = -1;

enum class ReductionMethod { pca, external };

struct ReductionConfig {
    ReductionMethod method = ReductionMethod::pca;
    std::size_t target_dim = 32;
    std::filesystem::path external_path;  // vector store with reduced rows

    void validate() const;  // throws ConfigError
};

struct PcaResult {
    embed::EmbeddingMatrix reduced;
    Eigen::MatrixXd components;  // original_dim x k, orthonormal columns
    Eigen::VectorXd explained_variance_ratio;
    Eigen::RowVectorXd mean;
};

// Projection onto the leading principal axes. Each axis is signed so that its
// largest-magnitude loading is positive. A rank below target_dim reduces the
// output dimension with a warning.
PcaResult reduce_pca(const embed::EmbeddingMatrix& matrix, const ReductionConfig& cfg);

// Loads an externally reduced matrix and aligns it to original's row order.
embed::EmbeddingMatrix load_external_reduction(const ReductionConfig& cfg, const embed::EmbeddingMatrix& original);

struct ClusterConfig {
    std::size_t min_cluster_size = 3;
    std::optional<std::size_t> min_samples;  // defaults to min_cluster_size

    std::size_t samples() const { return min_samples.value_or(min_cluster_size); }
    void validate() const;  // throws ConfigError
};

struct TopicModel {
    std::vector<std::uint64_t> segment_ids;  // row order of the clustered matrix
    std::vector<TopicId> assignment;         // kNoise or a topic id
    std::vector<double> probability;         // 0 for noise
    std::vector<TopicId> topic_ids;          // 0..K-1
    embed::EmbeddingMatrix centroids;        // filled by topic_centroids

    std::size_t n_noise() const;
    std::optional<TopicId> topic_of(std::uint64_t segment_id) const;
};

// Euclidean HDBSCAN with excess-of-mass selection. Topics are numbered in
// order of their first member row. The root cluster is only selected when
// the condensed tree never splits (e.g. all points equidistant).
TopicModel hdbscan(const embed::EmbeddingMatrix& points, const ClusterConfig& cfg);

// Mutual reachability distances, exposed for testing.
Eigen::MatrixXd mutual_reachability(const Eigen::MatrixXd& distances, std::size_t min_samples);

// Probability-weighted mean of each topic's rows in the original space.
embed::EmbeddingMatrix topic_centroids(const TopicModel& model, const embed::EmbeddingMatrix& original);

struct ChapterTopicStats {
    int chapter_index;
    std::set<TopicId> topics_present;
    std::size_t n_topics = 0;
    std::size_t n_novel = 0;
    std::map<TopicId, double> freq_log2;  // log2 of the chunk count
};

// One entry per chapter 1..max chapter; noise segments are ignored.
std::vector<ChapterTopicStats> chapter_topic_stats(const TopicModel& model,
                                                   std::span<const corpus::TextSegment> segments);

util::Table assignment_table(const TopicModel& model);
TopicModel parse_assignment(const util::Table& table);

}  // namespace infogap::topics
