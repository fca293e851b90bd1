#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "infogap/embed.hpp"

namespace infogap::network {

using TopicId = std::int64_t;

struct Edge {
    TopicId u;  // u < v
    TopicId v;
    double weight;    // cosine similarity of the two topic centroids
    double distance;  // 1 - weight

    bool operator==(const Edge&) const = default;
};

// Weighted undirected simple graph over topic ids.
class TopicGraph {
public:
    void add_vertex(TopicId id) { vertices_.insert(id); }

    // Adds {a, b} with the given weight. Self-loops throw DomainError.
    // Returns false (and keeps the existing weight) if the edge exists.
    bool add_edge(TopicId a, TopicId b, double weight);

    bool has_vertex(TopicId id) const { return vertices_.count(id) != 0; }
    bool has_edge(TopicId a, TopicId b) const;
    std::optional<double> weight(TopicId a, TopicId b) const;

    std::size_t vertex_count() const { return vertices_.size(); }
    std::size_t edge_count() const { return edges_.size(); }

    // Sorted ascending.
    std::vector<TopicId> vertices() const { return {vertices_.begin(), vertices_.end()}; }
    // Sorted by (u, v).
    std::vector<Edge> edges() const;

    // Adjacency over positions in vertices(): neighbors[i] = (j, distance).
    std::vector<std::vector<std::pair<std::size_t, double>>> adjacency() const;

    // True when every vertex and edge of this graph is present in other.
    bool subgraph_of(const TopicGraph& other) const;

    bool operator==(const TopicGraph&) const = default;

private:
    std::set<TopicId> vertices_;
    std::map<std::pair<TopicId, TopicId>, double> edges_;
};

// One chunk of the narrative in reading order; topic is empty for noise.
struct ChunkTopic {
    std::uint64_t segment_id;
    int chapter_index;
    std::optional<TopicId> topic;
};

// Cumulative snapshots, one per rating point (chapter 1..N).
struct TopicGraphSeries {
    std::vector<int> chapters;
    std::vector<TopicGraph> snapshots;
};

// Noise chunks are transparent: consecutive non-noise chunks with distinct
// topics are joined even when noise chunks sit between them.
// n_chapters = 0 means "up to the largest chapter index in chunks".
TopicGraphSeries build_series(std::span<const ChunkTopic> chunks,
                              const embed::EmbeddingMatrix& centroids,
                              int n_chapters = 0);

struct NetworkMetrics {
    std::size_t n_vertices = 0;
    std::size_t n_edges = 0;
    double degree_mean = 0, degree_sd = 0, degree_median = 0, degree_mad = 0;
    double degree_min = 0, degree_max = 0;
    double weighted_diameter = 0;
    double unweighted_diameter = 0;
    double avg_shortest_path = 0;
    double clustering_coefficient = 0;
    double small_worldness = 0;
    double lognormal_meanlog = 0, lognormal_sdlog = 0;
    bool disconnected = false;          // path metrics then refer to the largest component
    std::size_t component_size = 0;
};

inline constexpr std::size_t kRandomBaselines = 20;

// Throws DomainError when the graph has fewer than 3 vertices.
NetworkMetrics network_metrics(const TopicGraph& graph, std::uint64_t rng_seed,
                               std::size_t n_random = kRandomBaselines);

// Global transitivity: 3 * triangles / connected triples.
double clustering_coefficient(const TopicGraph& graph);

// Edge-list text: topic_u, topic_v, weight, distance. Isolated vertices are
// written as rows with topic_v = "-".
void export_graph(const TopicGraph& graph, const std::filesystem::path& path);
TopicGraph import_graph(const std::filesystem::path& path);
std::string format_graph(const TopicGraph& graph);
TopicGraph parse_graph(std::string_view text);

}  // namespace infogap::network
