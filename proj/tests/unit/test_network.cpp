#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "infogap/error.hpp"
#include "infogap/network.hpp"
#include "infogap/util.hpp"
#include "support/testing.hpp"

using namespace infogap;
using namespace infogap::network;

namespace {

embed::EmbeddingMatrix centroids(const std::vector<std::vector<float>>& rows) {
    embed::EmbeddingMatrix m;
    m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        m.row_ids.push_back(i);
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

TopicGraph unit_graph(std::size_t n, const std::vector<std::pair<TopicId, TopicId>>& edges) {
    TopicGraph g;
    for (std::size_t v = 0; v < n; ++v) g.add_vertex(static_cast<TopicId>(v));
    for (auto [a, b] : edges) g.add_edge(a, b, 0.5);
    return g;
}

}  // namespace

TEST_CASE("repeated transitions collapse and self transitions add nothing") {
    const auto c = centroids({{1, 0}, {0, 1}, {1, 1}});
    std::vector<ChunkTopic> chunks = {{0, 1, 0}, {1, 1, 1}, {2, 1, 0}, {3, 1, 0}, {4, 1, 2}, {5, 1, 0}};
    const auto series = build_series(chunks, c);
    REQUIRE(series.snapshots.size() == 1);
    const auto& g = series.snapshots[0];
    CHECK(g.vertex_count() == 3);
    CHECK(g.edge_count() == 2);
    CHECK(g.has_edge(0, 1));
    CHECK(g.has_edge(2, 0));
    CHECK(!g.has_edge(1, 2));
    CHECK(g.weight(0, 2).value() == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(g.weight(0, 1).value() == doctest::Approx(0.0));
}

TEST_CASE("noise chunks are transparent") {
    const auto c = centroids({{1, 0}, {0, 1}});
    std::vector<ChunkTopic> chunks = {{0, 1, 0}, {1, 1, std::nullopt}, {2, 1, 1}};
    const auto g = build_series(chunks, c).snapshots.back();
    CHECK(g.has_edge(0, 1));
}

TEST_CASE("snapshots are cumulative and transitions cross chapters") {
    const auto c = centroids({{1, 0}, {0, 1}, {1, 1}});
    std::vector<ChunkTopic> chunks = {{0, 1, 0}, {1, 1, 1}, {2, 3, 2}};
    const auto series = build_series(chunks, c);
    REQUIRE(series.chapters == std::vector<int>{1, 2, 3});
    CHECK(series.snapshots[0].edge_count() == 1);
    CHECK(series.snapshots[1] == series.snapshots[0]);
    CHECK(series.snapshots[2].has_edge(1, 2));
    for (std::size_t i = 1; i < series.snapshots.size(); ++i)
        CHECK(series.snapshots[i - 1].subgraph_of(series.snapshots[i]));
}

TEST_CASE("a topic without a centroid is an error") {
    const auto c = centroids({{1, 0}});
    std::vector<ChunkTopic> chunks = {{0, 1, 0}, {1, 1, 5}};
    CHECK_THROWS_AS(build_series(chunks, c), InputError);
}

TEST_CASE("graph edges") {
    TopicGraph g;
    CHECK(g.add_edge(3, 1, 0.25));
    CHECK(!g.add_edge(1, 3, 0.9));
    CHECK(g.weight(1, 3).value() == 0.25);
    CHECK(g.vertex_count() == 2);
    CHECK_THROWS_AS(g.add_edge(2, 2, 0.1), DomainError);
    const auto e = g.edges();
    REQUIRE(e.size() == 1);
    CHECK(e[0].u == 1);
    CHECK(e[0].v == 3);
    CHECK(e[0].distance == doctest::Approx(0.75));
}

TEST_CASE("path graph metrics") {
    const auto m = network_metrics(unit_graph(4, {{0, 1}, {1, 2}, {2, 3}}), 1);
    CHECK(m.degree_mean == doctest::Approx(1.5));
    CHECK(m.unweighted_diameter == 3);
    CHECK(m.clustering_coefficient == 0);
    CHECK(m.avg_shortest_path == doctest::Approx(10.0 / 6.0));
    CHECK(m.weighted_diameter == doctest::Approx(1.5));
    CHECK(!m.disconnected);
}

TEST_CASE("complete graph metrics") {
    const auto m = network_metrics(unit_graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}), 1);
    CHECK(m.clustering_coefficient == doctest::Approx(1.0));
    CHECK(m.unweighted_diameter == 1);
    CHECK(m.degree_sd == 0);
}

TEST_CASE("metrics need three vertices") {
    CHECK_THROWS_AS(network_metrics(unit_graph(2, {{0, 1}}), 1), DomainError);
}

TEST_CASE("disconnected graphs use the largest component for paths") {
    const auto m = network_metrics(unit_graph(6, {{0, 1}, {1, 2}, {2, 3}, {4, 5}}), 1);
    CHECK(m.disconnected);
    CHECK(m.component_size == 4);
    CHECK(m.unweighted_diameter == 3);
}

TEST_CASE("path metrics agree with Floyd-Warshall on random graphs") {
    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 5 + gen() % 8;
        TopicGraph g;
        for (std::size_t v = 0; v < n; ++v) g.add_vertex(static_cast<TopicId>(v));
        for (std::size_t v = 1; v < n; ++v) g.add_edge(static_cast<TopicId>(gen() % v), static_cast<TopicId>(v),
                                                        std::uniform_real_distribution<double>(-0.5, 1.0)(gen));
        for (int extra = 0; extra < 6; ++extra) {
            auto a = static_cast<TopicId>(gen() % n), b = static_cast<TopicId>(gen() % n);
            if (a != b) g.add_edge(a, b, std::uniform_real_distribution<double>(-0.5, 1.0)(gen));
        }
        const double inf = std::numeric_limits<double>::infinity();
        std::vector<std::vector<double>> w(n, std::vector<double>(n, inf)), h = w;
        for (std::size_t i = 0; i < n; ++i) w[i][i] = h[i][i] = 0;
        for (const auto& e : g.edges()) {
            auto u = static_cast<std::size_t>(e.u), v = static_cast<std::size_t>(e.v);
            w[u][v] = w[v][u] = 1 - e.weight;
            h[u][v] = h[v][u] = 1;
        }
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    w[i][j] = std::min(w[i][j], w[i][k] + w[k][j]);
                    h[i][j] = std::min(h[i][j], h[i][k] + h[k][j]);
                }
        double wd = 0, hd = 0, total = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                wd = std::max(wd, w[i][j]);
                hd = std::max(hd, h[i][j]);
                total += h[i][j];
            }
        const auto m = network_metrics(g, 3, 0);
        CHECK(m.weighted_diameter == doctest::Approx(wd));
        CHECK(m.unweighted_diameter == hd);
        CHECK(m.avg_shortest_path == doctest::Approx(total / double(n * (n - 1))));
    }
}

TEST_CASE("small-worldness is reproducible for a fixed seed") {
    const auto g = unit_graph(8, {{0, 1}, {1, 2}, {2, 0}, {2, 3}, {3, 4}, {4, 5}, {5, 3}, {5, 6}, {6, 7}, {7, 0}});
    const auto a = network_metrics(g, 77, 20);
    const auto b = network_metrics(g, 77, 20);
    CHECK(a.small_worldness == b.small_worldness);
    CHECK(std::isfinite(a.lognormal_meanlog));
}

TEST_CASE("graph export round trip") {
    testing::TempDir dir("graph");
    TopicGraph g = unit_graph(3, {{0, 2}});
    g.add_edge(1, 2, 0.123456789012345);
    export_graph(g, dir / "g.tsv");
    CHECK(import_graph(dir / "g.tsv") == g);

    export_graph(TopicGraph{}, dir / "empty.tsv");
    const auto text = util::read_file(dir / "empty.tsv");
    CHECK(std::count(text.begin(), text.end(), '\n') == 1);
    CHECK(import_graph(dir / "empty.tsv") == TopicGraph{});
}
