#include <doctest.h>

#include <cmath>
#include <random>

#include "infogap/error.hpp"
#include "infogap/homology.hpp"
#include "support/naive_rips.hpp"

using namespace infogap;
using namespace infogap::homology;

namespace {

network::TopicGraph graph_with_distances(std::size_t n, const std::vector<std::tuple<int, int, double>>& edges) {
    network::TopicGraph g;
    for (std::size_t v = 0; v < n; ++v) g.add_vertex(static_cast<network::TopicId>(v));
    for (auto [a, b, d] : edges) g.add_edge(a, b, 1.0 - d);
    return g;
}

DistanceMatrix uniform(std::size_t n, double value) {
    DistanceMatrix dm(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) dm.set(i, j, value);
    return dm;
}

void check_same(const std::vector<PersistenceDiagram>& got, const std::vector<PersistenceDiagram>& want) {
    REQUIRE(got.size() == want.size());
    for (std::size_t d = 0; d < got.size(); ++d) {
        auto a = got[d], b = want[d];
        sort_points(a);
        sort_points(b);
        REQUIRE(a.points.size() == b.points.size());
        for (std::size_t i = 0; i < a.points.size(); ++i) {
            CHECK(a.points[i].birth == doctest::Approx(b.points[i].birth).epsilon(1e-9));
            CHECK(a.points[i].death == doctest::Approx(b.points[i].death).epsilon(1e-9));
        }
    }
}

}  // namespace

TEST_CASE("geodesics prefer shorter multi-hop paths") {
    const auto dm = geodesic_distances(graph_with_distances(3, {{0, 1, 0.2}, {1, 2, 0.2}, {0, 2, 0.5}}));
    CHECK(dm(0, 2) == doctest::Approx(0.4));
    CHECK(dm(0, 1) == doctest::Approx(0.2));
    CHECK(!dm.sentinel_used());
}

TEST_CASE("disconnected pairs get the sentinel") {
    const auto dm = geodesic_distances(graph_with_distances(2, {}));
    CHECK(dm(0, 1) == 1.0);
    CHECK(dm.sentinel_used());

    const auto dm2 = geodesic_distances(graph_with_distances(4, {{0, 1, 0.3}, {2, 3, 0.5}}));
    CHECK(dm2(0, 2) == doctest::Approx(1.5));
    CHECK(dm2(2, 3) == doctest::Approx(0.5));
}

TEST_CASE("negative edge distances are rejected") {
    network::TopicGraph g;
    g.add_edge(0, 1, 1.5);
    CHECK_THROWS_AS(geodesic_distances(g), DomainError);
}

TEST_CASE("distance matrix validation") {
    DistanceMatrix dm(2, {0, 1, 2, 0});
    CHECK_THROWS_AS(dm.validate(), DomainError);
    CHECK_THROWS_AS(rips_persistence(dm), DomainError);
    CHECK(uniform(3, 1).enclosing_radius() == 1);
}

TEST_CASE("four-cycle has one loop") {
    const auto g = graph_with_distances(4, {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}, {3, 0, 1}});
    const auto dm = geodesic_distances(g);
    CHECK(dm(0, 2) == 2);
    const auto dgms = rips_persistence(dm);
    REQUIRE(dgms.size() == 3);
    REQUIRE(dgms[1].points.size() == 1);
    CHECK(dgms[1].points[0] == PersistencePair{1, 2});
    CHECK(dgms[2].points.empty());
    check_same(dgms, testing::naive_rips(dm, 2));
}

TEST_CASE("two points") {
    DistanceMatrix dm(2);
    dm.set(0, 1, 0.37);
    const auto dgms = rips_persistence(dm);
    REQUIRE(dgms[0].points.size() == 1);
    CHECK(dgms[0].points[0] == PersistencePair{0, 0.37});
    CHECK(dgms[0].essential_excluded == 1);
}

TEST_CASE("equidistant triple has no loop") {
    const auto dm = uniform(3, 1);
    const auto dgms = rips_persistence(dm);
    CHECK(dgms[0].points == std::vector<PersistencePair>{{0, 1}, {0, 1}});
    CHECK(dgms[1].points.empty());
    check_same(dgms, testing::naive_rips(dm, 2));
}

TEST_CASE("octahedron carries a void") {
    // Six points, antipodal pairs at distance 2, all others at 1.
    DistanceMatrix dm(6);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = i + 1; j < 6; ++j) dm.set(i, j, j == i + 3 ? 2.0 : 1.0);
    const auto dgms = rips_persistence(dm);
    REQUIRE(dgms[2].points.size() == 1);
    CHECK(dgms[2].points[0] == PersistencePair{1, 2});
    check_same(dgms, testing::naive_rips(dm, 2));
}

TEST_CASE("trees have no cycles") {
    std::mt19937_64 gen(41);
    for (std::size_t n = 2; n <= 8; ++n)
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<std::tuple<int, int, double>> edges;
            for (std::size_t v = 1; v < n; ++v) edges.emplace_back(static_cast<int>(gen() % v), static_cast<int>(v), 1.0);
            const auto dm = geodesic_distances(graph_with_distances(n, edges));
            const auto dgms = rips_persistence(dm);
            const auto b = betti_counts(dgms);
            CHECK(b.beta0 == n - 1);
            CHECK(b.beta1 == 0);
            CHECK(b.beta2 == 0);
            check_same(dgms, testing::naive_rips(dm, 2));
        }
}

TEST_CASE("empty input") {
    CHECK(betti_counts({}) == BettiCounts{0, 0, 0});
    const auto dgms = rips_persistence(DistanceMatrix(0));
    REQUIRE(dgms.size() == 3);
    for (const auto& d : dgms) CHECK(d.points.empty());
    const auto single = rips_persistence(DistanceMatrix(1));
    CHECK(single[0].points.empty());
    CHECK(single[0].essential_excluded == 1);
}

TEST_CASE("engine matches brute force on random geodesic matrices") {
    std::mt19937_64 gen(1234);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 3 + gen() % 8;
        std::vector<std::tuple<int, int, double>> edges;
        const bool integer = trial % 3 == 0;  // many ties
        auto weight = [&] {
            return integer ? double(1 + gen() % 3) : std::uniform_real_distribution<double>(0.05, 1.0)(gen);
        };
        for (std::size_t v = 1; v < n; ++v) edges.emplace_back(static_cast<int>(gen() % v), static_cast<int>(v), weight());
        for (std::size_t e = 0; e < n; ++e) {
            int a = static_cast<int>(gen() % n), b = static_cast<int>(gen() % n);
            if (a != b) edges.emplace_back(a, b, weight());
        }
        network::TopicGraph g;
        for (std::size_t v = 0; v < n; ++v) g.add_vertex(static_cast<network::TopicId>(v));
        for (auto [a, b, d] : edges) g.add_edge(a, b, 1.0 - d);
        const auto dm = geodesic_distances(g);
        check_same(rips_persistence(dm), testing::naive_rips(dm, 2));
    }
}

TEST_CASE("engine matches brute force on random metric-free matrices") {
    std::mt19937_64 gen(77);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 4 + gen() % 6;
        DistanceMatrix dm(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) dm.set(i, j, std::uniform_real_distribution<double>(0, 1)(gen));
        check_same(rips_persistence(dm, 1), testing::naive_rips(dm, 1));
    }
}
