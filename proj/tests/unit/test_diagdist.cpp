#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "infogap/diagdist.hpp"
#include "infogap/error.hpp"

using namespace infogap;
using namespace infogap::diagdist;
using homology::PersistencePair;
using Points = std::vector<PersistencePair>;

namespace {

// Every partial injection of a into b; leftovers on either side go to the
// diagonal. combine folds one cost into the running total.
double brute_force(const Points& a, const Points& b, double p, bool bottleneck) {
    auto linf = [](const PersistencePair& x, const PersistencePair& y) {
        return std::max(std::abs(x.birth - y.birth), std::abs(x.death - y.death));
    };
    auto diag = [](const PersistencePair& x) { return (x.death - x.birth) / 2; };
    auto combine = [&](double acc, double c) { return bottleneck ? std::max(acc, c) : acc + std::pow(c, p); };
    std::vector<bool> used(b.size(), false);
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, double)> go = [&](std::size_t i, double acc) {
        if (i == a.size()) {
            for (std::size_t j = 0; j < b.size(); ++j)
                if (!used[j]) acc = combine(acc, diag(b[j]));
            best = std::min(best, acc);
            return;
        }
        go(i + 1, combine(acc, diag(a[i])));
        for (std::size_t j = 0; j < b.size(); ++j)
            if (!used[j]) {
                used[j] = true;
                go(i + 1, combine(acc, linf(a[i], b[j])));
                used[j] = false;
            }
    };
    go(0, 0.0);
    return bottleneck ? best : std::pow(best, 1.0 / p);
}

Points random_diagram(std::mt19937_64& gen, std::size_t max_points) {
    Points pts;
    const std::size_t n = gen() % (max_points + 1);
    std::uniform_real_distribution<double> u(0, 1);
    for (std::size_t i = 0; i < n; ++i) {
        double b = u(gen), d = b + 0.01 + u(gen);
        pts.push_back({b, d});
    }
    return pts;
}

}  // namespace

TEST_CASE("bottleneck examples") {
    CHECK(bottleneck(Points{{0, 2}}, Points{{0, 2}}) == 0);
    CHECK(bottleneck(Points{{0, 2}}, Points{}) == doctest::Approx(1));
    CHECK(bottleneck(Points{{0, 2}}, Points{{0, 3}}) == doctest::Approx(1));
    CHECK(bottleneck(Points{}, Points{}) == 0);
}

TEST_CASE("wasserstein examples") {
    CHECK(wasserstein(Points{{0, 2}, {1, 3}}, Points{{0, 2}, {1, 3}}) == 0);
    CHECK(wasserstein(Points{{0, 2}, {1, 3}}, Points{{0, 2}}) == doctest::Approx(1));
    CHECK(wasserstein(Points{{0, 4}}, Points{{0, 2}}, 2.0) == doctest::Approx(2));
}

TEST_CASE("diagram overloads check dimensions and order") {
    homology::PersistenceDiagram a{1, {{0, 1}}, 0}, b{2, {}, 0};
    CHECK_THROWS_AS(bottleneck(a, b), DomainError);
    CHECK_THROWS_AS(wasserstein(a, b), DomainError);
    b.dim = 1;
    DiagramDistanceConfig cfg;
    cfg.wasserstein_order = 0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(wasserstein(a, b) == doctest::Approx(0.5));
}

TEST_CASE("costs") {
    CHECK(point_cost({0, 2}, {1, 2.5}) == 1);
    CHECK(diagonal_cost({1, 4}) == 1.5);
}

TEST_CASE("distances agree with exhaustive matching") {
    std::mt19937_64 gen(555);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = random_diagram(gen, 6), b = random_diagram(gen, 6);
        const double w1 = wasserstein(a, b, 1.0);
        CHECK(w1 == doctest::Approx(brute_force(a, b, 1.0, false)).epsilon(1e-9));
        CHECK(bottleneck(a, b) == doctest::Approx(brute_force(a, b, 1.0, true)).epsilon(1e-9));
        CHECK(bottleneck(a, b) <= w1 + 1e-12);
        if (trial % 4 == 0)
            CHECK(wasserstein(a, b, 2.0) == doctest::Approx(brute_force(a, b, 2.0, false)).epsilon(1e-9));
    }
}

TEST_CASE("metric axioms") {
    std::mt19937_64 gen(9);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = random_diagram(gen, 8), b = random_diagram(gen, 8), c = random_diagram(gen, 8);
        for (auto dist : {std::function<double(const Points&, const Points&)>(
                              [](const Points& x, const Points& y) { return wasserstein(x, y, 1.0); }),
                          std::function<double(const Points&, const Points&)>(
                              [](const Points& x, const Points& y) { return bottleneck(x, y); })}) {
            CHECK(dist(a, a) == 0);
            CHECK(dist(a, b) >= 0);
            CHECK(dist(a, b) == doctest::Approx(dist(b, a)).epsilon(1e-12));
            CHECK(dist(a, c) <= dist(a, b) + dist(b, c) + 1e-9);
        }
    }
}
