#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "infogap/error.hpp"
#include "infogap/stats.hpp"
#include "support/testing.hpp"

using namespace infogap;
using namespace infogap::stats;
using Vec = std::vector<double>;

TEST_CASE("consecutive distances start from the empty diagram") {
    std::vector<homology::PersistenceDiagram> series(3);
    for (auto& d : series) d.dim = 1;
    series[1].points = {{0, 2}};
    series[2].points = {{0, 2}};
    const auto s = consecutive_distances(series);
    CHECK(s.bottleneck == Vec{0, 1, 0});
    CHECK(s.wasserstein == Vec{0, 1, 0});
    CHECK_THROWS_AS(consecutive_distances(std::span(series).subspan(0, 1)), DomainError);
}

TEST_CASE("detrend") {
    for (double v : detrend(Vec{2, 4, 6, 8, 10})) CHECK(v == doctest::Approx(0).epsilon(1e-12));
    const Vec y = {3, 1, 4, 1, 5, 9, 2, 6};
    Vec shifted = y;
    for (double& v : shifted) v += 17.5;
    const auto a = detrend(y), b = detrend(shifted);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    double sum = 0, dot = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += a[i];
        dot += a[i] * double(i + 1);
    }
    CHECK(sum == doctest::Approx(0).scale(1));
    CHECK(dot == doctest::Approx(0).scale(1));
    CHECK_THROWS_AS(detrend(Vec{1, 2}), DomainError);
}

TEST_CASE("quantile follows linear interpolation between order statistics") {
    CHECK(quantile(Vec{1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
    CHECK(quantile(Vec{10, 0}, 0.25) == doctest::Approx(2.5));
    CHECK(quantile(Vec{7}, 0.9) == 7);
}

TEST_CASE("winsorize") {
    CHECK(winsorize(Vec{4, 4, 4}) == Vec{4, 4, 4});
    Vec seq(100);
    for (int i = 0; i < 100; ++i) seq[static_cast<std::size_t>(i)] = i + 1;
    const auto w = winsorize(seq);
    CHECK(*std::min_element(w.begin(), w.end()) == doctest::Approx(quantile(seq, 0.025)));
    CHECK(*std::max_element(w.begin(), w.end()) == doctest::Approx(quantile(seq, 0.975)));
    CHECK(w[50] == seq[50]);
    CHECK_THROWS_AS(winsorize(seq, 50, 40), DomainError);
}

TEST_CASE("spearman") {
    CHECK(spearman(Vec{1, 2, 3, 4}, Vec{10, 20, 25, 100}) == doctest::Approx(1));
    CHECK(spearman(Vec{1, 2, 3, 4}, Vec{4, 3, 2, 1}) == doctest::Approx(-1));
    CHECK(midranks(Vec{3, 1, 3, 2}) == Vec{3.5, 1, 3.5, 2});
    CHECK_THROWS_AS(spearman(Vec{1, 1, 1}, Vec{1, 2, 3}), DomainError);

    // Without ties the rank-difference formula applies.
    std::mt19937_64 gen(4);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 5 + gen() % 20;
        Vec x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = std::uniform_real_distribution<double>(0, 1)(gen);
            y[i] = x[i] + std::uniform_real_distribution<double>(0, 1)(gen);
        }
        double d2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double rx = 1, ry = 1;
            for (std::size_t j = 0; j < n; ++j) {
                if (x[j] < x[i]) ++rx;
                if (y[j] < y[i]) ++ry;
            }
            d2 += (rx - ry) * (rx - ry);
        }
        const double dn = double(n);
        CHECK(spearman(x, y) == doctest::Approx(1 - 6 * d2 / (dn * (dn * dn - 1))).epsilon(1e-12));
    }
}

TEST_CASE("describe uses the sample standard deviation") {
    const auto s = describe(Vec{2, 4, 4, 4, 5, 5, 7, 9});
    CHECK(s.mean == 5);
    CHECK(s.sd == doctest::Approx(std::sqrt(32.0 / 7.0)));
    CHECK(s.min == 2);
    CHECK(s.max == 9);
}

TEST_CASE("ICC from components") {
    CHECK(icc_from_components(10.48, 214.36, 49) == doctest::Approx(0.7055).epsilon(1e-3));
    CHECK(icc_from_components(0, 214.36, 49) == 0);
    CHECK(icc_from_components(5, 1e-12, 49) == doctest::Approx(1));
}

namespace {

std::vector<corpus::RatingRecord> simulate_grid(std::mt19937_64& gen, std::size_t subjects, int chapters,
                                                double s2c, double s2s, double s2e) {
    std::normal_distribution<double> z;
    std::vector<double> ce(static_cast<std::size_t>(chapters));
    for (auto& c : ce) c = std::sqrt(s2c) * z(gen);
    std::vector<corpus::RatingRecord> out;
    for (std::size_t s = 0; s < subjects; ++s) {
        const double se = std::sqrt(s2s) * z(gen);
        for (int c = 1; c <= chapters; ++c)
            out.push_back({"p" + std::to_string(s), c, 60 + ce[static_cast<std::size_t>(c - 1)] + se + std::sqrt(s2e) * z(gen),
                           false, false});
    }
    return out;
}

}  // namespace

TEST_CASE("moment estimates are unbiased on simulated balanced grids") {
    std::mt19937_64 gen(2718);
    const double s2c = 10.48, s2s = 229.95, s2e = 214.36;
    double mc = 0, ms = 0, me = 0;
    const int reps = 200;
    testing::LogCapture quiet;
    for (int r = 0; r < reps; ++r) {
        const auto vc = icc_mean_ratings(simulate_grid(gen, 49, 27, s2c, s2s, s2e));
        mc += vc.sigma2_chapter / reps;
        ms += vc.sigma2_subject / reps;
        me += vc.sigma2_residual / reps;
        CHECK(vc.k_raters == 49);
        CHECK(vc.n_chapters == 27);
    }
    CHECK(mc == doctest::Approx(s2c).epsilon(0.12));
    CHECK(ms == doctest::Approx(s2s).epsilon(0.05));
    CHECK(me == doctest::Approx(s2e).epsilon(0.02));
}

TEST_CASE("ANOVA sums of squares partition the total") {
    std::mt19937_64 gen(5);
    const auto grid = simulate_grid(gen, 6, 5, 25, 25, 1);
    const auto vc = icc_mean_ratings(grid);
    // Rebuild the mean squares from the components and compare with a direct decomposition.
    double grand = 0;
    for (const auto& r : grid) grand += r.curiosity / double(grid.size());
    double total = 0;
    for (const auto& r : grid) total += (r.curiosity - grand) * (r.curiosity - grand);
    const double ms_e = vc.sigma2_residual, ms_c = vc.sigma2_chapter * 6 + ms_e, ms_s = vc.sigma2_subject * 5 + ms_e;
    CHECK(ms_c * 4 + ms_s * 5 + ms_e * 20 == doctest::Approx(total).epsilon(1e-10));
}

TEST_CASE("unbalanced grids are rejected") {
    std::mt19937_64 gen(6);
    auto grid = simulate_grid(gen, 4, 3, 1, 1, 1);
    grid.pop_back();
    try {
        icc_mean_ratings(grid);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("every chapter") != std::string::npos);
    }
}

TEST_CASE("feature assembly and processing") {
    const int n = 6;
    std::vector<corpus::ChapterCuriosity> cur;
    std::vector<topics::ChapterTopicStats> ts;
    std::vector<homology::BettiCounts> betti;
    std::array<DistanceSeries, 3> dist;
    for (int c = 1; c <= n; ++c) {
        cur.push_back({c, 50.0 + c, 10});
        topics::ChapterTopicStats s;
        s.chapter_index = c;
        s.n_novel = static_cast<std::size_t>(c % 3);
        ts.push_back(s);
        betti.push_back({static_cast<std::size_t>(c), static_cast<std::size_t>(c * c % 5), 0});
        for (auto& d : dist) {
            d.bottleneck.push_back(0.1 * c);
            d.wasserstein.push_back(0.2 * (c % 2));
        }
    }
    const auto raw = assemble_features(cur, ts, betti, dist);
    CHECK(raw.columns == feature_columns());
    CHECK(raw.column("n_novel_topics") == Vec{1, 2, 0, 1, 2, 0});
    CHECK(raw.column("beta1") == Vec{1, 4, 4, 1, 0, 1});

    const auto processed = process_features(raw);
    CHECK(processed.column("mean_curiosity") == raw.column("mean_curiosity"));
    const Vec x = {1, 2, 3, 4, 5, 6};
    CHECK(processed.column("beta1") == winsorize(detrend(raw.column("beta1"), x)));
    for (double v : processed.column("beta0")) CHECK(v == doctest::Approx(0).scale(1));

    const auto back = FeatureTable::from_table(processed.to_table());
    CHECK(back.chapters == processed.chapters);
    for (const auto& c : feature_columns()) CHECK(back.column(c) == processed.column(c));

    ts.pop_back();
    CHECK_THROWS_AS(assemble_features(cur, ts, betti, dist), InputError);
}

TEST_CASE("spearman matrix marks undefined entries") {
    FeatureTable t;
    t.columns = {"a", "b", "c"};
    t.values = {{"a", {1, 2, 3, 4}}, {"b", {2, 1, 4, 3}}, {"c", {5, 5, 5, 5}}};
    t.chapters = {1, 2, 3, 4};
    const auto m = spearman_matrix(t, {"a", "b", "c"});
    CHECK(m.at(0, 0) == 1);
    CHECK(m.at(0, 1) == doctest::Approx(0.6));
    CHECK(m.at(1, 0) == m.at(0, 1));
    CHECK(std::isnan(m.at(0, 2)));
}
