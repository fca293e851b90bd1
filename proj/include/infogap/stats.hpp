#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "infogap/corpus.hpp"
#include "infogap/diagdist.hpp"
#include "infogap/homology.hpp"
#include "infogap/topics.hpp"
#include "infogap/util.hpp"

namespace infogap::stats {

struct DistanceSeries {
    std::vector<double> bottleneck;
    std::vector<double> wasserstein;
};

// Entry n >= 2 compares snapshot n-1 with snapshot n; entry 1 compares the
// first snapshot with the empty diagram. Needs at least 2 snapshots.
DistanceSeries consecutive_distances(std::span<const homology::PersistenceDiagram> series,
                                     const diagdist::DiagramDistanceConfig& cfg = {});

// OLS residuals of y on x (x defaults to 1..n). Needs n >= 3.
std::vector<double> detrend(std::span<const double> y);
std::vector<double> detrend(std::span<const double> y, std::span<const double> x);

// Percentile with linear interpolation between order statistics (type 7).
double quantile(std::span<const double> values, double probability);

std::vector<double> winsorize(std::span<const double> values, double lo_percent = 2.5, double hi_percent = 97.5);

std::vector<double> midranks(std::span<const double> values);
double pearson(std::span<const double> x, std::span<const double> y);
// Throws DomainError when either variable has constant ranks.
double spearman(std::span<const double> x, std::span<const double> y);

struct Summary {
    double mean = 0, sd = 0, min = 0, max = 0;
};
Summary describe(std::span<const double> values);

struct VarianceComponents {
    double sigma2_chapter = 0;
    double sigma2_subject = 0;
    double sigma2_residual = 0;
    std::size_t k_raters = 0;
    std::size_t n_chapters = 0;
    double icc = 0;
    double grand_mean = 0;
    double grand_mean_se = 0;
};

double icc_from_components(double sigma2_chapter, double sigma2_residual, std::size_t k_raters);

// Balanced two-way crossed random-effects ANOVA (chapter x subject, one
// rating per cell). Throws InputError for an unbalanced grid.
VarianceComponents icc_mean_ratings(std::span<const corpus::RatingRecord> ratings);

// ---- feature table --------------------------------------------------------

inline const std::vector<std::string>& topological_columns() {
    static const std::vector<std::string> names = {
        "beta0",        "beta1",        "beta2",        "dist_W_beta0", "dist_W_beta1",
        "dist_W_beta2", "dist_B_beta0", "dist_B_beta1", "dist_B_beta2"};
    return names;
}

struct FeatureTable {
    std::vector<int> chapters;
    std::vector<std::string> columns;  // fixed order, see feature_columns()
    std::map<std::string, std::vector<double>> values;

    const std::vector<double>& column(const std::string& name) const;
    util::Table to_table() const;
    static FeatureTable from_table(const util::Table& table);
};

// chapter_index, mean_curiosity, n_novel_topics, then topological_columns().
const std::vector<std::string>& feature_columns();

// Assembles the raw per-chapter table; all inputs cover chapters 1..N.
FeatureTable assemble_features(std::span<const corpus::ChapterCuriosity> curiosity,
                               std::span<const topics::ChapterTopicStats> topic_stats,
                               std::span<const homology::BettiCounts> betti,
                               const std::array<DistanceSeries, 3>& distances);

// Detrends then winsorizes the topological columns; other columns unchanged.
FeatureTable process_features(const FeatureTable& raw, double lo_percent = 2.5, double hi_percent = 97.5);

// Spearman matrix over the given columns (row-major, names on both axes).
struct CorrelationMatrix {
    std::vector<std::string> names;
    std::vector<double> values;
    double at(std::size_t i, std::size_t j) const { return values[i * names.size() + j]; }
};
CorrelationMatrix spearman_matrix(const FeatureTable& table, const std::vector<std::string>& names);

}  // namespace infogap::stats
