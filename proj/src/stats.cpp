#include "infogap/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "infogap/error.hpp"
#include "infogap/log.hpp"

namespace infogap::stats {

DistanceSeries consecutive_distances(std::span<const homology::PersistenceDiagram> series,
                                     const diagdist::DiagramDistanceConfig& cfg) {
    if (series.size() < 2) throw DomainError("consecutive distances need at least 2 snapshots");
    DistanceSeries out;
    homology::PersistenceDiagram empty;
    empty.dim = series.front().dim;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& previous = i == 0 ? empty : series[i - 1];
        out.bottleneck.push_back(diagdist::bottleneck(previous, series[i]));
        out.wasserstein.push_back(diagdist::wasserstein(previous, series[i], cfg));
    }
    return out;
}

std::vector<double> detrend(std::span<const double> y) {
    std::vector<double> x(y.size());
    std::iota(x.begin(), x.end(), 1.0);
    return detrend(y, x);
}

std::vector<double> detrend(std::span<const double> y, std::span<const double> x) {
    const std::size_t n = y.size();
    if (n < 3) throw DomainError("detrending needs at least 3 values");
    if (x.size() != n) throw DomainError("detrend: x and y differ in length");
    const double xm = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double ym = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - xm) * (x[i] - xm);
        sxy += (x[i] - xm) * (y[i] - ym);
    }
    const double slope = sxx > 0 ? sxy / sxx : 0.0;
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = (y[i] - ym) - slope * (x[i] - xm);
    return r;
}

double quantile(std::span<const double> values, double probability) {
    if (values.empty()) throw DomainError("quantile of an empty series");
    if (!(probability >= 0 && probability <= 1)) throw DomainError("quantile probability outside [0, 1]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = (static_cast<double>(sorted.size()) - 1) * probability;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> winsorize(std::span<const double> values, double lo_percent, double hi_percent) {
    if (!(lo_percent >= 0 && lo_percent < hi_percent && hi_percent <= 100))
        throw DomainError("winsorize needs 0 <= lo < hi <= 100");
    std::vector<double> out(values.begin(), values.end());
    if (out.empty()) return out;
    const double lo = quantile(values, lo_percent / 100.0);
    const double hi = quantile(values, hi_percent / 100.0);
    for (double& v : out) v = std::clamp(v, lo, hi);
    return out;
}

std::vector<double> midranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (y.size() != n) throw DomainError("correlation of series with different lengths");
    if (n < 3) throw DomainError("correlation needs at least 3 observations");
    const double xm = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double ym = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - xm) * (x[i] - xm);
        syy += (y[i] - ym) * (y[i] - ym);
        sxy += (x[i] - xm) * (y[i] - ym);
    }
    if (sxx == 0 || syy == 0) throw DomainError("correlation undefined: a variable is constant");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DomainError("correlation of series with different lengths");
    auto rx = midranks(x), ry = midranks(y);
    return pearson(rx, ry);
}

Summary describe(std::span<const double> values) {
    Summary s;
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = values.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    return s;
}

double icc_from_components(double sigma2_chapter, double sigma2_residual, std::size_t k_raters) {
    if (k_raters == 0) throw DomainError("ICC needs at least one rater");
    if (sigma2_chapter < 0 || sigma2_residual < 0) throw DomainError("variance components must be >= 0");
    const double denominator = sigma2_chapter + sigma2_residual / static_cast<double>(k_raters);
    return denominator > 0 ? sigma2_chapter / denominator : 0.0;
}

VarianceComponents icc_mean_ratings(std::span<const corpus::RatingRecord> ratings) {
    std::map<std::string, std::size_t> subject_index;
    std::map<int, std::size_t> chapter_index;
    for (const auto& r : ratings) {
        subject_index.emplace(r.participant_id, 0);
        chapter_index.emplace(r.chapter_index, 0);
    }
    std::size_t next = 0;
    for (auto& [k, v] : subject_index) v = next++;
    next = 0;
    for (auto& [k, v] : chapter_index) v = next++;
    const std::size_t S = subject_index.size(), C = chapter_index.size();
    if (S < 2 || C < 2) throw InputError("ICC needs at least 2 subjects and 2 chapters");
    if (ratings.size() != S * C)
        throw InputError("unbalanced rating grid: " + std::to_string(ratings.size()) + " records for " +
                         std::to_string(S) + " subjects x " + std::to_string(C) +
                         " chapters; keep only participants who rated every chapter");

    std::vector<double> y(S * C, std::nan(""));
    for (const auto& r : ratings) {
        double& cell = y[subject_index[r.participant_id] * C + chapter_index[r.chapter_index]];
        if (!std::isnan(cell)) throw InputError("duplicate rating for participant " + r.participant_id);
        cell = r.curiosity;
    }
    for (double v : y)
        if (std::isnan(v))
            throw InputError("unbalanced rating grid: missing cells; keep only participants who rated every chapter");

    std::vector<double> subject_mean(S, 0.0), chapter_mean(C, 0.0);
    double grand = 0;
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t c = 0; c < C; ++c) {
            subject_mean[s] += y[s * C + c];
            chapter_mean[c] += y[s * C + c];
            grand += y[s * C + c];
        }
    for (auto& m : subject_mean) m /= static_cast<double>(C);
    for (auto& m : chapter_mean) m /= static_cast<double>(S);
    grand /= static_cast<double>(S * C);

    double ss_c = 0, ss_s = 0, ss_e = 0;
    for (std::size_t c = 0; c < C; ++c) ss_c += (chapter_mean[c] - grand) * (chapter_mean[c] - grand);
    ss_c *= static_cast<double>(S);
    for (std::size_t s = 0; s < S; ++s) ss_s += (subject_mean[s] - grand) * (subject_mean[s] - grand);
    ss_s *= static_cast<double>(C);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t c = 0; c < C; ++c) {
            double e = y[s * C + c] - subject_mean[s] - chapter_mean[c] + grand;
            ss_e += e * e;
        }
    const double ms_c = ss_c / static_cast<double>(C - 1);
    const double ms_s = ss_s / static_cast<double>(S - 1);
    const double ms_e = ss_e / static_cast<double>((C - 1) * (S - 1));

    VarianceComponents vc;
    vc.k_raters = S;
    vc.n_chapters = C;
    vc.sigma2_residual = ms_e;
    vc.sigma2_chapter = (ms_c - ms_e) / static_cast<double>(S);
    vc.sigma2_subject = (ms_s - ms_e) / static_cast<double>(C);
    if (vc.sigma2_chapter < 0) {
        log::warn("negative chapter variance component truncated at 0");
        vc.sigma2_chapter = 0;
    }
    if (vc.sigma2_subject < 0) {
        log::warn("negative subject variance component truncated at 0");
        vc.sigma2_subject = 0;
    }
    vc.icc = icc_from_components(vc.sigma2_chapter, vc.sigma2_residual, S);
    vc.grand_mean = grand;
    vc.grand_mean_se = std::sqrt(vc.sigma2_chapter / static_cast<double>(C) + vc.sigma2_subject / static_cast<double>(S) +
                                 vc.sigma2_residual / static_cast<double>(C * S));
    return vc;
}

const std::vector<std::string>& feature_columns() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v = {"chapter_index", "mean_curiosity", "n_novel_topics"};
        for (const auto& t : topological_columns()) v.push_back(t);
        return v;
    }();
    return names;
}

const std::vector<double>& FeatureTable::column(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw InputError("feature table has no column '" + name + "'");
    return it->second;
}

util::Table FeatureTable::to_table() const {
    util::Table table;
    table.header = columns;
    for (std::size_t r = 0; r < chapters.size(); ++r) {
        std::vector<std::string> row;
        for (const auto& c : columns)
            row.push_back(c == "chapter_index" ? std::to_string(chapters[r]) : util::format_double(values.at(c)[r]));
        table.rows.push_back(std::move(row));
    }
    return table;
}

FeatureTable FeatureTable::from_table(const util::Table& table) {
    FeatureTable f;
    f.columns = table.header;
    const std::size_t chapter_col = table.column("chapter_index");
    for (const auto& c : f.columns) f.values[c];
    for (const auto& row : table.rows) {
        f.chapters.push_back(static_cast<int>(util::parse_int(row[chapter_col])));
        for (std::size_t i = 0; i < f.columns.size(); ++i) f.values[f.columns[i]].push_back(util::parse_double(row[i]));
    }
    return f;
}

FeatureTable assemble_features(std::span<const corpus::ChapterCuriosity> curiosity,
                               std::span<const topics::ChapterTopicStats> topic_stats,
                               std::span<const homology::BettiCounts> betti,
                               const std::array<DistanceSeries, 3>& distances) {
    const std::size_t n = betti.size();
    auto check = [&](std::size_t size, const char* what) {
        if (size != n)
            throw InputError(std::string("feature assembly: ") + what + " covers " + std::to_string(size) +
                             " chapters, snapshots cover " + std::to_string(n));
    };
    check(curiosity.size(), "curiosity");
    check(topic_stats.size(), "topic statistics");
    for (const auto& d : distances) {
        check(d.bottleneck.size(), "bottleneck series");
        check(d.wasserstein.size(), "wasserstein series");
    }

    FeatureTable f;
    f.columns = feature_columns();
    for (const auto& c : f.columns) f.values[c];
    for (std::size_t i = 0; i < n; ++i) {
        const int chapter = static_cast<int>(i) + 1;
        if (curiosity[i].chapter_index != chapter || topic_stats[i].chapter_index != chapter)
            throw InputError("feature assembly: chapter " + std::to_string(chapter) + " is missing or out of order");
        f.chapters.push_back(chapter);
        f.values["chapter_index"].push_back(chapter);
        f.values["mean_curiosity"].push_back(curiosity[i].mean_curiosity);
        f.values["n_novel_topics"].push_back(static_cast<double>(topic_stats[i].n_novel));
        f.values["beta0"].push_back(static_cast<double>(betti[i].beta0));
        f.values["beta1"].push_back(static_cast<double>(betti[i].beta1));
        f.values["beta2"].push_back(static_cast<double>(betti[i].beta2));
        for (int d = 0; d < 3; ++d) {
            const std::string suffix = "_beta" + std::to_string(d);
            f.values["dist_W" + suffix].push_back(distances[static_cast<std::size_t>(d)].wasserstein[i]);
            f.values["dist_B" + suffix].push_back(distances[static_cast<std::size_t>(d)].bottleneck[i]);
        }
    }
    return f;
}

FeatureTable process_features(const FeatureTable& raw, double lo_percent, double hi_percent) {
    FeatureTable out = raw;
    std::vector<double> x(raw.chapters.begin(), raw.chapters.end());
    for (const auto& name : topological_columns()) {
        auto residuals = detrend(raw.column(name), x);
        out.values[name] = winsorize(residuals, lo_percent, hi_percent);
    }
    return out;
}

CorrelationMatrix spearman_matrix(const FeatureTable& table, const std::vector<std::string>& names) {
    CorrelationMatrix m;
    m.names = names;
    const std::size_t k = names.size();
    m.values.assign(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double r;
            if (i == j) {
                r = 1.0;
            } else {
                try {
                    r = spearman(table.column(names[i]), table.column(names[j]));
                } catch (const DomainError&) {
                    r = std::nan("");
                }
            }
            m.values[i * k + j] = m.values[j * k + i] = r;
        }
    return m;
}

}  // namespace infogap::stats
