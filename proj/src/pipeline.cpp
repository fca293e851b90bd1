#include "infogap/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "infogap/corpus.hpp"
#include "infogap/diagdist.hpp"
#include "infogap/embed.hpp"
#include "infogap/figures.hpp"
#include "infogap/gam.hpp"
#include "infogap/log.hpp"
#include "infogap/rng.hpp"
#include "infogap/stats.hpp"
#include "infogap/topics.hpp"

#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wshadow"
#include <json.hpp>
#pragma GCC diagnostic pop

namespace infogap::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages = {Stage::segment,  Stage::embed,     Stage::reduce,   Stage::cluster,
                                              Stage::network,  Stage::homology,  Stage::distances, Stage::features,
                                              Stage::fit,      Stage::report};
    return stages;
}

std::string stage_name(Stage stage) {
    switch (stage) {
        case Stage::segment: return "segment";
        case Stage::embed: return "embed";
        case Stage::reduce: return "reduce";
        case Stage::cluster: return "cluster";
        case Stage::network: return "network";
        case Stage::homology: return "homology";
        case Stage::distances: return "distances";
        case Stage::features: return "features";
        case Stage::fit: return "fit";
        case Stage::report: return "report";
    }
    return "?";
}

std::optional<Stage> parse_stage(std::string_view name) {
    for (Stage s : all_stages())
        if (stage_name(s) == name) return s;
    return std::nullopt;
}

// ---- table helpers ----------------------------------------------------------------

namespace {

std::string fmt(double v) { return util::format_double(v); }

std::string fmt(std::size_t v) { return std::to_string(v); }

util::Table read_artifact(const fs::path& dir, const std::string& name) { return util::read_table(dir / name); }

int chapter_count(std::span<const corpus::TextSegment> segments) {
    int last = 0;
    for (const auto& s : segments) last = std::max(last, s.chapter_index);
    return last;
}

}  // namespace

util::Table series_table(const network::TopicGraphSeries& series) {
    util::Table t;
    t.header = {"chapter_index", "kind", "u", "v", "weight"};
    const network::TopicGraph empty;
    for (std::size_t i = 0; i < series.snapshots.size(); ++i) {
        const auto& g = series.snapshots[i];
        const auto& prev = i == 0 ? empty : series.snapshots[i - 1];
        const std::string chapter = std::to_string(series.chapters[i]);
        t.rows.push_back({chapter, "chapter", "-", "-", "-"});
        for (auto v : g.vertices())
            if (!prev.has_vertex(v)) t.rows.push_back({chapter, "vertex", std::to_string(v), "-", "-"});
        for (const auto& e : g.edges())
            if (!prev.has_edge(e.u, e.v))
                t.rows.push_back({chapter, "edge", std::to_string(e.u), std::to_string(e.v), fmt(e.weight)});
    }
    return t;
}

network::TopicGraphSeries parse_series(const util::Table& table) {
    const std::size_t cc = table.column("chapter_index"), kc = table.column("kind"), uc = table.column("u"),
                      vc = table.column("v"), wc = table.column("weight");
    network::TopicGraphSeries series;
    network::TopicGraph current;
    for (const auto& row : table.rows) {
        const std::string& kind = row[kc];
        if (kind == "chapter") {
            if (!series.chapters.empty()) series.snapshots.push_back(current);
            series.chapters.push_back(static_cast<int>(util::parse_int(row[cc])));
        } else if (kind == "vertex") {
            current.add_vertex(util::parse_int(row[uc]));
        } else if (kind == "edge") {
            current.add_edge(util::parse_int(row[uc]), util::parse_int(row[vc]), util::parse_double(row[wc]));
        } else {
            throw InputError("network series: unknown row kind '" + kind + "'");
        }
    }
    if (!series.chapters.empty()) series.snapshots.push_back(current);
    return series;
}

util::Table diagrams_table(const std::vector<std::vector<homology::PersistenceDiagram>>& per_chapter) {
    util::Table t;
    t.header = {"chapter_index", "dim", "birth", "death"};
    for (std::size_t c = 0; c < per_chapter.size(); ++c)
        for (const auto& d : per_chapter[c])
            for (const auto& p : d.points)
                t.rows.push_back({std::to_string(c + 1), std::to_string(d.dim), fmt(p.birth), fmt(p.death)});
    return t;
}

namespace {

// Diagrams for chapters 1..n_chapters from diagrams.tsv.
std::vector<std::array<homology::PersistenceDiagram, 3>> parse_diagrams(const util::Table& t, int n_chapters) {
    std::vector<std::array<homology::PersistenceDiagram, 3>> out(static_cast<std::size_t>(n_chapters));
    for (auto& a : out)
        for (int d = 0; d < 3; ++d) a[static_cast<std::size_t>(d)].dim = d;
    const std::size_t cc = t.column("chapter_index"), dc = t.column("dim"), bc = t.column("birth"),
                      ec = t.column("death");
    for (const auto& row : t.rows) {
        const long long c = util::parse_int(row[cc]), d = util::parse_int(row[dc]);
        if (c < 1 || c > n_chapters || d < 0 || d > 2) throw InputError("diagrams table: row out of range");
        out[static_cast<std::size_t>(c - 1)][static_cast<std::size_t>(d)].points.push_back(
            {util::parse_double(row[bc]), util::parse_double(row[ec])});
    }
    return out;
}

// ---- manifest -----------------------------------------------------------------------

struct StageContext {
    const config::PipelineConfig& cfg;
    fs::path dir;
    json canonical;
};

struct StageDef {
    Stage stage;
    std::vector<std::string> config_keys;  // canonical config sections the stage reads
    std::function<std::vector<fs::path>(const StageContext&)> inputs;
    std::function<std::vector<std::string>(const StageContext&)> outputs;  // relative to out dir
    std::function<void(const StageContext&)> run;
};

std::string params_hash(const StageContext& ctx, const StageDef& def) {
    json p = json::object();
    p["seed"] = ctx.canonical.at("seed");
    for (const auto& k : def.config_keys) p[k] = ctx.canonical.at(k);
    return util::hex64(util::fnv1a(p.dump()));
}

std::string file_hash(const fs::path& p) { return util::hex64(util::hash_file(p)); }

// ---- stages -------------------------------------------------------------------------

void stage_segment(const StageContext& ctx) {
    const std::string raw = util::read_file(ctx.cfg.novel_path);
    const auto segments = corpus::segment_novel(raw, ctx.cfg.clean, ctx.cfg.segmenter);
    if (segments.empty()) throw InputError("segmentation produced no segments");
    util::write_table(ctx.dir / "segments.tsv", corpus::segments_table(segments));
    log::info("segment: " + std::to_string(segments.size()) + " segments over " +
              std::to_string(chapter_count(segments)) + " chapters");
}

std::vector<corpus::TextSegment> load_segments(const fs::path& dir) {
    return corpus::parse_segments(read_artifact(dir, "segments.tsv"));
}

void stage_embed(const StageContext& ctx) {
    const auto segments = load_segments(ctx.dir);
    std::shared_ptr<embed::EmbeddingCache> cache;
    if (ctx.cfg.embedder.kind == embed::EmbedderKind::remote) {
        const fs::path file =
            ctx.cfg.embedding_cache.empty() ? ctx.dir / "embedding_cache.vec" : ctx.cfg.embedding_cache;
        cache = std::make_shared<embed::EmbeddingCache>(file);
    }
    const auto matrix = embed::embed_segments(segments, ctx.cfg.embedder, cache);
    if (cache) cache->flush();
    embed::save_store(matrix, ctx.dir / "embeddings.vec");
    log::info("embed: " + std::to_string(matrix.rows()) + " x " + std::to_string(matrix.dim()));
}

void stage_reduce(const StageContext& ctx) {
    const auto original = embed::load_store(ctx.dir / "embeddings.vec");
    util::Table pca;
    pca.header = {"component", "explained_variance_ratio"};
    if (ctx.cfg.reduction.method == topics::ReductionMethod::pca) {
        const auto result = topics::reduce_pca(original, ctx.cfg.reduction);
        embed::save_store(result.reduced, ctx.dir / "reduced.vec");
        for (Eigen::Index i = 0; i < result.explained_variance_ratio.size(); ++i)
            pca.rows.push_back({std::to_string(i + 1), fmt(result.explained_variance_ratio(i))});
    } else {
        embed::save_store(topics::load_external_reduction(ctx.cfg.reduction, original), ctx.dir / "reduced.vec");
    }
    util::write_table(ctx.dir / "pca.tsv", pca);
}

void stage_cluster(const StageContext& ctx) {
    const auto segments = load_segments(ctx.dir);
    const auto reduced = embed::load_store(ctx.dir / "reduced.vec");
    const auto original = embed::load_store(ctx.dir / "embeddings.vec");
    auto model = topics::hdbscan(reduced, ctx.cfg.cluster);
    model.centroids = topics::topic_centroids(model, original);
    util::write_table(ctx.dir / "topics.tsv", topics::assignment_table(model));
    embed::save_store(model.centroids, ctx.dir / "centroids.vec");

    const auto stats = topics::chapter_topic_stats(model, segments);
    util::Table counts, freq;
    counts.header = {"chapter_index", "n_topics", "n_novel"};
    freq.header = {"topic_id", "chapter_index", "log2_count"};
    std::map<topics::TopicId, std::map<int, double>> by_topic;
    for (const auto& s : stats) {
        counts.rows.push_back({std::to_string(s.chapter_index), fmt(s.n_topics), fmt(s.n_novel)});
        for (const auto& [t, v] : s.freq_log2) by_topic[t][s.chapter_index] = v;
    }
    for (const auto& [t, row] : by_topic)
        for (const auto& [c, v] : row) freq.rows.push_back({std::to_string(t), std::to_string(c), fmt(v)});
    util::write_table(ctx.dir / "chapter_topics.tsv", counts);
    util::write_table(ctx.dir / "topic_freq.tsv", freq);
    log::info("cluster: " + std::to_string(model.topic_ids.size()) + " topics, " + std::to_string(model.n_noise()) +
              " noise segments");
}

void stage_network(const StageContext& ctx) {
    const auto segments = load_segments(ctx.dir);
    const auto model = topics::parse_assignment(read_artifact(ctx.dir, "topics.tsv"));
    const auto centroids = embed::load_store(ctx.dir / "centroids.vec");
    std::vector<network::ChunkTopic> chunks;
    for (const auto& s : segments) {
        auto t = model.topic_of(s.segment_id);
        chunks.push_back({s.segment_id, s.chapter_index, t && *t != topics::kNoise ? t : std::nullopt});
    }
    const auto series = network::build_series(chunks, centroids, chapter_count(segments));
    util::write_table(ctx.dir / "network_series.tsv", series_table(series));
    network::export_graph(series.snapshots.back(), ctx.dir / "graph_final.tsv");

    util::Table metrics;
    metrics.header = {"chapter_index",  "n_vertices",        "n_edges",           "degree_mean",
                      "degree_sd",      "degree_median",     "degree_mad",        "degree_min",
                      "degree_max",     "weighted_diameter", "unweighted_diameter", "avg_shortest_path",
                      "clustering",     "small_worldness",   "lognormal_meanlog", "lognormal_sdlog",
                      "disconnected",   "component_size"};
    for (std::size_t i = 0; i < series.snapshots.size(); ++i) {
        const auto& g = series.snapshots[i];
        std::vector<std::string> row = {std::to_string(series.chapters[i]), fmt(g.vertex_count()),
                                        fmt(g.edge_count())};
        try {
            const auto m = network::network_metrics(g, Rng::derive(ctx.cfg.seed, 1000 + i), ctx.cfg.random_baselines);
            for (double v : {m.degree_mean, m.degree_sd, m.degree_median, m.degree_mad, m.degree_min, m.degree_max,
                             m.weighted_diameter, m.unweighted_diameter, m.avg_shortest_path,
                             m.clustering_coefficient, m.small_worldness, m.lognormal_meanlog, m.lognormal_sdlog})
                row.push_back(fmt(v));
            row.push_back(m.disconnected ? "1" : "0");
            row.push_back(fmt(m.component_size));
        } catch (const DomainError&) {
            while (row.size() < metrics.header.size()) row.push_back("nan");
        }
        metrics.rows.push_back(std::move(row));
    }
    util::write_table(ctx.dir / "network_metrics.tsv", metrics);
    log::info("network: final snapshot " + std::to_string(series.snapshots.back().vertex_count()) + " vertices, " +
              std::to_string(series.snapshots.back().edge_count()) + " edges");
}

void stage_homology(const StageContext& ctx) {
    const auto series = parse_series(read_artifact(ctx.dir, "network_series.tsv"));
    const std::size_t n = series.snapshots.size();
    std::vector<std::vector<homology::PersistenceDiagram>> diagrams(n);
    std::vector<std::size_t> essential(n, 0);
    std::vector<char> sentinel(n, 0);
    std::vector<std::exception_ptr> errors(n);
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < n; i += stride) {
            try {
                const auto& g = series.snapshots[i];
                if (g.vertex_count() == 0) {
                    diagrams[i] = {{0, {}, 0}, {1, {}, 0}, {2, {}, 0}};
                    continue;
                }
                const auto dm = homology::geodesic_distances(g);
                sentinel[i] = dm.sentinel_used();
                diagrams[i] = homology::rips_persistence(dm, homology::kMaxHomologyDim);
                for (const auto& d : diagrams[i]) essential[i] += d.essential_excluded;
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(ctx.cfg.workers, n));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work, w, workers);
    work(0, workers);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    util::Table betti;
    betti.header = {"chapter_index", "beta0", "beta1", "beta2", "n_vertices", "essential", "sentinel_used"};
    for (std::size_t i = 0; i < n; ++i) {
        const auto b = homology::betti_counts(diagrams[i]);
        betti.rows.push_back({std::to_string(series.chapters[i]), fmt(b.beta0), fmt(b.beta1), fmt(b.beta2),
                              fmt(series.snapshots[i].vertex_count()), fmt(essential[i]), sentinel[i] ? "1" : "0"});
    }
    util::write_table(ctx.dir / "diagrams.tsv", diagrams_table(diagrams));
    util::write_table(ctx.dir / "betti.tsv", betti);
}

std::vector<homology::BettiCounts> load_betti(const fs::path& dir) {
    const auto t = read_artifact(dir, "betti.tsv");
    const std::size_t c0 = t.column("beta0"), c1 = t.column("beta1"), c2 = t.column("beta2");
    std::vector<homology::BettiCounts> out;
    for (const auto& row : t.rows)
        out.push_back({static_cast<std::size_t>(util::parse_int(row[c0])),
                       static_cast<std::size_t>(util::parse_int(row[c1])),
                       static_cast<std::size_t>(util::parse_int(row[c2]))});
    return out;
}

void stage_distances(const StageContext& ctx) {
    const int n = static_cast<int>(load_betti(ctx.dir).size());
    const auto diagrams = parse_diagrams(read_artifact(ctx.dir, "diagrams.tsv"), n);
    std::array<stats::DistanceSeries, 3> series;
    for (int d = 0; d < 3; ++d) {
        std::vector<homology::PersistenceDiagram> per;
        for (const auto& a : diagrams) per.push_back(a[static_cast<std::size_t>(d)]);
        series[static_cast<std::size_t>(d)] = stats::consecutive_distances(per, ctx.cfg.distances);
    }
    util::Table t;
    t.header = {"chapter_index", "dist_W_beta0", "dist_W_beta1", "dist_W_beta2",
                "dist_B_beta0",  "dist_B_beta1", "dist_B_beta2"};
    for (int c = 0; c < n; ++c) {
        const auto i = static_cast<std::size_t>(c);
        t.rows.push_back({std::to_string(c + 1), fmt(series[0].wasserstein[i]), fmt(series[1].wasserstein[i]),
                          fmt(series[2].wasserstein[i]), fmt(series[0].bottleneck[i]), fmt(series[1].bottleneck[i]),
                          fmt(series[2].bottleneck[i])});
    }
    util::write_table(ctx.dir / "distances.tsv", t);
}

std::vector<corpus::RatingRecord> load_kept_ratings(const config::PipelineConfig& cfg) {
    auto load = corpus::load_ratings(util::read_table(cfg.ratings_path), cfg.rating_columns);
    if (load.rejected) log::warn("ratings: " + std::to_string(load.rejected) + " rows rejected");
    return cfg.naive_only ? corpus::filter_naive(load.records) : load.records;
}

void stage_features(const StageContext& ctx) {
    const auto betti = load_betti(ctx.dir);
    const int n = static_cast<int>(betti.size());
    const auto kept = load_kept_ratings(ctx.cfg);
    const auto curiosity = corpus::mean_curiosity(kept, n);

    const auto counts = read_artifact(ctx.dir, "chapter_topics.tsv");
    std::vector<topics::ChapterTopicStats> topic_stats;
    for (const auto& row : counts.rows) {
        topics::ChapterTopicStats s;
        s.chapter_index = static_cast<int>(util::parse_int(row[counts.column("chapter_index")]));
        s.n_topics = static_cast<std::size_t>(util::parse_int(row[counts.column("n_topics")]));
        s.n_novel = static_cast<std::size_t>(util::parse_int(row[counts.column("n_novel")]));
        topic_stats.push_back(s);
    }
    // Chapters past the last segment-bearing chapter carry no topics.
    while (static_cast<int>(topic_stats.size()) < n) {
        topics::ChapterTopicStats s;
        s.chapter_index = static_cast<int>(topic_stats.size()) + 1;
        topic_stats.push_back(s);
    }

    const auto dist = read_artifact(ctx.dir, "distances.tsv");
    std::array<stats::DistanceSeries, 3> series;
    for (int d = 0; d < 3; ++d) {
        const std::size_t wc = dist.column("dist_W_beta" + std::to_string(d));
        const std::size_t bc = dist.column("dist_B_beta" + std::to_string(d));
        for (const auto& row : dist.rows) {
            series[static_cast<std::size_t>(d)].wasserstein.push_back(util::parse_double(row[wc]));
            series[static_cast<std::size_t>(d)].bottleneck.push_back(util::parse_double(row[bc]));
        }
    }

    util::Table cur;
    cur.header = {"chapter_index", "mean_curiosity", "n_raters"};
    for (const auto& c : curiosity)
        cur.rows.push_back({std::to_string(c.chapter_index), fmt(c.mean_curiosity), fmt(c.n_raters)});
    util::write_table(ctx.dir / "curiosity.tsv", cur);

    const auto raw = stats::assemble_features(curiosity, topic_stats, betti, series);
    const auto processed = stats::process_features(raw, ctx.cfg.features.winsor_lo, ctx.cfg.features.winsor_hi);
    util::write_table(ctx.dir / "features_raw.tsv", raw.to_table());
    util::write_table(ctx.dir / "features.tsv", processed.to_table());

    util::Table desc;
    desc.header = {"variable", "version", "mean", "sd", "min", "max"};
    for (const auto& c : stats::feature_columns()) {
        if (c == "chapter_index") continue;
        for (const auto& [table, label] : {std::pair{&raw, "raw"}, std::pair{&processed, "processed"}}) {
            const auto s = stats::describe(table->column(c));
            desc.rows.push_back({c, label, fmt(s.mean), fmt(s.sd), fmt(s.min), fmt(s.max)});
        }
    }
    util::write_table(ctx.dir / "descriptives.tsv", desc);

    std::vector<std::string> names = {"mean_curiosity", "n_novel_topics", "chapter_index"};
    for (const auto& c : stats::topological_columns()) names.push_back(c);
    const auto corr = stats::spearman_matrix(processed, names);
    util::Table ct;
    ct.header = {"variable"};
    for (const auto& nm : corr.names) ct.header.push_back(nm);
    for (std::size_t i = 0; i < corr.names.size(); ++i) {
        std::vector<std::string> row = {corr.names[i]};
        for (std::size_t j = 0; j < corr.names.size(); ++j) row.push_back(fmt(corr.at(i, j)));
        ct.rows.push_back(std::move(row));
    }
    util::write_table(ctx.dir / "correlations.tsv", ct);

    util::Table icc;
    icc.header = {"quantity", "value"};
    try {
        const auto vc = stats::icc_mean_ratings(kept);
        icc.rows = {{"sigma2_chapter", fmt(vc.sigma2_chapter)}, {"sigma2_subject", fmt(vc.sigma2_subject)},
                    {"sigma2_residual", fmt(vc.sigma2_residual)}, {"k_raters", fmt(vc.k_raters)},
                    {"n_chapters", fmt(vc.n_chapters)},          {"icc", fmt(vc.icc)},
                    {"grand_mean", fmt(vc.grand_mean)},          {"grand_mean_se", fmt(vc.grand_mean_se)}};
    } catch (const InputError& e) {
        log::warn(std::string("ICC not computed: ") + e.what());
    }
    util::write_table(ctx.dir / "icc.tsv", icc);
}

ordered_json model_json(const gam::GamModel& m, const std::vector<std::size_t>& k,
                        const gam::PermutationResult& perm) {
    auto num = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); };
    ordered_json terms = ordered_json::array();
    for (std::size_t j = 0; j < m.terms.size(); ++j)
        terms.push_back({{"covariate", m.terms[j]}, {"k", k[j]}, {"edf", num(m.edf[j])}, {"lambda", num(m.lambda[j])}});
    return {{"n", m.n},
            {"terms", terms},
            {"edf_total", num(m.edf_total)},
            {"deviance", num(m.deviance)},
            {"null_deviance", num(m.null_deviance)},
            {"deviance_explained", num(m.deviance_explained)},
            {"r2_adj", num(m.r2_adj)},
            {"scale", num(m.scale)},
            {"reml", num(m.reml)},
            {"permutation",
             {{"n_perm", perm.n_perm},
              {"p_deviance_explained", num(perm.p_deviance_explained)},
              {"p_r2_adj", num(perm.p_r2_adj)}}}};
}

void stage_fit(const StageContext& ctx) {
    const auto features = stats::FeatureTable::from_table(read_artifact(ctx.dir, "features.tsv"));
    const auto& y = features.column("mean_curiosity");
    gam::Columns data;
    for (const auto& c : features.columns) data[c] = features.column(c);
    const auto& mc = ctx.cfg.model;

    auto fit = [&](const std::vector<std::string>& names, std::uint64_t stream) {
        std::vector<gam::SmoothTermSpec> specs;
        for (const auto& nm : names) specs.push_back({nm, mc.basis_dim});
        const gam::GamProblem problem(data, specs, mc.gam);
        auto model = problem.fit(y);
        std::vector<std::size_t> k;
        for (const auto& t : problem.terms()) k.push_back(t.basis.k());
        auto perm = gam::permutation_test(y, data, specs, mc.gam, mc.n_permutations,
                                          Rng::derive(ctx.cfg.seed, stream), ctx.cfg.workers);
        return std::tuple{model, k, perm};
    };
    const auto [null_model, null_k, null_perm] = fit(mc.null_terms, 1);
    const auto [full_model, full_k, full_perm] = fit(mc.resolved_full_terms(), 2);
    const auto cmp = gam::compare_models(null_model, full_model);

    ordered_json summary;
    summary["response"] = "mean_curiosity";
    summary["family"] = "gaussian";
    summary["method"] = "REML";
    summary["gamma"] = mc.gam.gamma;
    summary["null"] = model_json(null_model, null_k, null_perm);
    summary["full"] = model_json(full_model, full_k, full_perm);
    summary["comparison"] = {{"chi2", cmp.chi2}, {"df", cmp.df}, {"p_value", cmp.p_value}};
    util::write_file(ctx.dir / "model_summary.json", summary.dump(2) + "\n");
    log::info("fit: deviance explained null " + fmt(null_model.deviance_explained) + ", full " +
              fmt(full_model.deviance_explained));
}

std::string pct(double v) {
    if (!std::isfinite(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100 * v);
    return buf;
}

std::string fixed(double v, int digits = 3) {
    if (!std::isfinite(v)) return "n/a";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

double jnum(const json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

void stage_report(const StageContext& ctx) {
    const fs::path& dir = ctx.dir;
    const auto segments = load_segments(dir);
    const auto topics_t = read_artifact(dir, "topics.tsv");
    const auto metrics = read_artifact(dir, "network_metrics.tsv");
    const auto betti = read_artifact(dir, "betti.tsv");
    const auto desc = read_artifact(dir, "descriptives.tsv");
    const auto icc = read_artifact(dir, "icc.tsv");
    const json summary = json::parse(util::read_file(dir / "model_summary.json"));

    std::vector<double> words;
    for (const auto& s : segments) words.push_back(static_cast<double>(s.word_count));
    std::size_t noise = 0;
    std::set<std::string> topic_ids;
    for (const auto& row : topics_t.rows) {
        if (row[1] == "noise")
            ++noise;
        else
            topic_ids.insert(row[1]);
    }

    std::ostringstream md;
    md << "# Curiosity and topic-network topology\n\n";
    md << "Config hash `" << config::config_hash(ctx.cfg) << "`, seed " << ctx.cfg.seed << ", tool version "
       << kToolVersion << ".\n\n";
    md << "## Corpus and topics\n\n";
    md << "| quantity | value |\n|---|---|\n";
    md << "| chapters | " << chapter_count(segments) << " |\n";
    md << "| segments | " << segments.size() << " |\n";
    md << "| median words per segment | " << fixed(stats::quantile(words, 0.5), 1) << " |\n";
    md << "| topics | " << topic_ids.size() << " |\n";
    md << "| noise segments | " << noise << " (" << pct(static_cast<double>(noise) / static_cast<double>(segments.size()))
       << ") |\n\n";

    md << "## Final network\n\n| metric | value |\n|---|---|\n";
    if (!metrics.rows.empty()) {
        const auto& last = metrics.rows.back();
        for (std::size_t i = 1; i < metrics.header.size(); ++i)
            md << "| " << metrics.header[i] << " | " << last[i] << " |\n";
    }
    md << "\n## Topological features\n\n";
    md << "| variable | version | mean | sd | min | max |\n|---|---|---|---|---|---|\n";
    for (const auto& row : desc.rows)
        md << "| " << row[0] << " | " << row[1] << " | " << fixed(util::parse_double(row[2])) << " | "
           << fixed(util::parse_double(row[3])) << " | " << fixed(util::parse_double(row[4])) << " | "
           << fixed(util::parse_double(row[5])) << " |\n";
    if (!betti.rows.empty()) {
        const auto& last = betti.rows.back();
        md << "\nFinal snapshot Betti numbers: beta0 " << last[1] << ", beta1 " << last[2] << ", beta2 " << last[3]
           << ".\n";
    }

    md << "\n## Null vs full model\n\n";
    md << "| model | terms | edf | deviance explained | adj. R2 | p (deviance, permutation) | p (R2, permutation) |\n";
    md << "|---|---|---|---|---|---|---|\n";
    for (const char* key : {"null", "full"}) {
        const json& m = summary.at(key);
        md << "| " << (std::string(key) == "null" ? "Null (control variables only)" : "Full (topological + control)")
           << " | " << m.at("terms").size() << " | " << fixed(jnum(m.at("edf_total")), 2) << " | "
           << pct(jnum(m.at("deviance_explained"))) << " | " << pct(jnum(m.at("r2_adj"))) << " | "
           << fixed(jnum(m.at("permutation").at("p_deviance_explained"))) << " | "
           << fixed(jnum(m.at("permutation").at("p_r2_adj"))) << " |\n";
    }
    const json& cmp = summary.at("comparison");
    md << "\nLikelihood ratio test: chi2 = " << fixed(jnum(cmp.at("chi2")), 2) << ", df = "
       << fixed(jnum(cmp.at("df")), 2) << ", p = " << fixed(jnum(cmp.at("p_value")), 4) << ".\n";

    md << "\n### Smooth terms (full model)\n\n| covariate | k | edf | lambda |\n|---|---|---|---|\n";
    for (const auto& t : summary.at("full").at("terms"))
        md << "| " << t.at("covariate").get<std::string>() << " | " << t.at("k").get<std::size_t>() << " | "
           << fixed(jnum(t.at("edf"))) << " | " << util::format_double(jnum(t.at("lambda"))) << " |\n";

    md << "\n## Rating reliability\n\n";
    if (icc.rows.empty()) {
        md << "ICC not computed (ratings grid is not balanced).\n";
    } else {
        md << "| quantity | value |\n|---|---|\n";
        for (const auto& row : icc.rows) md << "| " << row[0] << " | " << fixed(util::parse_double(row[1]), 4) << " |\n";
    }

    const auto written = figures::write_figures(dir);
    md << "\n## Figures\n\n";
    for (const auto& name : written) md << "- `figures/" << name << ".svg` (data: `figures/" << name << ".tsv`)\n";
    util::write_file(dir / "report.md", md.str());
}

const std::vector<StageDef>& stage_defs() {
    using Paths = std::vector<fs::path>;
    using Names = std::vector<std::string>;
    static const std::vector<StageDef> defs = {
        {Stage::segment, {"inputs", "clean", "segmenter"},
         [](const StageContext& c) { return Paths{c.cfg.novel_path}; },
         [](const StageContext&) { return Names{"segments.tsv"}; }, stage_segment},
        {Stage::embed, {"embedder"}, [](const StageContext& c) { return Paths{c.dir / "segments.tsv"}; },
         [](const StageContext&) { return Names{"embeddings.vec"}; }, stage_embed},
        {Stage::reduce, {"reduction"},
         [](const StageContext& c) {
             Paths p{c.dir / "embeddings.vec"};
             if (c.cfg.reduction.method == topics::ReductionMethod::external) p.push_back(c.cfg.reduction.external_path);
             return p;
         },
         [](const StageContext&) { return Names{"reduced.vec", "pca.tsv"}; }, stage_reduce},
        {Stage::cluster, {"cluster"},
         [](const StageContext& c) {
             return Paths{c.dir / "segments.tsv", c.dir / "reduced.vec", c.dir / "embeddings.vec"};
         },
         [](const StageContext&) {
             return Names{"topics.tsv", "centroids.vec", "chapter_topics.tsv", "topic_freq.tsv"};
         },
         stage_cluster},
        {Stage::network, {"random_baselines"},
         [](const StageContext& c) {
             return Paths{c.dir / "segments.tsv", c.dir / "topics.tsv", c.dir / "centroids.vec"};
         },
         [](const StageContext&) { return Names{"network_series.tsv", "graph_final.tsv", "network_metrics.tsv"}; },
         stage_network},
        {Stage::homology, {}, [](const StageContext& c) { return Paths{c.dir / "network_series.tsv"}; },
         [](const StageContext&) { return Names{"diagrams.tsv", "betti.tsv"}; }, stage_homology},
        {Stage::distances, {"distances"},
         [](const StageContext& c) { return Paths{c.dir / "diagrams.tsv", c.dir / "betti.tsv"}; },
         [](const StageContext&) { return Names{"distances.tsv"}; }, stage_distances},
        {Stage::features, {"inputs", "rating_columns", "naive_only", "features"},
         [](const StageContext& c) {
             return Paths{c.cfg.ratings_path, c.dir / "betti.tsv", c.dir / "chapter_topics.tsv",
                          c.dir / "distances.tsv"};
         },
         [](const StageContext&) {
             return Names{"curiosity.tsv",    "features_raw.tsv", "features.tsv", "descriptives.tsv",
                          "correlations.tsv", "icc.tsv"};
         },
         stage_features},
        {Stage::fit, {"model"}, [](const StageContext& c) { return Paths{c.dir / "features.tsv"}; },
         [](const StageContext&) { return Names{"model_summary.json"}; }, stage_fit},
        {Stage::report, {},
         [](const StageContext& c) {
             Paths p;
             for (const char* f : {"segments.tsv", "topics.tsv", "network_metrics.tsv", "betti.tsv", "descriptives.tsv",
                                   "icc.tsv", "model_summary.json", "curiosity.tsv", "chapter_topics.tsv",
                                   "topic_freq.tsv", "distances.tsv", "diagrams.tsv", "correlations.tsv"})
                 p.push_back(c.dir / f);
             return p;
         },
         [](const StageContext&) { return Names{"report.md"}; }, stage_report},
    };
    return defs;
}

std::string relative_name(const fs::path& p, const fs::path& dir) {
    auto rel = p.lexically_relative(dir);
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return p.generic_string();
}

}  // namespace

RunResult run(const config::PipelineConfig& cfg, const RunOptions& options) {
    cfg.validate();
    RunResult result;
    result.out_dir = cfg.output_dir;
    fs::create_directories(cfg.output_dir);
    const StageContext ctx{cfg, cfg.output_dir, json::parse(config::canonical_json(cfg))};

    const fs::path manifest_path = cfg.output_dir / "manifest.json";
    json previous = json::object();
    if (fs::exists(manifest_path)) {
        try {
            previous = json::parse(util::read_file(manifest_path));
        } catch (const json::exception&) {
            log::warn("manifest unreadable; rerunning every stage");
        }
    }
    ordered_json manifest;
    manifest["tool_version"] = kToolVersion;
    manifest["config_hash"] = config::config_hash(cfg);
    manifest["seed"] = cfg.seed;
    manifest["stages"] = ordered_json::object();
    const bool version_match = previous.value("tool_version", std::string()) == kToolVersion;

    bool upstream_ran = options.force || !version_match;
    for (const auto& def : stage_defs()) {
        const std::string name = stage_name(def.stage);
        const std::string phash = params_hash(ctx, def);
        ordered_json entry;
        entry["params_hash"] = phash;

        bool fresh = !upstream_ran && previous.contains("stages") && previous["stages"].contains(name);
        if (fresh) {
            const json& old = previous["stages"][name];
            fresh = old.value("params_hash", std::string()) == phash;
            for (const auto& in : def.inputs(ctx)) {
                if (!fresh) break;
                const std::string key = relative_name(in, ctx.dir);
                fresh = fs::exists(in) && old["inputs"].contains(key) && old["inputs"][key] == file_hash(in);
            }
            for (const auto& out : def.outputs(ctx)) {
                if (!fresh) break;
                const fs::path p = ctx.dir / out;
                fresh = fs::exists(p) && old["outputs"].contains(out) && old["outputs"][out] == file_hash(p);
            }
        }

        if (!fresh) {
            log::info("running stage " + name);
            try {
                def.run(ctx);
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                util::write_file(manifest_path, manifest.dump(2) + "\n");
                throw StageError(name, e.what());
            }
            upstream_ran = true;
            result.ran.push_back(name);
        } else {
            result.reused.push_back(name);
        }
        ordered_json ins = ordered_json::object(), outs = ordered_json::object();
        for (const auto& in : def.inputs(ctx)) ins[relative_name(in, ctx.dir)] = file_hash(in);
        for (const auto& out : def.outputs(ctx)) outs[out] = file_hash(ctx.dir / out);
        entry["inputs"] = ins;
        entry["outputs"] = outs;
        entry["status"] = fresh ? "reused" : "ran";
        manifest["stages"][name] = entry;
        util::write_file(manifest_path, manifest.dump(2) + "\n");
        if (options.until && *options.until == def.stage) break;
    }
    return result;
}

util::Table run_sweep(const config::PipelineConfig& cfg) {
    cfg.validate();
    struct Cell {
        config::PipelineConfig cfg;
        std::string embedder;
        config::SweepWindow window;
    };
    std::vector<Cell> cells;
    for (const auto& e : cfg.sweep.embedders)
        for (const auto& w : cfg.sweep.windows) {
            Cell c{cfg, e.name, w};
            c.cfg.embedder = e;
            c.cfg.segmenter.window_size = w.window_size;
            c.cfg.segmenter.overlap = w.overlap;
            if (w.min_cluster_size) c.cfg.cluster.min_cluster_size = *w.min_cluster_size;
            c.cfg.output_dir = cfg.output_dir / "sweep" /
                               (e.name + "_w" + std::to_string(w.window_size) + "_o" + std::to_string(w.overlap));
            c.cfg.workers = 1;
            cells.push_back(std::move(c));
        }

    util::Table table;
    table.header = {"embedder",          "window",           "overlap",           "min_cluster_size",
                    "n_segments",        "n_topics",         "n_noise",           "weighted_diameter",
                    "unweighted_diameter", "null_deviance_explained", "full_deviance_explained", "full_permutation_p",
                    "lr_chi2",           "lr_df",            "lr_p",              "status"};
    std::vector<std::vector<std::string>> rows(cells.size());
    auto run_cell = [&](std::size_t i) {
        const Cell& c = cells[i];
        std::vector<std::string> row = {c.embedder, fmt(c.window.window_size), fmt(c.window.overlap),
                                        fmt(c.cfg.cluster.min_cluster_size)};
        try {
            run(c.cfg, {Stage::fit, false});
            const fs::path& d = c.cfg.output_dir;
            const auto topics_t = read_artifact(d, "topics.tsv");
            std::size_t noise = 0;
            std::set<std::string> ids;
            for (const auto& r : topics_t.rows) r[1] == "noise" ? void(++noise) : void(ids.insert(r[1]));
            const auto metrics = read_artifact(d, "network_metrics.tsv");
            const auto& last = metrics.rows.back();
            const json s = json::parse(util::read_file(d / "model_summary.json"));
            row.insert(row.end(),
                       {fmt(topics_t.rows.size()), fmt(ids.size()), fmt(noise),
                        last[metrics.column("weighted_diameter")], last[metrics.column("unweighted_diameter")],
                        fmt(jnum(s["null"]["deviance_explained"])), fmt(jnum(s["full"]["deviance_explained"])),
                        fmt(jnum(s["full"]["permutation"]["p_deviance_explained"])),
                        fmt(jnum(s["comparison"]["chi2"])), fmt(jnum(s["comparison"]["df"])),
                        fmt(jnum(s["comparison"]["p_value"])), "ok"});
        } catch (const std::exception& e) {
            log::warn("sweep cell " + c.cfg.output_dir.filename().string() + " failed: " + e.what());
            while (row.size() + 1 < table.header.size()) row.push_back("nan");
            std::string msg = e.what();
            std::replace(msg.begin(), msg.end(), '\t', ' ');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            row.push_back("failed: " + msg);
        }
        rows[i] = std::move(row);
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, cells.size()));
    std::mutex next_mutex;
    std::size_t next = 0;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(next_mutex);
                if (next >= cells.size()) return;
                i = next++;
            }
            run_cell(i);
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    table.rows = std::move(rows);
    fs::create_directories(cfg.output_dir);
    util::write_table(cfg.output_dir / "sweep.tsv", table);
    return table;
}

}  // namespace infogap::pipeline
