#include "infogap/config.hpp"

#include <algorithm>
#include <set>

#include "infogap/error.hpp"
#include "infogap/stats.hpp"
#include "infogap/util.hpp"

#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wshadow"
#include <json.hpp>
#pragma GCC diagnostic pop

namespace infogap::config {

using nlohmann::json;

std::vector<std::string> ModelConfig::resolved_full_terms() const {
    if (!full_terms.empty()) return full_terms;
    std::vector<std::string> terms = null_terms;
    for (const auto& c : stats::topological_columns()) terms.push_back(c);
    return terms;
}

std::vector<SweepWindow> default_sweep_windows() {
    return {{10, 3, std::nullopt}, {7, 2, std::nullopt}, {5, 2, std::nullopt}, {3, 1, 4}};
}

void SweepGrid::validate() const {
    if (embedders.empty() || windows.empty()) throw ConfigError("sweep grid must not be empty");
    std::set<std::string> names;
    for (const auto& e : embedders) {
        e.validate();
        if (!names.insert(e.name).second) throw ConfigError("duplicate sweep embedder name '" + e.name + "'");
    }
    for (const auto& w : windows) {
        corpus::SegmenterConfig{w.window_size, w.overlap, true}.validate();
        if (w.min_cluster_size) topics::ClusterConfig{*w.min_cluster_size, std::nullopt}.validate();
    }
}

void PipelineConfig::validate() const {
    if (novel_path.empty()) throw ConfigError("inputs.novel is required");
    if (ratings_path.empty()) throw ConfigError("inputs.ratings is required");
    if (!std::filesystem::is_regular_file(novel_path))
        throw ConfigError("novel file not found: " + novel_path.string());
    if (!std::filesystem::is_regular_file(ratings_path))
        throw ConfigError("ratings file not found: " + ratings_path.string());
    if (workers == 0) throw ConfigError("workers must be positive");
    segmenter.validate();
    embedder.validate();
    reduction.validate();
    if (reduction.method == topics::ReductionMethod::external &&
        !std::filesystem::is_regular_file(reduction.external_path))
        throw ConfigError("external reduction not found: " + reduction.external_path.string());
    cluster.validate();
    distances.validate();
    if (!(features.winsor_lo >= 0 && features.winsor_lo < features.winsor_hi && features.winsor_hi <= 100))
        throw ConfigError("winsorization percentiles must satisfy 0 <= lo < hi <= 100");
    if (model.basis_dim < 3) throw ConfigError("model.basis_dim must be >= 3");
    model.gam.validate();
    if (model.n_permutations < 100) throw ConfigError("model.n_permutations must be >= 100");
    if (model.null_terms.empty()) throw ConfigError("model.null_terms must not be empty");
    const auto& known = stats::feature_columns();
    auto check_terms = [&](const std::vector<std::string>& terms, const std::string& key) {
        std::set<std::string> seen;
        for (const auto& t : terms) {
            if (t == "mean_curiosity" || std::find(known.begin(), known.end(), t) == known.end())
                throw ConfigError(key + ": unknown covariate '" + t + "'");
            if (!seen.insert(t).second) throw ConfigError(key + ": duplicate covariate '" + t + "'");
        }
    };
    check_terms(model.null_terms, "model.null_terms");
    const auto full = model.resolved_full_terms();
    check_terms(full, "model.full_terms");
    for (const auto& t : model.null_terms)
        if (std::find(full.begin(), full.end(), t) == full.end())
            throw ConfigError("model.full_terms must contain every null term; missing '" + t + "'");
    if (full.size() <= model.null_terms.size()) throw ConfigError("full model must add at least one term");
    sweep.validate();
}

namespace {

// Reads keys from one JSON object and rejects leftovers.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where("") + " must be an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <typename T>
    void read(const std::string& key, T& out) {
        if (!j_.contains(key)) return;
        seen_.insert(key);
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where(key) + " has the wrong type");
        }
    }

    void read_size(const std::string& key, std::size_t& out) {
        if (!j_.contains(key)) return;
        seen_.insert(key);
        const json& v = j_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw ConfigError(where(key) + " must be a non-negative integer");
        out = v.get<std::size_t>();
    }

    void read_path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) {
        std::string s;
        read(key, s);
        if (!s.empty()) out = (std::filesystem::path(s).is_absolute() ? std::filesystem::path(s) : base / s).lexically_normal();
    }

    const json& child(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown config key " + where(it.key()));
    }

    std::string where(const std::string& key) const {
        if (path_.empty()) return "'" + key + "'";
        return "'" + path_ + (key.empty() ? "" : "." + key) + "'";
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

embed::EmbedderConfig parse_embedder(const json& j, const std::string& path) {
    Section s(j, path);
    embed::EmbedderConfig cfg;
    std::string kind = "deterministic";
    s.read("kind", kind);
    if (kind == "deterministic")
        cfg.kind = embed::EmbedderKind::deterministic;
    else if (kind == "remote")
        cfg.kind = embed::EmbedderKind::remote;
    else
        throw ConfigError(s.where("kind") + " must be 'deterministic' or 'remote'");
    s.read("name", cfg.name);
    s.read("endpoint_url", cfg.endpoint_url);
    s.read("model_name", cfg.model_name);
    s.read("api_key_env", cfg.api_key_env);
    s.read_size("batch_size", cfg.batch_size);
    s.read_size("max_retries", cfg.max_retries);
    s.read_size("initial_backoff_ms", cfg.initial_backoff_ms);
    s.read_size("max_in_flight", cfg.max_in_flight);
    s.read("timeout_seconds", cfg.timeout_seconds);
    s.read("seed", cfg.seed);
    s.read_size("dim", cfg.dim);
    s.finish();
    return cfg;
}

json embedder_to_json(const embed::EmbedderConfig& cfg) {
    json j;
    j["kind"] = cfg.kind == embed::EmbedderKind::remote ? "remote" : "deterministic";
    j["name"] = cfg.name;
    if (cfg.kind == embed::EmbedderKind::remote) {
        j["endpoint_url"] = cfg.endpoint_url;
        j["model_name"] = cfg.model_name;
        j["api_key_env"] = cfg.api_key_env;
        j["batch_size"] = cfg.batch_size;
        j["max_retries"] = cfg.max_retries;
        j["initial_backoff_ms"] = cfg.initial_backoff_ms;
        j["max_in_flight"] = cfg.max_in_flight;
        j["timeout_seconds"] = cfg.timeout_seconds;
    } else {
        j["seed"] = cfg.seed;
        j["dim"] = cfg.dim;
    }
    return j;
}

}  // namespace

PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    PipelineConfig cfg;
    Section top(root, "");
    top.read("seed", cfg.seed);
    top.read_size("workers", cfg.workers);
    top.read_path("output_dir", cfg.output_dir, base_dir);
    top.read("naive_only", cfg.naive_only);
    top.read_size("random_baselines", cfg.random_baselines);

    if (top.has("inputs")) {
        Section s(top.child("inputs"), "inputs");
        s.read_path("novel", cfg.novel_path, base_dir);
        s.read_path("ratings", cfg.ratings_path, base_dir);
        s.read_path("embedding_cache", cfg.embedding_cache, base_dir);
        s.finish();
    }
    if (top.has("clean")) {
        Section s(top.child("clean"), "clean");
        s.read("chapter_pattern", cfg.clean.chapter_pattern);
        s.read("part_pattern", cfg.clean.part_pattern);
        s.read_size("max_title_words", cfg.clean.max_title_words);
        s.finish();
    }
    if (top.has("segmenter")) {
        Section s(top.child("segmenter"), "segmenter");
        s.read_size("window_size", cfg.segmenter.window_size);
        s.read_size("overlap", cfg.segmenter.overlap);
        s.read("respect_chapter_boundaries", cfg.segmenter.respect_chapter_boundaries);
        s.finish();
    }
    if (top.has("rating_columns")) {
        Section s(top.child("rating_columns"), "rating_columns");
        s.read("participant", cfg.rating_columns.participant);
        s.read("chapter", cfg.rating_columns.chapter);
        s.read("curiosity", cfg.rating_columns.curiosity);
        s.read("knows_book", cfg.rating_columns.knows_book);
        s.read("knows_movie", cfg.rating_columns.knows_movie);
        s.finish();
    }
    if (top.has("embedder")) cfg.embedder = parse_embedder(top.child("embedder"), "embedder");
    if (top.has("reduction")) {
        Section s(top.child("reduction"), "reduction");
        std::string method = "pca";
        s.read("method", method);
        if (method == "pca")
            cfg.reduction.method = topics::ReductionMethod::pca;
        else if (method == "external")
            cfg.reduction.method = topics::ReductionMethod::external;
        else
            throw ConfigError("'reduction.method' must be 'pca' or 'external'");
        s.read_size("target_dim", cfg.reduction.target_dim);
        s.read_path("external_path", cfg.reduction.external_path, base_dir);
        s.finish();
    }
    if (top.has("cluster")) {
        Section s(top.child("cluster"), "cluster");
        s.read_size("min_cluster_size", cfg.cluster.min_cluster_size);
        if (s.has("min_samples")) {
            std::size_t v = 0;
            s.read_size("min_samples", v);
            cfg.cluster.min_samples = v;
        }
        s.finish();
    }
    if (top.has("distances")) {
        Section s(top.child("distances"), "distances");
        s.read("wasserstein_order", cfg.distances.wasserstein_order);
        s.finish();
    }
    if (top.has("features")) {
        Section s(top.child("features"), "features");
        s.read("winsor_lo", cfg.features.winsor_lo);
        s.read("winsor_hi", cfg.features.winsor_hi);
        s.finish();
    }
    if (top.has("model")) {
        Section s(top.child("model"), "model");
        s.read_size("basis_dim", cfg.model.basis_dim);
        s.read("gamma", cfg.model.gam.gamma);
        s.read_size("n_permutations", cfg.model.n_permutations);
        s.read("null_terms", cfg.model.null_terms);
        s.read("full_terms", cfg.model.full_terms);
        s.read("log_lambda_min", cfg.model.gam.log_lambda_min);
        s.read("log_lambda_max", cfg.model.gam.log_lambda_max);
        s.read_size("max_iterations", cfg.model.gam.max_iterations);
        s.read("tolerance", cfg.model.gam.tolerance);
        s.finish();
    }
    if (top.has("sweep")) {
        Section s(top.child("sweep"), "sweep");
        if (s.has("embedders")) {
            const json& list = s.child("embedders");
            if (!list.is_array()) throw ConfigError("'sweep.embedders' must be an array");
            for (std::size_t i = 0; i < list.size(); ++i)
                cfg.sweep.embedders.push_back(parse_embedder(list[i], "sweep.embedders[" + std::to_string(i) + "]"));
        }
        if (s.has("windows")) {
            const json& list = s.child("windows");
            if (!list.is_array()) throw ConfigError("'sweep.windows' must be an array");
            for (std::size_t i = 0; i < list.size(); ++i) {
                Section w(list[i], "sweep.windows[" + std::to_string(i) + "]");
                SweepWindow sw;
                w.read_size("window_size", sw.window_size);
                w.read_size("overlap", sw.overlap);
                if (w.has("min_cluster_size")) {
                    std::size_t v = 0;
                    w.read_size("min_cluster_size", v);
                    sw.min_cluster_size = v;
                }
                w.finish();
                cfg.sweep.windows.push_back(sw);
            }
        }
        s.finish();
    }
    top.finish();
    if (cfg.sweep.embedders.empty()) cfg.sweep.embedders.push_back(cfg.embedder);
    if (cfg.sweep.windows.empty()) cfg.sweep.windows = default_sweep_windows();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = util::read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    return parse_config(text, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

std::string embedder_json(const embed::EmbedderConfig& cfg) { return embedder_to_json(cfg).dump(); }

std::string canonical_json(const PipelineConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["inputs"] = {{"novel", cfg.novel_path.generic_string()}, {"ratings", cfg.ratings_path.generic_string()}};
    j["clean"] = {{"chapter_pattern", cfg.clean.chapter_pattern},
                  {"part_pattern", cfg.clean.part_pattern},
                  {"max_title_words", cfg.clean.max_title_words}};
    j["segmenter"] = {{"window_size", cfg.segmenter.window_size},
                      {"overlap", cfg.segmenter.overlap},
                      {"respect_chapter_boundaries", cfg.segmenter.respect_chapter_boundaries},
                      {"splitter_version", corpus::kSplitterVersion}};
    j["rating_columns"] = {{"participant", cfg.rating_columns.participant},
                           {"chapter", cfg.rating_columns.chapter},
                           {"curiosity", cfg.rating_columns.curiosity},
                           {"knows_book", cfg.rating_columns.knows_book},
                           {"knows_movie", cfg.rating_columns.knows_movie}};
    j["naive_only"] = cfg.naive_only;
    j["embedder"] = embedder_to_json(cfg.embedder);
    json reduction = {{"method", cfg.reduction.method == topics::ReductionMethod::pca ? "pca" : "external"},
                      {"target_dim", cfg.reduction.target_dim}};
    if (cfg.reduction.method == topics::ReductionMethod::external)
        reduction["external_path"] = cfg.reduction.external_path.generic_string();
    j["reduction"] = reduction;
    j["cluster"] = {{"min_cluster_size", cfg.cluster.min_cluster_size}, {"min_samples", cfg.cluster.samples()}};
    j["random_baselines"] = cfg.random_baselines;
    j["distances"] = {{"wasserstein_order", cfg.distances.wasserstein_order}};
    j["features"] = {{"winsor_lo", cfg.features.winsor_lo}, {"winsor_hi", cfg.features.winsor_hi}};
    j["model"] = {{"basis_dim", cfg.model.basis_dim},
                  {"gamma", cfg.model.gam.gamma},
                  {"n_permutations", cfg.model.n_permutations},
                  {"null_terms", cfg.model.null_terms},
                  {"full_terms", cfg.model.resolved_full_terms()},
                  {"log_lambda_min", cfg.model.gam.log_lambda_min},
                  {"log_lambda_max", cfg.model.gam.log_lambda_max},
                  {"max_iterations", cfg.model.gam.max_iterations},
                  {"tolerance", cfg.model.gam.tolerance}};
    json embedders = json::array();
    for (const auto& e : cfg.sweep.embedders) embedders.push_back(embedder_to_json(e));
    json windows = json::array();
    for (const auto& w : cfg.sweep.windows) {
        json x = {{"window_size", w.window_size}, {"overlap", w.overlap}};
        if (w.min_cluster_size) x["min_cluster_size"] = *w.min_cluster_size;
        windows.push_back(x);
    }
    j["sweep"] = {{"embedders", embedders}, {"windows", windows}};
    return j.dump();
}

std::string config_hash(const PipelineConfig& cfg) { return util::hex64(util::fnv1a(canonical_json(cfg))); }

}  // namespace infogap::config
