#include "infogap/embed.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <future>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "infogap/corpus.hpp"
#include "infogap/error.hpp"
#include "infogap/log.hpp"
#include "infogap/util.hpp"

#if defined(__GNUC__)
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wshadow"
#endif
#include <httplib.h>
#include <json.hpp>
#if defined(__GNUC__)
#pragma GCC diagnostic pop
#endif

namespace infogap::embed {

void EmbeddingMatrix::validate() const {
    if (static_cast<std::size_t>(values.rows()) != row_ids.size())
        throw DomainError("embedding matrix has " + std::to_string(values.rows()) + " rows but " +
                          std::to_string(row_ids.size()) + " ids");
    if (!values.allFinite()) throw DomainError("embedding matrix has non-finite entries");
    std::unordered_set<std::uint64_t> seen;
    for (auto id : row_ids)
        if (!seen.insert(id).second) throw DomainError("duplicate row id " + std::to_string(id));
}

std::optional<std::size_t> EmbeddingMatrix::find(std::uint64_t id) const {
    auto it = std::find(row_ids.begin(), row_ids.end(), id);
    if (it == row_ids.end()) return std::nullopt;
    return static_cast<std::size_t>(it - row_ids.begin());
}

bool EmbeddingMatrix::operator==(const EmbeddingMatrix& other) const {
    if (row_ids != other.row_ids || space_tag != other.space_tag) return false;
    if (values.rows() != other.values.rows() || values.cols() != other.values.cols()) return false;
    return values.size() == 0 ||
           std::memcmp(values.data(), other.values.data(), sizeof(float) * static_cast<std::size_t>(values.size())) == 0;
}

void EmbedderConfig::validate() const {
    if (kind == EmbedderKind::remote) {
        if (endpoint_url.empty()) throw ConfigError("remote embedder needs endpoint_url");
        if (model_name.empty()) throw ConfigError("remote embedder needs model_name");
        if (api_key_env.empty()) throw ConfigError("remote embedder needs api_key_env");
        if (batch_size == 0) throw ConfigError("batch_size must be positive");
        if (max_in_flight == 0) throw ConfigError("max_in_flight must be positive");
    } else {
        if (dim < 8) throw ConfigError("deterministic embedder needs dim >= 8");
    }
}

// ---- deterministic ----------------------------------------------------------

namespace {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            current += static_cast<char>(std::tolower(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

}  // namespace

std::vector<float> hash_embed(std::string_view text, std::uint64_t seed, std::size_t dim) {
    const std::uint64_t basis = util::fnv1a(std::to_string(seed));
    std::vector<double> acc(dim, 0.0);
    auto add = [&](std::string_view feature) {
        std::uint64_t h = util::fnv1a(feature, basis);
        h ^= h >> 29;
        h *= 0xBF58476D1CE4E5B9ULL;
        h ^= h >> 32;
        acc[h % dim] += (h >> 63) ? -1.0 : 1.0;
    };
    auto tokens = tokenize(text);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        add(tokens[i]);
        if (i + 1 < tokens.size()) add(tokens[i] + ' ' + tokens[i + 1]);
    }
    double norm = 0;
    for (double v : acc) norm += v * v;
    if (norm == 0) {
        // Empty text, or features that cancelled out exactly.
        add(tokens.empty() ? std::string_view("\x01empty") : std::string_view(text));
        norm = 0;
        for (double v : acc) norm += v * v;
    }
    norm = std::sqrt(norm);
    std::vector<float> out(dim);
    for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(acc[i] / norm);
    return out;
}

EmbeddingMatrix embed_deterministic(std::span<const std::string> texts, std::span<const std::uint64_t> ids,
                                    const EmbedderConfig& cfg) {
    EmbedderConfig local = cfg;
    local.kind = EmbedderKind::deterministic;
    local.validate();
    if (texts.size() != ids.size()) throw DomainError("texts and ids differ in length");
    EmbeddingMatrix m;
    m.row_ids.assign(ids.begin(), ids.end());
    m.values.resize(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(cfg.dim));
    for (std::size_t i = 0; i < texts.size(); ++i) {
        auto v = hash_embed(texts[i], cfg.seed, cfg.dim);
        std::copy(v.begin(), v.end(), m.values.row(static_cast<Eigen::Index>(i)).data());
    }
    m.space_tag = cfg.name;
    m.validate();
    return m;
}

namespace {

void unpack(std::span<const corpus::TextSegment> segments, std::vector<std::string>& texts,
            std::vector<std::uint64_t>& ids) {
    texts.reserve(segments.size());
    ids.reserve(segments.size());
    for (const auto& s : segments) {
        texts.push_back(s.text);
        ids.push_back(s.segment_id);
    }
}

}  // namespace

EmbeddingMatrix embed_deterministic(std::span<const corpus::TextSegment> segments, const EmbedderConfig& cfg) {
    std::vector<std::string> texts;
    std::vector<std::uint64_t> ids;
    unpack(segments, texts, ids);
    return embed_deterministic(texts, ids, cfg);
}

// ---- cache --------------------------------------------------------------------

EmbeddingCache::EmbeddingCache(std::filesystem::path backing_file) : file_(std::move(backing_file)) {
    if (!std::filesystem::exists(*file_)) return;
    EmbeddingMatrix stored = load_store(*file_);
    for (std::size_t i = 0; i < stored.rows(); ++i) {
        auto row = stored.values.row(static_cast<Eigen::Index>(i));
        entries_.emplace(stored.row_ids[i], std::vector<float>(row.data(), row.data() + row.size()));
    }
}

std::uint64_t EmbeddingCache::key(std::string_view model, std::string_view text) {
    std::string material(model);
    material += '\0';
    material += text;
    return util::fnv1a(material);
}

std::optional<std::vector<float>> EmbeddingCache::get(std::uint64_t key) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void EmbeddingCache::put(std::uint64_t key, std::vector<float> vector) {
    std::unique_lock lock(mutex_);
    entries_[key] = std::move(vector);
}

std::size_t EmbeddingCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

void EmbeddingCache::flush() const {
    if (!file_) return;
    std::shared_lock lock(mutex_);
    std::vector<std::uint64_t> keys;
    for (const auto& [k, v] : entries_) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    EmbeddingMatrix m;
    m.space_tag = "cache";
    m.row_ids = keys;
    std::size_t dim = keys.empty() ? 0 : entries_.at(keys.front()).size();
    m.values.resize(static_cast<Eigen::Index>(keys.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const auto& v = entries_.at(keys[i]);
        if (v.size() != dim) throw ProtocolError("cache holds vectors of different dimensions");
        std::copy(v.begin(), v.end(), m.values.row(static_cast<Eigen::Index>(i)).data());
    }
    save_store(m, *file_);
}

// ---- remote -------------------------------------------------------------------

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint_url needs a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool transient(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

RemoteEmbedder::RemoteEmbedder(EmbedderConfig cfg, std::shared_ptr<EmbeddingCache> cache)
    : cfg_(std::move(cfg)), cache_(std::move(cache)) {
    cfg_.kind = EmbedderKind::remote;
    cfg_.validate();
    if (!cache_) cache_ = std::make_shared<EmbeddingCache>();
}

std::vector<std::vector<float>> RemoteEmbedder::fetch_batch(std::span<const std::string> texts,
                                                            std::size_t batch_index, const std::string& api_key) {
    const Endpoint endpoint = split_url(cfg_.endpoint_url);
    httplib::Client client(endpoint.origin);
    auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key}};

    nlohmann::json body = {{"model", cfg_.model_name}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    const std::string payload = body.dump();

    std::string last_error;
    std::size_t backoff = cfg_.initial_backoff_ms;
    for (std::size_t attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        ++requests_sent_;
        auto result = client.Post(endpoint.path, headers, payload, "application/json");
        if (!result) {
            last_error = "request failed: " + httplib::to_string(result.error());
            continue;
        }
        if (result->status < 200 || result->status >= 300) {
            last_error = "HTTP status " + std::to_string(result->status);
            if (transient(result->status)) continue;
            break;
        }
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(result->body);
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError("batch " + std::to_string(batch_index) + ": response is not JSON: " + e.what());
        }
        if (!reply.contains("data") || !reply["data"].is_array())
            throw ProtocolError("batch " + std::to_string(batch_index) + ": response lacks a data array");
        const auto& data = reply["data"];
        if (data.size() != texts.size())
            throw ProtocolError("batch " + std::to_string(batch_index) + ": expected " +
                                std::to_string(texts.size()) + " vectors, got " + std::to_string(data.size()));
        std::vector<std::vector<float>> vectors;
        for (const auto& item : data) {
            if (!item.contains("embedding") || !item["embedding"].is_array())
                throw ProtocolError("batch " + std::to_string(batch_index) + ": item without embedding");
            std::vector<float> v;
            for (const auto& x : item["embedding"]) v.push_back(x.get<float>());
            vectors.push_back(std::move(v));
        }
        return vectors;
    }
    throw TransportError("batch " + std::to_string(batch_index) + ": " + last_error, batch_index);
}

EmbeddingMatrix RemoteEmbedder::embed(std::span<const std::string> texts, std::span<const std::uint64_t> ids) {
    if (texts.size() != ids.size()) throw DomainError("texts and ids differ in length");
    const char* key_value = std::getenv(cfg_.api_key_env.c_str());
    if (key_value == nullptr || *key_value == '\0')
        throw ConfigError("environment variable " + cfg_.api_key_env + " is not set (embedding API key)");
    const std::string api_key = key_value;

    std::vector<std::optional<std::vector<float>>> vectors(texts.size());
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        vectors[i] = cache_->get(EmbeddingCache::key(cfg_.model_name, texts[i]));
        if (!vectors[i]) missing.push_back(i);
    }

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t b = 0; b < missing.size(); b += cfg_.batch_size)
        batches.emplace_back(missing.begin() + static_cast<std::ptrdiff_t>(b),
                             missing.begin() + static_cast<std::ptrdiff_t>(std::min(b + cfg_.batch_size, missing.size())));

    std::mutex sent_mutex;
    std::size_t sent_total = 0;
    auto run_batch = [&](std::size_t batch_index) {
        std::vector<std::string> batch_texts;
        for (std::size_t i : batches[batch_index]) batch_texts.push_back(texts[i]);
        RemoteEmbedder worker(cfg_, cache_);
        std::vector<std::vector<float>> result;
        try {
            result = worker.fetch_batch(batch_texts, batch_index, api_key);
        } catch (...) {
            std::lock_guard lock(sent_mutex);
            sent_total += worker.requests_sent_;
            throw;
        }
        std::lock_guard lock(sent_mutex);
        sent_total += worker.requests_sent_;
        return result;
    };

    std::optional<std::size_t> dim;
    for (auto& v : vectors)
        if (v) {
            dim = v->size();
            break;
        }
    for (std::size_t wave = 0; wave < batches.size(); wave += cfg_.max_in_flight) {
        std::vector<std::future<std::vector<std::vector<float>>>> inflight;
        const std::size_t wave_end = std::min(wave + cfg_.max_in_flight, batches.size());
        for (std::size_t b = wave; b < wave_end; ++b) inflight.push_back(std::async(std::launch::async, run_batch, b));
        std::exception_ptr failure;
        for (std::size_t b = wave; b < wave_end; ++b) {
            try {
                auto result = inflight[b - wave].get();
                for (std::size_t r = 0; r < result.size(); ++r) {
                    if (!dim) dim = result[r].size();
                    if (result[r].size() != *dim)
                        throw ProtocolError("batch " + std::to_string(b) + ": vector dimension " +
                                            std::to_string(result[r].size()) + " differs from " + std::to_string(*dim));
                    std::size_t i = batches[b][r];
                    cache_->put(EmbeddingCache::key(cfg_.model_name, texts[i]), result[r]);
                    vectors[i] = std::move(result[r]);
                }
            } catch (...) {
                if (!failure) failure = std::current_exception();
            }
        }
        requests_sent_ += sent_total;
        sent_total = 0;
        if (failure) std::rethrow_exception(failure);
    }
    cache_->flush();

    EmbeddingMatrix m;
    m.row_ids.assign(ids.begin(), ids.end());
    m.space_tag = cfg_.name;
    m.values.resize(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(dim.value_or(0)));
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (vectors[i]->size() != *dim) throw ProtocolError("cached vector dimension differs from service output");
        std::copy(vectors[i]->begin(), vectors[i]->end(), m.values.row(static_cast<Eigen::Index>(i)).data());
    }
    m.validate();
    return m;
}

EmbeddingMatrix RemoteEmbedder::embed(std::span<const corpus::TextSegment> segments) {
    std::vector<std::string> texts;
    std::vector<std::uint64_t> ids;
    unpack(segments, texts, ids);
    return embed(texts, ids);
}

EmbeddingMatrix embed_segments(std::span<const corpus::TextSegment> segments, const EmbedderConfig& cfg,
                               std::shared_ptr<EmbeddingCache> cache) {
    if (cfg.kind == EmbedderKind::deterministic) return embed_deterministic(segments, cfg);
    RemoteEmbedder embedder(cfg, std::move(cache));
    return embedder.embed(segments);
}

// ---- vector store -------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'I', 'G', 'V', 'S', 'T', 'O', 'R', 'E'};

template <typename T>
void put_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T take() {
        need(sizeof(T));
        T value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            value |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        return value;
    }
    std::string_view take_bytes(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw CorruptionError("vector store truncated at byte " + std::to_string(pos_));
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_store(const EmbeddingMatrix& matrix) {
    matrix.validate();
    std::string out(kMagic, sizeof kMagic);
    put_le<std::uint32_t>(out, kStoreVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.dim()));
    put_le<std::uint64_t>(out, matrix.rows());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.space_tag.size()));
    out += matrix.space_tag;
    for (auto id : matrix.row_ids) put_le<std::uint64_t>(out, id);
    const float* data = matrix.values.data();
    for (Eigen::Index i = 0; i < matrix.values.size(); ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, data + i, sizeof bits);
        put_le<std::uint32_t>(out, bits);
    }
    return out;
}

EmbeddingMatrix decode_store(std::string_view bytes) {
    Reader in(bytes);
    if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw CorruptionError("not a vector store (bad magic bytes)");
    in.take_bytes(sizeof kMagic);
    auto version = in.take<std::uint32_t>();
    if (version != kStoreVersion)
        throw UnsupportedVersionError("vector store version " + std::to_string(version) + " is not supported (expected " +
                                      std::to_string(kStoreVersion) + ")");
    auto dim = in.take<std::uint32_t>();
    auto rows = in.take<std::uint64_t>();
    auto tag_len = in.take<std::uint32_t>();
    EmbeddingMatrix m;
    m.space_tag = std::string(in.take_bytes(tag_len));
    if (rows > bytes.size() / 8) throw CorruptionError("vector store row count exceeds file size");
    m.row_ids.resize(rows);
    for (auto& id : m.row_ids) id = in.take<std::uint64_t>();
    m.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
    float* data = m.values.data();
    for (Eigen::Index i = 0; i < m.values.size(); ++i) {
        auto bits = in.take<std::uint32_t>();
        std::memcpy(data + i, &bits, sizeof bits);
    }
    if (!in.done()) throw CorruptionError("vector store has trailing bytes");
    try {
        m.validate();
    } catch (const DomainError& e) {
        throw CorruptionError(std::string("vector store content invalid: ") + e.what());
    }
    return m;
}

void save_store(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
    util::write_file(path, encode_store(matrix));
}

EmbeddingMatrix load_store(const std::filesystem::path& path) {
    try {
        return decode_store(util::read_file(path));
    } catch (const CorruptionError& e) {
        throw CorruptionError(path.string() + ": " + e.what());
    }
}

// ---- similarity ---------------------------------------------------------------

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw DomainError("cosine similarity of vectors with different dimensions");
    double dot = 0, nu = 0, nv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0 || nv == 0) throw DomainError("cosine similarity of a zero vector");
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double cosine_similarity(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    return cosine_similarity(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())),
                             std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

}  // namespace infogap::embed
