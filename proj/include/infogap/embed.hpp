#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace infogap::corpus {
struct TextSegment;
}

namespace infogap::embed {

using FloatRows = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row-indexed dense vectors. Values are single precision because that is
// what the on-disk store holds; arithmetic on rows is done in double.
struct EmbeddingMatrix {
    std::vector<std::uint64_t> row_ids;
    FloatRows values;
    std::string space_tag;

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }

    // Throws DomainError on non-finite entries, duplicate ids, or shape mismatch.
    void validate() const;
    std::optional<std::size_t> find(std::uint64_t id) const;
    Eigen::VectorXd row(std::size_t i) const { return values.row(static_cast<Eigen::Index>(i)).cast<double>().transpose(); }

    bool operator==(const EmbeddingMatrix& other) const;
};

enum class EmbedderKind { remote, deterministic };

struct EmbedderConfig {
    EmbedderKind kind = EmbedderKind::deterministic;
    std::string name = "hashing";  // label used in sweep tables and space tags
    // remote
    std::string endpoint_url;
    std::string model_name;
    std::string api_key_env = "EMBEDDING_API_KEY";
    std::size_t batch_size = 128;
    std::size_t max_retries = 4;
    std::size_t initial_backoff_ms = 250;
    std::size_t max_in_flight = 4;
    double timeout_seconds = 60.0;
    // deterministic
    std::uint64_t seed = 17;
    std::size_t dim = 1024;

    void validate() const;  // throws ConfigError
};

// ---- deterministic offline embedder -------------------------------------

// Seeded feature hashing of word unigrams and bigrams, L2-normalized.
std::vector<float> hash_embed(std::string_view text, std::uint64_t seed, std::size_t dim);

EmbeddingMatrix embed_deterministic(std::span<const std::string> texts,
                                    std::span<const std::uint64_t> ids,
                                    const EmbedderConfig& cfg);
EmbeddingMatrix embed_deterministic(std::span<const corpus::TextSegment> segments,
                                    const EmbedderConfig& cfg);

// ---- cache and remote client ---------------------------------------------

// Content-addressed vector cache keyed by (model, text). Readers may run
// concurrently; inserts are serialized.
class EmbeddingCache {
public:
    EmbeddingCache() = default;
    explicit EmbeddingCache(std::filesystem::path backing_file);

    static std::uint64_t key(std::string_view model, std::string_view text);

    std::optional<std::vector<float>> get(std::uint64_t key) const;
    void put(std::uint64_t key, std::vector<float> vector);
    std::size_t size() const;

    // Persist to the backing file (no-op without one).
    void flush() const;

private:
    std::optional<std::filesystem::path> file_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::uint64_t, std::vector<float>> entries_;
};

// Client for HTTP embedding services speaking
//   POST {model, input: [texts]} -> {data: [{embedding: [...]}, ...]}
class RemoteEmbedder {
public:
    RemoteEmbedder(EmbedderConfig cfg, std::shared_ptr<EmbeddingCache> cache);

    EmbeddingMatrix embed(std::span<const std::string> texts, std::span<const std::uint64_t> ids);
    EmbeddingMatrix embed(std::span<const corpus::TextSegment> segments);

    std::size_t requests_sent() const { return requests_sent_; }

private:
    std::vector<std::vector<float>> fetch_batch(std::span<const std::string> texts,
                                                std::size_t batch_index,
                                                const std::string& api_key);

    EmbedderConfig cfg_;
    std::shared_ptr<EmbeddingCache> cache_;
    std::size_t requests_sent_ = 0;
};

// Dispatches on cfg.kind; the cache is only used by the remote backend.
EmbeddingMatrix embed_segments(std::span<const corpus::TextSegment> segments,
                               const EmbedderConfig& cfg,
                               std::shared_ptr<EmbeddingCache> cache = nullptr);

// ---- vector store ----------------------------------------------------------

inline constexpr std::uint32_t kStoreVersion = 1;

void save_store(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix load_store(const std::filesystem::path& path);

std::string encode_store(const EmbeddingMatrix& matrix);
EmbeddingMatrix decode_store(std::string_view bytes);

// ---- similarity ------------------------------------------------------------

double cosine_similarity(std::span<const double> u, std::span<const double> v);
double cosine_similarity(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

}  // namespace infogap::embed
