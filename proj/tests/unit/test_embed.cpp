#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include "infogap/embed.hpp"
#include "infogap/error.hpp"
#include "infogap/util.hpp"
#include "support/testing.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace infogap;
using namespace infogap::embed;

TEST_CASE("cosine similarity") {
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == doctest::Approx(0));
    CHECK(cosine_similarity(std::vector<double>{1, 1}, std::vector<double>{2, 2}) == doctest::Approx(1));
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{-1, 0}) == doctest::Approx(-1));
    CHECK_THROWS_AS(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 0}), DomainError);
}

TEST_CASE("hash embedding is deterministic and unit length") {
    const auto a = hash_embed("the quick brown fox", 17, 256);
    const auto b = hash_embed("the quick brown fox", 17, 256);
    CHECK(a == b);
    double norm = 0;
    for (float v : a) norm += double(v) * v;
    CHECK(norm == doctest::Approx(1).epsilon(1e-6));
    CHECK(hash_embed("the quick brown fox", 18, 256) != a);
    CHECK(hash_embed("", 17, 64).size() == 64);
}

TEST_CASE("texts with disjoint vocabularies are nearly orthogonal") {
    std::mt19937_64 gen(2024);
    auto random_word = [&](char first) {
        std::string w(1, first);
        for (int i = 0; i < 6; ++i) w += static_cast<char>('a' + gen() % 26);
        return w;
    };
    double worst = 0;
    for (int pair = 0; pair < 100; ++pair) {
        std::string left, right;
        for (int i = 0; i < 12; ++i) {
            left += random_word('a') + " ";
            right += random_word('z') + " ";
        }
        const auto u = hash_embed(left, 17, 256), v = hash_embed(right, 17, 256);
        double dot = 0;
        for (std::size_t i = 0; i < u.size(); ++i) dot += double(u[i]) * v[i];
        worst = std::max(worst, std::abs(dot));
    }
    CHECK(worst < 0.2);
}

TEST_CASE("overlapping texts are closer than unrelated ones") {
    const auto a = hash_embed("river boat water current river", 5, 512);
    const auto b = hash_embed("river water boat dock", 5, 512);
    const auto c = hash_embed("mountain snow peak climber", 5, 512);
    auto dot = [](const std::vector<float>& x, const std::vector<float>& y) {
        double s = 0;
        for (std::size_t i = 0; i < x.size(); ++i) s += double(x[i]) * y[i];
        return s;
    };
    CHECK(dot(a, b) > dot(a, c) + 0.3);
}

TEST_CASE("vector store round trip and corruption") {
    const std::vector<std::string> texts = {"alpha beta", "gamma delta", "epsilon"};
    const std::vector<std::uint64_t> ids = {4, 9, 2};
    EmbedderConfig cfg;
    cfg.dim = 32;
    const auto m = embed_deterministic(texts, ids, cfg);
    testing::TempDir dir("store");
    save_store(m, dir / "m.vec");
    const auto back = load_store(dir / "m.vec");
    CHECK(back.row_ids == m.row_ids);
    CHECK(back.space_tag == m.space_tag);
    CHECK(back.values == m.values);
    CHECK(back.find(9) == std::optional<std::size_t>(1));

    std::string bytes = encode_store(m);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_store(bad_magic), CorruptionError);
    std::string bad_version = bytes;
    bad_version[8] = 7;
    CHECK_THROWS_AS(decode_store(bad_version), UnsupportedVersionError);
    CHECK_THROWS_AS(decode_store(bytes.substr(0, bytes.size() - 3)), CorruptionError);
    CHECK_THROWS_AS(decode_store(bytes + "x"), CorruptionError);
}

TEST_CASE("embedding cache persists to its backing file") {
    testing::TempDir dir("cache");
    const auto key = EmbeddingCache::key("model", "some text");
    CHECK(key != EmbeddingCache::key("other", "some text"));
    {
        EmbeddingCache cache(dir / "cache.vec");
        cache.put(key, {1.f, 2.f, 3.f});
        cache.flush();
    }
    EmbeddingCache reopened(dir / "cache.vec");
    CHECK(reopened.size() == 1);
    CHECK(reopened.get(key) == std::optional<std::vector<float>>(std::vector<float>{1.f, 2.f, 3.f}));
}

namespace {

// Local stand-in for an embedding service. Vectors are derived from the text
// so the client's ordering can be checked.
class FakeService {
public:
    FakeService() {
        server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
            const int n = ++requests;
            if (n <= fail_first.load() || always_fail.load()) {
                res.status = fail_status.load();
                return;
            }
            if (req.get_header_value("Authorization") != "Bearer secret") {
                res.status = 401;
                return;
            }
            auto body = nlohmann::json::parse(req.body);
            nlohmann::json data = nlohmann::json::array();
            const std::size_t dim = (n > 1 && shrink_after_first.load()) ? 3 : 4;
            for (const auto& t : body["input"]) {
                const std::string text = t.get<std::string>();
                std::vector<float> v(dim);
                for (std::size_t i = 0; i < dim; ++i) v[i] = static_cast<float>(text.size() + i);
                data.push_back({{"embedding", v}});
            }
            res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeService() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/embeddings"; }

    std::atomic<int> requests{0};
    std::atomic<int> fail_first{0};
    std::atomic<bool> always_fail{false};
    std::atomic<int> fail_status{503};
    std::atomic<bool> shrink_after_first{false};

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

EmbedderConfig remote_config(const FakeService& service) {
    EmbedderConfig cfg;
    cfg.kind = EmbedderKind::remote;
    cfg.name = "fake";
    cfg.endpoint_url = service.url();
    cfg.model_name = "fake-model";
    cfg.api_key_env = "INFOGAP_TEST_KEY";
    cfg.batch_size = 128;
    cfg.max_retries = 2;
    cfg.initial_backoff_ms = 1;
    cfg.max_in_flight = 2;
    cfg.timeout_seconds = 5;
    return cfg;
}

std::vector<std::string> make_texts(std::size_t n) {
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < n; ++i) texts.push_back(std::string(i % 50 + 1, 'x') + std::to_string(i));
    return texts;
}

std::vector<std::uint64_t> make_ids(std::size_t n) {
    std::vector<std::uint64_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;
    return ids;
}

}  // namespace

TEST_CASE("remote embedder batches requests and preserves order") {
    ::setenv("INFOGAP_TEST_KEY", "secret", 1);
    FakeService service;
    RemoteEmbedder embedder(remote_config(service), nullptr);
    const auto texts = make_texts(300);
    const auto m = embedder.embed(texts, make_ids(300));
    CHECK(service.requests == 3);
    CHECK(embedder.requests_sent() == 3);
    REQUIRE(m.rows() == 300);
    REQUIRE(m.dim() == 4);
    for (std::size_t i = 0; i < 300; ++i) CHECK(m.values(static_cast<Eigen::Index>(i), 1) == float(texts[i].size() + 1));
}

TEST_CASE("cache hits make no network call") {
    ::setenv("INFOGAP_TEST_KEY", "secret", 1);
    FakeService service;
    auto cache = std::make_shared<EmbeddingCache>();
    const auto texts = make_texts(10);
    RemoteEmbedder first(remote_config(service), cache);
    const auto a = first.embed(texts, make_ids(10));
    CHECK(service.requests == 1);
    RemoteEmbedder second(remote_config(service), cache);
    const auto b = second.embed(texts, make_ids(10));
    CHECK(service.requests == 1);
    CHECK(second.requests_sent() == 0);
    CHECK(a.values == b.values);
}

TEST_CASE("transient failures are retried") {
    ::setenv("INFOGAP_TEST_KEY", "secret", 1);
    FakeService service;
    service.fail_first = 2;
    RemoteEmbedder embedder(remote_config(service), nullptr);
    const auto m = embedder.embed(make_texts(5), make_ids(5));
    CHECK(m.rows() == 5);
    CHECK(service.requests == 3);
}

TEST_CASE("persistent failure reports the batch index") {
    ::setenv("INFOGAP_TEST_KEY", "secret", 1);
    FakeService service;
    service.always_fail = true;
    auto cfg = remote_config(service);
    cfg.batch_size = 4;
    cfg.max_in_flight = 1;
    RemoteEmbedder embedder(cfg, nullptr);
    try {
        embedder.embed(make_texts(3), make_ids(3));
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK(e.batch_index() == 0);
        CHECK(service.requests == 3);  // first attempt plus two retries
    }
}

TEST_CASE("client errors are not retried") {
    ::setenv("INFOGAP_TEST_KEY", "wrong", 1);
    FakeService service;
    RemoteEmbedder embedder(remote_config(service), nullptr);
    CHECK_THROWS_AS(embedder.embed(make_texts(2), make_ids(2)), TransportError);
    CHECK(service.requests == 1);
}

TEST_CASE("dimension mismatch across batches is a protocol error") {
    ::setenv("INFOGAP_TEST_KEY", "secret", 1);
    FakeService service;
    service.shrink_after_first = true;
    auto cfg = remote_config(service);
    cfg.batch_size = 2;
    cfg.max_in_flight = 1;
    RemoteEmbedder embedder(cfg, nullptr);
    CHECK_THROWS_AS(embedder.embed(make_texts(4), make_ids(4)), ProtocolError);
}

TEST_CASE("missing API key is a config error naming the variable") {
    ::unsetenv("INFOGAP_TEST_KEY");
    FakeService service;
    RemoteEmbedder embedder(remote_config(service), nullptr);
    try {
        embedder.embed(make_texts(2), make_ids(2));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("INFOGAP_TEST_KEY") != std::string::npos);
    }
    CHECK(service.requests == 0);
}

TEST_CASE("remote config validation") {
    EmbedderConfig cfg;
    cfg.kind = EmbedderKind::remote;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.endpoint_url = "http://localhost/x";
    cfg.model_name = "m";
    CHECK_NOTHROW(cfg.validate());
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
