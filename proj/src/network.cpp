#include "infogap/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "infogap/error.hpp"
#include "infogap/log.hpp"
#include "infogap/rng.hpp"
#include "infogap/util.hpp"

namespace infogap::network {

namespace {

std::pair<TopicId, TopicId> ordered(TopicId a, TopicId b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

}  // namespace

bool TopicGraph::add_edge(TopicId a, TopicId b, double weight) {
    if (a == b) throw DomainError("self-loop on topic " + std::to_string(a));
    vertices_.insert(a);
    vertices_.insert(b);
    return edges_.emplace(ordered(a, b), weight).second;
}

bool TopicGraph::has_edge(TopicId a, TopicId b) const { return a != b && edges_.count(ordered(a, b)) != 0; }

std::optional<double> TopicGraph::weight(TopicId a, TopicId b) const {
    if (a == b) return std::nullopt;
    auto it = edges_.find(ordered(a, b));
    if (it == edges_.end()) return std::nullopt;
    return it->second;
}

std::vector<Edge> TopicGraph::edges() const {
    std::vector<Edge> out;
    out.reserve(edges_.size());
    for (const auto& [key, w] : edges_) out.push_back({key.first, key.second, w, 1.0 - w});
    return out;
}

std::vector<std::vector<std::pair<std::size_t, double>>> TopicGraph::adjacency() const {
    std::vector<TopicId> ids = vertices();
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(ids.size());
    auto position = [&](TopicId id) {
        return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
    };
    for (const auto& [key, w] : edges_) {
        std::size_t i = position(key.first), j = position(key.second);
        adj[i].emplace_back(j, 1.0 - w);
        adj[j].emplace_back(i, 1.0 - w);
    }
    return adj;
}

bool TopicGraph::subgraph_of(const TopicGraph& other) const {
    for (TopicId v : vertices_)
        if (!other.has_vertex(v)) return false;
    for (const auto& [key, w] : edges_) {
        auto ow = other.weight(key.first, key.second);
        if (!ow || *ow != w) return false;
    }
    return true;
}

TopicGraphSeries build_series(std::span<const ChunkTopic> chunks, const embed::EmbeddingMatrix& centroids,
                              int n_chapters) {
    int last_chapter = 0;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (i > 0 && chunks[i].segment_id <= chunks[i - 1].segment_id)
            throw InputError("chunks must be ordered by increasing segment_id");
        if (chunks[i].chapter_index < 1) throw InputError("chapter indices are 1-based");
        if (chunks[i].chapter_index < last_chapter) throw InputError("chapter index decreases along the narrative");
        last_chapter = chunks[i].chapter_index;
    }
    if (n_chapters <= 0) n_chapters = last_chapter;

    std::map<TopicId, Eigen::VectorXd> vectors;
    auto centroid = [&](TopicId t) -> const Eigen::VectorXd& {
        auto it = vectors.find(t);
        if (it != vectors.end()) return it->second;
        auto row = t >= 0 ? centroids.find(static_cast<std::uint64_t>(t)) : std::nullopt;
        if (!row) throw InputError("topic " + std::to_string(t) + " has no centroid");
        return vectors.emplace(t, centroids.row(*row)).first->second;
    };

    TopicGraphSeries series;
    TopicGraph current;
    std::optional<TopicId> previous;
    std::size_t next = 0;
    for (int chapter = 1; chapter <= n_chapters; ++chapter) {
        for (; next < chunks.size() && chunks[next].chapter_index == chapter; ++next) {
            const auto& chunk = chunks[next];
            if (!chunk.topic) continue;
            TopicId t = *chunk.topic;
            centroid(t);
            current.add_vertex(t);
            if (previous && *previous != t && !current.has_edge(*previous, t))
                current.add_edge(*previous, t, embed::cosine_similarity(centroid(*previous), centroid(t)));
            previous = t;
        }
        series.chapters.push_back(chapter);
        series.snapshots.push_back(current);
    }
    if (next < chunks.size())
        log::warn("build_series: " + std::to_string(chunks.size() - next) + " chunks lie beyond chapter " +
                  std::to_string(n_chapters) + " and were ignored");
    return series;
}

namespace {

using Adjacency = std::vector<std::vector<std::pair<std::size_t, double>>>;

std::vector<int> component_labels(const Adjacency& adj, std::size_t& largest_label, std::size_t& largest_size) {
    std::vector<int> label(adj.size(), -1);
    int next = 0;
    largest_size = 0;
    largest_label = 0;
    for (std::size_t s = 0; s < adj.size(); ++s) {
        if (label[s] >= 0) continue;
        std::size_t size = 0;
        std::vector<std::size_t> stack = {s};
        label[s] = next;
        while (!stack.empty()) {
            std::size_t u = stack.back();
            stack.pop_back();
            ++size;
            for (auto [v, w] : adj[u])
                if (label[v] < 0) {
                    label[v] = next;
                    stack.push_back(v);
                }
        }
        if (size > largest_size) {
            largest_size = size;
            largest_label = static_cast<std::size_t>(next);
        }
        ++next;
    }
    return label;
}

struct PathStats {
    double hop_diameter = 0;
    double mean_hops = 0;
    double weighted_diameter = 0;
};

// Path statistics restricted to vertices with keep[v] set.
PathStats path_stats(const Adjacency& adj, const std::vector<bool>& keep, bool weighted) {
    PathStats stats;
    const std::size_t n = adj.size();
    double total = 0;
    std::size_t pairs = 0;
    std::vector<int> hops(n);
    std::vector<double> dist(n);
    for (std::size_t s = 0; s < n; ++s) {
        if (!keep[s]) continue;
        std::fill(hops.begin(), hops.end(), -1);
        std::queue<std::size_t> queue;
        hops[s] = 0;
        queue.push(s);
        while (!queue.empty()) {
            std::size_t u = queue.front();
            queue.pop();
            for (auto [v, w] : adj[u])
                if (hops[v] < 0) {
                    hops[v] = hops[u] + 1;
                    queue.push(v);
                }
        }
        for (std::size_t t = 0; t < n; ++t)
            if (t != s && hops[t] > 0) {
                total += hops[t];
                ++pairs;
                stats.hop_diameter = std::max(stats.hop_diameter, static_cast<double>(hops[t]));
            }
        if (!weighted) continue;
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        using Item = std::pair<double, std::size_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        dist[s] = 0;
        heap.emplace(0.0, s);
        while (!heap.empty()) {
            auto [d, u] = heap.top();
            heap.pop();
            if (d > dist[u]) continue;
            for (auto [v, w] : adj[u])
                if (d + w < dist[v]) {
                    dist[v] = d + w;
                    heap.emplace(dist[v], v);
                }
        }
        for (double d : dist)
            if (std::isfinite(d)) stats.weighted_diameter = std::max(stats.weighted_diameter, d);
    }
    stats.mean_hops = pairs ? total / static_cast<double>(pairs) : 0.0;
    return stats;
}

double transitivity(const Adjacency& adj) {
    const std::size_t n = adj.size();
    std::vector<std::vector<std::size_t>> nbrs(n);
    for (std::size_t u = 0; u < n; ++u) {
        for (auto [v, w] : adj[u]) nbrs[u].push_back(v);
        std::sort(nbrs[u].begin(), nbrs[u].end());
    }
    double closed = 0, triples = 0;
    for (std::size_t u = 0; u < n; ++u) {
        double k = static_cast<double>(nbrs[u].size());
        triples += k * (k - 1) / 2;
        for (std::size_t a = 0; a < nbrs[u].size(); ++a)
            for (std::size_t b = a + 1; b < nbrs[u].size(); ++b)
                if (std::binary_search(nbrs[nbrs[u][a]].begin(), nbrs[nbrs[u][a]].end(), nbrs[u][b])) closed += 1;
    }
    // closed counts each triangle once per corner, i.e. 3 x triangles.
    return triples > 0 ? closed / triples : 0.0;
}

Adjacency random_gnm(std::size_t n, std::size_t m, Rng& rng) {
    std::set<std::pair<std::size_t, std::size_t>> chosen;
    const std::size_t max_edges = n * (n - 1) / 2;
    m = std::min(m, max_edges);
    while (chosen.size() < m) {
        std::size_t a = static_cast<std::size_t>(rng.below(n)), b = static_cast<std::size_t>(rng.below(n));
        if (a == b) continue;
        chosen.insert(a < b ? std::pair{a, b} : std::pair{b, a});
    }
    Adjacency adj(n);
    for (auto [a, b] : chosen) {
        adj[a].emplace_back(b, 1.0);
        adj[b].emplace_back(a, 1.0);
    }
    return adj;
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n == 0) return 0;
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

double clustering_coefficient(const TopicGraph& graph) { return transitivity(graph.adjacency()); }

NetworkMetrics network_metrics(const TopicGraph& graph, std::uint64_t rng_seed, std::size_t n_random) {
    const std::size_t n = graph.vertex_count();
    if (n < 3) throw DomainError("network metrics need at least 3 vertices, graph has " + std::to_string(n));
    const Adjacency adj = graph.adjacency();

    NetworkMetrics m;
    m.n_vertices = n;
    m.n_edges = graph.edge_count();

    std::vector<double> degrees(n);
    for (std::size_t i = 0; i < n; ++i) degrees[i] = static_cast<double>(adj[i].size());
    double sum = std::accumulate(degrees.begin(), degrees.end(), 0.0);
    m.degree_mean = sum / static_cast<double>(n);
    double ss = 0;
    for (double d : degrees) ss += (d - m.degree_mean) * (d - m.degree_mean);
    m.degree_sd = std::sqrt(ss / static_cast<double>(n - 1));
    m.degree_median = median_of(degrees);
    std::vector<double> deviations;
    for (double d : degrees) deviations.push_back(std::abs(d - m.degree_median));
    m.degree_mad = 1.4826 * median_of(deviations);
    m.degree_min = *std::min_element(degrees.begin(), degrees.end());
    m.degree_max = *std::max_element(degrees.begin(), degrees.end());

    std::size_t largest_label = 0;
    auto labels = component_labels(adj, largest_label, m.component_size);
    m.disconnected = m.component_size < n;
    std::vector<bool> keep(n);
    for (std::size_t i = 0; i < n; ++i) keep[i] = labels[i] == static_cast<int>(largest_label);

    PathStats paths = path_stats(adj, keep, true);
    m.unweighted_diameter = paths.hop_diameter;
    m.avg_shortest_path = paths.mean_hops;
    m.weighted_diameter = paths.weighted_diameter;
    m.clustering_coefficient = transitivity(adj);

    double c_rand = 0, l_rand = 0;
    for (std::size_t r = 0; r < n_random; ++r) {
        Rng rng(Rng::derive(rng_seed, r));
        Adjacency random = random_gnm(n, m.n_edges, rng);
        std::size_t rl = 0, rs = 0;
        auto rlabels = component_labels(random, rl, rs);
        std::vector<bool> rkeep(n);
        for (std::size_t i = 0; i < n; ++i) rkeep[i] = rlabels[i] == static_cast<int>(rl);
        c_rand += transitivity(random);
        l_rand += path_stats(random, rkeep, false).mean_hops;
    }
    if (n_random > 0) {
        c_rand /= static_cast<double>(n_random);
        l_rand /= static_cast<double>(n_random);
    }
    if (c_rand > 0 && l_rand > 0 && m.avg_shortest_path > 0) {
        m.small_worldness = (m.clustering_coefficient / c_rand) / (m.avg_shortest_path / l_rand);
    } else {
        m.small_worldness = std::numeric_limits<double>::quiet_NaN();
        log::warn("small-worldness undefined: random baselines have no triangles or paths");
    }

    std::vector<double> logs;
    for (double d : degrees)
        if (d >= 1) logs.push_back(std::log(d));
    if (!logs.empty()) {
        m.lognormal_meanlog = std::accumulate(logs.begin(), logs.end(), 0.0) / static_cast<double>(logs.size());
        double v = 0;
        for (double x : logs) v += (x - m.lognormal_meanlog) * (x - m.lognormal_meanlog);
        m.lognormal_sdlog = std::sqrt(v / static_cast<double>(logs.size()));
    }
    return m;
}

std::string format_graph(const TopicGraph& graph) {
    util::Table table;
    table.header = {"topic_u", "topic_v", "weight", "distance"};
    std::set<TopicId> touched;
    for (const Edge& e : graph.edges()) {
        touched.insert(e.u);
        touched.insert(e.v);
        table.rows.push_back({std::to_string(e.u), std::to_string(e.v), util::format_double(e.weight),
                              util::format_double(e.distance)});
    }
    for (TopicId v : graph.vertices())
        if (!touched.count(v)) table.rows.push_back({std::to_string(v), "-", "-", "-"});
    return table.to_string();
}

TopicGraph parse_graph(std::string_view text) {
    util::Table table = util::parse_table(text);
    const std::size_t cu = table.column("topic_u"), cv = table.column("topic_v"), cw = table.column("weight");
    TopicGraph graph;
    for (const auto& row : table.rows) {
        TopicId u = util::parse_int(row[cu]);
        if (util::trim(row[cv]) == "-") {
            graph.add_vertex(u);
            continue;
        }
        graph.add_edge(u, util::parse_int(row[cv]), util::parse_double(row[cw]));
    }
    return graph;
}

void export_graph(const TopicGraph& graph, const std::filesystem::path& path) {
    util::write_file(path, format_graph(graph));
}

TopicGraph import_graph(const std::filesystem::path& path) {
    try {
        return parse_graph(util::read_file(path));
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

}  // namespace infogap::network
