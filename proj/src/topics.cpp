#include "infogap/topics.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "infogap/error.hpp"
#include "infogap/log.hpp"

namespace infogap::topics {

void ReductionConfig::validate() const {
    if (target_dim < 2) throw ConfigError("target_dim must be >= 2");
    if (method == ReductionMethod::external && external_path.empty())
        throw ConfigError("external reduction needs external_path");
}

PcaResult reduce_pca(const embed::EmbeddingMatrix& matrix, const ReductionConfig& cfg) {
    cfg.validate();
    matrix.validate();
    const auto n = static_cast<Eigen::Index>(matrix.rows());
    const auto dim = static_cast<Eigen::Index>(matrix.dim());
    if (static_cast<std::size_t>(dim) <= cfg.target_dim)
        throw DomainError("target_dim " + std::to_string(cfg.target_dim) + " must be below the original dimension " +
                          std::to_string(dim));
    if (static_cast<std::size_t>(n) <= cfg.target_dim)
        throw DomainError("PCA needs more rows (" + std::to_string(n) + ") than target_dim (" +
                          std::to_string(cfg.target_dim) + ")");

    Eigen::MatrixXd x = matrix.values.cast<double>();
    PcaResult result;
    result.mean = x.colwise().mean();
    x.rowwise() -= result.mean;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double tol = s.size() ? s(0) * static_cast<double>(std::max(n, dim)) * std::numeric_limits<double>::epsilon() : 0;
    Eigen::Index rank = 0;
    while (rank < s.size() && s(rank) > tol) ++rank;
    auto k = static_cast<Eigen::Index>(cfg.target_dim);
    if (rank < k) {
        log::warn("PCA: data rank " + std::to_string(rank) + " is below target_dim " + std::to_string(k) +
                  "; reducing to " + std::to_string(std::max<Eigen::Index>(rank, 1)) + " components");
        k = std::max<Eigen::Index>(rank, 1);
    }

    result.components = svd.matrixV().leftCols(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        Eigen::Index arg = 0;
        result.components.col(c).cwiseAbs().maxCoeff(&arg);
        if (result.components(arg, c) < 0) result.components.col(c) *= -1;
    }
    const double total = s.squaredNorm();
    result.explained_variance_ratio = total > 0 ? Eigen::VectorXd(s.head(k).array().square() / total)
                                                : Eigen::VectorXd::Zero(k);

    result.reduced.row_ids = matrix.row_ids;
    result.reduced.space_tag = "reduced";
    result.reduced.values = (x * result.components).cast<float>();
    return result;
}

embed::EmbeddingMatrix load_external_reduction(const ReductionConfig& cfg, const embed::EmbeddingMatrix& original) {
    embed::EmbeddingMatrix external = embed::load_store(cfg.external_path);
    if (external.rows() != original.rows())
        throw InputError("external reduction has " + std::to_string(external.rows()) + " rows, expected " +
                         std::to_string(original.rows()));
    embed::EmbeddingMatrix aligned;
    aligned.row_ids = original.row_ids;
    aligned.space_tag = external.space_tag.empty() ? "reduced" : external.space_tag;
    aligned.values.resize(external.values.rows(), external.values.cols());
    for (std::size_t i = 0; i < original.rows(); ++i) {
        auto row = external.find(original.row_ids[i]);
        if (!row) throw InputError("external reduction lacks row " + std::to_string(original.row_ids[i]));
        aligned.values.row(static_cast<Eigen::Index>(i)) = external.values.row(static_cast<Eigen::Index>(*row));
    }
    return aligned;
}

void ClusterConfig::validate() const {
    if (min_cluster_size < 2) throw ConfigError("min_cluster_size must be >= 2");
    if (min_samples && *min_samples < 1) throw ConfigError("min_samples must be >= 1");
}

std::size_t TopicModel::n_noise() const {
    return static_cast<std::size_t>(std::count(assignment.begin(), assignment.end(), kNoise));
}

std::optional<TopicId> TopicModel::topic_of(std::uint64_t segment_id) const {
    auto it = std::find(segment_ids.begin(), segment_ids.end(), segment_id);
    if (it == segment_ids.end()) return std::nullopt;
    TopicId t = assignment[static_cast<std::size_t>(it - segment_ids.begin())];
    if (t == kNoise) return std::nullopt;
    return t;
}

Eigen::MatrixXd mutual_reachability(const Eigen::MatrixXd& distances, std::size_t min_samples) {
    const Eigen::Index n = distances.rows();
    const auto k = static_cast<Eigen::Index>(std::clamp<std::size_t>(min_samples, 1, static_cast<std::size_t>(n)));
    // Core distance: distance to the k-th nearest point, the point itself included.
    Eigen::VectorXd core(n);
    std::vector<double> row(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = distances(i, j);
        std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
        core(i) = row[static_cast<std::size_t>(k - 1)];
    }
    Eigen::MatrixXd mr(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            mr(i, j) = i == j ? 0.0 : std::max({core(i), core(j), distances(i, j)});
    return mr;
}

namespace {

struct MstEdge {
    double weight;
    Eigen::Index a, b;  // a < b

    bool operator<(const MstEdge& o) const { return std::tie(weight, a, b) < std::tie(o.weight, o.a, o.b); }
};

// Prim over a dense matrix. With edges totally ordered by (weight, a, b) the
// spanning tree is unique, so the result does not depend on the start vertex.
std::vector<MstEdge> minimum_spanning_tree(const Eigen::MatrixXd& w) {
    const Eigen::Index n = w.rows();
    std::vector<MstEdge> tree;
    if (n < 2) return tree;
    std::vector<bool> in_tree(static_cast<std::size_t>(n), false);
    std::vector<MstEdge> best(static_cast<std::size_t>(n),
                              MstEdge{std::numeric_limits<double>::infinity(), 0, 0});
    Eigen::Index current = 0;
    in_tree[0] = true;
    for (Eigen::Index step = 1; step < n; ++step) {
        for (Eigen::Index v = 0; v < n; ++v) {
            if (in_tree[static_cast<std::size_t>(v)]) continue;
            MstEdge candidate{w(current, v), std::min(current, v), std::max(current, v)};
            if (candidate < best[static_cast<std::size_t>(v)]) best[static_cast<std::size_t>(v)] = candidate;
        }
        Eigen::Index next = -1;
        for (Eigen::Index v = 0; v < n; ++v)
            if (!in_tree[static_cast<std::size_t>(v)] &&
                (next < 0 || best[static_cast<std::size_t>(v)] < best[static_cast<std::size_t>(next)]))
                next = v;
        tree.push_back(best[static_cast<std::size_t>(next)]);
        in_tree[static_cast<std::size_t>(next)] = true;
        current = next;
    }
    std::sort(tree.begin(), tree.end());
    return tree;
}

struct Merge {
    Eigen::Index left, right;
    double distance;
    std::size_t size;
};

// Single-linkage dendrogram; node ids n.. are merges in MST order.
std::vector<Merge> single_linkage(const std::vector<MstEdge>& mst, Eigen::Index n) {
    std::vector<Eigen::Index> parent(static_cast<std::size_t>(2 * n - 1));
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<std::size_t> size(static_cast<std::size_t>(2 * n - 1), 1);
    auto find = [&](Eigen::Index x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    std::vector<Merge> merges;
    Eigen::Index next = n;
    for (const auto& e : mst) {
        Eigen::Index ra = find(e.a), rb = find(e.b);
        std::size_t s = size[static_cast<std::size_t>(ra)] + size[static_cast<std::size_t>(rb)];
        merges.push_back({ra, rb, e.weight, s});
        parent[static_cast<std::size_t>(ra)] = parent[static_cast<std::size_t>(rb)] = next;
        size[static_cast<std::size_t>(next)] = s;
        ++next;
    }
    return merges;
}

struct CondensedRow {
    Eigen::Index parent;  // cluster label (>= n)
    Eigen::Index child;   // point (< n) or cluster label
    double lambda;
    std::size_t size;
};

std::vector<CondensedRow> condense(const std::vector<Merge>& merges, Eigen::Index n, std::size_t min_cluster_size) {
    std::vector<CondensedRow> rows;
    if (merges.empty()) return rows;

    double max_finite = 0;
    for (const auto& m : merges)
        if (m.distance > 0) max_finite = std::max(max_finite, 1.0 / m.distance);
    const double zero_lambda = max_finite > 0 ? 2.0 * max_finite : 1.0;
    auto lambda_of = [&](double d) { return d > 0 ? 1.0 / d : zero_lambda; };

    auto node_size = [&](Eigen::Index node) {
        return node < n ? std::size_t{1} : merges[static_cast<std::size_t>(node - n)].size;
    };
    auto leaves = [&](Eigen::Index node, auto&& emit) {
        std::vector<Eigen::Index> stack = {node};
        while (!stack.empty()) {
            Eigen::Index x = stack.back();
            stack.pop_back();
            if (x < n) {
                emit(x);
            } else {
                stack.push_back(merges[static_cast<std::size_t>(x - n)].right);
                stack.push_back(merges[static_cast<std::size_t>(x - n)].left);
            }
        }
    };

    const Eigen::Index root = n + static_cast<Eigen::Index>(merges.size()) - 1;
    Eigen::Index next_label = n + 1;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> queue = {{root, n}};  // (node, cluster label)
    for (std::size_t q = 0; q < queue.size(); ++q) {
        auto [node, label] = queue[q];
        const Merge& m = merges[static_cast<std::size_t>(node - n)];
        const double lambda = lambda_of(m.distance);
        const std::size_t ls = node_size(m.left), rs = node_size(m.right);
        const bool left_big = ls >= min_cluster_size, right_big = rs >= min_cluster_size;
        auto spill = [&](Eigen::Index child) {
            leaves(child, [&](Eigen::Index p) { rows.push_back({label, p, lambda, 1}); });
        };
        auto carry = [&](Eigen::Index child) {
            if (child < n)
                rows.push_back({label, child, lambda, 1});
            else
                queue.emplace_back(child, label);
        };
        if (left_big && right_big) {
            for (Eigen::Index child : {m.left, m.right}) {
                Eigen::Index child_label = next_label++;
                rows.push_back({label, child_label, lambda, node_size(child)});
                queue.emplace_back(child, child_label);
            }
        } else if (!left_big && !right_big) {
            spill(m.left);
            spill(m.right);
        } else if (!left_big) {
            spill(m.left);
            carry(m.right);
        } else {
            spill(m.right);
            carry(m.left);
        }
    }
    return rows;
}

}  // namespace

TopicModel hdbscan(const embed::EmbeddingMatrix& points, const ClusterConfig& cfg) {
    cfg.validate();
    points.validate();
    const auto n = static_cast<Eigen::Index>(points.rows());
    TopicModel model;
    model.segment_ids = points.row_ids;
    model.assignment.assign(static_cast<std::size_t>(n), kNoise);
    model.probability.assign(static_cast<std::size_t>(n), 0.0);
    if (static_cast<std::size_t>(n) < cfg.min_cluster_size || n < 2) return model;

    const Eigen::MatrixXd x = points.values.cast<double>();
    Eigen::MatrixXd d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i, i) = 0;
        for (Eigen::Index j = 0; j < i; ++j) d(i, j) = d(j, i) = (x.row(i) - x.row(j)).norm();
    }
    const Eigen::MatrixXd mr = mutual_reachability(d, cfg.samples());
    const auto merges = single_linkage(minimum_spanning_tree(mr), n);
    const auto rows = condense(merges, n, cfg.min_cluster_size);

    // Cluster bookkeeping, indexed by label - n.
    Eigen::Index n_clusters = n + 1;
    for (const auto& r : rows) n_clusters = std::max(n_clusters, r.child + 1);
    n_clusters -= n;
    std::vector<double> birth(static_cast<std::size_t>(n_clusters), 0.0);
    std::vector<Eigen::Index> parent_of(static_cast<std::size_t>(n_clusters), -1);
    std::vector<std::vector<Eigen::Index>> children(static_cast<std::size_t>(n_clusters));
    std::vector<double> max_lambda(static_cast<std::size_t>(n_clusters), 0.0);
    std::vector<Eigen::Index> point_parent(static_cast<std::size_t>(n), -1);
    std::vector<double> point_lambda(static_cast<std::size_t>(n), 0.0);
    for (const auto& r : rows) {
        auto p = static_cast<std::size_t>(r.parent - n);
        max_lambda[p] = std::max(max_lambda[p], r.lambda);
        if (r.child >= n) {
            auto c = static_cast<std::size_t>(r.child - n);
            birth[c] = r.lambda;
            parent_of[c] = r.parent - n;
            children[p].push_back(r.child - n);
        } else {
            point_parent[static_cast<std::size_t>(r.child)] = r.parent - n;
            point_lambda[static_cast<std::size_t>(r.child)] = r.lambda;
        }
    }
    std::vector<double> stability(static_cast<std::size_t>(n_clusters), 0.0);
    for (const auto& r : rows) {
        auto p = static_cast<std::size_t>(r.parent - n);
        stability[p] += (r.lambda - birth[p]) * static_cast<double>(r.size);
    }

    // Excess of mass, children before parents (labels grow with depth).
    std::vector<bool> selected(static_cast<std::size_t>(n_clusters), false);
    for (Eigen::Index c = n_clusters - 1; c >= 1; --c) {
        auto ci = static_cast<std::size_t>(c);
        double child_sum = 0;
        for (auto k : children[ci]) child_sum += stability[static_cast<std::size_t>(k)];
        if (!children[ci].empty() && child_sum > stability[ci]) {
            stability[ci] = child_sum;
        } else {
            selected[ci] = true;
            std::vector<Eigen::Index> stack(children[ci].begin(), children[ci].end());
            while (!stack.empty()) {
                auto k = static_cast<std::size_t>(stack.back());
                stack.pop_back();
                selected[k] = false;
                stack.insert(stack.end(), children[k].begin(), children[k].end());
            }
        }
    }
    if (children[0].empty()) selected[0] = true;

    // Label points by their selected ancestor.
    std::vector<Eigen::Index> cluster_of(static_cast<std::size_t>(n), -1);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = point_parent[static_cast<std::size_t>(i)]; c >= 0; c = parent_of[static_cast<std::size_t>(c)])
            if (selected[static_cast<std::size_t>(c)]) {
                cluster_of[static_cast<std::size_t>(i)] = c;
                break;
            }
    }
    std::map<Eigen::Index, TopicId> topic_of_cluster;
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index c = cluster_of[static_cast<std::size_t>(i)];
        if (c < 0) continue;
        auto [it, inserted] = topic_of_cluster.emplace(c, static_cast<TopicId>(topic_of_cluster.size()));
        auto ui = static_cast<std::size_t>(i);
        model.assignment[ui] = it->second;
        double lmax = max_lambda[static_cast<std::size_t>(c)];
        double lp = point_lambda[ui];
        model.probability[ui] = (lmax <= 0 || !std::isfinite(lp)) ? 1.0 : std::min(lp, lmax) / lmax;
    }
    for (std::size_t t = 0; t < topic_of_cluster.size(); ++t) model.topic_ids.push_back(static_cast<TopicId>(t));
    return model;
}

embed::EmbeddingMatrix topic_centroids(const TopicModel& model, const embed::EmbeddingMatrix& original) {
    std::map<std::uint64_t, std::size_t> row_of;
    for (std::size_t i = 0; i < original.rows(); ++i) row_of[original.row_ids[i]] = i;

    const auto dim = static_cast<Eigen::Index>(original.dim());
    std::map<TopicId, std::pair<Eigen::VectorXd, double>> weighted;
    std::map<TopicId, std::pair<Eigen::VectorXd, double>> plain;
    for (std::size_t i = 0; i < model.segment_ids.size(); ++i) {
        TopicId t = model.assignment[i];
        if (t == kNoise) continue;
        auto it = row_of.find(model.segment_ids[i]);
        if (it == row_of.end())
            throw InputError("segment " + std::to_string(model.segment_ids[i]) + " has no embedding row");
        Eigen::VectorXd x = original.row(it->second);
        auto& [wsum, wtotal] = weighted.try_emplace(t, Eigen::VectorXd::Zero(dim), 0.0).first->second;
        auto& [psum, pcount] = plain.try_emplace(t, Eigen::VectorXd::Zero(dim), 0.0).first->second;
        wsum += model.probability[i] * x;
        wtotal += model.probability[i];
        psum += x;
        pcount += 1;
    }
    embed::EmbeddingMatrix centroids;
    centroids.space_tag = "centroids";
    centroids.values.resize(static_cast<Eigen::Index>(weighted.size()), dim);
    Eigen::Index r = 0;
    for (const auto& [t, acc] : weighted) {
        Eigen::VectorXd c;
        if (acc.second > 0) {
            c = acc.first / acc.second;
        } else {
            log::warn("topic " + std::to_string(t) + " has zero total probability; using the unweighted mean");
            c = plain[t].first / plain[t].second;
        }
        centroids.row_ids.push_back(static_cast<std::uint64_t>(t));
        centroids.values.row(r++) = c.cast<float>().transpose();
    }
    centroids.validate();
    return centroids;
}

std::vector<ChapterTopicStats> chapter_topic_stats(const TopicModel& model,
                                                   std::span<const corpus::TextSegment> segments) {
    std::map<std::uint64_t, TopicId> topic_of;
    for (std::size_t i = 0; i < model.segment_ids.size(); ++i) topic_of[model.segment_ids[i]] = model.assignment[i];

    int last = 0;
    for (const auto& s : segments) last = std::max(last, s.chapter_index);
    std::vector<std::map<TopicId, std::size_t>> counts(static_cast<std::size_t>(last));
    for (const auto& s : segments) {
        if (s.chapter_index < 1) throw InputError("segment " + std::to_string(s.segment_id) + " has no chapter");
        auto it = topic_of.find(s.segment_id);
        if (it == topic_of.end() || it->second == kNoise) continue;
        ++counts[static_cast<std::size_t>(s.chapter_index - 1)][it->second];
    }
    std::set<TopicId> seen;
    std::vector<ChapterTopicStats> stats;
    for (int c = 1; c <= last; ++c) {
        ChapterTopicStats st;
        st.chapter_index = c;
        for (const auto& [t, k] : counts[static_cast<std::size_t>(c - 1)]) {
            st.topics_present.insert(t);
            st.freq_log2[t] = std::log2(static_cast<double>(k));
            if (seen.insert(t).second) ++st.n_novel;
        }
        st.n_topics = st.topics_present.size();
        stats.push_back(std::move(st));
    }
    return stats;
}

util::Table assignment_table(const TopicModel& model) {
    util::Table table;
    table.header = {"segment_id", "topic_id", "probability"};
    for (std::size_t i = 0; i < model.segment_ids.size(); ++i)
        table.rows.push_back({std::to_string(model.segment_ids[i]),
                              model.assignment[i] == kNoise ? "noise" : std::to_string(model.assignment[i]),
                              util::format_double(model.probability[i])});
    return table;
}

TopicModel parse_assignment(const util::Table& table) {
    const std::size_t s = table.column("segment_id"), t = table.column("topic_id"), p = table.column("probability");
    TopicModel model;
    std::set<TopicId> ids;
    for (const auto& row : table.rows) {
        model.segment_ids.push_back(static_cast<std::uint64_t>(util::parse_int(row[s])));
        TopicId topic = util::trim(row[t]) == "noise" ? kNoise : util::parse_int(row[t]);
        model.assignment.push_back(topic);
        model.probability.push_back(util::parse_double(row[p]));
        if (topic != kNoise) ids.insert(topic);
    }
    model.topic_ids.assign(ids.begin(), ids.end());
    return model;
}

}  // namespace infogap::topics
