#include "infogap/homology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <unordered_map>

#include "infogap/error.hpp"

namespace infogap::homology {

DistanceMatrix::DistanceMatrix(std::size_t n, std::vector<double> values, bool sentinel_used)
    : n_(n), d_(std::move(values)), sentinel_used_(sentinel_used) {
    if (d_.size() != n_ * n_)
        throw DomainError("distance matrix needs " + std::to_string(n_ * n_) + " entries, got " +
                          std::to_string(d_.size()));
}

void DistanceMatrix::validate() const {
    if (d_.size() != n_ * n_) throw DomainError("distance matrix is not square");
    for (std::size_t i = 0; i < n_; ++i) {
        if ((*this)(i, i) != 0.0) throw DomainError("distance matrix has a nonzero diagonal entry");
        for (std::size_t j = 0; j < i; ++j) {
            double a = (*this)(i, j), b = (*this)(j, i);
            if (!std::isfinite(a) || !std::isfinite(b))
                throw DomainError("distance matrix has a non-finite entry");
            if (a != b)
                throw DomainError("distance matrix is not symmetric at (" + std::to_string(i) + ", " +
                                  std::to_string(j) + ")");
            if (a < 0) throw DomainError("distance matrix has a negative entry");
        }
    }
}

double DistanceMatrix::enclosing_radius() const {
    double radius = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_; ++i) {
        double row_max = 0;
        for (std::size_t j = 0; j < n_; ++j) row_max = std::max(row_max, (*this)(i, j));
        radius = std::min(radius, row_max);
    }
    return n_ == 0 ? 0.0 : radius;
}

DistanceMatrix geodesic_distances(const network::TopicGraph& graph) {
    const std::size_t n = graph.vertex_count();
    if (n == 0) throw DomainError("geodesic distances of an empty graph");
    auto adjacency = graph.adjacency();
    for (const auto& row : adjacency)
        for (auto [j, w] : row)
            if (w < 0 || std::isnan(w)) throw DomainError("negative edge distance");

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> d(n * n, inf);
    using Item = std::pair<double, std::size_t>;
    for (std::size_t s = 0; s < n; ++s) {
        double* row = &d[s * n];
        std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
        row[s] = 0;
        queue.emplace(0.0, s);
        while (!queue.empty()) {
            auto [du, u] = queue.top();
            queue.pop();
            if (du > row[u]) continue;
            for (auto [v, w] : adjacency[u]) {
                double candidate = du + w;
                if (candidate < row[v]) {
                    row[v] = candidate;
                    queue.emplace(candidate, v);
                }
            }
        }
    }
    // Dijkstra from each side may round differently; make the matrix exactly symmetric.
    double max_finite = 0;
    bool disconnected = false;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            double v = std::min(d[i * n + j], d[j * n + i]);
            d[i * n + j] = d[j * n + i] = v;
            if (std::isinf(v))
                disconnected = true;
            else
                max_finite = std::max(max_finite, v);
        }
    if (disconnected) {
        const double sentinel = 1.0 + max_finite;
        for (double& v : d)
            if (std::isinf(v)) v = sentinel;
    }
    return DistanceMatrix(n, std::move(d), disconnected);
}

namespace {

using index_t = std::int64_t;

class BinomialTable {
public:
    BinomialTable(index_t n, index_t k) : stride_(k + 1), table_(static_cast<std::size_t>((n + 1) * (k + 1)), 0) {
        constexpr index_t limit = std::numeric_limits<index_t>::max() / 4;
        for (index_t i = 0; i <= n; ++i) {
            at(i, 0) = 1;
            for (index_t j = 1; j <= std::min(i, k); ++j) {
                index_t value = at(i - 1, j - 1) + (j <= i - 1 ? at(i - 1, j) : 0);
                if (value > limit)
                    throw DomainError("too many points to index simplices of dimension " + std::to_string(k - 1));
                at(i, j) = value;
            }
        }
    }

    index_t operator()(index_t n, index_t k) const {
        return table_[static_cast<std::size_t>(n * stride_ + k)];
    }

private:
    index_t& at(index_t n, index_t k) { return table_[static_cast<std::size_t>(n * stride_ + k)]; }

    index_t stride_;
    std::vector<index_t> table_;
};

struct Entry {
    double diameter;
    index_t index;
};

constexpr Entry kNone{0.0, -1};

// Filtration order is (diameter ascending, index descending). LaterFirst(a, b)
// holds when a enters after b; as a heap comparator it keeps the earliest
// simplex on top, and sorting with it lists the latest simplices first.
struct LaterFirst {
    bool operator()(const Entry& a, const Entry& b) const {
        return a.diameter > b.diameter || (a.diameter == b.diameter && a.index < b.index);
    }
};

using Column = std::priority_queue<Entry, std::vector<Entry>, LaterFirst>;
using PivotMap = std::unordered_map<index_t, index_t>;

// Removes and returns the surviving top entry over Z/2 (pairs cancel).
Entry pop_pivot(Column& column) {
    while (!column.empty()) {
        Entry pivot = column.top();
        column.pop();
        bool odd = true;
        while (!column.empty() && column.top().index == pivot.index) {
            column.pop();
            odd = !odd;
        }
        if (odd) return pivot;
    }
    return kNone;
}

Entry get_pivot(Column& column) {
    Entry pivot = pop_pivot(column);
    if (pivot.index != -1) column.push(pivot);
    return pivot;
}

class UnionFind {
public:
    explicit UnionFind(index_t n) : parent_(static_cast<std::size_t>(n)), rank_(static_cast<std::size_t>(n), 0) {
        for (index_t i = 0; i < n; ++i) parent_[static_cast<std::size_t>(i)] = i;
    }
    index_t find(index_t x) {
        while (parent_[static_cast<std::size_t>(x)] != x) {
            auto& p = parent_[static_cast<std::size_t>(x)];
            p = parent_[static_cast<std::size_t>(p)];
            x = p;
        }
        return x;
    }
    void link(index_t x, index_t y) {
        x = find(x);
        y = find(y);
        if (x == y) return;
        auto& rx = rank_[static_cast<std::size_t>(x)];
        auto& ry = rank_[static_cast<std::size_t>(y)];
        if (rx > ry)
            parent_[static_cast<std::size_t>(y)] = x;
        else {
            parent_[static_cast<std::size_t>(x)] = y;
            if (rx == ry) ++ry;
        }
    }

private:
    std::vector<index_t> parent_;
    std::vector<std::uint8_t> rank_;
};

// Reduction columns stored back to back.
class SparseColumns {
public:
    void append_column() { bounds_.push_back(entries_.size()); }
    void push_back(Entry e) {
        entries_.push_back(e);
        ++bounds_.back();
    }
    std::span<const Entry> column(std::size_t i) const {
        std::size_t begin = i == 0 ? 0 : bounds_[i - 1];
        return {entries_.data() + begin, bounds_[i] - begin};
    }

private:
    std::vector<std::size_t> bounds_;
    std::vector<Entry> entries_;
};

class RipsEngine {
public:
    RipsEngine(const DistanceMatrix& dm, int max_dim, double threshold)
        : n_(static_cast<index_t>(dm.size())),
          max_dim_(max_dim),
          threshold_(threshold),
          binomial_(n_, max_dim + 2),
          lower_(static_cast<std::size_t>(n_ * (n_ - 1) / 2)) {
        for (index_t i = 1; i < n_; ++i)
            for (index_t j = 0; j < i; ++j)
                lower_[static_cast<std::size_t>(i * (i - 1) / 2 + j)] =
                    dm(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        diagrams_.resize(static_cast<std::size_t>(max_dim + 1));
        for (int d = 0; d <= max_dim; ++d) diagrams_[static_cast<std::size_t>(d)].dim = d;
    }

    std::vector<PersistenceDiagram> run() {
        std::vector<Entry> simplices, columns;
        compute_dim0(simplices, columns);
        for (int dim = 1; dim <= max_dim_; ++dim) {
            PivotMap pivots;
            pivots.reserve(columns.size());
            compute_pairs(columns, pivots, dim);
            if (dim < max_dim_) assemble_columns(simplices, columns, pivots, dim + 1);
        }
        return std::move(diagrams_);
    }

private:
    double dist(index_t i, index_t j) const {
        if (i == j) return 0.0;
        if (i < j) std::swap(i, j);
        return lower_[static_cast<std::size_t>(i * (i - 1) / 2 + j)];
    }

    // Largest v <= top with C(v, k) <= idx.
    index_t max_vertex(index_t idx, index_t k, index_t top) const {
        if (binomial_(top, k) > idx) {
            index_t count = top - (k - 1);
            while (count > 0) {
                index_t step = count >> 1, mid = top - step;
                if (binomial_(mid, k) > idx) {
                    top = mid - 1;
                    count -= step + 1;
                } else {
                    count = step;
                }
            }
        }
        return top;
    }

    // Vertices in descending order.
    void vertices_of(index_t idx, int dim, std::vector<index_t>& out) const {
        out.resize(static_cast<std::size_t>(dim + 1));
        index_t top = n_ - 1;
        for (index_t k = dim + 1; k > 1; --k) {
            top = max_vertex(idx, k, top);
            out[static_cast<std::size_t>(dim + 1 - k)] = top;
            idx -= binomial_(top, k);
        }
        out[static_cast<std::size_t>(dim)] = idx;
    }

    double diameter_of(index_t idx, int dim) const {
        thread_local std::vector<index_t> vs;
        vertices_of(idx, dim, vs);
        double diam = 0;
        for (std::size_t a = 0; a < vs.size(); ++a)
            for (std::size_t b = 0; b < a; ++b) diam = std::max(diam, dist(vs[a], vs[b]));
        return diam;
    }

    // Enumerates cofacets in decreasing index order.
    class Cofacets {
    public:
        Cofacets(const RipsEngine& engine, Entry simplex, int dim)
            : engine_(engine),
              idx_below_(simplex.index),
              idx_above_(0),
              j_(engine.n_ - 1),
              k_(dim + 1),
              simplex_(simplex) {
            engine.vertices_of(simplex.index, dim, vertices_);
        }
        // all = false restricts to cofacets whose new vertex exceeds every existing one.
        bool has_next(bool all = true) const {
            return j_ >= k_ && (all || engine_.binomial_(j_, k_) > idx_below_);
        }
        Entry next() {
            const auto& binomial = engine_.binomial_;
            while (binomial(j_, k_) <= idx_below_) {
                idx_below_ -= binomial(j_, k_);
                idx_above_ += binomial(j_, k_ + 1);
                --j_;
                --k_;
            }
            double diam = simplex_.diameter;
            for (index_t v : vertices_) diam = std::max(diam, engine_.dist(j_, v));
            index_t index = idx_above_ + binomial(j_, k_ + 1) + idx_below_;
            --j_;
            return {diam, index};
        }

    private:
        const RipsEngine& engine_;
        index_t idx_below_, idx_above_, j_, k_;
        Entry simplex_;
        std::vector<index_t> vertices_;
    };

    // Enumerates facets in increasing index order.
    class Facets {
    public:
        Facets(const RipsEngine& engine, Entry simplex, int dim)
            : engine_(engine), idx_below_(simplex.index), idx_above_(0), j_(engine.n_ - 1), k_(dim), dim_(dim) {}
        bool has_next() const { return k_ >= 0; }
        Entry next() {
            const auto& binomial = engine_.binomial_;
            j_ = engine_.max_vertex(idx_below_, k_ + 1, j_);
            index_t index = idx_above_ - binomial(j_, k_ + 1) + idx_below_;
            double diam = engine_.diameter_of(index, dim_ - 1);
            idx_below_ -= binomial(j_, k_ + 1);
            idx_above_ += binomial(j_, k_);
            --k_;
            return {diam, index};
        }

    private:
        const RipsEngine& engine_;
        index_t idx_below_, idx_above_, j_, k_;
        int dim_;
    };

    Entry zero_pivot_facet(Entry simplex, int dim) const {
        Facets facets(*this, simplex, dim);
        while (facets.has_next()) {
            Entry f = facets.next();
            if (f.diameter == simplex.diameter) return f;
        }
        return kNone;
    }

    Entry zero_pivot_cofacet(Entry simplex, int dim) const {
        Cofacets cofacets(*this, simplex, dim);
        while (cofacets.has_next()) {
            Entry c = cofacets.next();
            if (c.diameter == simplex.diameter) return c;
        }
        return kNone;
    }

    Entry zero_apparent_facet(Entry simplex, int dim) const {
        Entry facet = zero_pivot_facet(simplex, dim);
        return facet.index != -1 && zero_pivot_cofacet(facet, dim - 1).index == simplex.index ? facet : kNone;
    }

    Entry zero_apparent_cofacet(Entry simplex, int dim) const {
        Entry cofacet = zero_pivot_cofacet(simplex, dim);
        return cofacet.index != -1 && zero_pivot_facet(cofacet, dim + 1).index == simplex.index ? cofacet : kNone;
    }

    bool in_zero_apparent_pair(Entry simplex, int dim) const {
        return zero_apparent_cofacet(simplex, dim).index != -1 || zero_apparent_facet(simplex, dim).index != -1;
    }

    void record(int dim, double birth, double death) {
        auto& diagram = diagrams_[static_cast<std::size_t>(dim)];
        if (std::isinf(death))
            ++diagram.essential_excluded;
        else if (death > birth)
            diagram.points.push_back({birth, death});
    }

    void compute_dim0(std::vector<Entry>& edges, std::vector<Entry>& columns) {
        edges.clear();
        for (index_t i = 1; i < n_; ++i)
            for (index_t j = 0; j < i; ++j) {
                double d = dist(i, j);
                if (d <= threshold_) edges.push_back({d, i * (i - 1) / 2 + j});
            }
        std::sort(edges.rbegin(), edges.rend(), LaterFirst{});  // earliest first

        UnionFind components(n_);
        std::vector<index_t> vs;
        for (const Entry& e : edges) {
            vertices_of(e.index, 1, vs);
            index_t u = components.find(vs[0]), v = components.find(vs[1]);
            if (u != v) {
                record(0, 0.0, e.diameter);
                components.link(u, v);
            } else if (zero_apparent_cofacet(e, 1).index == -1) {
                columns.push_back(e);
            }
        }
        std::reverse(columns.begin(), columns.end());
        for (index_t i = 0; i < n_; ++i)
            if (components.find(i) == i) record(0, 0.0, std::numeric_limits<double>::infinity());
    }

    void assemble_columns(std::vector<Entry>& simplices, std::vector<Entry>& columns, const PivotMap& pivots,
                          int dim) {
        columns.clear();
        std::vector<Entry> next_simplices;
        for (const Entry& simplex : simplices) {
            Cofacets cofacets(*this, simplex, dim - 1);
            while (cofacets.has_next(false)) {
                Entry c = cofacets.next();
                if (c.diameter > threshold_) continue;
                if (dim < max_dim_) next_simplices.push_back(c);
                if (pivots.find(c.index) == pivots.end() && !in_zero_apparent_pair(c, dim)) columns.push_back(c);
            }
        }
        simplices.swap(next_simplices);
        std::sort(columns.begin(), columns.end(), LaterFirst{});
    }

    void add_simplex_coboundary(Entry simplex, int dim, Column& reduction, Column& coboundary) const {
        reduction.push(simplex);
        Cofacets cofacets(*this, simplex, dim);
        while (cofacets.has_next()) {
            Entry c = cofacets.next();
            if (c.diameter <= threshold_) coboundary.push(c);
        }
    }

    Entry init_coboundary_and_get_pivot(Entry simplex, Column& coboundary, int dim, const PivotMap& pivots) {
        bool check_emergent = true;
        scratch_.clear();
        Cofacets cofacets(*this, simplex, dim);
        while (cofacets.has_next()) {
            Entry c = cofacets.next();
            if (c.diameter > threshold_) continue;
            scratch_.push_back(c);
            if (check_emergent && c.diameter == simplex.diameter) {
                if (pivots.find(c.index) == pivots.end() && zero_apparent_facet(c, dim + 1).index == -1)
                    return c;
                check_emergent = false;
            }
        }
        for (const Entry& c : scratch_) coboundary.push(c);
        return get_pivot(coboundary);
    }

    void compute_pairs(const std::vector<Entry>& columns, PivotMap& pivots, int dim) {
        SparseColumns reduction_matrix;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            const Entry column = columns[i];
            reduction_matrix.append_column();
            Column working_reduction, working_coboundary;
            Entry pivot = init_coboundary_and_get_pivot(column, working_coboundary, dim, pivots);
            while (true) {
                if (pivot.index == -1) {
                    record(dim, column.diameter, std::numeric_limits<double>::infinity());
                    break;
                }
                if (auto pair = pivots.find(pivot.index); pair != pivots.end()) {
                    auto j = static_cast<std::size_t>(pair->second);
                    add_simplex_coboundary(columns[j], dim, working_reduction, working_coboundary);
                    for (const Entry& s : reduction_matrix.column(j))
                        add_simplex_coboundary(s, dim, working_reduction, working_coboundary);
                    pivot = get_pivot(working_coboundary);
                } else if (Entry e = zero_apparent_facet(pivot, dim + 1); e.index != -1) {
                    add_simplex_coboundary(e, dim, working_reduction, working_coboundary);
                    pivot = get_pivot(working_coboundary);
                } else {
                    record(dim, column.diameter, pivot.diameter);
                    pivots.emplace(pivot.index, static_cast<index_t>(i));
                    while (true) {
                        Entry e = pop_pivot(working_reduction);
                        if (e.index == -1) break;
                        reduction_matrix.push_back(e);
                    }
                    break;
                }
            }
        }
    }

    index_t n_;
    int max_dim_;
    double threshold_;
    BinomialTable binomial_;
    std::vector<double> lower_;
    std::vector<Entry> scratch_;
    std::vector<PersistenceDiagram> diagrams_;
};

}  // namespace

std::vector<PersistenceDiagram> rips_persistence(const DistanceMatrix& dm, int max_dim) {
    if (max_dim < 0 || max_dim > kMaxHomologyDim)
        throw DomainError("homology dimension must be in 0.." + std::to_string(kMaxHomologyDim));
    dm.validate();

    std::vector<PersistenceDiagram> diagrams;
    if (dm.size() < 2) {
        diagrams.resize(static_cast<std::size_t>(max_dim + 1));
        for (int d = 0; d <= max_dim; ++d) diagrams[static_cast<std::size_t>(d)].dim = d;
        if (dm.size() == 1) diagrams[0].essential_excluded = 1;
        return diagrams;
    }
    RipsEngine engine(dm, max_dim, dm.enclosing_radius());
    diagrams = engine.run();
    for (auto& diagram : diagrams) sort_points(diagram);
    return diagrams;
}

BettiCounts betti_counts(std::span<const PersistenceDiagram> diagrams) {
    BettiCounts counts;
    for (const auto& diagram : diagrams) {
        switch (diagram.dim) {
            case 0: counts.beta0 = diagram.points.size(); break;
            case 1: counts.beta1 = diagram.points.size(); break;
            case 2: counts.beta2 = diagram.points.size(); break;
            default: break;
        }
    }
    return counts;
}

void sort_points(PersistenceDiagram& diagram) {
    std::sort(diagram.points.begin(), diagram.points.end(), [](const PersistencePair& a, const PersistencePair& b) {
        return a.birth < b.birth || (a.birth == b.birth && a.death < b.death);
    });
}

}  // namespace infogap::homology
