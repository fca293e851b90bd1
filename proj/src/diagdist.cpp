#include "infogap/diagdist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "infogap/error.hpp"

namespace infogap::diagdist {

void DiagramDistanceConfig::validate() const {
    if (!(wasserstein_order >= 1.0) || !std::isfinite(wasserstein_order))
        throw ConfigError("wasserstein_order must be a finite value >= 1");
}

double point_cost(const PersistencePair& x, const PersistencePair& y) {
    return std::max(std::abs(x.birth - y.birth), std::abs(x.death - y.death));
}

double diagonal_cost(const PersistencePair& x) { return std::abs(x.death - x.birth) / 2.0; }

namespace {

void check_points(std::span<const PersistencePair> points) {
    for (const auto& x : points)
        if (!std::isfinite(x.birth) || !std::isfinite(x.death))
            throw DomainError("diagram distance needs finite points");
}

void check_pair(const PersistenceDiagram& a, const PersistenceDiagram& b) {
    if (a.dim != b.dim)
        throw DomainError("diagrams of dimensions " + std::to_string(a.dim) + " and " + std::to_string(b.dim) +
                          " cannot be compared");
}

// Cost between row r and column c of the augmented square problem: rows are
// the points of a followed by diagonal slots for b, columns the points of b
// followed by diagonal slots for a.
struct Augmented {
    std::span<const PersistencePair> a, b;

    std::size_t size() const { return a.size() + b.size(); }
    double operator()(std::size_t r, std::size_t c) const {
        const bool real_row = r < a.size(), real_col = c < b.size();
        if (real_row && real_col) return point_cost(a[r], b[c]);
        if (real_row) return diagonal_cost(a[r]);
        if (real_col) return diagonal_cost(b[c]);
        return 0.0;
    }
};

// Minimum-cost perfect assignment (shortest augmenting paths with potentials).
double assignment_cost(std::size_t n, const std::vector<double>& cost) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), min_to(n + 1);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    std::vector<bool> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::fill(min_to.begin(), min_to.end(), inf);
        std::fill(used.begin(), used.end(), false);
        do {
            used[j0] = true;
            const std::size_t i0 = match[j0];
            const double* row = &cost[(i0 - 1) * n];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double reduced = row[j - 1] - u[i0] - v[j];
                if (reduced < min_to[j]) {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if (min_to[j] < delta) {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0;
    for (std::size_t j = 1; j <= n; ++j) total += cost[(match[j] - 1) * n + (j - 1)];
    return total;
}

// Perfect matching on the threshold graph of the augmented problem.
class ThresholdMatcher {
public:
    explicit ThresholdMatcher(Augmented aug) : aug_(aug), n_(aug.size()) {}

    bool perfect(double t) {
        adj_.assign(n_, {});
        const std::size_t na = aug_.a.size(), nb = aug_.b.size();
        for (std::size_t r = 0; r < na; ++r) {
            for (std::size_t c = 0; c < nb; ++c)
                if (aug_(r, c) <= t) adj_[r].push_back(c);
            if (diagonal_cost(aug_.a[r]) <= t) adj_[r].push_back(nb + r);
        }
        for (std::size_t k = 0; k < nb; ++k) {
            std::size_t r = na + k;
            if (diagonal_cost(aug_.b[k]) <= t) adj_[r].push_back(k);
            for (std::size_t c = nb; c < n_; ++c) adj_[r].push_back(c);
        }
        return max_matching() == n_;
    }

private:
    static constexpr std::size_t kFree = std::numeric_limits<std::size_t>::max();

    std::size_t max_matching() {
        row_match_.assign(n_, kFree);
        col_match_.assign(n_, kFree);
        std::size_t matched = 0;
        while (bfs())
            for (std::size_t r = 0; r < n_; ++r)
                if (row_match_[r] == kFree && dfs(r)) ++matched;
        return matched;
    }

    bool bfs() {
        dist_.assign(n_, kFree);
        std::queue<std::size_t> queue;
        for (std::size_t r = 0; r < n_; ++r)
            if (row_match_[r] == kFree) {
                dist_[r] = 0;
                queue.push(r);
            }
        bool found = false;
        while (!queue.empty()) {
            std::size_t r = queue.front();
            queue.pop();
            for (std::size_t c : adj_[r]) {
                std::size_t next = col_match_[c];
                if (next == kFree) {
                    found = true;
                } else if (dist_[next] == kFree) {
                    dist_[next] = dist_[r] + 1;
                    queue.push(next);
                }
            }
        }
        return found;
    }

    bool dfs(std::size_t r) {
        for (std::size_t c : adj_[r]) {
            std::size_t next = col_match_[c];
            if (next == kFree || (dist_[next] == dist_[r] + 1 && dfs(next))) {
                row_match_[r] = c;
                col_match_[c] = r;
                return true;
            }
        }
        dist_[r] = kFree;
        return false;
    }

    Augmented aug_;
    std::size_t n_;
    std::vector<std::vector<std::size_t>> adj_;
    std::vector<std::size_t> row_match_, col_match_, dist_;
};

}  // namespace

double wasserstein(std::span<const PersistencePair> a, std::span<const PersistencePair> b, double p) {
    DiagramDistanceConfig{p}.validate();
    check_points(a);
    check_points(b);
    Augmented aug{a, b};
    const std::size_t n = aug.size();
    if (n == 0) return 0.0;
    std::vector<double> cost(n * n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) cost[r * n + c] = p == 1.0 ? aug(r, c) : std::pow(aug(r, c), p);
    double total = assignment_cost(n, cost);
    return p == 1.0 ? total : std::pow(total, 1.0 / p);
}

double bottleneck(std::span<const PersistencePair> a, std::span<const PersistencePair> b) {
    check_points(a);
    check_points(b);
    Augmented aug{a, b};
    if (aug.size() == 0) return 0.0;
    std::vector<double> candidates = {0.0};
    for (const auto& x : a) candidates.push_back(diagonal_cost(x));
    for (const auto& y : b) candidates.push_back(diagonal_cost(y));
    for (const auto& x : a)
        for (const auto& y : b) candidates.push_back(point_cost(x, y));
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    ThresholdMatcher matcher(aug);
    // Matching everything to the diagonal is always feasible at the largest
    // diagonal cost, so the last candidate is feasible.
    std::size_t lo = 0, hi = candidates.size() - 1;
    while (lo < hi) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (matcher.perfect(candidates[mid]))
            hi = mid;
        else
            lo = mid + 1;
    }
    return candidates[lo];
}

double bottleneck(const PersistenceDiagram& a, const PersistenceDiagram& b) {
    check_pair(a, b);
    return bottleneck(std::span<const PersistencePair>(a.points), std::span<const PersistencePair>(b.points));
}

double wasserstein(const PersistenceDiagram& a, const PersistenceDiagram& b, const DiagramDistanceConfig& cfg) {
    check_pair(a, b);
    cfg.validate();
    return wasserstein(std::span<const PersistencePair>(a.points), std::span<const PersistencePair>(b.points),
                       cfg.wasserstein_order);
}

}  // namespace infogap::diagdist
