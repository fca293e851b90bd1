#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "infogap/network.hpp"

namespace infogap::homology {

// Dense symmetric matrix with zero diagonal, stored row-major.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * n, 0.0) {}
    DistanceMatrix(std::size_t n, std::vector<double> values, bool sentinel_used = false);

    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
    void set(std::size_t i, std::size_t j, double value) {
        d_[i * n_ + j] = value;
        d_[j * n_ + i] = value;
    }
    std::span<const double> values() const { return d_; }
    bool sentinel_used() const { return sentinel_used_; }
    void set_sentinel_used(bool used) { sentinel_used_ = used; }

    // Throws DomainError unless square, symmetric, zero-diagonal, finite, >= 0.
    void validate() const;

    // min_i max_j d(i, j); Rips complexes beyond this value are cones.
    double enclosing_radius() const;

private:
    std::size_t n_ = 0;
    std::vector<double> d_;
    bool sentinel_used_ = false;
};

struct PersistencePair {
    double birth;
    double death;
    bool operator==(const PersistencePair&) const = default;
};

struct PersistenceDiagram {
    int dim = 0;
    std::vector<PersistencePair> points;  // finite, death > birth
    std::size_t essential_excluded = 0;   // infinite classes left out of points
};

struct BettiCounts {
    std::size_t beta0 = 0, beta1 = 0, beta2 = 0;
    bool operator==(const BettiCounts&) const = default;
};

inline constexpr int kMaxHomologyDim = 2;

// Weighted all-pairs shortest paths over edge distances. Pairs in different
// components get a sentinel of 1 + the largest finite geodesic. Vertex order
// follows graph.vertices().
DistanceMatrix geodesic_distances(const network::TopicGraph& graph);

// Vietoris-Rips persistence over Z/2 for dimensions 0..max_dim, using
// implicit coboundaries with clearing plus apparent/emergent pair shortcuts.
// Filtration is truncated at the enclosing radius. Returns one diagram per
// dimension; zero-persistence pairs are dropped, the essential H0 class is
// counted in essential_excluded.
std::vector<PersistenceDiagram> rips_persistence(const DistanceMatrix& dm, int max_dim = kMaxHomologyDim);

BettiCounts betti_counts(std::span<const PersistenceDiagram> diagrams);

// Points sorted by (birth, death); convenient for comparisons and output.
void sort_points(PersistenceDiagram& diagram);

}  // namespace infogap::homology
