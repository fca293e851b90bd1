#pragma once

#include <span>

#include "infogap/homology.hpp"

namespace infogap::diagdist {

struct DiagramDistanceConfig {
    double wasserstein_order = 1.0;  // p; ground metric is L-infinity on the plane

    void validate() const;  // throws ConfigError unless p >= 1
};

using homology::PersistenceDiagram;
using homology::PersistencePair;

// Unmatched points pay their L-infinity distance to the diagonal, (d - b) / 2.
// Both throw DomainError for diagrams of different dimensions or with
// non-finite points.
double bottleneck(const PersistenceDiagram& a, const PersistenceDiagram& b);
double wasserstein(const PersistenceDiagram& a, const PersistenceDiagram& b, const DiagramDistanceConfig& cfg = {});

double bottleneck(std::span<const PersistencePair> a, std::span<const PersistencePair> b);
double wasserstein(std::span<const PersistencePair> a, std::span<const PersistencePair> b, double p = 1.0);

// L-infinity distance between two points, and from a point to the diagonal.
double point_cost(const PersistencePair& x, const PersistencePair& y);
double diagonal_cost(const PersistencePair& x);

}  // namespace infogap::diagdist
