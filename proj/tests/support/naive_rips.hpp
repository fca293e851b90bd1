#pragma once

// Reference persistence by brute force: every simplex of the full complex up
// to dimension max_dim + 1, sorted by filtration value, reduced with the
// standard column algorithm over Z/2. Only meant for a dozen points.

#include <algorithm>
#include <map>
#include <vector>

#include "infogap/homology.hpp"

namespace infogap::testing {

struct NaiveSimplex {
    std::vector<std::size_t> vertices;  // ascending
    double value;
};

inline std::vector<homology::PersistenceDiagram> naive_rips(const homology::DistanceMatrix& dm, int max_dim) {
    const std::size_t n = dm.size();
    std::vector<NaiveSimplex> simplices;
    std::vector<std::size_t> current;
    auto extend = [&](auto&& self, std::size_t next, double value) -> void {
        if (!current.empty()) simplices.push_back({current, value});
        if (current.size() == static_cast<std::size_t>(max_dim + 2)) return;
        for (std::size_t v = next; v < n; ++v) {
            double extended = value;
            for (std::size_t u : current) extended = std::max(extended, dm(u, v));
            current.push_back(v);
            self(self, v + 1, extended);
            current.pop_back();
        }
    };
    extend(extend, 0, 0.0);

    std::sort(simplices.begin(), simplices.end(), [](const NaiveSimplex& a, const NaiveSimplex& b) {
        if (a.value != b.value) return a.value < b.value;
        if (a.vertices.size() != b.vertices.size()) return a.vertices.size() < b.vertices.size();
        return a.vertices < b.vertices;
    });

    std::map<std::vector<std::size_t>, std::size_t> position;
    for (std::size_t i = 0; i < simplices.size(); ++i) position[simplices[i].vertices] = i;

    // Boundary columns as sorted row lists.
    std::vector<std::vector<std::size_t>> columns(simplices.size());
    for (std::size_t i = 0; i < simplices.size(); ++i) {
        const auto& vs = simplices[i].vertices;
        if (vs.size() < 2) continue;
        for (std::size_t drop = 0; drop < vs.size(); ++drop) {
            std::vector<std::size_t> face;
            for (std::size_t k = 0; k < vs.size(); ++k)
                if (k != drop) face.push_back(vs[k]);
            columns[i].push_back(position.at(face));
        }
        std::sort(columns[i].begin(), columns[i].end());
    }

    std::vector<homology::PersistenceDiagram> diagrams(static_cast<std::size_t>(max_dim + 1));
    for (int d = 0; d <= max_dim; ++d) diagrams[static_cast<std::size_t>(d)].dim = d;

    std::map<std::size_t, std::size_t> low_owner;
    std::vector<bool> paired(simplices.size(), false);
    for (std::size_t j = 0; j < columns.size(); ++j) {
        auto& col = columns[j];
        while (!col.empty()) {
            auto it = low_owner.find(col.back());
            if (it == low_owner.end()) break;
            std::vector<std::size_t> sum;
            std::set_symmetric_difference(col.begin(), col.end(), columns[it->second].begin(),
                                          columns[it->second].end(), std::back_inserter(sum));
            col.swap(sum);
        }
        if (col.empty()) continue;
        std::size_t low = col.back();
        low_owner[low] = j;
        paired[low] = paired[j] = true;
        int dim = static_cast<int>(simplices[low].vertices.size()) - 1;
        if (dim > max_dim) continue;
        double birth = simplices[low].value, death = simplices[j].value;
        if (death > birth) diagrams[static_cast<std::size_t>(dim)].points.push_back({birth, death});
    }
    for (std::size_t i = 0; i < simplices.size(); ++i) {
        int dim = static_cast<int>(simplices[i].vertices.size()) - 1;
        if (!paired[i] && dim <= max_dim) ++diagrams[static_cast<std::size_t>(dim)].essential_excluded;
    }
    for (auto& diagram : diagrams) homology::sort_points(diagram);
    return diagrams;
}

}  // namespace infogap::testing
