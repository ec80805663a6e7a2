#include "surromesh/graph.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <set>

namespace surromesh {

std::size_t AdjacencyPattern::n_directed_edges() const {
    std::size_t e = 0;
    for (const auto& nb : neighbors) e += nb.size();
    return e;
}

bool AdjacencyPattern::has_edge(std::size_t i, std::size_t j) const {
    const auto& nb = neighbors[i];
    return std::binary_search(nb.begin(), nb.end(), j);
}

void AdjacencyPattern::check_invariants() const {
    if (neighbors.size() != n_nodes) throw DataError("adjacency: neighbor list count mismatch");
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const auto& nb = neighbors[i];
        if (!std::is_sorted(nb.begin(), nb.end())) throw DataError("adjacency: unsorted neighbor list");
        if (!std::binary_search(nb.begin(), nb.end(), i)) throw DataError("adjacency: missing self loop");
        for (std::size_t j : nb) {
            if (j >= n_nodes) throw DataError("adjacency: neighbor out of range");
            if (!has_edge(j, i)) throw DataError("adjacency: asymmetric pattern");
        }
    }
}

namespace {

AdjacencyPattern from_sets(std::vector<std::set<std::size_t>>& sets, int power) {
    AdjacencyPattern adj;
    adj.n_nodes = sets.size();
    adj.power = power;
    adj.neighbors.reserve(sets.size());
    for (auto& s : sets) adj.neighbors.emplace_back(s.begin(), s.end());
    return adj;
}

} // namespace

AdjacencyPattern node_adjacency_from_elements(const Mesh& mesh) {
    std::vector<std::set<std::size_t>> sets(mesh.n_nodes());
    for (std::size_t i = 0; i < mesh.n_nodes(); ++i) sets[i].insert(i);
    for (const auto& e : mesh.elements)
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t b = 0; b < 4; ++b) sets[e[a]].insert(e[b]);
    return from_sets(sets, 1);
}

AdjacencyPattern adjacency_power(const AdjacencyPattern& adj, int k) {
    if (k < 1) throw ConfigError("adjacency_power: k must be >= 1");
    if (k == 1) {
        AdjacencyPattern copy = adj;
        return copy;
    }
    // Breadth-limited expansion: since A carries self loops, the nonzero
    // pattern of A^k is exactly the <=k-hop neighborhood.
    AdjacencyPattern out;
    out.n_nodes = adj.n_nodes;
    out.power = k;
    out.neighbors.resize(adj.n_nodes);
    std::vector<int> dist(adj.n_nodes, -1);
    std::vector<std::size_t> touched;
    for (std::size_t i = 0; i < adj.n_nodes; ++i) {
        std::deque<std::size_t> queue{i};
        dist[i] = 0;
        touched.assign(1, i);
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop_front();
            if (dist[u] == k) continue;
            for (std::size_t v : adj.neighbors[u]) {
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    touched.push_back(v);
                    queue.push_back(v);
                }
            }
        }
        auto& nb = out.neighbors[i];
        nb = touched;
        std::sort(nb.begin(), nb.end());
        for (std::size_t v : touched) dist[v] = -1;
    }
    return out;
}

std::vector<std::vector<std::size_t>> CoarseningMap::children() const {
    std::vector<std::vector<std::size_t>> kids(n_coarse());
    for (std::size_t f = 0; f < assignment.size(); ++f) kids[assignment[f]].push_back(f);
    return kids;
}

std::pair<CoarseningMap, AdjacencyPattern> coarsen_graph(const AdjacencyPattern& adj,
                                                         std::size_t seed) {
    const std::size_t n = adj.n_nodes;
    if (seed >= n) throw ConfigError("coarsen_graph: seed out of range");

    // BFS order from the seed; disconnected components are swept afterwards
    // starting from the smallest unvisited index.
    std::vector<std::size_t> order(n, std::numeric_limits<std::size_t>::max());
    std::vector<std::size_t> by_order;
    by_order.reserve(n);
    auto bfs_from = [&](std::size_t start) {
        std::deque<std::size_t> queue{start};
        order[start] = by_order.size();
        by_order.push_back(start);
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop_front();
            for (std::size_t v : adj.neighbors[u]) {
                if (order[v] == std::numeric_limits<std::size_t>::max()) {
                    order[v] = by_order.size();
                    by_order.push_back(v);
                    queue.push_back(v);
                }
            }
        }
    };
    bfs_from(seed);
    for (std::size_t i = 0; i < n; ++i)
        if (order[i] == std::numeric_limits<std::size_t>::max()) bfs_from(i);

    constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();
    CoarseningMap map;
    map.assignment.assign(n, kUnassigned);
    for (std::size_t pos = 0; pos < n; ++pos) {
        const std::size_t node = by_order[pos];
        if (map.assignment[node] != kUnassigned) continue;
        const std::size_t coarse = map.seeds.size();
        map.seeds.push_back(node);
        map.assignment[node] = coarse;
        for (std::size_t v : adj.neighbors[node])
            if (map.assignment[v] == kUnassigned) map.assignment[v] = coarse;
    }

    std::vector<std::set<std::size_t>> sets(map.seeds.size());
    for (std::size_t c = 0; c < map.seeds.size(); ++c) sets[c].insert(c);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j : adj.neighbors[i]) sets[map.assignment[i]].insert(map.assignment[j]);
    return {std::move(map), from_sets(sets, 1)};
}

std::size_t grid_search_seed(const AdjacencyPattern& adj, std::size_t levels) {
    if (levels < 1) throw ConfigError("grid_search_seed: levels must be >= 1");
    std::size_t best_seed = 0;
    std::size_t best_count = std::numeric_limits<std::size_t>::max();
    for (std::size_t s = 0; s < adj.n_nodes; ++s) {
        AdjacencyPattern g = adj;
        for (std::size_t l = 0; l < levels; ++l) {
            auto [map, coarse] = coarsen_graph(g, l == 0 ? s : 0);
            g = std::move(coarse);
        }
        if (g.n_nodes < best_count) {
            best_count = g.n_nodes;
            best_seed = s;
        }
    }
    return best_seed;
}

GraphHierarchy build_hierarchy(const AdjacencyPattern& base, std::size_t levels, int mag_power) {
    if (levels < 1) throw ConfigError("build_hierarchy: levels must be >= 1");
    GraphHierarchy h;
    h.first_seed = levels > 1 ? grid_search_seed(base, levels - 1) : 0;
    h.level_graphs.push_back(base);
    for (std::size_t l = 0; l + 1 < levels; ++l) {
        auto [map, coarse] = coarsen_graph(h.level_graphs[l], l == 0 ? h.first_seed : 0);
        h.maps.push_back(std::move(map));
        h.level_graphs.push_back(std::move(coarse));
    }
    for (const auto& g : h.level_graphs) h.mag_patterns.push_back(adjacency_power(g, mag_power));
    return h;
}

} // namespace surromesh
