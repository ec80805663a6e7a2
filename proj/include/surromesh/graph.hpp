#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "surromesh/mesh.hpp"

namespace surromesh {

// Sparse node-neighborhood pattern. Neighbor lists are sorted and always
// include the node itself; the pattern is symmetric.
struct AdjacencyPattern {
    std::size_t n_nodes = 0;
    int power = 1; // which A^k this pattern represents
    std::vector<std::vector<std::size_t>> neighbors;

    std::size_t n_directed_edges() const;
    bool has_edge(std::size_t i, std::size_t j) const;
    void check_invariants() const; // symmetry + self loops
};

// Nodes are adjacent iff they share an element; self loops added.
AdjacencyPattern node_adjacency_from_elements(const Mesh& mesh);

// Nonzero pattern of A^k: nodes within k hops.
AdjacencyPattern adjacency_power(const AdjacencyPattern& adj, int k);

// Partition of a fine graph into coarse clusters. Seeds are their own parents.
struct CoarseningMap {
    std::vector<std::size_t> assignment; // fine node -> coarse index
    std::vector<std::size_t> seeds;      // coarse index -> retained fine node

    std::size_t n_fine() const { return assignment.size(); }
    std::size_t n_coarse() const { return seeds.size(); }
    // children lists per coarse node, each sorted ascending
    std::vector<std::vector<std::size_t>> children() const;
};

// Greedy seeded coarsening: BFS order from `seed` (ascending-index tie
// break), then repeatedly take the unassigned node of smallest BFS order as
// a coarse seed and give it its unassigned 1-hop neighbors. The coarse
// pattern connects clusters with any adjacent children.
std::pair<CoarseningMap, AdjacencyPattern> coarsen_graph(const AdjacencyPattern& adj,
                                                         std::size_t seed);

// Evaluates every candidate first-level seed (later levels always use seed 0)
// and returns the one minimizing the lowest-level node count after `levels`
// coarsenings; ties go to the smallest seed index.
std::size_t grid_search_seed(const AdjacencyPattern& adj, std::size_t levels);

// Per-level structures for a graph U-Net: level graphs (A^1), the A^k
// aggregation patterns, and the pooling maps between consecutive levels.
struct GraphHierarchy {
    std::vector<AdjacencyPattern> level_graphs;
    std::vector<AdjacencyPattern> mag_patterns;
    std::vector<CoarseningMap> maps; // size levels-1
    std::size_t first_seed = 0;
};

GraphHierarchy build_hierarchy(const AdjacencyPattern& base, std::size_t levels, int mag_power);

} // namespace surromesh
