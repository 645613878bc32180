#pragma once

#include "misaka/graph.hpp"

#include <cstddef>
#include <vector>

namespace misaka {

/// Strongly connected component structure of a topology.
///
/// Components are ordered by their lowest node index and each component's
/// nodes are sorted, so reports are deterministic. Edge (i, j) of the graph
/// (node i reads node j) induces condensation edge comp(i) -> comp(j).
struct SccReport {
    std::vector<std::vector<std::size_t>> components;
    std::vector<std::size_t> component_of;
    // condensation[c] = components that component c reads from, ascending, no self entries.
    std::vector<std::vector<std::size_t>> condensation;
    // Components that read only from themselves. In a non-strongly-connected
    // graph these dictate the (wrong) common limit of the whole network.
    std::vector<std::size_t> closed_components;
    bool is_strongly_connected = false;
    // Nodes of closed components when the graph is not strongly connected.
    std::vector<std::size_t> isolated_sources;
};

// Tarjan's algorithm, iterative, O(n^2) over the dense adjacency.
SccReport scc_analyze(const DirectedGraph& g);

// Minimal edge set (max of source and sink component counts) whose addition
// makes g strongly connected. Uses the Eswaran-Tarjan augmentation over the
// condensation; each component is represented by its lowest node.
std::vector<Edge> suggest_repair(const DirectedGraph& g, const SccReport& report);

} // namespace misaka
