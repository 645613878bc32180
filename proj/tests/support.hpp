#pragma once

#include "misaka/graph.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace testsupport {

using Bits = std::vector<std::vector<bool>>;

inline Bits adjacency_bits(const misaka::DirectedGraph& g) {
    const std::size_t n = g.size();
    Bits a(n, std::vector<bool>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            a[i][j] = g.has_edge(i, j);
        }
    }
    return a;
}

// Reflexive-transitive closure by summing boolean powers I + A + A^2 + ... + A^(n-1).
inline Bits reachability(const misaka::DirectedGraph& g) {
    const std::size_t n = g.size();
    const Bits a = adjacency_bits(g);
    Bits reach(n, std::vector<bool>(n));
    Bits power(n, std::vector<bool>(n));
    for (std::size_t i = 0; i < n; ++i) {
        reach[i][i] = power[i][i] = true;
    }
    for (std::size_t k = 1; k < n; ++k) {
        Bits next(n, std::vector<bool>(n));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t m = 0; m < n; ++m) {
                if (!power[i][m]) {
                    continue;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    if (a[m][j]) {
                        next[i][j] = true;
                    }
                }
            }
        }
        power = std::move(next);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                reach[i][j] = reach[i][j] || power[i][j];
            }
        }
    }
    return reach;
}

// Every row gets at least one entry; density p elsewhere.
inline misaka::DirectedGraph random_graph(std::mt19937_64& rng, std::size_t n, double p, bool self_loops) {
    std::bernoulli_distribution coin(p);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::vector<int>> rows(n, std::vector<int>(n, 0));
    for (std::size_t i = 0; i < n; ++i) {
        bool any = false;
        for (std::size_t j = 0; j < n; ++j) {
            rows[i][j] = (i == j && self_loops) || coin(rng) ? 1 : 0;
            any = any || rows[i][j];
        }
        if (!any) {
            rows[i][pick(rng)] = 1;
        }
    }
    return misaka::DirectedGraph::from_adjacency(rows);
}

// A random graph laid over a shuffled Hamiltonian cycle, so it is strongly connected.
inline misaka::DirectedGraph random_strong_graph(std::mt19937_64& rng, std::size_t n, double p, bool self_loops) {
    auto g = random_graph(rng, n, p, self_loops);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<misaka::Edge> ring;
    for (std::size_t k = 0; k < n; ++k) {
        ring.push_back({order[k], order[(k + 1) % n]});
    }
    if (!self_loops) {
        ring.push_back({order[0], order[0]});
    }
    return g.with_edges(ring);
}

} // namespace testsupport
