#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace misaka {

class GraphError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Directed pair with 0-based endpoints. Setting edge (from, to) sets a[from][to] = 1,
// which means node `from` reads the value of node `to` during an update.
struct Edge {
    std::size_t from = 0;
    std::size_t to = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Communication topology as a dense 0/1 adjacency matrix.
///
/// Row i lists the nodes whose values node i reads. Every row must contain at
/// least one 1 so that row normalisation never divides by zero.
class DirectedGraph {
public:
    static DirectedGraph from_edges(std::size_t n, std::span<const Edge> edges);
    static DirectedGraph from_adjacency(const std::vector<std::vector<int>>& rows);

    std::size_t size() const noexcept { return n_; }
    bool has_edge(std::size_t from, std::size_t to) const { return adjacency_.at(from * n_ + to) != 0; }
    std::span<const std::uint8_t> row(std::size_t i) const { return {adjacency_.data() + i * n_, n_}; }

    std::size_t out_degree(std::size_t i) const;
    // Nodes listed in row i, ascending.
    std::vector<std::size_t> reads(std::size_t i) const;
    std::vector<Edge> edges() const;
    bool is_symmetric() const;
    bool has_all_self_loops() const;

    // Copies with modified structure; each result is re-validated.
    DirectedGraph with_edges(std::span<const Edge> extra) const;
    DirectedGraph with_edge(Edge e, bool present) const;
    DirectedGraph without_node(std::size_t node) const;
    // Appends a node that reads `reads` (and itself); nodes in `read_by` additionally read it.
    DirectedGraph with_node(std::span<const std::size_t> reads, std::span<const std::size_t> read_by) const;
    // Union of the graph and its transpose, plus self-loops everywhere.
    DirectedGraph symmetrized() const;

    std::vector<std::vector<int>> to_rows() const;

    friend bool operator==(const DirectedGraph&, const DirectedGraph&) = default;

private:
    DirectedGraph(std::size_t n, std::vector<std::uint8_t> adjacency);
    void validate() const;

    std::size_t n_ = 0;
    std::vector<std::uint8_t> adjacency_;
};

enum class StochasticMode { Row, Column, Doubly };

std::string to_string(StochasticMode mode);
StochasticMode parse_stochastic_mode(const std::string& text);

/// Nonnegative n x n weights tagged with the normalisation they satisfy.
class TransitionMatrix {
public:
    static constexpr double kSumTolerance = 1e-12;

    // Validates nonnegativity and the sums implied by `mode`.
    TransitionMatrix(std::size_t n, std::vector<double> weights, StochasticMode mode);

    std::size_t size() const noexcept { return n_; }
    StochasticMode mode() const noexcept { return mode_; }
    double at(std::size_t i, std::size_t j) const { return weights_.at(i * n_ + j); }
    std::span<const double> row(std::size_t i) const { return {weights_.data() + i * n_, n_}; }
    std::span<const double> weights() const noexcept { return weights_; }

    // Structural graph: edge (i, j) wherever q_ij > 0.
    DirectedGraph support() const;

private:
    std::size_t n_;
    std::vector<double> weights_;
    StochasticMode mode_;
};

// q_ij = a_ij / out_degree(i).
TransitionMatrix row_stochastic(const DirectedGraph& g);

// q_ij = a_ji / out_degree(j): every sender splits its value equally over the
// nodes it is listed for, so columns sum to one and the total is conserved.
TransitionMatrix column_stochastic(const DirectedGraph& g);

// Metropolis-Hastings weights on a symmetric graph with self-loops.
// Throws GraphError naming the first asymmetric pair.
TransitionMatrix metropolis(const DirectedGraph& g);

TransitionMatrix build_transition(const DirectedGraph& g, StochasticMode mode);

} // namespace misaka
