#include "misaka/graph.hpp"

#include <algorithm>
#include <cmath>

namespace misaka {

DirectedGraph::DirectedGraph(std::size_t n, std::vector<std::uint8_t> adjacency)
    : n_(n), adjacency_(std::move(adjacency)) {
    validate();
}

void DirectedGraph::validate() const {
    if (n_ == 0) {
        throw GraphError("graph must have at least one node");
    }
    for (std::size_t i = 0; i < n_; ++i) {
        if (out_degree(i) == 0) {
            throw GraphError("node " + std::to_string(i + 1) + " reads no node (all-zero adjacency row)");
        }
    }
}

DirectedGraph DirectedGraph::from_edges(std::size_t n, std::span<const Edge> edges) {
    if (n == 0) {
        throw GraphError("graph must have at least one node");
    }
    std::vector<std::uint8_t> adjacency(n * n, 0);
    for (const Edge& e : edges) {
        if (e.from >= n || e.to >= n) {
            throw GraphError("edge (" + std::to_string(e.from + 1) + ", " + std::to_string(e.to + 1) +
                             ") has an endpoint outside 1.." + std::to_string(n));
        }
        adjacency[e.from * n + e.to] = 1;
    }
    return DirectedGraph(n, std::move(adjacency));
}

DirectedGraph DirectedGraph::from_adjacency(const std::vector<std::vector<int>>& rows) {
    const std::size_t n = rows.size();
    if (n == 0) {
        throw GraphError("graph must have at least one node");
    }
    std::vector<std::uint8_t> adjacency;
    adjacency.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n) {
            throw GraphError("adjacency row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                             " entries, expected " + std::to_string(n));
        }
        for (int v : rows[i]) {
            if (v != 0 && v != 1) {
                throw GraphError("adjacency entries must be 0 or 1, got " + std::to_string(v));
            }
            adjacency.push_back(static_cast<std::uint8_t>(v));
        }
    }
    return DirectedGraph(n, std::move(adjacency));
}

std::size_t DirectedGraph::out_degree(std::size_t i) const {
    const auto r = row(i);
    return static_cast<std::size_t>(std::count(r.begin(), r.end(), std::uint8_t{1}));
}

std::vector<std::size_t> DirectedGraph::reads(std::size_t i) const {
    std::vector<std::size_t> out;
    const auto r = row(i);
    for (std::size_t j = 0; j < n_; ++j) {
        if (r[j]) {
            out.push_back(j);
        }
    }
    return out;
}

std::vector<Edge> DirectedGraph::edges() const {
    std::vector<Edge> out;
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
            if (adjacency_[i * n_ + j]) {
                out.push_back({i, j});
            }
        }
    }
    return out;
}

bool DirectedGraph::is_symmetric() const {
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i + 1; j < n_; ++j) {
            if (adjacency_[i * n_ + j] != adjacency_[j * n_ + i]) {
                return false;
            }
        }
    }
    return true;
}

bool DirectedGraph::has_all_self_loops() const {
    for (std::size_t i = 0; i < n_; ++i) {
        if (!adjacency_[i * n_ + i]) {
            return false;
        }
    }
    return true;
}

DirectedGraph DirectedGraph::with_edges(std::span<const Edge> extra) const {
    auto all = edges();
    all.insert(all.end(), extra.begin(), extra.end());
    return from_edges(n_, all);
}

DirectedGraph DirectedGraph::with_edge(Edge e, bool present) const {
    if (e.from >= n_ || e.to >= n_) {
        throw GraphError("edge (" + std::to_string(e.from + 1) + ", " + std::to_string(e.to + 1) +
                         ") has an endpoint outside 1.." + std::to_string(n_));
    }
    auto adjacency = adjacency_;
    adjacency[e.from * n_ + e.to] = present ? 1 : 0;
    return DirectedGraph(n_, std::move(adjacency));
}

DirectedGraph DirectedGraph::without_node(std::size_t node) const {
    if (node >= n_) {
        throw GraphError("node " + std::to_string(node + 1) + " does not exist");
    }
    if (n_ == 1) {
        throw GraphError("cannot remove the only node");
    }
    const std::size_t m = n_ - 1;
    std::vector<std::uint8_t> adjacency;
    adjacency.reserve(m * m);
    for (std::size_t i = 0; i < n_; ++i) {
        if (i == node) {
            continue;
        }
        for (std::size_t j = 0; j < n_; ++j) {
            if (j != node) {
                adjacency.push_back(adjacency_[i * n_ + j]);
            }
        }
    }
    return DirectedGraph(m, std::move(adjacency));
}

DirectedGraph DirectedGraph::with_node(std::span<const std::size_t> reads,
                                       std::span<const std::size_t> read_by) const {
    const std::size_t m = n_ + 1;
    std::vector<std::uint8_t> adjacency(m * m, 0);
    for (std::size_t i = 0; i < n_; ++i) {
        std::copy_n(adjacency_.begin() + static_cast<std::ptrdiff_t>(i * n_), n_,
                    adjacency.begin() + static_cast<std::ptrdiff_t>(i * m));
    }
    adjacency[n_ * m + n_] = 1;
    for (std::size_t j : reads) {
        if (j >= n_) {
            throw GraphError("node " + std::to_string(j + 1) + " does not exist");
        }
        adjacency[n_ * m + j] = 1;
    }
    for (std::size_t i : read_by) {
        if (i >= n_) {
            throw GraphError("node " + std::to_string(i + 1) + " does not exist");
        }
        adjacency[i * m + n_] = 1;
    }
    return DirectedGraph(m, std::move(adjacency));
}

DirectedGraph DirectedGraph::symmetrized() const {
    auto adjacency = adjacency_;
    for (std::size_t i = 0; i < n_; ++i) {
        adjacency[i * n_ + i] = 1;
        for (std::size_t j = 0; j < n_; ++j) {
            if (adjacency_[i * n_ + j]) {
                adjacency[j * n_ + i] = 1;
            }
        }
    }
    return DirectedGraph(n_, std::move(adjacency));
}

std::vector<std::vector<int>> DirectedGraph::to_rows() const {
    std::vector<std::vector<int>> rows(n_, std::vector<int>(n_, 0));
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
            rows[i][j] = adjacency_[i * n_ + j];
        }
    }
    return rows;
}

std::string to_string(StochasticMode mode) {
    switch (mode) {
    case StochasticMode::Row:
        return "row";
    case StochasticMode::Column:
        return "column";
    case StochasticMode::Doubly:
        return "doubly";
    }
    return "row";
}

StochasticMode parse_stochastic_mode(const std::string& text) {
    if (text == "row") {
        return StochasticMode::Row;
    }
    if (text == "column") {
        return StochasticMode::Column;
    }
    if (text == "doubly" || text == "metropolis") {
        return StochasticMode::Doubly;
    }
    throw std::invalid_argument("unknown matrix mode '" + text + "' (expected row, column or doubly)");
}

TransitionMatrix::TransitionMatrix(std::size_t n, std::vector<double> weights, StochasticMode mode)
    : n_(n), weights_(std::move(weights)), mode_(mode) {
    if (n_ == 0 || weights_.size() != n_ * n_) {
        throw GraphError("transition matrix must be n x n with n >= 1");
    }
    for (double w : weights_) {
        if (!std::isfinite(w) || w < 0.0) {
            throw GraphError("transition weights must be finite and nonnegative");
        }
    }
    const bool check_rows = mode_ != StochasticMode::Column;
    const bool check_cols = mode_ != StochasticMode::Row;
    for (std::size_t i = 0; i < n_; ++i) {
        double row_sum = 0.0;
        double col_sum = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            row_sum += weights_[i * n_ + j];
            col_sum += weights_[j * n_ + i];
        }
        if (check_rows && std::abs(row_sum - 1.0) > kSumTolerance) {
            throw GraphError("row " + std::to_string(i + 1) + " sums to " + std::to_string(row_sum));
        }
        if (check_cols && std::abs(col_sum - 1.0) > kSumTolerance) {
            throw GraphError("column " + std::to_string(i + 1) + " sums to " + std::to_string(col_sum));
        }
    }
}

DirectedGraph TransitionMatrix::support() const {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
            if (weights_[i * n_ + j] > 0.0) {
                edges.push_back({i, j});
            }
        }
    }
    return DirectedGraph::from_edges(n_, edges);
}

TransitionMatrix row_stochastic(const DirectedGraph& g) {
    const std::size_t n = g.size();
    std::vector<double> weights(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double degree = static_cast<double>(g.out_degree(i));
        for (std::size_t j = 0; j < n; ++j) {
            if (g.has_edge(i, j)) {
                weights[i * n + j] = 1.0 / degree;
            }
        }
    }
    return TransitionMatrix(n, std::move(weights), StochasticMode::Row);
}

TransitionMatrix column_stochastic(const DirectedGraph& g) {
    const std::size_t n = g.size();
    std::vector<double> weights(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double degree = static_cast<double>(g.out_degree(j));
        for (std::size_t i = 0; i < n; ++i) {
            if (g.has_edge(j, i)) {
                weights[i * n + j] = 1.0 / degree;
            }
        }
    }
    return TransitionMatrix(n, std::move(weights), StochasticMode::Column);
}

TransitionMatrix metropolis(const DirectedGraph& g) {
    const std::size_t n = g.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!g.has_edge(i, i)) {
            throw GraphError("metropolis weights need a self-loop on node " + std::to_string(i + 1));
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            if (g.has_edge(i, j) != g.has_edge(j, i)) {
                throw GraphError("metropolis weights need a symmetric graph; pair (" + std::to_string(i + 1) + ", " +
                                 std::to_string(j + 1) + ") is one-directional");
            }
        }
    }
    std::vector<std::size_t> degree(n);
    for (std::size_t i = 0; i < n; ++i) {
        degree[i] = g.out_degree(i) - 1;
    }
    std::vector<double> weights(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double off_diagonal = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && g.has_edge(i, j)) {
                const double w = 1.0 / (1.0 + static_cast<double>(std::max(degree[i], degree[j])));
                weights[i * n + j] = w;
                off_diagonal += w;
            }
        }
        weights[i * n + i] = 1.0 - off_diagonal;
    }
    return TransitionMatrix(n, std::move(weights), StochasticMode::Doubly);
}

TransitionMatrix build_transition(const DirectedGraph& g, StochasticMode mode) {
    switch (mode) {
    case StochasticMode::Row:
        return row_stochastic(g);
    case StochasticMode::Column:
        return column_stochastic(g);
    case StochasticMode::Doubly:
        return metropolis(g.symmetrized());
    }
    return row_stochastic(g);
}

} // namespace misaka
