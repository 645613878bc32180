#pragma once

#include "misaka/graph.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace misaka {

using StateVector = std::vector<double>;

class ConsensusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ConvergenceConfig {
    double tolerance = 1e-6;
    std::size_t max_iterations = 1000;

    void validate() const;
};

/// States s(0)..s(K) of one run.
///
/// For row and doubly stochastic runs `converged` means the max-min spread
/// dropped below tolerance. Column-stochastic runs conserve the total instead
/// of agreeing on one value, so for them it means the largest per-node change
/// of the last step dropped below tolerance.
struct Trajectory {
    std::vector<StateVector> states;
    std::vector<double> spread_history;
    bool converged = false;
    std::size_t iterations_run = 0;

    const StateVector& final_state() const { return states.back(); }
};

// Q * s, accumulated left to right in index order.
StateVector step(const TransitionMatrix& q, std::span<const double> s);

double spread(std::span<const double> s);

// Iterates until converged or cfg.max_iterations steps were taken.
Trajectory run(const TransitionMatrix& q, const StateVector& s0, const ConvergenceConfig& cfg = {});

// Exactly `iterations` steps; `converged` reflects the final state against `tolerance`.
Trajectory run_for(const TransitionMatrix& q, const StateVector& s0, std::size_t iterations,
                   double tolerance = ConvergenceConfig{}.tolerance);

// Convergence test shared by the engines.
bool has_converged(StochasticMode mode, std::span<const double> previous, std::span<const double> current,
                   double tolerance);

struct FixedPointPrediction {
    StochasticMode mode = StochasticMode::Row;
    // Left Perron vector for row/doubly stochastic Q, right Perron vector for column stochastic Q.
    std::vector<double> weights;
    std::size_t power_iterations = 0;

    // Every node's limit: weights . s0 everywhere (row), or sum(s0) * weights (column).
    StateVector predicted_limit(std::span<const double> s0) const;
};

// Power iteration from the uniform vector; stops when successive normalised
// iterates differ by less than 1e-12 in max-norm (cap 100000 iterations).
// Requires a strongly connected support with at least one self-loop.
FixedPointPrediction predict_fixed_point(const TransitionMatrix& q);

// Trajectory CSV: `iteration,node_1,...,node_n`, 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);
std::string trajectory_csv(const Trajectory& trajectory);
// Parses the same format into rows of states (iteration column dropped).
std::vector<StateVector> read_trajectory_csv(std::istream& in);

} // namespace misaka
