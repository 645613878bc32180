#include "misaka/consensus.hpp"

#include "misaka/scc.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace misaka {
namespace {

void require_finite(std::span<const double> s, std::size_t iteration) {
    for (double v : s) {
        if (!std::isfinite(v)) {
            throw ConsensusError("non-finite value at iteration " + std::to_string(iteration) +
                                 "; the transition matrix is ill-formed");
        }
    }
}

double max_abs_difference(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a[i] - b[i]));
    }
    return d;
}

} // namespace

void ConvergenceConfig::validate() const {
    if (!(tolerance > 0.0)) {
        throw std::invalid_argument("convergence tolerance must be positive");
    }
    if (max_iterations < 1) {
        throw std::invalid_argument("max_iterations must be at least 1");
    }
}

StateVector step(const TransitionMatrix& q, std::span<const double> s) {
    const std::size_t n = q.size();
    if (s.size() != n) {
        throw ConsensusError("state has " + std::to_string(s.size()) + " entries but the matrix is " +
                             std::to_string(n) + " x " + std::to_string(n));
    }
    StateVector next(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = q.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            acc += row[j] * s[j];
        }
        next[i] = acc;
    }
    return next;
}

double spread(std::span<const double> s) {
    if (s.empty()) {
        throw std::invalid_argument("spread of an empty state");
    }
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    return *hi - *lo;
}

bool has_converged(StochasticMode mode, std::span<const double> previous, std::span<const double> current,
                   double tolerance) {
    if (mode == StochasticMode::Column) {
        return !previous.empty() && max_abs_difference(previous, current) < tolerance;
    }
    return spread(current) < tolerance;
}

Trajectory run(const TransitionMatrix& q, const StateVector& s0, const ConvergenceConfig& cfg) {
    cfg.validate();
    if (s0.size() != q.size()) {
        throw ConsensusError("initial state has " + std::to_string(s0.size()) + " entries, expected " +
                             std::to_string(q.size()));
    }
    require_finite(s0, 0);

    Trajectory t;
    t.states.push_back(s0);
    t.spread_history.push_back(spread(s0));
    t.converged = has_converged(q.mode(), {}, s0, cfg.tolerance);
    while (!t.converged && t.iterations_run < cfg.max_iterations) {
        StateVector next = step(q, t.states.back());
        ++t.iterations_run;
        require_finite(next, t.iterations_run);
        t.converged = has_converged(q.mode(), t.states.back(), next, cfg.tolerance);
        t.spread_history.push_back(spread(next));
        t.states.push_back(std::move(next));
    }
    return t;
}

Trajectory run_for(const TransitionMatrix& q, const StateVector& s0, std::size_t iterations, double tolerance) {
    if (s0.size() != q.size()) {
        throw ConsensusError("initial state has " + std::to_string(s0.size()) + " entries, expected " +
                             std::to_string(q.size()));
    }
    require_finite(s0, 0);

    Trajectory t;
    t.states.reserve(iterations + 1);
    t.states.push_back(s0);
    t.spread_history.push_back(spread(s0));
    for (std::size_t k = 1; k <= iterations; ++k) {
        StateVector next = step(q, t.states.back());
        require_finite(next, k);
        t.spread_history.push_back(spread(next));
        t.states.push_back(std::move(next));
    }
    t.iterations_run = iterations;
    const std::size_t last = t.states.size() - 1;
    t.converged = has_converged(q.mode(), last > 0 ? std::span<const double>(t.states[last - 1])
                                                    : std::span<const double>{},
                                t.states[last], tolerance);
    return t;
}

StateVector FixedPointPrediction::predicted_limit(std::span<const double> s0) const {
    if (s0.size() != weights.size()) {
        throw ConsensusError("initial state length does not match the prediction");
    }
    if (mode == StochasticMode::Column) {
        const double total = std::accumulate(s0.begin(), s0.end(), 0.0);
        StateVector limit(weights.size());
        for (std::size_t i = 0; i < weights.size(); ++i) {
            limit[i] = total * weights[i];
        }
        return limit;
    }
    double value = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        value += weights[i] * s0[i];
    }
    return StateVector(weights.size(), value);
}

FixedPointPrediction predict_fixed_point(const TransitionMatrix& q) {
    constexpr double kTolerance = 1e-12;
    constexpr std::size_t kMaxIterations = 100000;

    const DirectedGraph structure = q.support();
    if (!scc_analyze(structure).is_strongly_connected) {
        throw ConsensusError("transition matrix support is not strongly connected; inspect scc_analyze for the "
                             "closed components that decide the limit");
    }
    bool any_self_loop = false;
    for (std::size_t i = 0; i < structure.size(); ++i) {
        any_self_loop = any_self_loop || structure.has_edge(i, i);
    }
    if (!any_self_loop) {
        throw ConsensusError("transition matrix needs at least one self-loop for a unique fixed point");
    }

    const std::size_t n = q.size();
    // Row mode iterates v <- Q^T v (left eigenvector), column mode v <- Q v.
    const bool transpose = q.mode() != StochasticMode::Column;
    std::vector<double> v(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n);

    FixedPointPrediction prediction;
    prediction.mode = q.mode();
    std::size_t it = 0;
    for (; it < kMaxIterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                acc += (transpose ? q.at(j, i) : q.at(i, j)) * v[j];
            }
            next[i] = acc;
        }
        const double total = std::accumulate(next.begin(), next.end(), 0.0);
        for (double& x : next) {
            x /= total;
        }
        const double delta = max_abs_difference(v, next);
        v.swap(next);
        if (delta < kTolerance) {
            ++it;
            break;
        }
    }
    prediction.weights = std::move(v);
    prediction.power_iterations = it;
    return prediction;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
    if (trajectory.states.empty()) {
        throw ConsensusError("trajectory has no states");
    }
    const std::size_t n = trajectory.states.front().size();
    out << "iteration";
    for (std::size_t i = 1; i <= n; ++i) {
        out << ",node_" << i;
    }
    out << '\n';
    std::ostringstream cell;
    cell << std::setprecision(17);
    for (std::size_t k = 0; k < trajectory.states.size(); ++k) {
        out << k;
        for (double v : trajectory.states[k]) {
            cell.str({});
            cell << v;
            out << ',' << cell.str();
        }
        out << '\n';
    }
}

std::string trajectory_csv(const Trajectory& trajectory) {
    std::ostringstream out;
    write_trajectory_csv(out, trajectory);
    return out.str();
}

std::vector<StateVector> read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("iteration", 0) != 0) {
        throw ConsensusError("trajectory CSV must start with an 'iteration,node_1,...' header");
    }
    const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    std::vector<StateVector> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::stringstream fields(line);
        std::string field;
        std::getline(fields, field, ',');
        StateVector row;
        while (std::getline(fields, field, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(field, &used));
                if (used != field.size()) {
                    throw std::invalid_argument(field);
                }
            } catch (const std::exception&) {
                throw ConsensusError("line " + std::to_string(line_no) + ": '" + field + "' is not a number");
            }
        }
        if (row.size() != columns) {
            throw ConsensusError("line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                                 " node values, header declares " + std::to_string(columns));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace misaka
