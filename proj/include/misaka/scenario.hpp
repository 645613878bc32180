#pragma once

#include "misaka/consensus.hpp"
#include "misaka/graph.hpp"
#include "misaka/mesh.hpp"
#include "misaka/serialization.hpp"
#include "misaka/swarm.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace misaka {

enum class EngineKind { Matrix, MeshLockstep, MeshAsync };
std::string to_string(EngineKind kind);
EngineKind parse_engine_kind(const std::string& text);

struct ScenarioConfig {
    std::string name;
    DirectedGraph graph = DirectedGraph::from_edges(1, std::vector<Edge>{{0, 0}});
    StateVector initial_values{0.0};
    StochasticMode mode = StochasticMode::Row;
    EngineKind engine = EngineKind::Matrix;
    swarm::Layout layout;
    mesh::LinkModel links;
    mesh::HandshakeConfig handshake;
    mesh::AsyncConfig async;
    std::uint64_t seed = 0;
    ConvergenceConfig convergence;

    void validate() const;
};

// case1, case2, case2-repaired, dispatch3.
const std::vector<std::string>& builtin_scenario_names();
std::optional<ScenarioConfig> builtin_scenario(const std::string& name);

json scenario_to_json(const ScenarioConfig& config);
ScenarioConfig scenario_from_json(const json& j);

// Built-in name, then `name` as a path, then `<dir>/<name>.json` for each search directory.
ScenarioConfig resolve_scenario(const std::string& name_or_path, const std::vector<std::string>& search_dirs = {});

/// Advances one scenario iteration at a time with the configured engine.
///
/// Matrix: s <- Q s. MeshLockstep: one handshake round. MeshAsync: the
/// asynchronous simulation advanced by one sampling cadence.
class IterationEngine {
public:
    IterationEngine(const ScenarioConfig& config, const DirectedGraph& graph, const StateVector& s0);

    const TransitionMatrix& matrix() const noexcept { return q_; }
    const StateVector& values() const noexcept { return values_; }
    const StateVector& advance();

private:
    EngineKind kind_;
    TransitionMatrix q_;
    StateVector values_;
    std::optional<mesh::MeshSimulation> mesh_;
    double cadence_ms_ = 0.0;
    double next_sample_ms_ = 0.0;
};

// Headless run of a scenario: exactly `iterations` steps, or until converged
// (bounded by the scenario's max_iterations) when unset.
Trajectory run_scenario(const ScenarioConfig& config, std::optional<std::size_t> iterations);

} // namespace misaka
