#include "misaka/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace misaka {
namespace {

DirectedGraph case1_graph() {
    return DirectedGraph::from_adjacency({
        {1, 1, 0, 0},
        {0, 1, 1, 0},
        {1, 0, 1, 1},
        {0, 1, 0, 1},
    });
}

DirectedGraph case2_graph() {
    return DirectedGraph::from_adjacency({
        {1, 1, 0, 0, 1, 1, 0, 1, 0, 0},
        {0, 1, 1, 0, 0, 0, 1, 0, 1, 0},
        {1, 0, 1, 1, 0, 0, 1, 1, 0, 1},
        {0, 1, 0, 1, 0, 1, 0, 0, 1, 0},
        {0, 0, 0, 0, 1, 0, 0, 0, 0, 1},
        {0, 0, 0, 0, 0, 1, 0, 1, 0, 0},
        {0, 0, 0, 0, 0, 0, 1, 0, 0, 1},
        {0, 1, 0, 0, 1, 1, 0, 0, 0, 0},
        {0, 0, 0, 0, 0, 0, 0, 0, 1, 0},
        {0, 0, 0, 0, 1, 0, 1, 0, 1, 1},
    });
}

// Row j lists where sender j splits its output: 1 -> {1, 2}, 2 -> {2, 3}, 3 -> {1, 2, 3}.
DirectedGraph dispatch3_graph() {
    return DirectedGraph::from_adjacency({
        {1, 1, 0},
        {0, 1, 1},
        {1, 1, 1},
    });
}

StateVector one_to_n(std::size_t n) {
    StateVector s(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<double>(i + 1);
    }
    return s;
}

} // namespace

std::string to_string(EngineKind kind) {
    switch (kind) {
    case EngineKind::Matrix:
        return "matrix";
    case EngineKind::MeshLockstep:
        return "lockstep";
    case EngineKind::MeshAsync:
        return "async";
    }
    return "matrix";
}

EngineKind parse_engine_kind(const std::string& text) {
    if (text == "matrix") {
        return EngineKind::Matrix;
    }
    if (text == "lockstep") {
        return EngineKind::MeshLockstep;
    }
    if (text == "async") {
        return EngineKind::MeshAsync;
    }
    throw std::invalid_argument("unknown engine '" + text + "' (expected matrix, lockstep or async)");
}

void ScenarioConfig::validate() const {
    if (initial_values.size() != graph.size()) {
        throw std::invalid_argument("scenario '" + name + "' has " + std::to_string(initial_values.size()) +
                                    " initial values for " + std::to_string(graph.size()) + " nodes");
    }
    for (double v : initial_values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("scenario '" + name + "' has a non-finite initial value");
        }
    }
    layout.validate();
    links.validate();
    convergence.validate();
}

const std::vector<std::string>& builtin_scenario_names() {
    static const std::vector<std::string> names{"case1", "case2", "case2-repaired", "dispatch3"};
    return names;
}

std::optional<ScenarioConfig> builtin_scenario(const std::string& name) {
    ScenarioConfig c;
    c.name = name;
    if (name == "case1") {
        c.graph = case1_graph();
        c.initial_values = {1.0, 2.0, 3.0, 4.0};
    } else if (name == "case2") {
        c.graph = case2_graph();
        c.initial_values = one_to_n(10);
    } else if (name == "case2-repaired") {
        c.graph = case2_graph().with_edge({8, 0}, true);
        c.initial_values = one_to_n(10);
    } else if (name == "dispatch3") {
        c.graph = dispatch3_graph();
        c.initial_values = {5.0, 2.0, 1.0};
        c.mode = StochasticMode::Column;
    } else {
        return std::nullopt;
    }
    return c;
}

json scenario_to_json(const ScenarioConfig& config) {
    return {{"name", config.name},
            {"graph", graph_to_json(config.graph)},
            {"initial_values", config.initial_values},
            {"mode", to_string(config.mode)},
            {"engine", to_string(config.engine)},
            {"layout", layout_to_json(config.layout)},
            {"links", link_model_to_json(config.links)},
            {"handshake", {{"timeout_ms", config.handshake.timeout_ms}, {"retries", config.handshake.retries}}},
            {"async",
             {{"cadence_ms", config.async.cadence_ms},
              {"poll_interval_ms", config.async.poll_interval_ms},
              {"start_jitter_ms", config.async.start_jitter_ms}}},
            {"seed", config.seed},
            {"tolerance", config.convergence.tolerance},
            {"max_iterations", config.convergence.max_iterations}};
}

ScenarioConfig scenario_from_json(const json& j) {
    try {
        if (!j.is_object()) {
            throw FormatError("scenario must be a JSON object");
        }
        ScenarioConfig c;
        c.name = j.value("name", std::string("custom"));
        c.graph = graph_from_json(j.at("graph"));
        c.initial_values = j.at("initial_values").get<StateVector>();
        c.mode = parse_stochastic_mode(j.value("mode", std::string("row")));
        c.engine = parse_engine_kind(j.value("engine", std::string("matrix")));
        if (j.contains("layout")) {
            c.layout = layout_from_json(j["layout"]);
        }
        if (j.contains("links")) {
            c.links = link_model_from_json(j["links"]);
        }
        if (j.contains("handshake")) {
            c.handshake.timeout_ms = j["handshake"].value("timeout_ms", c.handshake.timeout_ms);
            c.handshake.retries = j["handshake"].value("retries", c.handshake.retries);
        }
        if (j.contains("async")) {
            c.async.cadence_ms = j["async"].value("cadence_ms", c.async.cadence_ms);
            c.async.poll_interval_ms = j["async"].value("poll_interval_ms", c.async.poll_interval_ms);
            c.async.start_jitter_ms = j["async"].value("start_jitter_ms", c.async.start_jitter_ms);
        }
        c.seed = j.value("seed", std::uint64_t{0});
        c.convergence.tolerance = j.value("tolerance", c.convergence.tolerance);
        c.convergence.max_iterations = j.value("max_iterations", c.convergence.max_iterations);
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed scenario JSON: ") + e.what());
    }
}

ScenarioConfig resolve_scenario(const std::string& name_or_path, const std::vector<std::string>& search_dirs) {
    if (auto builtin = builtin_scenario(name_or_path)) {
        return *builtin;
    }
    namespace fs = std::filesystem;
    std::vector<fs::path> candidates{fs::path(name_or_path)};
    for (const auto& dir : search_dirs) {
        candidates.push_back(fs::path(dir) / (name_or_path + ".json"));
        candidates.push_back(fs::path(dir) / name_or_path);
    }
    for (const auto& path : candidates) {
        std::error_code ec;
        if (!fs::is_regular_file(path, ec)) {
            continue;
        }
        std::ifstream in(path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw FormatError(path.string() + ": " + e.what());
        }
        return scenario_from_json(j);
    }
    std::string known;
    for (const auto& n : builtin_scenario_names()) {
        known += (known.empty() ? "" : ", ") + n;
    }
    throw std::invalid_argument("unknown scenario '" + name_or_path + "' (built-ins: " + known + ")");
}

IterationEngine::IterationEngine(const ScenarioConfig& config, const DirectedGraph& graph, const StateVector& s0)
    : kind_(config.engine), q_(build_transition(graph, config.mode)), values_(s0) {
    if (s0.size() != graph.size()) {
        throw ConsensusError("initial state does not match the graph");
    }
    if (kind_ != EngineKind::Matrix) {
        mesh_.emplace(q_, s0, config.links, config.handshake, config.seed);
    }
    if (kind_ == EngineKind::MeshAsync) {
        mesh_->start_async(config.async);
        cadence_ms_ = config.async.cadence_ms;
        next_sample_ms_ = cadence_ms_;
    }
}

const StateVector& IterationEngine::advance() {
    switch (kind_) {
    case EngineKind::Matrix:
        values_ = step(q_, values_);
        break;
    case EngineKind::MeshLockstep:
        mesh_->run_round();
        values_ = mesh_->values();
        break;
    case EngineKind::MeshAsync:
        mesh_->advance_async_to(next_sample_ms_);
        next_sample_ms_ += cadence_ms_;
        values_ = mesh_->values();
        break;
    }
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw ConsensusError("non-finite value produced; the transition matrix is ill-formed");
        }
    }
    return values_;
}

Trajectory run_scenario(const ScenarioConfig& config, std::optional<std::size_t> iterations) {
    config.validate();
    IterationEngine engine(config, config.graph, config.initial_values);
    const StochasticMode mode = engine.matrix().mode();
    const double tol = config.convergence.tolerance;

    Trajectory t;
    t.states.push_back(config.initial_values);
    t.spread_history.push_back(spread(config.initial_values));
    t.converged = has_converged(mode, {}, config.initial_values, tol);
    const std::size_t limit = iterations.value_or(config.convergence.max_iterations);
    while (t.iterations_run < limit && (iterations || !t.converged)) {
        StateVector next = engine.advance();
        ++t.iterations_run;
        t.converged = has_converged(mode, t.states.back(), next, tol);
        t.spread_history.push_back(spread(next));
        t.states.push_back(std::move(next));
    }
    return t;
}

} // namespace misaka
