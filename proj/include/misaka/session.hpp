#pragma once

#include "misaka/scenario.hpp"
#include "misaka/swarm.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace misaka::session {

class CommandError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class CommandKind { MoveRobot, AddNode, RemoveNode, SetEdge, Start, Pause, Reset, SetLayout, SetTimeWindow };

struct Command {
    CommandKind kind = CommandKind::Start;
    // MoveRobot: robot id. RemoveNode: 1-based node label.
    int id = 0;
    double x_mm = 0.0;
    double y_mm = 0.0;
    // SetEdge, 1-based labels. `present` unset toggles the edge.
    std::size_t from = 0;
    std::size_t to = 0;
    std::optional<bool> present;
    // AddNode: 1-based labels linked both ways to the new node; unset links the last node.
    std::optional<std::vector<std::size_t>> neighbors;
    // SetLayout payloads.
    std::optional<swarm::Layout> layout;
    std::vector<swarm::TimeSample> samples;
    std::vector<swarm::ScatterRow> scatter_rows;
    std::vector<swarm::GeoRow> geo_rows;
    // SetTimeWindow.
    double t_min = 0.0;
    double t_max = 0.0;
};

// Wire form: {"cmd": "move_robot", "id": 3, "x_mm": 120.0, "y_mm": 250.0}, ...
Command command_from_json(const json& j);
json command_to_json(const Command& cmd);

struct RobotState {
    int id = 0;
    double x_mm = 0.0;
    double y_mm = 0.0;
    double heading_rad = 0.0;
    swarm::Rgb rgb;
    std::string text;
    swarm::RobotRole role = swarm::RobotRole::NodeDisplay;
};

/// Complete, self-contained view of a session at one instant.
struct EventFrame {
    std::uint64_t sequence = 0;
    double t_ms = 0.0;
    std::uint64_t iteration = 0;
    bool converged = false;
    std::vector<RobotState> robots;
    StateVector values;
};

json frame_to_json(const EventFrame& frame);
EventFrame frame_from_json(const json& j);

struct ExportBundle {
    std::string trajectory_csv;
    json scenario;
};

// Re-runs an exported scenario for its recorded iteration count and returns the CSV.
std::string replay_bundle(const json& scenario);

struct SessionOptions {
    // Seconds between consensus rounds while running; 0 runs one round per tick.
    double iteration_interval_s = 1.0;
    double comm_radius_mm = 150.0;
};

/// One live testbed: a topology, the engine iterating it, and the scene of
/// robots displaying it. Commands are atomic: a command that throws leaves the
/// session exactly as it was. Every topology or value change restarts the
/// iteration count from the current values.
class Session {
public:
    explicit Session(SessionOptions options = {});
    explicit Session(ScenarioConfig scenario, SessionOptions options = {});

    void apply_command(const Command& cmd);
    // Advances motion by dt; runs a consensus round when the interval has elapsed.
    void tick(double dt_s);
    // One consensus round regardless of the run state.
    void iterate();
    void run_iterations(std::size_t count);

    EventFrame snapshot();
    ExportBundle export_run() const;

    bool empty() const noexcept { return !config_.has_value(); }
    bool running() const noexcept { return running_; }
    bool converged() const noexcept { return converged_; }
    std::uint64_t iteration() const noexcept { return iteration_; }
    double time_ms() const noexcept { return time_ms_; }
    const StateVector& values() const noexcept { return values_; }
    const std::vector<StateVector>& history() const noexcept { return history_; }
    const std::optional<ScenarioConfig>& config() const noexcept { return config_; }
    const swarm::Scene& scene() const noexcept { return scene_; }
    const swarm::Layout& layout() const noexcept { return layout_; }
    std::optional<swarm::TimeWindow> time_window() const noexcept { return window_; }

private:
    void apply_unchecked(const Command& cmd);
    void restart(const DirectedGraph& graph, const StateVector& values);
    void rebuild_scene();
    void retarget_nodes();
    void update_node_displays();
    void relayout_timeseries();
    void move_robot(const Command& cmd);
    void add_node(const Command& cmd);
    void remove_node(const Command& cmd);
    void set_edge(const Command& cmd);
    void set_layout(const Command& cmd);
    void set_time_window(double t_min, double t_max);
    bool node_robot(int id) const;
    int first_messenger_id() const;

    SessionOptions options_;
    std::optional<ScenarioConfig> original_;
    std::optional<ScenarioConfig> config_;
    std::optional<IterationEngine> engine_;
    std::optional<swarm::MessengerChoreography> choreography_;
    swarm::Scene scene_;
    swarm::Layout layout_;

    StateVector values_;
    std::vector<StateVector> history_;
    std::uint64_t iteration_ = 0;
    bool running_ = false;
    bool converged_ = false;
    double time_ms_ = 0.0;
    double since_iteration_s_ = 0.0;
    std::uint64_t next_sequence_ = 1;

    std::vector<swarm::TimeSample> samples_;
    std::optional<swarm::TimeWindow> window_;
    std::vector<int> widget_ids_;
};

} // namespace misaka::session
