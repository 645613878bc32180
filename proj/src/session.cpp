#include "misaka/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace misaka::session {
namespace {

std::string display_text(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", value);
    return buf;
}

swarm::Rgb node_color(std::size_t index) {
    const auto& palette = swarm::categorical_palette();
    return palette[index % palette.size()];
}

swarm::RobotRole parse_role(const std::string& text) {
    if (text == "node") {
        return swarm::RobotRole::NodeDisplay;
    }
    if (text == "messenger") {
        return swarm::RobotRole::Messenger;
    }
    if (text == "widget") {
        return swarm::RobotRole::Widget;
    }
    throw FormatError("unknown robot role '" + text + "'");
}

std::size_t require_label(std::size_t label, std::size_t n, const char* what) {
    if (label < 1 || label > n) {
        throw CommandError(std::string(what) + " " + std::to_string(label) + " is not a node (1.." +
                           std::to_string(n) + ")");
    }
    return label - 1;
}

} // namespace

Command command_from_json(const json& j) {
    try {
        if (!j.is_object() || !j.contains("cmd") || !j["cmd"].is_string()) {
            throw CommandError("command needs a string 'cmd' field");
        }
        const std::string name = j["cmd"].get<std::string>();
        Command c;
        if (name == "move_robot") {
            c.kind = CommandKind::MoveRobot;
            c.id = j.at("id").get<int>();
            c.x_mm = j.at("x_mm").get<double>();
            c.y_mm = j.at("y_mm").get<double>();
        } else if (name == "add_node") {
            c.kind = CommandKind::AddNode;
            c.x_mm = j.at("x_mm").get<double>();
            c.y_mm = j.at("y_mm").get<double>();
            if (j.contains("neighbors")) {
                c.neighbors = j["neighbors"].get<std::vector<std::size_t>>();
            }
        } else if (name == "remove_node") {
            c.kind = CommandKind::RemoveNode;
            c.id = j.at("id").get<int>();
        } else if (name == "set_edge") {
            c.kind = CommandKind::SetEdge;
            c.from = j.at("from").get<std::size_t>();
            c.to = j.at("to").get<std::size_t>();
            if (j.contains("present")) {
                c.present = j["present"].get<bool>();
            }
        } else if (name == "start") {
            c.kind = CommandKind::Start;
        } else if (name == "pause") {
            c.kind = CommandKind::Pause;
        } else if (name == "reset") {
            c.kind = CommandKind::Reset;
        } else if (name == "set_layout") {
            c.kind = CommandKind::SetLayout;
            c.layout = layout_from_json(j.at("layout"));
            for (const json& s : j.value("samples", json::array())) {
                c.samples.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
            }
            for (const json& r : j.value("rows", json::array())) {
                if (c.layout->kind == swarm::LayoutKind::GeoMap) {
                    c.geo_rows.push_back({r.value("name", std::string()), r.at("lat").get<double>(),
                                          r.at("lon").get<double>(), r.value("scalar", 0.0)});
                } else {
                    swarm::ScatterRow row;
                    row.x = r.at("x").get<double>();
                    row.y = r.at("y").get<double>();
                    if (r.contains("series")) {
                        row.series = r["series"].get<int>();
                    }
                    if (r.contains("scalar")) {
                        row.scalar = r["scalar"].get<double>();
                    }
                    c.scatter_rows.push_back(row);
                }
            }
        } else if (name == "set_time_window") {
            c.kind = CommandKind::SetTimeWindow;
            c.t_min = j.at("t_min").get<double>();
            c.t_max = j.at("t_max").get<double>();
        } else {
            throw CommandError("unknown command '" + name + "'");
        }
        return c;
    } catch (const json::exception& e) {
        throw CommandError(std::string("malformed command: ") + e.what());
    }
}

json command_to_json(const Command& c) {
    switch (c.kind) {
    case CommandKind::MoveRobot:
        return {{"cmd", "move_robot"}, {"id", c.id}, {"x_mm", c.x_mm}, {"y_mm", c.y_mm}};
    case CommandKind::AddNode: {
        json j{{"cmd", "add_node"}, {"x_mm", c.x_mm}, {"y_mm", c.y_mm}};
        if (c.neighbors) {
            j["neighbors"] = *c.neighbors;
        }
        return j;
    }
    case CommandKind::RemoveNode:
        return {{"cmd", "remove_node"}, {"id", c.id}};
    case CommandKind::SetEdge: {
        json j{{"cmd", "set_edge"}, {"from", c.from}, {"to", c.to}};
        if (c.present) {
            j["present"] = *c.present;
        }
        return j;
    }
    case CommandKind::Start:
        return {{"cmd", "start"}};
    case CommandKind::Pause:
        return {{"cmd", "pause"}};
    case CommandKind::Reset:
        return {{"cmd", "reset"}};
    case CommandKind::SetLayout: {
        json j{{"cmd", "set_layout"}};
        if (c.layout) {
            j["layout"] = layout_to_json(*c.layout);
        }
        if (!c.samples.empty()) {
            json samples = json::array();
            for (const auto& s : c.samples) {
                samples.push_back(json::array({s.t, s.value}));
            }
            j["samples"] = samples;
        }
        json rows = json::array();
        for (const auto& r : c.scatter_rows) {
            json row{{"x", r.x}, {"y", r.y}};
            if (r.series) {
                row["series"] = *r.series;
            }
            if (r.scalar) {
                row["scalar"] = *r.scalar;
            }
            rows.push_back(row);
        }
        for (const auto& r : c.geo_rows) {
            rows.push_back({{"name", r.name}, {"lat", r.lat}, {"lon", r.lon}, {"scalar", r.scalar}});
        }
        if (!rows.empty()) {
            j["rows"] = rows;
        }
        return j;
    }
    case CommandKind::SetTimeWindow:
        return {{"cmd", "set_time_window"}, {"t_min", c.t_min}, {"t_max", c.t_max}};
    }
    return {};
}

json frame_to_json(const EventFrame& frame) {
    json robots = json::array();
    for (const RobotState& r : frame.robots) {
        robots.push_back({{"id", r.id},
                          {"x_mm", r.x_mm},
                          {"y_mm", r.y_mm},
                          {"heading_rad", r.heading_rad},
                          {"rgb", json::array({r.rgb.r, r.rgb.g, r.rgb.b})},
                          {"text", r.text},
                          {"role", swarm::to_string(r.role)}});
    }
    return {{"frame", frame.sequence}, {"t_ms", frame.t_ms},      {"iteration", frame.iteration},
            {"converged", frame.converged}, {"robots", robots}, {"values", frame.values}};
}

EventFrame frame_from_json(const json& j) {
    try {
        EventFrame f;
        f.sequence = j.at("frame").get<std::uint64_t>();
        f.t_ms = j.at("t_ms").get<double>();
        f.iteration = j.at("iteration").get<std::uint64_t>();
        f.converged = j.at("converged").get<bool>();
        f.values = j.at("values").get<StateVector>();
        for (const json& r : j.at("robots")) {
            RobotState s;
            s.id = r.at("id").get<int>();
            s.x_mm = r.at("x_mm").get<double>();
            s.y_mm = r.at("y_mm").get<double>();
            s.heading_rad = r.at("heading_rad").get<double>();
            const auto rgb = r.at("rgb").get<std::vector<int>>();
            if (rgb.size() != 3) {
                throw FormatError("rgb must have three components");
            }
            s.rgb = {static_cast<std::uint8_t>(rgb[0]), static_cast<std::uint8_t>(rgb[1]),
                     static_cast<std::uint8_t>(rgb[2])};
            s.text = r.at("text").get<std::string>();
            s.role = parse_role(r.at("role").get<std::string>());
            f.robots.push_back(std::move(s));
        }
        return f;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed frame: ") + e.what());
    }
}

std::string replay_bundle(const json& scenario) {
    const ScenarioConfig config = scenario_from_json(scenario);
    const auto iterations = scenario.at("iterations").get<std::size_t>();
    return trajectory_csv(run_scenario(config, iterations));
}

Session::Session(SessionOptions options) : options_(options) {}

Session::Session(ScenarioConfig scenario, SessionOptions options) : options_(options) {
    scenario.validate();
    layout_ = scenario.layout;
    original_ = scenario;
    config_ = scenario;
    restart(scenario.graph, scenario.initial_values);
}

void Session::apply_command(const Command& cmd) {
    Session next = *this;
    next.apply_unchecked(cmd);
    *this = std::move(next);
}

void Session::apply_unchecked(const Command& cmd) {
    switch (cmd.kind) {
    case CommandKind::MoveRobot:
        move_robot(cmd);
        break;
    case CommandKind::AddNode:
        add_node(cmd);
        break;
    case CommandKind::RemoveNode:
        remove_node(cmd);
        break;
    case CommandKind::SetEdge:
        set_edge(cmd);
        break;
    case CommandKind::Start:
        if (empty()) {
            throw CommandError("nothing to run: the session has no nodes");
        }
        running_ = true;
        since_iteration_s_ = 0.0;
        break;
    case CommandKind::Pause:
        running_ = false;
        break;
    case CommandKind::Reset: {
        running_ = false;
        widget_ids_.clear();
        window_.reset();
        if (!original_) {
            *this = Session(options_);
            break;
        }
        config_ = original_;
        layout_ = original_->layout;
        restart(original_->graph, original_->initial_values);
        break;
    }
    case CommandKind::SetLayout:
        set_layout(cmd);
        break;
    case CommandKind::SetTimeWindow:
        set_time_window(cmd.t_min, cmd.t_max);
        break;
    }
}

void Session::restart(const DirectedGraph& graph, const StateVector& values) {
    config_->graph = graph;
    config_->initial_values = values;
    engine_.emplace(*config_, graph, values);
    values_ = values;
    history_.assign(1, values);
    iteration_ = 0;
    since_iteration_s_ = 0.0;
    converged_ = has_converged(engine_->matrix().mode(), {}, values_, config_->convergence.tolerance);
    rebuild_scene();
}

int Session::first_messenger_id() const {
    return static_cast<int>(values_.size()) + 1;
}

bool Session::node_robot(int id) const {
    return id >= 1 && static_cast<std::size_t>(id) <= values_.size();
}

void Session::rebuild_scene() {
    std::vector<swarm::Robot> previous = scene_.robots();
    auto previous_pose = [&previous](int id) -> std::optional<swarm::Point> {
        for (const auto& r : previous) {
            if (r.id == id && r.role == swarm::RobotRole::NodeDisplay) {
                return r.pose.position();
            }
        }
        return std::nullopt;
    };

    scene_ = swarm::Scene(layout_.surface);
    const std::size_t n = values_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const int id = static_cast<int>(i) + 1;
        swarm::Point start;
        if (auto p = previous_pose(id)) {
            start = *p;
        } else if (layout_.kind == swarm::LayoutKind::IterationChart) {
            start = swarm::value_to_pose(layout_, i, n, values_[i], scene_.limits()).pose.position();
        } else {
            start = {layout_.surface.width_mm / 2.0, layout_.surface.height_mm / 2.0};
        }
        scene_.add_robot(id, swarm::RobotRole::NodeDisplay, start, node_color(i));
    }

    choreography_.reset();
    if (config_->mode == StochasticMode::Column) {
        choreography_.emplace(engine_->matrix(), scene_, first_messenger_id());
        for (auto& task : scene_.messengers()) {
            task.comm_radius_mm = options_.comm_radius_mm;
        }
    }

    widget_ids_.clear();
    if (layout_.kind == swarm::LayoutKind::TimeSeries) {
        const int base = first_messenger_id() + static_cast<int>(choreography_ ? choreography_->messenger_count() : 0);
        const swarm::TimeWindow w = window_.value_or(swarm::TimeWindow{layout_.x_axis.value_min, layout_.x_axis.value_max});
        const double y = layout_.surface.height_mm - scene_.limits().body_radius_mm;
        scene_.add_robot(base, swarm::RobotRole::Widget, {layout_.x_axis.to_mm(w.t_min), y}, swarm::Rgb{255, 255, 255});
        scene_.add_robot(base + 1, swarm::RobotRole::Widget, {layout_.x_axis.to_mm(w.t_max), y},
                         swarm::Rgb{255, 255, 255});
        widget_ids_ = {base, base + 1};
    }
    update_node_displays();
    retarget_nodes();
}

void Session::update_node_displays() {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (auto* r = scene_.find(static_cast<int>(i) + 1)) {
            r->screen_text = display_text(values_[i]);
        }
    }
}

void Session::retarget_nodes() {
    const std::size_t n = values_.size();
    switch (layout_.kind) {
    case swarm::LayoutKind::IterationChart:
        for (std::size_t i = 0; i < n; ++i) {
            const auto placed = swarm::value_to_pose(layout_, i, n, values_[i], scene_.limits());
            scene_.set_target(static_cast<int>(i) + 1, placed.pose.position());
        }
        break;
    case swarm::LayoutKind::TimeSeries:
        relayout_timeseries();
        break;
    case swarm::LayoutKind::Scatter:
    case swarm::LayoutKind::GeoMap:
        break;
    }
}

void Session::relayout_timeseries() {
    if (widget_ids_.size() != 2) {
        return;
    }
    const auto* a = scene_.find(widget_ids_[0]);
    const auto* b = scene_.find(widget_ids_[1]);
    window_ = swarm::timeseries_window(a->pose, b->pose, layout_);
    const std::size_t n = values_.size();
    const auto placement = swarm::place_timeseries(samples_, *window_, layout_, n);
    const double r = scene_.limits().body_radius_mm;
    for (std::size_t i = 0; i < n; ++i) {
        const int id = static_cast<int>(i) + 1;
        if (i < placement.targets.size()) {
            scene_.set_target(id, placement.targets[i]);
            scene_.at(id).screen_text = display_text(samples_[placement.sample_indices[i]].value);
        } else {
            // Unused data robots park along the bottom edge.
            scene_.set_target(id, {r + 2.0 * r * static_cast<double>(i), r});
            scene_.at(id).screen_text.clear();
        }
    }
}

void Session::tick(double dt_s) {
    if (!(dt_s > 0.0)) {
        throw std::invalid_argument("tick needs dt > 0");
    }
    time_ms_ += dt_s * 1000.0;
    scene_.tick(dt_s);
    if (!running_ || empty() || converged_ || layout_.kind != swarm::LayoutKind::IterationChart) {
        return;
    }
    since_iteration_s_ += dt_s;
    if (options_.iteration_interval_s <= 0.0) {
        iterate();
    } else if (since_iteration_s_ + 1e-12 >= options_.iteration_interval_s) {
        since_iteration_s_ -= options_.iteration_interval_s;
        iterate();
    }
}

void Session::iterate() {
    if (empty()) {
        throw CommandError("nothing to iterate: the session has no nodes");
    }
    const StateVector previous = values_;
    if (choreography_) {
        choreography_->start_round(scene_, previous, iteration_ + 1);
    }
    values_ = engine_->advance();
    ++iteration_;
    history_.push_back(values_);
    converged_ = has_converged(engine_->matrix().mode(), previous, values_, config_->convergence.tolerance);
    update_node_displays();
    if (layout_.kind == swarm::LayoutKind::IterationChart) {
        retarget_nodes();
    }
}

void Session::run_iterations(std::size_t count) {
    for (std::size_t k = 0; k < count; ++k) {
        iterate();
    }
}

EventFrame Session::snapshot() {
    EventFrame f;
    f.sequence = next_sequence_++;
    f.t_ms = time_ms_;
    f.iteration = iteration_;
    f.converged = converged_;
    f.values = values_;
    f.robots.reserve(scene_.robots().size());
    for (const auto& r : scene_.robots()) {
        f.robots.push_back({r.id, r.pose.x_mm, r.pose.y_mm, r.pose.heading_rad, r.led_color, r.screen_text, r.role});
    }
    return f;
}

ExportBundle Session::export_run() const {
    if (empty() || iteration_ == 0) {
        throw CommandError("no recorded iterations to export");
    }
    Trajectory t;
    t.states = history_;
    ExportBundle bundle;
    bundle.trajectory_csv = trajectory_csv(t);
    bundle.scenario = scenario_to_json(*config_);
    bundle.scenario["initial_values"] = history_.front();
    bundle.scenario["layout"] = layout_to_json(layout_);
    bundle.scenario["iterations"] = iteration_;
    return bundle;
}

void Session::move_robot(const Command& cmd) {
    const swarm::Robot* robot = scene_.find(cmd.id);
    if (robot == nullptr) {
        throw CommandError("unknown robot id " + std::to_string(cmd.id));
    }
    switch (robot->role) {
    case swarm::RobotRole::Messenger:
        throw CommandError("messenger robots are driven by the system and cannot be moved");
    case swarm::RobotRole::Widget:
        scene_.place(cmd.id, {cmd.x_mm, cmd.y_mm});
        relayout_timeseries();
        return;
    case swarm::RobotRole::NodeDisplay:
        break;
    }
    if (layout_.kind != swarm::LayoutKind::IterationChart) {
        throw CommandError("node values can only be set in the iteration layout");
    }
    const double value = swarm::pose_to_value(layout_, {cmd.x_mm, cmd.y_mm, robot->pose.heading_rad});
    scene_.place(cmd.id, {cmd.x_mm, cmd.y_mm});
    StateVector next = values_;
    next[static_cast<std::size_t>(cmd.id - 1)] = value;
    restart(config_->graph, next);
}

void Session::add_node(const Command& cmd) {
    if (layout_.kind != swarm::LayoutKind::IterationChart) {
        throw CommandError("nodes can only be added in the iteration layout");
    }
    const double value = swarm::pose_to_value(layout_, {cmd.x_mm, cmd.y_mm, 0.0});
    if (empty()) {
        if (cmd.neighbors && !cmd.neighbors->empty()) {
            throw CommandError("the first node has no neighbours to link");
        }
        ScenarioConfig c;
        c.name = "interactive";
        c.layout = layout_;
        config_ = c;
        values_ = {value};
        restart(c.graph, {value});
        scene_.place(1, {cmd.x_mm, cmd.y_mm});
        return;
    }
    const std::size_t n = values_.size();
    const std::size_t capacity = swarm::column_capacity(layout_, scene_.limits());
    if (n + 1 > capacity) {
        throw CommandError("no free column: the chart holds " + std::to_string(capacity) + " nodes");
    }
    std::vector<std::size_t> links;
    if (cmd.neighbors) {
        for (std::size_t label : *cmd.neighbors) {
            links.push_back(require_label(label, n, "neighbour"));
        }
    } else {
        links.push_back(n - 1);
    }
    const DirectedGraph graph = config_->graph.with_node(links, links);
    StateVector next = values_;
    next.push_back(value);
    values_ = next;
    restart(graph, next);
    scene_.place(static_cast<int>(n) + 1, {cmd.x_mm, cmd.y_mm});
}

void Session::remove_node(const Command& cmd) {
    if (empty()) {
        throw CommandError("the session has no nodes");
    }
    const std::size_t n = values_.size();
    const std::size_t index = require_label(static_cast<std::size_t>(std::max(cmd.id, 0)), n, "node");
    if (n == 1) {
        const SessionOptions options = options_;
        const std::uint64_t sequence = next_sequence_;
        const double t = time_ms_;
        *this = Session(options);
        next_sequence_ = sequence;
        time_ms_ = t;
        return;
    }
    const DirectedGraph graph = config_->graph.without_node(index);
    StateVector next = values_;
    next.erase(next.begin() + static_cast<std::ptrdiff_t>(index));
    // Node robots are renumbered by label; carry the surviving poses along.
    std::vector<swarm::Point> poses;
    for (std::size_t i = 0; i < n; ++i) {
        if (i != index) {
            poses.push_back(scene_.at(static_cast<int>(i) + 1).pose.position());
        }
    }
    values_ = next;
    scene_ = swarm::Scene(layout_.surface);
    for (std::size_t i = 0; i < poses.size(); ++i) {
        scene_.add_robot(static_cast<int>(i) + 1, swarm::RobotRole::NodeDisplay, poses[i], node_color(i));
    }
    restart(graph, next);
}

void Session::set_edge(const Command& cmd) {
    if (empty()) {
        throw CommandError("the session has no nodes");
    }
    const std::size_t n = values_.size();
    const Edge e{require_label(cmd.from, n, "edge source"), require_label(cmd.to, n, "edge target")};
    const bool present = cmd.present.value_or(!config_->graph.has_edge(e.from, e.to));
    restart(config_->graph.with_edge(e, present), values_);
}

void Session::set_layout(const Command& cmd) {
    if (!cmd.layout) {
        throw CommandError("set_layout needs a layout");
    }
    const swarm::Layout layout = *cmd.layout;
    layout.validate();
    const std::size_t n = values_.size();
    switch (layout.kind) {
    case swarm::LayoutKind::IterationChart:
        if (n > swarm::column_capacity(layout, scene_.limits())) {
            throw CommandError("the layout has room for fewer columns than there are nodes");
        }
        layout_ = layout;
        window_.reset();
        break;
    case swarm::LayoutKind::TimeSeries:
        if (!cmd.samples.empty()) {
            samples_ = cmd.samples;
            std::stable_sort(samples_.begin(), samples_.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
        }
        if (samples_.empty()) {
            throw CommandError("a time-series layout needs samples");
        }
        layout_ = layout;
        window_.reset();
        running_ = false;
        break;
    case swarm::LayoutKind::Scatter:
    case swarm::LayoutKind::GeoMap: {
        const auto placements = layout.kind == swarm::LayoutKind::Scatter ? swarm::scatter_place(cmd.scatter_rows, layout)
                                                                          : swarm::geo_place(cmd.geo_rows, layout);
        if (placements.empty()) {
            throw CommandError("a scatter or map layout needs data rows");
        }
        layout_ = layout;
        window_.reset();
        running_ = false;
        if (!empty()) {
            restart(config_->graph, values_);
        }
        for (std::size_t i = 0; i < n && i < placements.size(); ++i) {
            const int id = static_cast<int>(i) + 1;
            scene_.set_target(id, placements[i].position);
            scene_.at(id).led_color = placements[i].color;
        }
        return;
    }
    }
    if (!empty()) {
        restart(config_->graph, values_);
    }
}

void Session::set_time_window(double t_min, double t_max) {
    if (layout_.kind != swarm::LayoutKind::TimeSeries || widget_ids_.size() != 2) {
        throw CommandError("set_time_window needs the time-series layout");
    }
    if (!(t_min < t_max)) {
        throw CommandError("time window needs t_min < t_max");
    }
    const double y = scene_.at(widget_ids_[0]).pose.y_mm;
    scene_.place(widget_ids_[0], {layout_.x_axis.to_mm(layout_.x_axis.clamp_value(t_min)), y});
    scene_.place(widget_ids_[1], {layout_.x_axis.to_mm(layout_.x_axis.clamp_value(t_max)), y});
    relayout_timeseries();
}

} // namespace misaka::session
