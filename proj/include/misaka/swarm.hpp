#pragma once

#include "misaka/consensus.hpp"
#include "misaka/graph.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace misaka::swarm {

class LayoutError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Point {
    double x_mm = 0.0;
    double y_mm = 0.0;
};

double distance(const Point& a, const Point& b);

struct RobotPose {
    double x_mm = 0.0;
    double y_mm = 0.0;
    double heading_rad = 0.0;

    Point position() const { return {x_mm, y_mm}; }
};

// Wraps into [0, 2*pi).
double normalize_heading(double radians);

enum class RobotRole { NodeDisplay, Messenger, Widget };
std::string to_string(RobotRole role);

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct Robot {
    int id = 0;
    RobotPose pose;
    RobotRole role = RobotRole::NodeDisplay;
    Rgb led_color;
    std::string screen_text;
    std::optional<Point> target;
};

struct MotionLimits {
    double v_max_mm_s = 200.0;
    double arrival_threshold_mm = 2.0;
    double wheel_radius_mm = 19.0;
    int wheel_count = 3;
    double body_radius_mm = 50.0;

    void validate() const;
};

struct Surface {
    double width_mm = 1000.0;
    double height_mm = 700.0;

    bool contains(const Point& p) const;
    // Clamps into the area a robot centre may occupy (surface minus body radius).
    Point clamp_center(const Point& p, double body_radius_mm) const;
};

/// Affine map between a value range and a millimetre range on one axis.
struct AxisCalibration {
    double value_min = 0.0;
    double value_max = 1.0;
    double mm_min = 0.0;
    double mm_max = 1.0;

    void validate(const char* axis) const;
    double to_mm(double value) const;
    double to_value(double mm) const;
    double clamp_value(double value) const;
};

enum class LayoutKind { IterationChart, TimeSeries, Scatter, GeoMap };
std::string to_string(LayoutKind kind);
LayoutKind parse_layout_kind(const std::string& text);

struct Layout {
    LayoutKind kind = LayoutKind::IterationChart;
    Surface surface;
    // IterationChart: node columns span x_axis.mm_min..mm_max; y_axis maps node values.
    // TimeSeries: x_axis maps time, y_axis maps the sampled value.
    // Scatter: x_axis and y_axis map the two variables.
    // GeoMap: x_axis maps longitude and y_axis latitude (equirectangular).
    AxisCalibration x_axis{0.0, 1.0, 0.0, 1000.0};
    AxisCalibration y_axis{0.0, 10.0, 50.0, 650.0};
    // Scalar range mapped onto the colour ramp (Scatter scalar colouring, GeoMap).
    double color_min = 0.0;
    double color_max = 1.0;

    void validate() const;
};

Layout default_layout(LayoutKind kind);

struct PlacedPose {
    RobotPose pose;
    bool clamped = false;
};

// Node `node_index` of `node_count` placed in its column, y from the value axis.
PlacedPose value_to_pose(const Layout& layout, std::size_t node_index, std::size_t node_count, double value,
                         const MotionLimits& limits = {});
// Inverse of the value axis of value_to_pose.
double pose_to_value(const Layout& layout, const RobotPose& pose);
// How many node columns fit at one body diameter spacing.
std::size_t column_capacity(const Layout& layout, const MotionLimits& limits = {});

struct BodyVelocity {
    double vx_mm_s = 0.0;
    double vy_mm_s = 0.0;
    double omega_rad_s = 0.0;
};

using WheelSpeeds = std::array<double, 3>;

// Mounting angles of the three omni wheels: 90, 210 and 330 degrees.
const std::array<double, 3>& wheel_angles();

// Wheel angular velocities (rad/s). Throws if the planar speed exceeds v_max.
WheelSpeeds inverse_kinematics(const BodyVelocity& v, const MotionLimits& limits = {});
BodyVelocity forward_kinematics(const WheelSpeeds& wheels, const MotionLimits& limits = {});

enum class MessengerPhase { AtRest, ToSender, Receiving, ToReceiver, Delivering };
std::string to_string(MessengerPhase phase);

struct Payload {
    double value = 0.0;
    std::uint64_t round = 0;
};

/// One messenger robot assigned to the directed edge sender -> receiver.
struct MessengerTask {
    int messenger_id = 0;
    int sender_id = 0;
    int receiver_id = 0;
    MessengerPhase phase = MessengerPhase::AtRest;
    // Value the sender contributes to the receiver this round.
    double share = 0.0;
    std::uint64_t round = 0;
    std::optional<Payload> payload;
    double comm_radius_mm = 150.0;
    Point rest;
    std::size_t completed_cycles = 0;
    bool aborted = false;
};

struct Delivery {
    int messenger_id = 0;
    int receiver_id = 0;
    Payload payload;
    double distance_mm = 0.0;
};

/// The work surface and everything on it. Advanced by a single ticker.
class Scene {
public:
    Scene(Surface surface = {}, MotionLimits limits = {});

    const Surface& surface() const noexcept { return surface_; }
    const MotionLimits& limits() const noexcept { return limits_; }
    const std::vector<Robot>& robots() const noexcept { return robots_; }
    std::vector<MessengerTask>& messengers() noexcept { return messengers_; }
    const std::vector<MessengerTask>& messengers() const noexcept { return messengers_; }
    const std::vector<Delivery>& deliveries() const noexcept { return deliveries_; }
    void clear_deliveries() { deliveries_.clear(); }

    // Position is clamped into the surface margin.
    Robot& add_robot(int id, RobotRole role, Point position, Rgb color = {});
    void remove_robot(int id);
    void clear();
    Robot* find(int id);
    const Robot* find(int id) const;
    Robot& at(int id);

    void set_target(int id, Point target);
    void place(int id, Point position);

    // Moves every targeted robot, then advances every messenger task.
    void tick(double dt_s);

    bool all_idle() const;

private:
    friend MessengerTask advance_messenger(const MessengerTask& task, Scene& scene);

    Surface surface_;
    MotionLimits limits_;
    std::vector<Robot> robots_;
    std::vector<MessengerTask> messengers_;
    std::vector<Delivery> deliveries_;
};

// One state-machine step of a messenger task against the scene.
MessengerTask advance_messenger(const MessengerTask& task, Scene& scene);

/// Column-stochastic round carried out by messenger robots: each edge messenger
/// fetches q_ij * s_j from sender j and hands it to receiver i; each node keeps
/// q_ii * s_i. Node robot ids are node index + 1.
class MessengerChoreography {
public:
    // Adds one Messenger robot per off-diagonal nonzero of q, ids from first_messenger_id.
    MessengerChoreography(const TransitionMatrix& q, Scene& scene, int first_messenger_id);

    std::size_t messenger_count() const noexcept { return edges_.size(); }
    // Loads shares for `values` and sends every messenger towards its sender.
    void start_round(Scene& scene, const StateVector& values, std::uint64_t round);
    bool round_complete(const Scene& scene) const;
    // Node values after the round, from retained shares plus delivered payloads.
    StateVector collect(const Scene& scene) const;

private:
    TransitionMatrix q_;
    std::vector<Edge> edges_;
    int first_id_;
    StateVector retained_;
    std::uint64_t round_ = 0;
};

struct TimeSample {
    double t = 0.0;
    double value = 0.0;
};

struct TimeWindow {
    double t_min = 0.0;
    double t_max = 0.0;
};

// Window selected by two widget robots along the time axis; order-independent.
TimeWindow timeseries_window(const RobotPose& widget_a, const RobotPose& widget_b, const Layout& layout);

struct TimeSeriesPlacement {
    TimeWindow window;
    std::vector<std::size_t> sample_indices;
    std::vector<Point> targets;
    bool downsampled = false;
};

// Targets for up to `robot_count` data robots showing the samples inside `window`,
// stretched over the chart's x extent.
TimeSeriesPlacement place_timeseries(const std::vector<TimeSample>& samples, const TimeWindow& window,
                                     const Layout& layout, std::size_t robot_count);

struct ScatterRow {
    double x = 0.0;
    double y = 0.0;
    std::optional<int> series;
    std::optional<double> scalar;
};

struct GeoRow {
    std::string name;
    double lat = 0.0;
    double lon = 0.0;
    double scalar = 0.0;
};

struct Placement {
    Point position;
    Rgb color;
    bool clamped = false;
};

const std::vector<Rgb>& categorical_palette();
const std::vector<Rgb>& color_ramp();
Rgb ramp_color(double scalar, double lo, double hi);

std::vector<Placement> scatter_place(const std::vector<ScatterRow>& rows, const Layout& layout);
std::vector<Placement> geo_place(const std::vector<GeoRow>& rows, const Layout& layout);

// `t,value` CSV.
std::vector<TimeSample> read_timeseries_csv(std::istream& in);
// `name,lat,lon,scalar` CSV.
std::vector<GeoRow> read_geo_csv(std::istream& in);

} // namespace misaka::swarm
