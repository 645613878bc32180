#include "misaka/swarm.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <sstream>

namespace misaka::swarm {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

double parse_number(const std::string& field, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used == field.size() && std::isfinite(v)) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw LayoutError("line " + std::to_string(line_no) + ": '" + field + "' is not a number");
}

std::string format_value(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << v;
    return out.str();
}

} // namespace

double distance(const Point& a, const Point& b) {
    return std::hypot(a.x_mm - b.x_mm, a.y_mm - b.y_mm);
}

double normalize_heading(double radians) {
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    double h = std::fmod(radians, kTwoPi);
    if (h < 0.0) {
        h += kTwoPi;
    }
    return h >= kTwoPi ? 0.0 : h;
}

std::string to_string(RobotRole role) {
    switch (role) {
    case RobotRole::NodeDisplay:
        return "node";
    case RobotRole::Messenger:
        return "messenger";
    case RobotRole::Widget:
        return "widget";
    }
    return "node";
}

std::string to_string(MessengerPhase phase) {
    switch (phase) {
    case MessengerPhase::AtRest:
        return "at_rest";
    case MessengerPhase::ToSender:
        return "to_sender";
    case MessengerPhase::Receiving:
        return "receiving";
    case MessengerPhase::ToReceiver:
        return "to_receiver";
    case MessengerPhase::Delivering:
        return "delivering";
    }
    return "at_rest";
}

void MotionLimits::validate() const {
    if (!(v_max_mm_s > 0.0) || !(wheel_radius_mm > 0.0) || wheel_count <= 0 || !(body_radius_mm > 0.0) ||
        !(arrival_threshold_mm >= 0.0)) {
        throw LayoutError("motion limits must be positive");
    }
}

bool Surface::contains(const Point& p) const {
    return p.x_mm >= 0.0 && p.x_mm <= width_mm && p.y_mm >= 0.0 && p.y_mm <= height_mm;
}

Point Surface::clamp_center(const Point& p, double body_radius_mm) const {
    return {std::clamp(p.x_mm, body_radius_mm, width_mm - body_radius_mm),
            std::clamp(p.y_mm, body_radius_mm, height_mm - body_radius_mm)};
}

void AxisCalibration::validate(const char* axis) const {
    if (!(value_min < value_max) || !(mm_min < mm_max) || !std::isfinite(value_max) || !std::isfinite(mm_max)) {
        throw LayoutError(std::string(axis) + " axis calibration needs min < max on both value and mm ranges");
    }
}

double AxisCalibration::to_mm(double value) const {
    return mm_min + (value - value_min) * (mm_max - mm_min) / (value_max - value_min);
}

double AxisCalibration::to_value(double mm) const {
    return value_min + (mm - mm_min) * (value_max - value_min) / (mm_max - mm_min);
}

double AxisCalibration::clamp_value(double value) const {
    return std::clamp(value, value_min, value_max);
}

std::string to_string(LayoutKind kind) {
    switch (kind) {
    case LayoutKind::IterationChart:
        return "iteration";
    case LayoutKind::TimeSeries:
        return "timeseries";
    case LayoutKind::Scatter:
        return "scatter";
    case LayoutKind::GeoMap:
        return "geo";
    }
    return "iteration";
}

LayoutKind parse_layout_kind(const std::string& text) {
    if (text == "iteration") {
        return LayoutKind::IterationChart;
    }
    if (text == "timeseries") {
        return LayoutKind::TimeSeries;
    }
    if (text == "scatter") {
        return LayoutKind::Scatter;
    }
    if (text == "geo") {
        return LayoutKind::GeoMap;
    }
    throw LayoutError("unknown layout kind '" + text + "' (expected iteration, timeseries, scatter or geo)");
}

void Layout::validate() const {
    if (!(surface.width_mm > 0.0) || !(surface.height_mm > 0.0)) {
        throw LayoutError("surface dimensions must be positive");
    }
    x_axis.validate("x");
    y_axis.validate("y");
    if (!(color_min < color_max)) {
        throw LayoutError("colour range needs min < max");
    }
}

Layout default_layout(LayoutKind kind) {
    Layout layout;
    layout.kind = kind;
    switch (kind) {
    case LayoutKind::IterationChart:
        break;
    case LayoutKind::TimeSeries:
        layout.x_axis = {2005.0, 2019.0, 100.0, 900.0};
        layout.y_axis = {0.0, 400.0, 100.0, 600.0};
        break;
    case LayoutKind::Scatter:
        layout.x_axis = {0.0, 10.0, 100.0, 900.0};
        layout.y_axis = {0.0, 10.0, 100.0, 600.0};
        break;
    case LayoutKind::GeoMap:
        // Contiguous United States.
        layout.x_axis = {-125.0, -66.0, 50.0, 950.0};
        layout.y_axis = {24.0, 50.0, 50.0, 650.0};
        layout.color_max = 40000.0;
        break;
    }
    return layout;
}

std::size_t column_capacity(const Layout& layout, const MotionLimits& limits) {
    const double width = layout.x_axis.mm_max - layout.x_axis.mm_min;
    return static_cast<std::size_t>(std::floor(width / (2.0 * limits.body_radius_mm) + 1e-9));
}

PlacedPose value_to_pose(const Layout& layout, std::size_t node_index, std::size_t node_count, double value,
                         const MotionLimits& limits) {
    if (layout.kind != LayoutKind::IterationChart) {
        throw LayoutError("value_to_pose needs an iteration chart layout");
    }
    if (node_index >= node_count) {
        throw LayoutError("node index " + std::to_string(node_index) + " outside " + std::to_string(node_count) +
                          " columns");
    }
    const std::size_t capacity = column_capacity(layout, limits);
    if (node_count > capacity) {
        throw LayoutError(std::to_string(node_count) + " nodes do not fit; at one body diameter spacing the chart "
                          "holds " + std::to_string(capacity) + " columns, use a larger surface");
    }
    const double pitch = (layout.x_axis.mm_max - layout.x_axis.mm_min) / static_cast<double>(node_count);
    PlacedPose placed;
    const double clamped_value = layout.y_axis.clamp_value(value);
    placed.clamped = clamped_value != value;
    placed.pose.x_mm = layout.x_axis.mm_min + (static_cast<double>(node_index) + 0.5) * pitch;
    placed.pose.y_mm = layout.y_axis.to_mm(clamped_value);
    return placed;
}

double pose_to_value(const Layout& layout, const RobotPose& pose) {
    if (layout.kind != LayoutKind::IterationChart) {
        throw LayoutError("pose_to_value needs an iteration chart layout");
    }
    if (!layout.surface.contains(pose.position())) {
        throw LayoutError("pose (" + format_value(pose.x_mm) + ", " + format_value(pose.y_mm) +
                          ") mm lies outside the work surface");
    }
    return layout.y_axis.to_value(pose.y_mm);
}

const std::array<double, 3>& wheel_angles() {
    static const std::array<double, 3> angles{std::numbers::pi / 2.0, 7.0 * std::numbers::pi / 6.0,
                                              11.0 * std::numbers::pi / 6.0};
    return angles;
}

WheelSpeeds inverse_kinematics(const BodyVelocity& v, const MotionLimits& limits) {
    const double speed = std::hypot(v.vx_mm_s, v.vy_mm_s);
    if (speed > limits.v_max_mm_s * (1.0 + 1e-12)) {
        throw std::out_of_range("planar speed " + format_value(speed) + " mm/s exceeds the " +
                                format_value(limits.v_max_mm_s) + " mm/s limit");
    }
    WheelSpeeds w{};
    const auto& theta = wheel_angles();
    for (std::size_t i = 0; i < 3; ++i) {
        const double tangential =
            -std::sin(theta[i]) * v.vx_mm_s + std::cos(theta[i]) * v.vy_mm_s + limits.body_radius_mm * v.omega_rad_s;
        w[i] = tangential / limits.wheel_radius_mm;
    }
    return w;
}

BodyVelocity forward_kinematics(const WheelSpeeds& wheels, const MotionLimits& limits) {
    const auto& theta = wheel_angles();
    BodyVelocity v;
    double spin = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double tangential = wheels[i] * limits.wheel_radius_mm;
        v.vx_mm_s -= std::sin(theta[i]) * tangential;
        v.vy_mm_s += std::cos(theta[i]) * tangential;
        spin += tangential;
    }
    v.vx_mm_s *= 2.0 / 3.0;
    v.vy_mm_s *= 2.0 / 3.0;
    v.omega_rad_s = spin / (3.0 * limits.body_radius_mm);
    return v;
}

Scene::Scene(Surface surface, MotionLimits limits) : surface_(surface), limits_(limits) {
    limits_.validate();
    if (!(surface_.width_mm > 2.0 * limits_.body_radius_mm) || !(surface_.height_mm > 2.0 * limits_.body_radius_mm)) {
        throw LayoutError("surface must be larger than one robot");
    }
}

Robot& Scene::add_robot(int id, RobotRole role, Point position, Rgb color) {
    if (find(id) != nullptr) {
        throw LayoutError("robot " + std::to_string(id) + " already exists");
    }
    Robot robot;
    robot.id = id;
    robot.role = role;
    robot.led_color = color;
    const Point p = surface_.clamp_center(position, limits_.body_radius_mm);
    robot.pose = {p.x_mm, p.y_mm, 0.0};
    robots_.push_back(std::move(robot));
    return robots_.back();
}

void Scene::remove_robot(int id) {
    const auto it = std::find_if(robots_.begin(), robots_.end(), [id](const Robot& r) { return r.id == id; });
    if (it == robots_.end()) {
        throw LayoutError("unknown robot id " + std::to_string(id));
    }
    robots_.erase(it);
    std::erase_if(messengers_, [id](const MessengerTask& t) { return t.messenger_id == id; });
}

void Scene::clear() {
    robots_.clear();
    messengers_.clear();
    deliveries_.clear();
}

Robot* Scene::find(int id) {
    for (Robot& r : robots_) {
        if (r.id == id) {
            return &r;
        }
    }
    return nullptr;
}

const Robot* Scene::find(int id) const {
    for (const Robot& r : robots_) {
        if (r.id == id) {
            return &r;
        }
    }
    return nullptr;
}

Robot& Scene::at(int id) {
    Robot* r = find(id);
    if (r == nullptr) {
        throw LayoutError("unknown robot id " + std::to_string(id));
    }
    return *r;
}

void Scene::set_target(int id, Point target) {
    at(id).target = surface_.clamp_center(target, limits_.body_radius_mm);
}

void Scene::place(int id, Point position) {
    Robot& r = at(id);
    const Point p = surface_.clamp_center(position, limits_.body_radius_mm);
    r.pose.x_mm = p.x_mm;
    r.pose.y_mm = p.y_mm;
    r.target.reset();
}

void Scene::tick(double dt_s) {
    if (!(dt_s > 0.0)) {
        throw std::invalid_argument("tick needs dt > 0");
    }
    const double max_step = limits_.v_max_mm_s * dt_s;
    for (Robot& r : robots_) {
        if (!r.target) {
            continue;
        }
        const Point here = r.pose.position();
        const double d = distance(here, *r.target);
        if (d > 0.0) {
            const double travel = std::min(max_step, d);
            const double f = travel / d;
            const Point next = surface_.clamp_center(
                {here.x_mm + (r.target->x_mm - here.x_mm) * f, here.y_mm + (r.target->y_mm - here.y_mm) * f},
                limits_.body_radius_mm);
            r.pose.x_mm = next.x_mm;
            r.pose.y_mm = next.y_mm;
        }
        if (distance(r.pose.position(), *r.target) <= limits_.arrival_threshold_mm) {
            r.target.reset();
        }
    }
    for (std::size_t i = 0; i < messengers_.size(); ++i) {
        messengers_[i] = advance_messenger(messengers_[i], *this);
    }
}

bool Scene::all_idle() const {
    return std::all_of(robots_.begin(), robots_.end(), [](const Robot& r) { return !r.target; }) &&
           std::all_of(messengers_.begin(), messengers_.end(),
                       [](const MessengerTask& t) { return t.phase == MessengerPhase::AtRest; });
}

MessengerTask advance_messenger(const MessengerTask& task, Scene& scene) {
    MessengerTask next = task;
    Robot* messenger = scene.find(task.messenger_id);
    const Robot* sender = scene.find(task.sender_id);
    const Robot* receiver = scene.find(task.receiver_id);

    auto go_rest = [&](MessengerTask& t) {
        t.phase = MessengerPhase::AtRest;
        t.payload.reset();
        if (messenger != nullptr) {
            messenger->screen_text.clear();
            scene.set_target(messenger->id, t.rest);
        }
    };

    if (task.phase == MessengerPhase::AtRest) {
        return next;
    }
    const bool endpoints_ok = messenger != nullptr && sender != nullptr && receiver != nullptr &&
                              sender->role == RobotRole::NodeDisplay && receiver->role == RobotRole::NodeDisplay;
    if (!endpoints_ok) {
        next.aborted = true;
        go_rest(next);
        return next;
    }

    switch (task.phase) {
    case MessengerPhase::AtRest:
        break;
    case MessengerPhase::ToSender:
        if (distance(messenger->pose.position(), sender->pose.position()) <= task.comm_radius_mm) {
            next.phase = MessengerPhase::Receiving;
            next.payload = Payload{task.share, task.round};
            messenger->screen_text = format_value(task.share);
            messenger->target.reset();
        } else {
            scene.set_target(messenger->id, sender->pose.position());
        }
        break;
    case MessengerPhase::Receiving:
        next.phase = MessengerPhase::ToReceiver;
        scene.set_target(messenger->id, receiver->pose.position());
        break;
    case MessengerPhase::ToReceiver: {
        const double d = distance(messenger->pose.position(), receiver->pose.position());
        if (d <= task.comm_radius_mm) {
            next.phase = MessengerPhase::Delivering;
            messenger->target.reset();
            scene.deliveries_.push_back(Delivery{task.messenger_id, task.receiver_id, *task.payload, d});
        } else {
            scene.set_target(messenger->id, receiver->pose.position());
        }
        break;
    }
    case MessengerPhase::Delivering:
        ++next.completed_cycles;
        go_rest(next);
        break;
    }
    return next;
}

MessengerChoreography::MessengerChoreography(const TransitionMatrix& q, Scene& scene, int first_messenger_id)
    : q_(q), first_id_(first_messenger_id) {
    const std::size_t n = q.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j && q.at(i, j) > 0.0) {
                edges_.push_back({j, i});
            }
        }
    }
    const double r = scene.limits().body_radius_mm;
    const double pitch = std::max(2.0 * r, (scene.surface().width_mm - 2.0 * r) /
                                               static_cast<double>(std::max<std::size_t>(edges_.size(), 1)));
    for (std::size_t k = 0; k < edges_.size(); ++k) {
        const int id = first_id_ + static_cast<int>(k);
        const Point rest{r + pitch * (static_cast<double>(k) + 0.5), scene.surface().height_mm - r};
        Robot& robot = scene.add_robot(id, RobotRole::Messenger, rest, Rgb{255, 255, 255});
        MessengerTask task;
        task.messenger_id = id;
        task.sender_id = static_cast<int>(edges_[k].from) + 1;
        task.receiver_id = static_cast<int>(edges_[k].to) + 1;
        task.rest = robot.pose.position();
        scene.messengers().push_back(task);
    }
    retained_.assign(n, 0.0);
}

void MessengerChoreography::start_round(Scene& scene, const StateVector& values, std::uint64_t round) {
    const std::size_t n = q_.size();
    if (values.size() != n) {
        throw ConsensusError("round values do not match the node count");
    }
    round_ = round;
    for (std::size_t i = 0; i < n; ++i) {
        retained_[i] = q_.at(i, i) * values[i];
    }
    scene.clear_deliveries();
    for (MessengerTask& task : scene.messengers()) {
        const int k = task.messenger_id - first_id_;
        if (k < 0 || static_cast<std::size_t>(k) >= edges_.size()) {
            continue;
        }
        const Edge& e = edges_[static_cast<std::size_t>(k)];
        task.share = q_.at(e.to, e.from) * values[e.from];
        task.round = round;
        task.payload.reset();
        task.aborted = false;
        task.phase = MessengerPhase::ToSender;
    }
}

bool MessengerChoreography::round_complete(const Scene& scene) const {
    for (const MessengerTask& task : scene.messengers()) {
        const int k = task.messenger_id - first_id_;
        if (k >= 0 && static_cast<std::size_t>(k) < edges_.size() && task.phase != MessengerPhase::AtRest) {
            return false;
        }
    }
    return true;
}

StateVector MessengerChoreography::collect(const Scene& scene) const {
    StateVector values = retained_;
    for (const Delivery& d : scene.deliveries()) {
        if (d.payload.round != round_ || d.receiver_id < 1 || static_cast<std::size_t>(d.receiver_id) > values.size()) {
            continue;
        }
        values[static_cast<std::size_t>(d.receiver_id - 1)] += d.payload.value;
    }
    return values;
}

TimeWindow timeseries_window(const RobotPose& widget_a, const RobotPose& widget_b, const Layout& layout) {
    if (layout.kind != LayoutKind::TimeSeries) {
        throw LayoutError("timeseries_window needs a time-series layout");
    }
    const AxisCalibration& axis = layout.x_axis;
    double a = axis.clamp_value(axis.to_value(widget_a.x_mm));
    double b = axis.clamp_value(axis.to_value(widget_b.x_mm));
    if (a > b) {
        std::swap(a, b);
    }
    if (!(a < b)) {
        // Coincident widgets: keep a window one millimetre of travel wide.
        const double per_mm = (axis.value_max - axis.value_min) / (axis.mm_max - axis.mm_min);
        if (b + per_mm <= axis.value_max) {
            b += per_mm;
        } else {
            a -= per_mm;
        }
    }
    return {a, b};
}

TimeSeriesPlacement place_timeseries(const std::vector<TimeSample>& samples, const TimeWindow& window,
                                     const Layout& layout, std::size_t robot_count) {
    if (layout.kind != LayoutKind::TimeSeries) {
        throw LayoutError("place_timeseries needs a time-series layout");
    }
    if (!(window.t_min < window.t_max)) {
        throw LayoutError("time window needs t_min < t_max");
    }
    TimeSeriesPlacement placement;
    placement.window = window;
    std::vector<std::size_t> inside;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].t >= window.t_min && samples[i].t <= window.t_max) {
            inside.push_back(i);
        }
    }
    if (inside.size() > robot_count) {
        placement.downsampled = true;
        std::vector<std::size_t> picked;
        if (robot_count == 1) {
            picked.push_back(inside.front());
        } else if (robot_count > 1) {
            const double stride = static_cast<double>(inside.size() - 1) / static_cast<double>(robot_count - 1);
            for (std::size_t k = 0; k < robot_count; ++k) {
                picked.push_back(inside[static_cast<std::size_t>(std::llround(stride * static_cast<double>(k)))]);
            }
        }
        inside = std::move(picked);
    }
    const AxisCalibration& x = layout.x_axis;
    for (std::size_t i : inside) {
        const double f = (samples[i].t - window.t_min) / (window.t_max - window.t_min);
        placement.sample_indices.push_back(i);
        placement.targets.push_back(
            {x.mm_min + f * (x.mm_max - x.mm_min), layout.y_axis.to_mm(layout.y_axis.clamp_value(samples[i].value))});
    }
    return placement;
}

const std::vector<Rgb>& categorical_palette() {
    static const std::vector<Rgb> palette{{31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},
                                          {148, 103, 189}, {140, 86, 75},  {227, 119, 194}, {127, 127, 127}};
    return palette;
}

const std::vector<Rgb>& color_ramp() {
    static const std::vector<Rgb> ramp{{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
    return ramp;
}

Rgb ramp_color(double scalar, double lo, double hi) {
    const auto& ramp = color_ramp();
    const double f = std::clamp((scalar - lo) / (hi - lo), 0.0, 1.0);
    const double pos = f * static_cast<double>(ramp.size() - 1);
    const auto k = std::min(static_cast<std::size_t>(pos), ramp.size() - 2);
    const double u = pos - static_cast<double>(k);
    auto mix = [u](std::uint8_t a, std::uint8_t b) {
        return static_cast<std::uint8_t>(std::lround(static_cast<double>(a) + u * (static_cast<double>(b) - a)));
    };
    return {mix(ramp[k].r, ramp[k + 1].r), mix(ramp[k].g, ramp[k + 1].g), mix(ramp[k].b, ramp[k + 1].b)};
}

namespace {

Point place_on_axes(const Layout& layout, double xv, double yv, bool& clamped) {
    const double cx = layout.x_axis.clamp_value(xv);
    const double cy = layout.y_axis.clamp_value(yv);
    clamped = clamped || cx != xv || cy != yv;
    return {layout.x_axis.to_mm(cx), layout.y_axis.to_mm(cy)};
}

} // namespace

std::vector<Placement> scatter_place(const std::vector<ScatterRow>& rows, const Layout& layout) {
    if (layout.kind != LayoutKind::Scatter) {
        throw LayoutError("scatter_place needs a scatter layout");
    }
    std::vector<Placement> out;
    out.reserve(rows.size());
    for (const ScatterRow& row : rows) {
        Placement p;
        p.position = place_on_axes(layout, row.x, row.y, p.clamped);
        if (row.series) {
            const auto& palette = categorical_palette();
            p.color = palette[static_cast<std::size_t>(std::abs(*row.series)) % palette.size()];
        } else if (row.scalar) {
            p.clamped = p.clamped || *row.scalar < layout.color_min || *row.scalar > layout.color_max;
            p.color = ramp_color(*row.scalar, layout.color_min, layout.color_max);
        } else {
            p.color = categorical_palette().front();
        }
        out.push_back(p);
    }
    return out;
}

std::vector<Placement> geo_place(const std::vector<GeoRow>& rows, const Layout& layout) {
    if (layout.kind != LayoutKind::GeoMap) {
        throw LayoutError("geo_place needs a geographic map layout");
    }
    std::vector<Placement> out;
    out.reserve(rows.size());
    for (const GeoRow& row : rows) {
        Placement p;
        p.position = place_on_axes(layout, row.lon, row.lat, p.clamped);
        p.clamped = p.clamped || row.scalar < layout.color_min || row.scalar > layout.color_max;
        p.color = ramp_color(row.scalar, layout.color_min, layout.color_max);
        out.push_back(p);
    }
    return out;
}

std::vector<TimeSample> read_timeseries_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,value", 0) != 0) {
        throw LayoutError("time-series CSV must start with a 't,value' header");
    }
    std::vector<TimeSample> samples;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != 2) {
            throw LayoutError("line " + std::to_string(line_no) + ": expected 2 fields");
        }
        samples.push_back({parse_number(fields[0], line_no), parse_number(fields[1], line_no)});
    }
    std::stable_sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    return samples;
}

std::vector<GeoRow> read_geo_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("name,lat,lon,scalar", 0) != 0) {
        throw LayoutError("geo CSV must start with a 'name,lat,lon,scalar' header");
    }
    std::vector<GeoRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != 4) {
            throw LayoutError("line " + std::to_string(line_no) + ": expected 4 fields");
        }
        rows.push_back({fields[0], parse_number(fields[1], line_no), parse_number(fields[2], line_no),
                        parse_number(fields[3], line_no)});
    }
    return rows;
}

} // namespace misaka::swarm
