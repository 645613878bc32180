#include "doctest.h"

#include "misaka/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace misaka;
using namespace misaka::session;

namespace {

Session load(const std::string& name, double interval = 0.0) {
    SessionOptions o;
    o.iteration_interval_s = interval;
    return Session(*builtin_scenario(name), o);
}

Command cmd(const std::string& text) { return command_from_json(json::parse(text)); }

std::size_t count_role(const EventFrame& f, swarm::RobotRole role) {
    return static_cast<std::size_t>(
        std::count_if(f.robots.begin(), f.robots.end(), [role](const RobotState& r) { return r.role == role; }));
}

double y_of_value(const Session& s, double value) { return s.layout().y_axis.to_mm(value); }

double x_of_node(const Session& s, int id) { return s.scene().find(id)->pose.x_mm; }

json strip_sequence(EventFrame f) {
    f.sequence = 0;
    return frame_to_json(f);
}

class LineClient {
public:
    explicit LineClient(unsigned short port) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
        REQUIRE(::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    }
    ~LineClient() { ::close(fd_); }

    void send(const std::string& line) {
        const std::string data = line + "\n";
        REQUIRE(::send(fd_, data.data(), data.size(), MSG_NOSIGNAL) == static_cast<ssize_t>(data.size()));
    }

    std::optional<json> read(int timeout_ms = 3000) {
        while (true) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                const std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return json::parse(line);
            }
            pollfd p{fd_, POLLIN, 0};
            if (::poll(&p, 1, timeout_ms) <= 0) {
                return std::nullopt;
            }
            char chunk[4096];
            const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n <= 0) {
                return std::nullopt;
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    // Next message that is not a frame.
    std::optional<json> read_reply() {
        for (int k = 0; k < 1000; ++k) {
            auto m = read();
            if (!m || !m->contains("frame")) {
                return m;
            }
        }
        return std::nullopt;
    }

private:
    int fd_ = -1;
    std::string buffer_;
};

} // namespace

TEST_CASE("fresh sessions") {
    auto s = load("case1");
    const auto f = s.snapshot();
    CHECK(f.values == StateVector{1, 2, 3, 4});
    CHECK(f.iteration == 0);
    CHECK(count_role(f, swarm::RobotRole::NodeDisplay) == 4);
    CHECK(f.robots.size() == 4);

    auto d = load("dispatch3");
    const auto df = d.snapshot();
    CHECK(count_role(df, swarm::RobotRole::NodeDisplay) == 3);
    CHECK(count_role(df, swarm::RobotRole::Messenger) == 4);

    Session empty;
    const auto ef = empty.snapshot();
    CHECK(ef.robots.empty());
    CHECK(ef.iteration == 0);
    CHECK(ef.values.empty());
}

TEST_CASE("snapshots without a tick differ only in sequence") {
    auto s = load("dispatch3");
    s.iterate();
    const auto a = s.snapshot();
    const auto b = s.snapshot();
    CHECK(b.sequence == a.sequence + 1);
    CHECK(strip_sequence(a) == strip_sequence(b));
}

TEST_CASE("moving node 4 restarts from the perturbed vector") {
    auto s = load("case1");
    s.apply_command(cmd(R"({"cmd":"start"})"));
    for (int k = 0; k < 5; ++k) {
        s.tick(0.05);
    }
    REQUIRE(s.iteration() == 5);
    const StateVector current = s.values();

    Command move;
    move.kind = CommandKind::MoveRobot;
    move.id = 4;
    move.x_mm = x_of_node(s, 4);
    move.y_mm = y_of_value(s, 10.0);
    s.apply_command(move);
    CHECK(s.iteration() == 0);
    CHECK(s.running());
    REQUIRE(s.values().size() == 4);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(s.values()[i] == current[i]);
    }
    CHECK(s.values()[3] == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(s.history().front() == s.values());

    for (int k = 0; k < 200 && !s.converged(); ++k) {
        s.tick(0.05);
    }
    CHECK(s.converged());
    CHECK(spread(s.values()) < 1e-6);
}

TEST_CASE("pause then reset returns to the scenario") {
    auto s = load("case1");
    s.apply_command(cmd(R"({"cmd":"start"})"));
    s.tick(0.1);
    s.tick(0.1);
    s.apply_command(cmd(R"({"cmd":"pause"})"));
    s.tick(0.1);
    CHECK(s.iteration() == 2);
    s.apply_command(cmd(R"({"cmd":"set_edge","from":1,"to":4})"));
    s.apply_command(cmd(R"({"cmd":"reset"})"));
    CHECK(s.values() == StateVector{1, 2, 3, 4});
    CHECK(s.iteration() == 0);
    CHECK_FALSE(s.running());
    CHECK(s.config()->graph == builtin_scenario("case1")->graph);
}

TEST_CASE("adding the missing edge fixes the ten-node example") {
    auto s = load("case2");
    s.run_iterations(150);
    CHECK(s.converged());
    CHECK(std::abs(s.values()[0] - 9.0) < 1e-6);

    s = load("case2");
    s.run_iterations(20);
    s.apply_command(cmd(R"({"cmd":"set_edge","from":9,"to":1,"present":true})"));
    CHECK(s.iteration() == 0);
    s.run_iterations(2000);
    CHECK(s.converged());
    CHECK(spread(s.values()) < 1e-6);
    CHECK(std::abs(s.values()[0] - 9.0) > 1e-3);
}

TEST_CASE("every mutating command restarts the count") {
    const std::vector<std::string> mutations{
        R"({"cmd":"set_edge","from":1,"to":3})",
        R"({"cmd":"add_node","x_mm":900,"y_mm":400})",
        R"({"cmd":"remove_node","id":2})",
    };
    for (const auto& text : mutations) {
        auto s = load("case1");
        s.run_iterations(3);
        s.apply_command(cmd(text));
        CHECK(s.iteration() == 0);
        CHECK(s.history().size() == 1);
    }
    auto s = load("case1");
    s.run_iterations(3);
    Command move;
    move.kind = CommandKind::MoveRobot;
    move.id = 2;
    move.x_mm = x_of_node(s, 2);
    move.y_mm = y_of_value(s, 6.0);
    s.apply_command(move);
    CHECK(s.iteration() == 0);
}

TEST_CASE("add and remove nodes") {
    auto s = load("case1");
    s.run_iterations(2);
    const StateVector before = s.values();
    s.apply_command(cmd(R"({"cmd":"add_node","x_mm":800,"y_mm":350})"));
    REQUIRE(s.values().size() == 5);
    CHECK(s.values()[4] == doctest::Approx(s.layout().y_axis.to_value(350.0)));
    CHECK(s.config()->graph.has_edge(4, 3));
    CHECK(s.config()->graph.has_edge(3, 4));
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(s.values()[i] == before[i]);
    }
    CHECK(s.snapshot().robots.size() == 5);

    s.apply_command(cmd(R"({"cmd":"remove_node","id":5})"));
    CHECK(s.values() == before);
    CHECK(s.config()->graph == builtin_scenario("case1")->graph);

    s.apply_command(cmd(R"({"cmd":"add_node","x_mm":800,"y_mm":350,"neighbors":[1,2]})"));
    CHECK(s.config()->graph.has_edge(4, 0));
    CHECK(s.config()->graph.has_edge(1, 4));
    CHECK_FALSE(s.config()->graph.has_edge(4, 3));
}

TEST_CASE("empty session grows from its first node") {
    Session s;
    s.apply_command(cmd(R"({"cmd":"add_node","x_mm":300,"y_mm":350})"));
    REQUIRE(s.values().size() == 1);
    s.apply_command(cmd(R"({"cmd":"add_node","x_mm":600,"y_mm":110})"));
    REQUIRE(s.values().size() == 2);
    s.run_iterations(100);
    CHECK(s.converged());
    s.apply_command(cmd(R"({"cmd":"remove_node","id":2})"));
    s.apply_command(cmd(R"({"cmd":"remove_node","id":1})"));
    CHECK(s.empty());
    CHECK(s.snapshot().robots.empty());
}

TEST_CASE("rejected commands leave the session unchanged") {
    auto s = load("dispatch3");
    s.run_iterations(3);
    const json before = strip_sequence(s.snapshot());

    auto expect_rejected = [&](const std::string& text) {
        CHECK_THROWS_AS(s.apply_command(cmd(text)), std::invalid_argument);
        CHECK(strip_sequence(s.snapshot()) == before);
    };
    expect_rejected(R"({"cmd":"move_robot","id":99,"x_mm":10,"y_mm":10})");
    // messengers are system-driven
    expect_rejected(R"({"cmd":"move_robot","id":4,"x_mm":10,"y_mm":10})");
    expect_rejected(R"({"cmd":"remove_node","id":7})");
    expect_rejected(R"({"cmd":"set_edge","from":0,"to":1})");
    // node 1 reads itself and node 2; dropping both empties its row
    expect_rejected(R"({"cmd":"set_edge","from":1,"to":9})");
    expect_rejected(R"({"cmd":"set_time_window","t_min":1,"t_max":2})");
    CHECK_THROWS_AS(cmd(R"({"cmd":"warp"})"), CommandError);
    CHECK_THROWS_AS(cmd(R"({"id":1})"), CommandError);
    CHECK_THROWS_AS(cmd(R"({"cmd":"move_robot","id":1})"), CommandError);

    auto c1 = load("case1");
    c1.apply_command(cmd(R"({"cmd":"set_edge","from":2,"to":2,"present":false})"));
    CHECK_THROWS_AS(c1.apply_command(cmd(R"({"cmd":"set_edge","from":2,"to":3,"present":false})")),
                    std::invalid_argument);
    CHECK(c1.config()->graph.has_edge(1, 2));
}

TEST_CASE("adding beyond the column capacity is rejected") {
    auto s = load("case2");
    CHECK_THROWS_AS(s.apply_command(cmd(R"({"cmd":"add_node","x_mm":500,"y_mm":300})")), CommandError);
    CHECK(s.values().size() == 10);
}

TEST_CASE("export and replay reproduce the run") {
    auto s = load("case1");
    CHECK_THROWS_AS(s.export_run(), CommandError);
    s.run_iterations(10);
    const auto bundle = s.export_run();

    std::ifstream in(MISAKA_DATA_DIR "/table1_golden.csv");
    const auto golden = read_trajectory_csv(in);
    std::istringstream exported(bundle.trajectory_csv);
    const auto rows = read_trajectory_csv(exported);
    REQUIRE(rows.size() == golden.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(std::abs(rows[k][j] - golden[k][j]) <= 5e-7);
        }
    }
    const json reloaded = json::parse(bundle.scenario.dump());
    CHECK(replay_bundle(reloaded) == bundle.trajectory_csv);
    CHECK_THROWS(Session().export_run());
}

TEST_CASE("export after a restart replays from the restart point with the mesh engine") {
    auto config = *builtin_scenario("case2-repaired");
    config.engine = EngineKind::MeshLockstep;
    config.links.drop = 0.2;
    config.links.latency = {2.0, 12.0};
    config.seed = 17;
    Session s(config);
    s.run_iterations(4);
    s.apply_command(cmd(R"({"cmd":"set_edge","from":5,"to":2})"));
    s.run_iterations(12);
    const auto bundle = s.export_run();
    CHECK(bundle.scenario["iterations"] == 12);
    CHECK(replay_bundle(json::parse(bundle.scenario.dump())) == bundle.trajectory_csv);
}

TEST_CASE("wire messages round trip") {
    for (const char* text : {R"({"cmd":"move_robot","id":3,"x_mm":120.0,"y_mm":250.0})",
                             R"({"cmd":"add_node","x_mm":1.0,"y_mm":2.0,"neighbors":[1,3]})",
                             R"({"cmd":"remove_node","id":2})", R"({"cmd":"set_edge","from":9,"to":1})",
                             R"({"cmd":"start"})", R"({"cmd":"pause"})", R"({"cmd":"reset"})",
                             R"({"cmd":"set_time_window","t_min":2008.0,"t_max":2015.0})"}) {
        const json j = json::parse(text);
        CHECK(command_to_json(command_from_json(j)) == j);
    }
    auto s = load("dispatch3");
    s.iterate();
    const auto f = s.snapshot();
    const json j = frame_to_json(f);
    CHECK(j.contains("frame"));
    CHECK(j["robots"][0]["rgb"].size() == 3);
    CHECK(j["robots"][0]["role"] == "node");
    CHECK(frame_to_json(frame_from_json(json::parse(j.dump()))) == j);
}

TEST_CASE("time series layout with widget robots") {
    auto s = load("case2");
    std::ifstream in(MISAKA_DATA_DIR "/wind_generation.csv");
    const auto samples = swarm::read_timeseries_csv(in);
    Command c;
    c.kind = CommandKind::SetLayout;
    c.layout = swarm::default_layout(swarm::LayoutKind::TimeSeries);
    c.samples = samples;
    s.apply_command(c);
    auto f = s.snapshot();
    CHECK(count_role(f, swarm::RobotRole::Widget) == 2);
    REQUIRE(s.time_window());
    CHECK(s.time_window()->t_min == doctest::Approx(2005.0));

    s.apply_command(cmd(R"({"cmd":"set_time_window","t_min":2010,"t_max":2014})"));
    CHECK(s.time_window()->t_min == doctest::Approx(2010.0));
    CHECK(s.time_window()->t_max == doctest::Approx(2014.0));
    for (int k = 0; k < 200; ++k) {
        s.tick(0.05);
    }
    f = s.snapshot();
    std::size_t labelled = 0;
    for (const auto& r : f.robots) {
        if (r.role == swarm::RobotRole::NodeDisplay && !r.text.empty()) {
            ++labelled;
        }
    }
    CHECK(labelled == 5);

    // dragging a widget robot moves the window
    const int widget = f.robots.back().id;
    Command drag;
    drag.kind = CommandKind::MoveRobot;
    drag.id = widget;
    drag.x_mm = s.layout().x_axis.to_mm(2018.0);
    drag.y_mm = 600;
    s.apply_command(drag);
    CHECK(s.time_window()->t_max == doctest::Approx(2018.0));
}

TEST_CASE("scatter layout colours node robots by series") {
    auto s = load("case1");
    const json j = json::parse(R"({"cmd":"set_layout","layout":{"kind":"scatter"},
        "rows":[{"x":1,"y":1,"series":0},{"x":2,"y":3,"series":1},{"x":4,"y":2,"series":1},{"x":8,"y":9,"series":2}]})");
    s.apply_command(command_from_json(j));
    CHECK(s.layout().kind == swarm::LayoutKind::Scatter);
    const auto f = s.snapshot();
    CHECK(f.robots[1].rgb == f.robots[2].rgb);
    CHECK_FALSE(f.robots[0].rgb == f.robots[1].rgb);
    CHECK_THROWS_AS(s.apply_command(cmd(R"({"cmd":"add_node","x_mm":500,"y_mm":300})")), CommandError);
}

TEST_CASE("service delivers every frame to every subscriber in order") {
    SessionService service(load("case1"));
    auto a = service.subscribe();
    auto b = service.subscribe();
    auto done = service.submit(cmd(R"({"cmd":"start"})"));
    service.start(std::chrono::milliseconds(2));
    done.get();
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    service.stop();
    const auto last = service.latest();
    REQUIRE(last);
    for (auto* sub : {&a, &b}) {
        std::uint64_t expected = 1;
        while (auto f = (*sub)->pop(std::chrono::milliseconds(0))) {
            CHECK(f->sequence == expected);
            ++expected;
        }
        CHECK(expected == last->sequence + 1);
    }
    CHECK(last->iteration > 0);
}

TEST_CASE("failed commands surface through the future") {
    SessionService service(load("case1"));
    auto bad = service.submit(cmd(R"({"cmd":"remove_node","id":12})"));
    auto good = service.submit(cmd(R"({"cmd":"start"})"));
    service.step_once(0.01);
    CHECK_THROWS_AS(bad.get(), CommandError);
    CHECK_NOTHROW(good.get());
    CHECK(service.with_session([](const Session& s) { return s.running(); }));
}

TEST_CASE("socket clients drive the session and receive frames") {
    SessionOptions o;
    o.iteration_interval_s = 0.0;
    SessionService service(Session(*builtin_scenario("dispatch3"), o));
    FrameServer server(service, 0);
    REQUIRE(server.port() != 0);
    service.start(std::chrono::milliseconds(5));

    LineClient client(server.port());
    auto first = client.read();
    REQUIRE(first);
    CHECK(first->at("robots").size() == 7);
    const auto seq = first->at("frame").get<std::uint64_t>();
    auto second = client.read();
    REQUIRE(second);
    CHECK(second->at("frame").get<std::uint64_t>() == seq + 1);

    client.send(R"({"cmd":"move_robot","id":5,"x_mm":1,"y_mm":1})");
    auto reply = client.read_reply();
    REQUIRE(reply);
    CHECK(reply->contains("error"));

    client.send("this is not json");
    reply = client.read_reply();
    REQUIRE(reply);
    CHECK(reply->contains("error"));

    client.send(R"({"cmd":"start"})");
    bool iterated = false;
    for (int k = 0; k < 500 && !iterated; ++k) {
        auto f = client.read();
        REQUIRE(f);
        iterated = f->at("iteration").get<int>() > 0;
    }
    CHECK(iterated);

    client.send(R"({"cmd":"export"})");
    reply = client.read_reply();
    REQUIRE(reply);
    REQUIRE(reply->contains("export"));
    CHECK(reply->at("export").at("scenario").at("name") == "dispatch3");

    server.stop();
    service.stop();
}

TEST_CASE("binding an occupied port fails") {
    SessionService service{Session()};
    FrameServer first(service, 0);
    CHECK_THROWS_AS(FrameServer(service, first.port()), std::system_error);
}
