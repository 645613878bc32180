// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "support.hpp"

#include "misaka/mesh.hpp"
#include "misaka/scc.hpp"
#include "misaka/scenario.hpp"
#include "misaka/swarm.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

using namespace misaka;

namespace {

struct Check {
    std::string name;
    std::function<std::string()> run;  // empty string on success, else the reason
};

double max_abs_diff(const StateVector& a, const StateVector& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a[i] - b[i]));
    }
    return d;
}

std::string table_one() {
    const auto dir = std::filesystem::temp_directory_path();
    const auto out = dir / ("acceptance_table1_" + std::to_string(::getpid()) + ".csv");
    const std::string cmd = std::string(MISAKA_CLI) + " run --scenario case1 --iterations 10 --out " + out.string() +
                            " > /dev/null 2>&1";
    const auto t0 = std::chrono::steady_clock::now();
    const int status = std::system(cmd.c_str());
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        return "run exited with status " + std::to_string(status);
    }
    std::ifstream got_in(out);
    const auto got = read_trajectory_csv(got_in);
    std::filesystem::remove(out);
    std::ifstream want_in(MISAKA_DATA_DIR "/table1_golden.csv");
    const auto want = read_trajectory_csv(want_in);
    if (got.size() != 11 || want.size() != 11) {
        return "expected 11 rows";
    }
    std::size_t compared = 0;
    for (std::size_t k = 0; k < 11; ++k) {
        for (std::size_t j = 0; j < 4; ++j) {
            if (std::abs(got[k][j] - want[k][j]) > 5e-7) {
                return "iteration " + std::to_string(k) + " node " + std::to_string(j + 1) + " off";
            }
            ++compared;
        }
    }
    if (compared != 44) {
        return "compared " + std::to_string(compared) + " values";
    }
    if (elapsed >= 1.0) {
        return "took " + std::to_string(elapsed) + " s";
    }
    return {};
}

std::string case_two_pathology() {
    const auto c = *builtin_scenario("case2");
    const auto t = run_scenario(c, std::nullopt);
    if (!t.converged) {
        return "did not converge";
    }
    for (double v : t.final_state()) {
        if (std::abs(v - 9.0) >= 1e-6) {
            return "value " + std::to_string(v) + " not within 1e-6 of 9";
        }
    }
    const auto r = scc_analyze(c.graph);
    if (r.is_strongly_connected) {
        return "reported strongly connected";
    }
    if (r.closed_components.size() != 1 || r.components[r.closed_components[0]] != std::vector<std::size_t>{8}) {
        return "closed component is not {9}";
    }
    return {};
}

std::string case_two_repair() {
    const auto c = *builtin_scenario("case2-repaired");
    if (!scc_analyze(c.graph).is_strongly_connected) {
        return "not strongly connected";
    }
    const auto t = run_scenario(c, std::nullopt);
    if (spread(t.final_state()) >= 1e-6) {
        return "spread " + std::to_string(spread(t.final_state()));
    }
    const auto limit = predict_fixed_point(build_transition(c.graph, c.mode)).predicted_limit(c.initial_values);
    if (max_abs_diff(limit, t.final_state()) >= 1e-6) {
        return "limit differs from the fixed-point prediction";
    }
    return {};
}

std::string dispatch_conservation() {
    const auto c = *builtin_scenario("dispatch3");
    const auto q = build_transition(c.graph, c.mode);
    StateVector s = c.initial_values;
    for (int k = 0; k < 10000; ++k) {
        s = step(q, s);
        const double total = s[0] + s[1] + s[2];
        if (std::abs(total - 8.0) > 1e-9) {
            return "sum drifted to " + std::to_string(total) + " at iteration " + std::to_string(k + 1);
        }
    }
    if (max_abs_diff(s, {16.0 / 9, 32.0 / 9, 8.0 / 3}) >= 1e-6) {
        return "limit is not [16/9, 32/9, 8/3]";
    }
    const auto even = run(build_transition(c.graph, StochasticMode::Doubly), c.initial_values, {1e-12, 100000});
    if (max_abs_diff(even.final_state(), {8.0 / 3, 8.0 / 3, 8.0 / 3}) >= 1e-6) {
        return "metropolis limit is not 8/3 everywhere";
    }
    return {};
}

std::string mesh_equivalence() {
    for (const auto& name : {"case1", "case2", "case2-repaired"}) {
        const auto c = *builtin_scenario(name);
        const auto q = build_transition(c.graph, c.mode);
        const auto mesh = mesh::run_lockstep(q, c.initial_values, {}, 50, 1);
        const auto matrix = run_for(q, c.initial_values, 50);
        for (std::size_t k = 0; k < matrix.states.size(); ++k) {
            if (max_abs_diff(mesh.states[k], matrix.states[k]) > 1e-12) {
                return std::string(name) + " differs at round " + std::to_string(k);
            }
        }
    }
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + trial % 8;
        const auto g = testsupport::random_strong_graph(rng, n, 0.3, trial % 2 == 0);
        StateVector s0(n);
        for (double& v : s0) {
            v = u(rng);
        }
        const auto mesh = mesh::run_lockstep(g, s0, {}, 20, rng());
        const auto matrix = run_for(row_stochastic(g), s0, 20);
        for (std::size_t k = 0; k < matrix.states.size(); ++k) {
            if (max_abs_diff(mesh.states[k], matrix.states[k]) > 1e-12) {
                return "random graph " + std::to_string(trial) + " differs";
            }
        }
    }
    return {};
}

std::string fault_safety() {
    std::mt19937_64 rng(9001);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + trial % 7;
        const auto g = testsupport::random_strong_graph(rng, n, 0.35, true);
        const auto q = row_stochastic(g);
        StateVector s0(n);
        for (double& v : s0) {
            v = 20.0 * u(rng) - 10.0;
        }
        const double lo = *std::min_element(s0.begin(), s0.end());
        const double hi = *std::max_element(s0.begin(), s0.end());
        mesh::LinkModel links;
        links.drop = u(rng);
        links.latency = {1.0, 25.0};
        std::vector<std::pair<std::size_t, std::size_t>> cut;
        for (const Edge& e : g.edges()) {
            if (e.from != e.to && u(rng) < 0.15) {
                links.overrides.push_back({e.from, e.to, 1.0, std::nullopt});
                cut.emplace_back(e.from, e.to);
            }
        }
        mesh::MeshSimulation sim(q, s0, links, {}, rng());
        for (int round = 0; round < 3; ++round) {
            sim.run_round();
            for (double v : sim.values()) {
                if (v < lo - 1e-12 || v > hi + 1e-12) {
                    return "value escaped the initial range in trial " + std::to_string(trial);
                }
            }
            for (const auto& [i, j] : cut) {
                for (const auto& [node, w] : sim.last_update_weights()[i]) {
                    if (node == j && w != 0.0) {
                        return "failed link carried weight in trial " + std::to_string(trial);
                    }
                }
            }
        }
    }
    return {};
}

std::string scc_oracle() {
    auto agree = [](const DirectedGraph& g) {
        const auto reach = testsupport::reachability(g);
        const auto r = scc_analyze(g);
        bool all = true;
        for (std::size_t i = 0; i < g.size(); ++i) {
            for (std::size_t j = 0; j < g.size(); ++j) {
                if ((r.component_of[i] == r.component_of[j]) != (reach[i][j] && reach[j][i])) {
                    return false;
                }
                all = all && reach[i][j];
            }
        }
        return r.is_strongly_connected == all;
    };
    for (std::size_t n = 1; n <= 4; ++n) {
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (n * n)); ++mask) {
            std::vector<std::vector<int>> rows(n, std::vector<int>(n));
            bool ok = true;
            for (std::size_t i = 0; i < n; ++i) {
                int any = 0;
                for (std::size_t j = 0; j < n; ++j) {
                    rows[i][j] = (mask >> (i * n + j)) & 1;
                    any |= rows[i][j];
                }
                ok = ok && any;
            }
            if (ok && !agree(DirectedGraph::from_adjacency(rows))) {
                return "mismatch for n = " + std::to_string(n) + ", mask " + std::to_string(mask);
            }
        }
    }
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto g = testsupport::random_graph(rng, 5 + trial % 4, 0.05 + 0.1 * (trial % 4), trial % 2 == 0);
        if (!agree(g)) {
            return "mismatch on random graph " + std::to_string(trial);
        }
    }
    return {};
}

std::string motion() {
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        const double speed = 200.0 * unit(rng);
        const double a = 2 * std::numbers::pi * unit(rng);
        const swarm::BodyVelocity v{speed * std::cos(a), speed * std::sin(a), 6.0 * unit(rng) - 3.0};
        const auto back = swarm::forward_kinematics(swarm::inverse_kinematics(v));
        const double err = std::max({std::abs(back.vx_mm_s - v.vx_mm_s), std::abs(back.vy_mm_s - v.vy_mm_s),
                                     std::abs(back.omega_rad_s - v.omega_rad_s)});
        if (err >= 1e-9) {
            return "kinematics round trip error " + std::to_string(err);
        }
    }
    swarm::Scene scene;
    for (int id = 1; id <= 8; ++id) {
        scene.add_robot(id, swarm::RobotRole::NodeDisplay, {1000.0 * unit(rng), 700.0 * unit(rng)});
    }
    for (int k = 0; k < 3000; ++k) {
        if (k % 5 == 0) {
            for (int id = 1; id <= 8; ++id) {
                scene.set_target(id, {1400.0 * unit(rng) - 200.0, 1100.0 * unit(rng) - 200.0});
            }
        }
        std::vector<swarm::Point> before;
        for (const auto& r : scene.robots()) {
            before.push_back(r.pose.position());
        }
        const double dt = 0.001 + 0.5 * unit(rng);
        scene.tick(dt);
        for (std::size_t i = 0; i < before.size(); ++i) {
            if (swarm::distance(before[i], scene.robots()[i].pose.position()) > 200.0 * dt + 1e-9) {
                return "tick displacement above the speed limit";
            }
        }
    }
    return {};
}

std::string determinism() {
    for (auto engine : {EngineKind::Matrix, EngineKind::MeshLockstep, EngineKind::MeshAsync}) {
        auto c = *builtin_scenario("case2-repaired");
        c.engine = engine;
        c.links.drop = 0.25;
        c.links.latency = {1.0, 30.0};
        c.seed = 1234;
        const auto a = trajectory_csv(run_scenario(c, 60));
        const auto b = trajectory_csv(run_scenario(c, 60));
        if (a != b) {
            return to_string(engine) + " engine output differs between runs";
        }
    }
    return {};
}

} // namespace

int main() {
    const std::vector<Check> checks{
        {"Table I reproduction", table_one},
        {"Case 2 pathology", case_two_pathology},
        {"Case 2 repair", case_two_repair},
        {"Dispatch conservation", dispatch_conservation},
        {"Mesh equivalence", mesh_equivalence},
        {"Fault safety property suite", fault_safety},
        {"SCC oracle equivalence", scc_oracle},
        {"Motion properties", motion},
        {"Determinism", determinism},
    };
    int failed = 0;
    for (const auto& check : checks) {
        std::string reason;
        try {
            reason = check.run();
        } catch (const std::exception& e) {
            reason = std::string("exception: ") + e.what();
        }
        if (reason.empty()) {
            std::cout << "PASS " << check.name << "\n";
        } else {
            std::cout << "FAIL " << check.name << ": " << reason << "\n";
            ++failed;
        }
    }
    return failed == 0 ? 0 : 1;
}
