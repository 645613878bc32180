#include "misaka/scc.hpp"
#include "misaka/scenario.hpp"
#include "misaka/server.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

using namespace misaka;

namespace {

constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kUsage = 2;

std::atomic<bool> g_interrupted{false};

std::vector<std::string> search_dirs() {
    std::vector<std::string> dirs;
    if (const char* env = std::getenv("MISAKA_SCENARIO_DIR"); env != nullptr && *env != '\0') {
        dirs.emplace_back(env);
    }
    return dirs;
}

std::string format_values(const StateVector& v) {
    std::ostringstream out;
    out.precision(10);
    out << '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        out << (i ? ", " : "") << v[i];
    }
    out << ']';
    return out.str();
}

std::string label_set(const std::vector<std::size_t>& nodes) {
    std::string s = "{";
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        s += (i ? "," : "") + std::to_string(nodes[i] + 1);
    }
    return s + "}";
}

void write_svg(std::ostream& out, const Trajectory& t) {
    const double w = 640, h = 400, pad = 40;
    double lo = t.states.front().front(), hi = lo;
    for (const auto& s : t.states) {
        for (double v : s) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi - lo < 1e-12) {
        hi = lo + 1.0;
    }
    const double k = std::max<double>(1.0, static_cast<double>(t.states.size() - 1));
    auto px = [&](std::size_t i) { return pad + (w - 2 * pad) * static_cast<double>(i) / k; };
    auto py = [&](double v) { return h - pad - (h - 2 * pad) * (v - lo) / (hi - lo); };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\"" << h - pad
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << h - pad
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << w / 2 << "\" y=\"" << h - 8 << "\" font-size=\"12\">iteration</text>\n";
    out << "<text x=\"4\" y=\"" << pad - 8 << "\" font-size=\"12\">" << hi << "</text>\n";
    out << "<text x=\"4\" y=\"" << h - pad + 14 << "\" font-size=\"12\">" << lo << "</text>\n";
    const auto& palette = swarm::categorical_palette();
    const std::size_t n = t.states.front().size();
    for (std::size_t j = 0; j < n; ++j) {
        const swarm::Rgb c = palette[j % palette.size()];
        out << "<polyline fill=\"none\" stroke=\"rgb(" << int(c.r) << ',' << int(c.g) << ',' << int(c.b)
            << ")\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < t.states.size(); ++i) {
            out << (i ? " " : "") << px(i) << ',' << py(t.states[i][j]);
        }
        out << "\"/>\n";
    }
    out << "</svg>\n";
}

struct RunArgs {
    std::string scenario;
    std::optional<std::size_t> iterations;
    bool until_converged = false;
    std::string engine;
    std::optional<std::uint64_t> seed;
    std::string mode;
    std::string out;
    std::string plot;
};

ScenarioConfig load(const std::string& name, const std::string& engine, const std::optional<std::uint64_t>& seed,
                    const std::string& mode) {
    ScenarioConfig c = resolve_scenario(name, search_dirs());
    if (!engine.empty()) {
        c.engine = parse_engine_kind(engine);
    }
    if (seed) {
        c.seed = *seed;
    }
    if (!mode.empty()) {
        c.mode = parse_stochastic_mode(mode);
    }
    return c;
}

int cmd_run(const RunArgs& a) {
    const ScenarioConfig config = load(a.scenario, a.engine, a.seed, a.mode);
    const Trajectory t = run_scenario(config, a.until_converged ? std::nullopt : a.iterations);

    std::ostream* report = &std::cout;
    if (a.out.empty() || a.out == "-") {
        write_trajectory_csv(std::cout, t);
        report = &std::cerr;
    } else {
        std::ofstream f(a.out, std::ios::binary);
        if (!f) {
            std::cerr << "error: cannot write " << a.out << "\n";
            return kUsage;
        }
        write_trajectory_csv(f, t);
        if (!f.flush()) {
            std::cerr << "error: cannot write " << a.out << "\n";
            return kUsage;
        }
    }
    if (!a.plot.empty()) {
        std::ofstream f(a.plot);
        if (!f) {
            std::cerr << "error: cannot write " << a.plot << "\n";
            return kUsage;
        }
        write_svg(f, t);
    }
    *report << "scenario " << config.name << ": " << t.iterations_run << " iterations, engine "
            << to_string(config.engine) << ", " << to_string(config.mode) << " stochastic\n";
    *report << "final " << format_values(t.final_state()) << "\n";
    *report << "spread " << spread(t.final_state()) << "\n";
    *report << (t.converged ? "converged" : "not converged") << " (tolerance " << config.convergence.tolerance
            << ")\n";
    return kOk;
}

int cmd_verify(const std::string& scenario, const std::string& golden_path, double tol, const std::string& engine,
               const std::optional<std::uint64_t>& seed) {
    const ScenarioConfig config = load(scenario, engine, seed, "");
    std::ifstream in(golden_path);
    if (!in) {
        std::cerr << "error: cannot read " << golden_path << "\n";
        return kUsage;
    }
    const std::vector<StateVector> golden = read_trajectory_csv(in);
    if (golden.empty()) {
        std::cerr << "error: " << golden_path << " has no data rows\n";
        return kUsage;
    }
    const std::size_t n = config.graph.size();
    if (golden.front().size() != n) {
        std::cout << "FAIL shape: golden has " << golden.front().size() << " node columns, scenario has " << n
                  << " nodes\n";
        return kVerifyFailed;
    }
    const Trajectory t = run_scenario(config, golden.size() - 1);
    std::size_t failures = 0;
    double worst = 0.0;
    for (std::size_t r = 0; r < golden.size(); ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const double d = std::abs(t.states[r][c] - golden[r][c]);
            worst = std::max(worst, d);
            if (!(d <= tol)) {
                if (failures < 20) {
                    std::cout << "mismatch at iteration " << r << ", node " << c + 1 << ": expected "
                              << golden[r][c] << ", got " << t.states[r][c] << " (|diff| " << d << ")\n";
                }
                ++failures;
            }
        }
    }
    if (failures > 0) {
        std::cout << "FAIL " << failures << " of " << golden.size() * n << " values outside tolerance " << tol
                  << "\n";
        return kVerifyFailed;
    }
    std::cout << "PASS " << golden.size() * n << " values within " << tol << " (max |diff| " << worst << ")\n";
    return kOk;
}

int cmd_analyze(const std::string& scenario) {
    const ScenarioConfig config = resolve_scenario(scenario, search_dirs());
    const SccReport r = scc_analyze(config.graph);
    std::cout << "scenario " << config.name << ": " << config.graph.size() << " nodes, " << config.graph.edges().size()
              << " edges\n";
    std::cout << "strongly connected: " << (r.is_strongly_connected ? "yes" : "no") << "\n";
    std::cout << "components: " << r.components.size() << "\n";
    for (std::size_t c = 0; c < r.components.size(); ++c) {
        std::cout << "  " << label_set(r.components[c]);
        const bool closed = std::find(r.closed_components.begin(), r.closed_components.end(), c) !=
                            r.closed_components.end();
        std::cout << (closed ? " closed" : "") << "\n";
    }
    std::cout << "closed components:";
    for (std::size_t c : r.closed_components) {
        std::cout << ' ' << label_set(r.components[c]);
    }
    std::cout << "\n";
    const auto repair = suggest_repair(config.graph, r);
    if (repair.empty()) {
        std::cout << "suggested repair: none\n";
    } else {
        std::cout << "suggested repair (node reads node):";
        for (const Edge& e : repair) {
            std::cout << ' ' << e.from + 1 << "->" << e.to + 1;
        }
        std::cout << "\n";
    }
    return kOk;
}

int cmd_serve(unsigned short port, const std::string& host, const std::string& scenario, double interval_s,
              int tick_ms, double duration_s) {
    session::SessionOptions options;
    options.iteration_interval_s = interval_s;
    session::Session s = scenario.empty()
                             ? session::Session(options)
                             : session::Session(resolve_scenario(scenario, search_dirs()), options);
    session::SessionService service(std::move(s));
    std::unique_ptr<session::FrameServer> server;
    try {
        server = std::make_unique<session::FrameServer>(service, port, host);
    } catch (const std::system_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    std::signal(SIGINT, [](int) { g_interrupted.store(true); });
    std::signal(SIGTERM, [](int) { g_interrupted.store(true); });
    std::cout << "listening on tcp://" << host << ":" << server->port() << " (newline-delimited JSON)" << std::endl;
    service.start(std::chrono::milliseconds(tick_ms));
    const auto start = std::chrono::steady_clock::now();
    while (!g_interrupted.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        if (duration_s > 0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >= duration_s) {
            break;
        }
    }
    server->stop();
    service.stop();
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Consensus testbed: run, verify and analyze scenarios, or serve a live session"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Iterate a scenario and write its trajectory CSV");
    run_cmd->add_option("--scenario", run.scenario, "Built-in name or scenario JSON path")->required();
    auto* iters = run_cmd->add_option("--iterations", run.iterations, "Exact number of iterations");
    auto* until = run_cmd->add_flag("--until-converged", run.until_converged, "Iterate until converged");
    iters->excludes(until);
    run_cmd->add_option("--engine", run.engine, "matrix, lockstep or async")
        ->check(CLI::IsMember({"matrix", "lockstep", "async"}));
    run_cmd->add_option("--seed", run.seed, "Random seed for mesh engines");
    run_cmd->add_option("--mode", run.mode, "row, column or doubly")
        ->check(CLI::IsMember({"row", "column", "doubly", "metropolis"}));
    run_cmd->add_option("--out", run.out, "Output CSV path (default stdout)");
    run_cmd->add_option("--plot", run.plot, "Also write an SVG line chart");

    std::string v_scenario, v_golden, v_engine;
    std::optional<std::uint64_t> v_seed;
    double v_tol = 5e-7;
    auto* verify_cmd = app.add_subcommand("verify", "Re-run a scenario and compare against a golden CSV");
    verify_cmd->add_option("--scenario", v_scenario)->required();
    verify_cmd->add_option("--golden", v_golden)->required();
    verify_cmd->add_option("--tol", v_tol, "Absolute tolerance per value")->check(CLI::NonNegativeNumber);
    verify_cmd->add_option("--engine", v_engine)->check(CLI::IsMember({"matrix", "lockstep", "async"}));
    verify_cmd->add_option("--seed", v_seed);

    std::string a_scenario;
    auto* analyze_cmd = app.add_subcommand("analyze", "Report strong connectivity and repair edges");
    analyze_cmd->add_option("--scenario", a_scenario)->required();

    unsigned short s_port = 8080;
    std::string s_host = "127.0.0.1";
    std::string s_scenario;
    double s_interval = 1.0;
    int s_tick_ms = 50;
    double s_duration = 0.0;
    auto* serve_cmd = app.add_subcommand("serve", "Serve a live session over TCP");
    serve_cmd->add_option("--port", s_port, "TCP port (0 picks a free one)");
    serve_cmd->add_option("--host", s_host, "Listen address");
    serve_cmd->add_option("--scenario", s_scenario, "Scenario to load; empty session when omitted");
    serve_cmd->add_option("--interval", s_interval, "Seconds between iterations while running")
        ->check(CLI::NonNegativeNumber);
    serve_cmd->add_option("--tick-ms", s_tick_ms, "Simulation tick in milliseconds")->check(CLI::Range(1, 10000));
    serve_cmd->add_option("--duration", s_duration, "Exit after this many seconds (0 runs until interrupted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*run_cmd) {
            if (!run.iterations && !run.until_converged) {
                run.until_converged = true;
            }
            return cmd_run(run);
        }
        if (*verify_cmd) {
            return cmd_verify(v_scenario, v_golden, v_tol, v_engine, v_seed);
        }
        if (*analyze_cmd) {
            return cmd_analyze(a_scenario);
        }
        if (*serve_cmd) {
            return cmd_serve(s_port, s_host, s_scenario, s_interval, s_tick_ms, s_duration);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
