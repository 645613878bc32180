#include "misaka/scc.hpp"

#include <algorithm>
#include <limits>
#include <utility>

namespace misaka {
namespace {

constexpr std::size_t kUnvisited = std::numeric_limits<std::size_t>::max();

std::vector<std::vector<std::size_t>> tarjan(const std::vector<std::vector<std::size_t>>& successors) {
    const std::size_t n = successors.size();
    std::vector<std::size_t> index(n, kUnvisited);
    std::vector<std::size_t> lowlink(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> components;
    std::size_t counter = 0;

    // (vertex, next successor position)
    std::vector<std::pair<std::size_t, std::size_t>> call_stack;
    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != kUnvisited) {
            continue;
        }
        call_stack.emplace_back(root, 0);
        index[root] = lowlink[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;

        while (!call_stack.empty()) {
            auto& [v, pos] = call_stack.back();
            if (pos < successors[v].size()) {
                const std::size_t w = successors[v][pos++];
                if (index[w] == kUnvisited) {
                    index[w] = lowlink[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    call_stack.emplace_back(w, 0);
                } else if (on_stack[w]) {
                    lowlink[v] = std::min(lowlink[v], index[w]);
                }
                continue;
            }
            const std::size_t done = v;
            call_stack.pop_back();
            if (!call_stack.empty()) {
                const std::size_t parent = call_stack.back().first;
                lowlink[parent] = std::min(lowlink[parent], lowlink[done]);
            }
            if (lowlink[done] == index[done]) {
                std::vector<std::size_t> component;
                std::size_t w = kUnvisited;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    component.push_back(w);
                } while (w != done);
                components.push_back(std::move(component));
            }
        }
    }
    return components;
}

// Eswaran-Tarjan augmentation of a DAG given by `out`, assuming #sources <= #sinks.
std::vector<std::pair<std::size_t, std::size_t>> augment_dag(const std::vector<std::vector<std::size_t>>& out,
                                                            const std::vector<std::size_t>& sources,
                                                            const std::vector<std::size_t>& sinks) {
    const std::size_t m = out.size();
    std::vector<bool> marked(m, false);
    std::vector<std::size_t> matched_sources;
    std::vector<std::size_t> matched_sinks;

    // Depth-first, marking on visit: every marked node then reaches a matched sink,
    // and every unmatched sink is reachable from a matched source.
    for (std::size_t source : sources) {
        if (marked[source]) {
            continue;
        }
        std::vector<std::pair<std::size_t, std::size_t>> stack{{source, 0}};
        marked[source] = true;
        std::size_t found = kUnvisited;
        while (!stack.empty()) {
            auto& [v, next] = stack.back();
            if (out[v].empty()) {
                found = v;
                break;
            }
            if (next == out[v].size()) {
                stack.pop_back();
                continue;
            }
            const std::size_t w = out[v][next++];
            if (!marked[w]) {
                marked[w] = true;
                stack.emplace_back(w, 0);
            }
        }
        if (found != kUnvisited) {
            matched_sources.push_back(source);
            matched_sinks.push_back(found);
        }
    }

    auto ordered = [](const std::vector<std::size_t>& all, const std::vector<std::size_t>& first) {
        std::vector<std::size_t> result = first;
        for (std::size_t c : all) {
            if (std::find(first.begin(), first.end(), c) == first.end()) {
                result.push_back(c);
            }
        }
        return result;
    };
    const auto v = ordered(sources, matched_sources);
    const auto w = ordered(sinks, matched_sinks);
    const std::size_t p = matched_sources.size();
    const std::size_t s = v.size();
    const std::size_t t = w.size();

    std::vector<std::pair<std::size_t, std::size_t>> added;
    for (std::size_t i = 0; i + 1 < p; ++i) {
        added.emplace_back(w[i], v[i + 1]);
    }
    for (std::size_t i = p; i < s; ++i) {
        added.emplace_back(w[i], v[i]);
    }
    if (s == t) {
        added.emplace_back(w[p - 1], v[0]);
    } else {
        added.emplace_back(w[p - 1], w[s]);
        for (std::size_t i = s; i + 1 < t; ++i) {
            added.emplace_back(w[i], w[i + 1]);
        }
        added.emplace_back(w[t - 1], v[0]);
    }
    return added;
}

} // namespace

SccReport scc_analyze(const DirectedGraph& g) {
    const std::size_t n = g.size();
    std::vector<std::vector<std::size_t>> successors(n);
    for (std::size_t i = 0; i < n; ++i) {
        successors[i] = g.reads(i);
    }

    auto components = tarjan(successors);
    for (auto& c : components) {
        std::sort(c.begin(), c.end());
    }
    std::sort(components.begin(), components.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });

    SccReport report;
    report.component_of.assign(n, 0);
    for (std::size_t c = 0; c < components.size(); ++c) {
        for (std::size_t v : components[c]) {
            report.component_of[v] = c;
        }
    }
    report.condensation.assign(components.size(), {});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j : successors[i]) {
            const std::size_t from = report.component_of[i];
            const std::size_t to = report.component_of[j];
            if (from != to) {
                report.condensation[from].push_back(to);
            }
        }
    }
    for (std::size_t c = 0; c < components.size(); ++c) {
        auto& out = report.condensation[c];
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        if (out.empty()) {
            report.closed_components.push_back(c);
        }
    }
    report.is_strongly_connected = components.size() == 1;
    if (!report.is_strongly_connected) {
        for (std::size_t c : report.closed_components) {
            report.isolated_sources.insert(report.isolated_sources.end(), components[c].begin(),
                                           components[c].end());
        }
        std::sort(report.isolated_sources.begin(), report.isolated_sources.end());
    }
    report.components = std::move(components);
    return report;
}

std::vector<Edge> suggest_repair(const DirectedGraph& g, const SccReport& report) {
    if (report.component_of.size() != g.size()) {
        throw GraphError("SCC report does not match the graph");
    }
    const std::size_t m = report.components.size();
    if (m <= 1) {
        return {};
    }

    std::vector<std::vector<std::size_t>> out = report.condensation;
    std::vector<std::vector<std::size_t>> in(m);
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t d : out[c]) {
            in[d].push_back(c);
        }
    }
    std::vector<std::size_t> sources;
    std::vector<std::size_t> sinks;
    for (std::size_t c = 0; c < m; ++c) {
        if (in[c].empty()) {
            sources.push_back(c);
        }
        if (out[c].empty()) {
            sinks.push_back(c);
        }
    }

    std::vector<std::pair<std::size_t, std::size_t>> added;
    if (sources.size() <= sinks.size()) {
        added = augment_dag(out, sources, sinks);
    } else {
        // Reverse the DAG so sources and sinks swap roles, then flip the result back.
        added = augment_dag(in, sinks, sources);
        for (auto& [a, b] : added) {
            std::swap(a, b);
        }
    }

    std::vector<Edge> edges;
    edges.reserve(added.size());
    for (const auto& [a, b] : added) {
        edges.push_back({report.components[a].front(), report.components[b].front()});
    }
    return edges;
}

} // namespace misaka
