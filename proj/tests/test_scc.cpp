#include "doctest.h"
#include "support.hpp"

#include "misaka/scc.hpp"
#include "misaka/scenario.hpp"

#include <set>

using namespace misaka;

namespace {

// Checks one report against mutual reachability from the boolean power oracle.
void check_against_oracle(const DirectedGraph& g) {
    const auto reach = testsupport::reachability(g);
    const SccReport r = scc_analyze(g);
    const std::size_t n = g.size();

    REQUIRE(r.component_of.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const bool same = reach[i][j] && reach[j][i];
            REQUIRE((r.component_of[i] == r.component_of[j]) == same);
        }
    }

    std::size_t covered = 0;
    std::size_t last_low = 0;
    for (std::size_t c = 0; c < r.components.size(); ++c) {
        const auto& comp = r.components[c];
        REQUIRE(std::is_sorted(comp.begin(), comp.end()));
        if (c > 0) {
            REQUIRE(comp.front() > last_low);
        }
        last_low = comp.front();
        covered += comp.size();
        for (std::size_t v : comp) {
            REQUIRE(r.component_of[v] == c);
        }
        // closed: nothing in the component reads outside it
        bool closed = true;
        for (std::size_t v : comp) {
            for (std::size_t w = 0; w < n; ++w) {
                if (g.has_edge(v, w) && r.component_of[w] != c) {
                    closed = false;
                }
            }
        }
        const bool reported =
            std::find(r.closed_components.begin(), r.closed_components.end(), c) != r.closed_components.end();
        REQUIRE(reported == closed);
    }
    REQUIRE(covered == n);

    bool all = true;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            all = all && reach[i][j];
        }
    }
    REQUIRE(r.is_strongly_connected == all);
    REQUIRE(r.is_strongly_connected == (r.components.size() == 1));
    if (all) {
        REQUIRE(r.isolated_sources.empty());
    }
}

std::pair<std::size_t, std::size_t> source_sink_counts(const SccReport& r) {
    const std::size_t k = r.components.size();
    std::vector<bool> has_in(k), has_out(k);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t d : r.condensation[c]) {
            has_out[c] = true;
            has_in[d] = true;
        }
    }
    std::size_t sources = 0, sinks = 0;
    for (std::size_t c = 0; c < k; ++c) {
        sources += has_in[c] ? 0 : 1;
        sinks += has_out[c] ? 0 : 1;
    }
    return {sources, sinks};
}

} // namespace

TEST_CASE("exhaustive small graphs match the reachability oracle") {
    std::size_t checked = 0;
    for (std::size_t n = 1; n <= 4; ++n) {
        const std::uint64_t total = std::uint64_t{1} << (n * n);
        for (std::uint64_t mask = 0; mask < total; ++mask) {
            std::vector<std::vector<int>> rows(n, std::vector<int>(n));
            bool zero_row = false;
            for (std::size_t i = 0; i < n; ++i) {
                bool any = false;
                for (std::size_t j = 0; j < n; ++j) {
                    rows[i][j] = (mask >> (i * n + j)) & 1;
                    any = any || rows[i][j];
                }
                zero_row = zero_row || !any;
            }
            if (zero_row) {
                continue;
            }
            check_against_oracle(DirectedGraph::from_adjacency(rows));
            ++checked;
        }
    }
    // 1 + 9 + 343 + 50625 graphs without an empty row
    CHECK(checked == 1 + 9 + 343 + 50625);
}

TEST_CASE("random graphs with 5 to 8 nodes match the reachability oracle") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 5 + trial % 4;
        const double p = 0.05 + 0.3 * ((trial / 4) % 5) / 4.0;
        check_against_oracle(testsupport::random_graph(rng, n, p, trial % 3 == 0));
    }
}

TEST_CASE("the ten-node example has the closed component {9}") {
    const auto r = scc_analyze(builtin_scenario("case2")->graph);
    CHECK_FALSE(r.is_strongly_connected);
    REQUIRE(r.closed_components.size() == 1);
    CHECK(r.components[r.closed_components[0]] == std::vector<std::size_t>{8});
    CHECK(r.isolated_sources == std::vector<std::size_t>{8});

    const auto repair = suggest_repair(builtin_scenario("case2")->graph, r);
    REQUIRE(repair.size() == 1);
    CHECK(repair[0] == Edge{8, 0});

    const auto fixed = scc_analyze(builtin_scenario("case2-repaired")->graph);
    CHECK(fixed.is_strongly_connected);
    CHECK(suggest_repair(builtin_scenario("case2-repaired")->graph, fixed).empty());
    CHECK(scc_analyze(builtin_scenario("case1")->graph).is_strongly_connected);
}

TEST_CASE("single self-looped node is strongly connected and needs no repair") {
    const auto g = DirectedGraph::from_adjacency({{1}});
    const auto r = scc_analyze(g);
    CHECK(r.is_strongly_connected);
    CHECK(suggest_repair(g, r).empty());
}

TEST_CASE("repairs are minimal and make random graphs strongly connected") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + trial % 8;
        const auto g = testsupport::random_graph(rng, n, 0.1 + 0.05 * (trial % 5), trial % 2 == 0);
        const auto r = scc_analyze(g);
        const auto repair = suggest_repair(g, r);
        const auto [sources, sinks] = source_sink_counts(r);
        if (r.is_strongly_connected) {
            CHECK(repair.empty());
            continue;
        }
        // max(sources, sinks) is a lower bound on any augmentation
        CHECK(repair.size() == std::max(sources, sinks));
        CHECK(scc_analyze(g.with_edges(repair)).is_strongly_connected);
        for (const Edge& e : repair) {
            CHECK_FALSE(g.has_edge(e.from, e.to));
        }
    }
}

TEST_CASE("two disjoint 2-cycles need exactly two edges") {
    const auto g = DirectedGraph::from_adjacency({{0, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, 1, 0}});
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            if (!g.has_edge(i, j)) {
                CHECK_FALSE(scc_analyze(g.with_edge({i, j}, true)).is_strongly_connected);
            }
        }
    }
    const auto repair = suggest_repair(g, scc_analyze(g));
    CHECK(repair.size() == 2);
    CHECK(scc_analyze(g.with_edges(repair)).is_strongly_connected);
}
