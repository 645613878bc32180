#pragma once

// JSON and CSV formats shared by the CLI, the session service and the wire
// protocol. External node labels are 1-based; everything in memory is 0-based.

#include "misaka/graph.hpp"
#include "misaka/mesh.hpp"
#include "misaka/swarm.hpp"

#include "json.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>

namespace misaka {

using json = nlohmann::json;

class FormatError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// { "n": int, "edges": [[from, to], ...] }
json graph_to_json(const DirectedGraph& g);
DirectedGraph graph_from_json(const json& j);

// n rows of comma-separated 0/1.
void write_adjacency_csv(std::ostream& out, const DirectedGraph& g);
DirectedGraph read_adjacency_csv(std::istream& in);

// { "latency_ms": x | [lo, hi], "drop": p, "overrides": [{"from": i, "to": j, "drop": p}] }
json link_model_to_json(const mesh::LinkModel& links);
mesh::LinkModel link_model_from_json(const json& j);

// Missing keys fall back to default_layout(kind).
json layout_to_json(const swarm::Layout& layout);
swarm::Layout layout_from_json(const json& j);

} // namespace misaka
