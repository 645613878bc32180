#include "misaka/serialization.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace misaka {
namespace {

std::size_t label_to_index(const json& value, std::size_t n, const char* what) {
    if (!value.is_number_integer()) {
        throw FormatError(std::string(what) + " must be an integer node label");
    }
    const auto label = value.get<long long>();
    if (label < 1 || static_cast<std::size_t>(label) > n) {
        throw FormatError(std::string(what) + " label " + std::to_string(label) + " outside 1.." +
                          std::to_string(n));
    }
    return static_cast<std::size_t>(label - 1);
}

mesh::LatencyRange latency_from_json(const json& j) {
    if (j.is_number()) {
        const double v = j.get<double>();
        return {v, v};
    }
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
        return {j[0].get<double>(), j[1].get<double>()};
    }
    throw FormatError("latency_ms must be a number or a [lo, hi] pair");
}

json latency_to_json(const mesh::LatencyRange& l) {
    if (l.fixed()) {
        return l.lo_ms;
    }
    return json::array({l.lo_ms, l.hi_ms});
}

swarm::AxisCalibration axis_from_json(const json& j, swarm::AxisCalibration fallback) {
    if (!j.is_object()) {
        throw FormatError("axis calibration must be an object");
    }
    fallback.value_min = j.value("value_min", fallback.value_min);
    fallback.value_max = j.value("value_max", fallback.value_max);
    fallback.mm_min = j.value("mm_min", fallback.mm_min);
    fallback.mm_max = j.value("mm_max", fallback.mm_max);
    return fallback;
}

json axis_to_json(const swarm::AxisCalibration& a) {
    return {{"value_min", a.value_min}, {"value_max", a.value_max}, {"mm_min", a.mm_min}, {"mm_max", a.mm_max}};
}

} // namespace

json graph_to_json(const DirectedGraph& g) {
    json edges = json::array();
    for (const Edge& e : g.edges()) {
        edges.push_back(json::array({e.from + 1, e.to + 1}));
    }
    return {{"n", g.size()}, {"edges", std::move(edges)}};
}

DirectedGraph graph_from_json(const json& j) {
    if (!j.is_object() || !j.contains("n") || !j["n"].is_number_integer()) {
        throw FormatError("graph JSON needs an integer 'n'");
    }
    const auto n_signed = j["n"].get<long long>();
    if (n_signed < 1) {
        throw FormatError("graph JSON needs n >= 1");
    }
    const auto n = static_cast<std::size_t>(n_signed);
    std::vector<Edge> edges;
    for (const json& pair : j.value("edges", json::array())) {
        if (!pair.is_array() || pair.size() != 2) {
            throw FormatError("each edge must be a [from, to] pair");
        }
        edges.push_back({label_to_index(pair[0], n, "edge 'from'"), label_to_index(pair[1], n, "edge 'to'")});
    }
    return DirectedGraph::from_edges(n, edges);
}

void write_adjacency_csv(std::ostream& out, const DirectedGraph& g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto row = g.row(i);
        for (std::size_t j = 0; j < g.size(); ++j) {
            out << (j ? "," : "") << static_cast<int>(row[j]);
        }
        out << '\n';
    }
}

DirectedGraph read_adjacency_csv(std::istream& in) {
    std::vector<std::vector<int>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<int> row;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            if (field == "0" || field == "1") {
                row.push_back(field[0] - '0');
            } else {
                throw FormatError("adjacency CSV row " + std::to_string(rows.size() + 1) + ": '" + field +
                                  "' is not 0 or 1");
            }
        }
        rows.push_back(std::move(row));
    }
    return DirectedGraph::from_adjacency(rows);
}

json link_model_to_json(const mesh::LinkModel& links) {
    json overrides = json::array();
    for (const auto& o : links.overrides) {
        json entry{{"from", o.from + 1}, {"to", o.to + 1}};
        if (o.drop) {
            entry["drop"] = *o.drop;
        }
        if (o.latency) {
            entry["latency_ms"] = latency_to_json(*o.latency);
        }
        overrides.push_back(std::move(entry));
    }
    return {{"latency_ms", latency_to_json(links.latency)}, {"drop", links.drop}, {"overrides", overrides}};
}

mesh::LinkModel link_model_from_json(const json& j) {
    if (!j.is_object()) {
        throw FormatError("link model must be a JSON object");
    }
    mesh::LinkModel links;
    if (j.contains("latency_ms")) {
        links.latency = latency_from_json(j["latency_ms"]);
    }
    links.drop = j.value("drop", 0.0);
    for (const json& o : j.value("overrides", json::array())) {
        mesh::LinkOverride entry;
        const auto from = o.at("from").get<long long>();
        const auto to = o.at("to").get<long long>();
        if (from < 1 || to < 1) {
            throw FormatError("override labels are 1-based");
        }
        entry.from = static_cast<std::size_t>(from - 1);
        entry.to = static_cast<std::size_t>(to - 1);
        if (o.contains("drop")) {
            entry.drop = o["drop"].get<double>();
        }
        if (o.contains("latency_ms")) {
            entry.latency = latency_from_json(o["latency_ms"]);
        }
        links.overrides.push_back(entry);
    }
    try {
        links.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    return links;
}

json layout_to_json(const swarm::Layout& layout) {
    return {{"kind", swarm::to_string(layout.kind)},
            {"surface", {{"width_mm", layout.surface.width_mm}, {"height_mm", layout.surface.height_mm}}},
            {"x_axis", axis_to_json(layout.x_axis)},
            {"y_axis", axis_to_json(layout.y_axis)},
            {"color_range", json::array({layout.color_min, layout.color_max})}};
}

swarm::Layout layout_from_json(const json& j) {
    if (!j.is_object()) {
        throw FormatError("layout must be a JSON object");
    }
    swarm::Layout layout = swarm::default_layout(swarm::parse_layout_kind(j.value("kind", std::string("iteration"))));
    if (j.contains("surface")) {
        layout.surface.width_mm = j["surface"].value("width_mm", layout.surface.width_mm);
        layout.surface.height_mm = j["surface"].value("height_mm", layout.surface.height_mm);
    }
    if (j.contains("x_axis")) {
        layout.x_axis = axis_from_json(j["x_axis"], layout.x_axis);
    }
    if (j.contains("y_axis")) {
        layout.y_axis = axis_from_json(j["y_axis"], layout.y_axis);
    }
    if (j.contains("color_range")) {
        const json& c = j["color_range"];
        if (!c.is_array() || c.size() != 2) {
            throw FormatError("color_range must be [lo, hi]");
        }
        layout.color_min = c[0].get<double>();
        layout.color_max = c[1].get<double>();
    }
    layout.validate();
    return layout;
}

} // namespace misaka
