#include "flowsched/graph_io.hpp"

#include <fstream>

#include <json.hpp>

namespace flowsched {

using nlohmann::json;

ComputationGraph load_graph(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw format_error("load_graph: cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw format_error("load_graph: " + path.string() + ": " + e.what());
    }

    ComputationGraph g;
    if (!j.contains("nodes") || !j["nodes"].is_array())
        throw format_error("load_graph: " + path.string() + ": missing 'nodes' array");
    if (!j.contains("edges") || !j["edges"].is_array())
        throw format_error("load_graph: " + path.string() + ": missing 'edges' array");

    const auto& nodes = j["nodes"];
    g.node_count = static_cast<int>(nodes.size());
    g.runtimes.reserve(nodes.size());
    g.node_ids.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& nd = nodes[i];
        if (!nd.is_object() || !nd.contains("runtime") || !nd["runtime"].is_number())
            throw format_error("load_graph: " + path.string() + ": node " + std::to_string(i) +
                               " lacks numeric 'runtime'");
        g.runtimes.push_back(nd["runtime"].get<double>());
        g.node_ids.push_back(nd.value("id", std::to_string(i)));
    }
    for (std::size_t i = 0; i < j["edges"].size(); ++i) {
        const auto& e = j["edges"][i];
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
            !e[1].is_number_integer())
            throw format_error("load_graph: " + path.string() + ": edge " + std::to_string(i) +
                               " is not a [src, dst] pair");
        g.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }

    g.validate();  // cycles, ranges, runtime positivity
    return g;
}

void save_graph(const ComputationGraph& g, const std::filesystem::path& path) {
    json nodes = json::array();
    for (int i = 0; i < g.node_count; ++i) {
        json nd;
        nd["id"] = g.node_ids.empty() ? std::to_string(i) : g.node_ids[i];
        nd["runtime"] = g.runtimes[i];
        nodes.push_back(std::move(nd));
    }
    json edges = json::array();
    for (const auto& [a, b] : g.edges) edges.push_back(json::array({a, b}));
    json j;
    j["nodes"] = std::move(nodes);
    j["edges"] = std::move(edges);

    std::ofstream out(path);
    if (!out) throw format_error("save_graph: cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

}  // namespace flowsched
