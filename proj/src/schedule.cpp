#include "flowsched/schedule.hpp"

#include <algorithm>
#include <fstream>
#include <queue>

#include <json.hpp>

namespace flowsched {

using nlohmann::json;

ScheduleState initial_state(const ComputationGraph& g, int device_count) {
    if (device_count < 1)
        throw std::invalid_argument("initial_state: device_count must be >= 1");
    ScheduleState s;
    s.graph = &g;
    s.adj = std::make_shared<Adjacency>(g);
    s.device_count = device_count;
    s.chains.assign(device_count, {});
    s.placed_device.assign(g.node_count, -1);
    s.unplaced_pred_count.assign(g.node_count, 0);
    for (const auto& [a, b] : g.edges) {
        (void)a;
        ++s.unplaced_pred_count[b];
    }
    s.step = 0;
    return s;
}

std::vector<char> ready_ops(const ScheduleState& s) {
    std::vector<char> ready(s.graph->node_count, 0);
    for (int op = 0; op < s.graph->node_count; ++op)
        ready[op] = !s.placed(op) && s.unplaced_pred_count[op] == 0;
    return ready;
}

std::vector<Action> valid_actions(const ScheduleState& s) {
    std::vector<Action> out;
    for (int op = 0; op < s.graph->node_count; ++op) {
        if (s.placed(op) || s.unplaced_pred_count[op] != 0) continue;
        for (int d = 0; d < s.device_count; ++d) out.push_back({op, d});
    }
    return out;
}

ScheduleState apply_action(const ScheduleState& s, const Action& a) {
    if (a.op < 0 || a.op >= s.graph->node_count || a.device < 0 || a.device >= s.device_count)
        throw std::logic_error("apply_action: op or device index out of range");
    if (s.placed(a.op))
        throw std::logic_error("apply_action: op " + std::to_string(a.op) +
                               " is already placed");
    if (s.unplaced_pred_count[a.op] != 0)
        throw std::logic_error("apply_action: op " + std::to_string(a.op) +
                               " has an unplaced predecessor");
    ScheduleState next = s;
    next.chains[a.device].push_back(a.op);
    next.placed_device[a.op] = a.device;
    for (int succ : s.adj->succ[a.op]) --next.unplaced_pred_count[succ];
    ++next.step;
    return next;
}

std::vector<int> backward_actions(const ScheduleState& s) {
    std::vector<int> out;
    for (const auto& chain : s.chains) {
        if (chain.empty()) continue;
        int op = chain.back();
        bool blocked = false;
        for (int succ : s.adj->succ[op])
            if (s.placed(succ)) {
                blocked = true;
                break;
            }
        if (!blocked) out.push_back(op);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::pair<int, int>> chain_edges(const ScheduleState& s) {
    std::vector<std::pair<int, int>> out;
    for (const auto& chain : s.chains)
        for (std::size_t i = 1; i < chain.size(); ++i)
            out.emplace_back(chain[i - 1], chain[i]);
    return out;
}

ScheduleState state_from_chains(const ComputationGraph& g, int device_count,
                                const std::vector<std::vector<int>>& chains) {
    if (device_count < 1)
        throw std::invalid_argument("state_from_chains: device_count must be >= 1");
    if (static_cast<int>(chains.size()) != device_count)
        throw validation_error("state_from_chains: chain count does not match device_count");

    ScheduleState s = initial_state(g, device_count);
    int placed_total = 0;
    for (int d = 0; d < device_count; ++d) {
        for (int op : chains[d]) {
            if (op < 0 || op >= g.node_count)
                throw validation_error("state_from_chains: op index out of range");
            if (s.placed(op))
                throw validation_error("state_from_chains: op " + std::to_string(op) +
                                       " appears twice");
            s.placed_device[op] = d;
            ++placed_total;
        }
        s.chains[d] = chains[d];
    }
    s.step = placed_total;

    // Precedence closure: every placed op's predecessors are placed too.
    for (int op = 0; op < g.node_count; ++op) {
        int missing = 0;
        for (int p : s.adj->pred[op])
            if (!s.placed(p)) ++missing;
        s.unplaced_pred_count[op] = missing;
        if (s.placed(op) && missing > 0)
            throw validation_error("state_from_chains: op " + std::to_string(op) +
                                   " placed before a predecessor");
    }

    // The union of precedence and chain edges over placed ops must be a DAG,
    // otherwise no forward trajectory can produce these chains.
    std::vector<std::vector<int>> succ(g.node_count);
    std::vector<int> indeg(g.node_count, 0);
    auto add_edge = [&](int a, int b) {
        succ[a].push_back(b);
        ++indeg[b];
    };
    for (const auto& [a, b] : g.edges)
        if (s.placed(a) && s.placed(b)) add_edge(a, b);
    for (const auto& [a, b] : chain_edges(s)) add_edge(a, b);
    std::queue<int> q;
    for (int i = 0; i < g.node_count; ++i)
        if (s.placed(i) && indeg[i] == 0) q.push(i);
    int seen = 0;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        ++seen;
        for (int v : succ[u])
            if (--indeg[v] == 0) q.push(v);
    }
    if (seen != placed_total)
        throw validation_error("state_from_chains: chain order conflicts with precedence");
    return s;
}

void save_schedule(const ScheduleState& s, const std::filesystem::path& path) {
    json j;
    j["m"] = s.device_count;
    j["chains"] = s.chains;
    std::ofstream out(path);
    if (!out) throw format_error("save_schedule: cannot open " + path.string());
    out << j.dump(2) << '\n';
}

ScheduleState load_schedule(const ComputationGraph& g, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw format_error("load_schedule: cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw format_error("load_schedule: " + path.string() + ": " + e.what());
    }
    if (!j.contains("m") || !j.contains("chains"))
        throw format_error("load_schedule: " + path.string() + ": missing 'm' or 'chains'");
    return state_from_chains(g, j["m"].get<int>(),
                             j["chains"].get<std::vector<std::vector<int>>>());
}

}  // namespace flowsched
