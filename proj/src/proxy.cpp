#include "flowsched/proxy.hpp"

#include <algorithm>
#include <limits>
#include <queue>

namespace flowsched {

ProxyEvaluation proxy_evaluate(const ScheduleState& s) {
    const ComputationGraph& g = *s.graph;
    ProxyEvaluation ev;
    ev.start_times.assign(g.node_count, -1.0);
    if (s.step == 0) return ev;

    // Union graph on placed ops: precedence edges plus chain edges.
    std::vector<std::vector<int>> parents(g.node_count);
    std::vector<std::vector<int>> children(g.node_count);
    std::vector<int> indeg(g.node_count, 0);
    auto add_edge = [&](int a, int b) {
        parents[b].push_back(a);
        children[a].push_back(b);
        ++indeg[b];
    };
    for (const auto& [a, b] : g.edges)
        if (s.placed(a) && s.placed(b)) add_edge(a, b);
    for (const auto& [a, b] : chain_edges(s)) add_edge(a, b);

    // Kahn order, ties broken by node index. The start times are order
    // independent; the fixed order keeps golden tests stable.
    std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
    for (int i = 0; i < g.node_count; ++i)
        if (s.placed(i) && indeg[i] == 0) ready.push(i);

    double max_finish = -std::numeric_limits<double>::infinity();
    double min_start = std::numeric_limits<double>::infinity();
    while (!ready.empty()) {
        int i = ready.top();
        ready.pop();
        double tau = 0.0;
        for (int k : parents[i]) tau = std::max(tau, ev.start_times[k] + g.runtimes[k]);
        ev.start_times[i] = tau;
        max_finish = std::max(max_finish, tau + g.runtimes[i]);
        min_start = std::min(min_start, tau);
        for (int c : children[i])
            if (--indeg[c] == 0) ready.push(c);
    }

    ev.makespan = max_finish - min_start;
    if (s.terminal()) ev.speedup = g.total_runtime() / ev.makespan;
    return ev;
}

double log_reward(double speedup, const RewardSpec& spec) {
    if (spec.sigma < kSigmaMin)
        throw std::invalid_argument("log_reward: sigma below minimum temperature");
    return (speedup - spec.m) / spec.sigma;
}

Eigen::MatrixXd featurize(const ScheduleState& s, const ProxyEvaluation& proxy) {
    const ComputationGraph& g = *s.graph;
    const int m = s.device_count;
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(g.node_count, feature_width(m));

    std::vector<char> removable(g.node_count, 0);
    for (int op : backward_actions(s)) removable[op] = 1;
    std::vector<char> ready = ready_ops(s);

    for (int i = 0; i < g.node_count; ++i) {
        f(i, 0) = g.runtimes[i];
        f(i, 1) = proxy.start_times[i];  // -1 while unplaced
        if (s.placed(i)) f(i, 2 + s.placed_device[i]) = 1.0;
        f(i, 2 + m) = ready[i] ? 1.0 : 0.0;
        f(i, 3 + m) = removable[i] ? 1.0 : 0.0;
        f(i, 4 + m) = s.placed(i) ? 1.0 : 0.0;
    }
    return f;
}

}  // namespace flowsched
