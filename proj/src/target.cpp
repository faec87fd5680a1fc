#include "flowsched/target.hpp"

#include <algorithm>
#include <limits>
#include <queue>

namespace flowsched {

TargetKind target_kind_from_string(const std::string& s) {
    if (s == "noisy_runtimes") return TargetKind::noisy_runtimes;
    if (s == "linear_comm") return TargetKind::linear_comm;
    throw std::invalid_argument("unknown target kind: " + s);
}

std::string to_string(TargetKind k) {
    return k == TargetKind::noisy_runtimes ? "noisy_runtimes" : "linear_comm";
}

TargetSpec noisy_target(double noise_scale, std::uint64_t seed) {
    TargetSpec t;
    t.kind = TargetKind::noisy_runtimes;
    t.noise_scale = noise_scale;
    t.seed = seed;
    return t;
}

TargetSpec bandwidth_limited_target(double a, double b) {
    TargetSpec t;
    t.kind = TargetKind::linear_comm;
    t.bandwidth_cost_a = a;
    t.latency_b = b;
    return t;
}

TargetSpec latency_limited_target(double a, double b) {
    return bandwidth_limited_target(a, b);
}

ProxyEvaluation target_evaluate(const ComputationGraph& g, const ScheduleState& schedule,
                                const TargetSpec& spec) {
    if (schedule.graph != &g)
        throw std::logic_error("target_evaluate: schedule does not reference this graph");
    if (!schedule.terminal())
        throw std::logic_error("target_evaluate: schedule is not terminal");
    if (spec.noise_scale < 0 || spec.bandwidth_cost_a < 0 || spec.latency_b < 0)
        throw std::invalid_argument("target_evaluate: negative noise/cost parameter");
    if (!spec.data_sizes.empty() && spec.data_sizes.size() != g.edges.size())
        throw std::invalid_argument("target_evaluate: data_sizes size does not match edge count");

    // Effective runtimes: perturbed for noisy_runtimes, one deterministic
    // draw per node per target instance.
    std::vector<double> rho(g.runtimes);
    if (spec.kind == TargetKind::noisy_runtimes && spec.noise_scale > 0) {
        rng_t rng(spec.seed);
        std::normal_distribution<double> z(0.0, 1.0);
        for (double& r : rho) r *= std::exp(spec.noise_scale * z(rng));
    }

    // Edge delays: only cross-device precedence edges pay the transfer cost.
    std::vector<std::vector<std::pair<int, double>>> parents(g.node_count);
    std::vector<std::vector<int>> children(g.node_count);
    std::vector<int> indeg(g.node_count, 0);
    auto add_edge = [&](int a, int b, double delay) {
        parents[b].emplace_back(a, delay);
        children[a].push_back(b);
        ++indeg[b];
    };
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        auto [a, b] = g.edges[e];
        double delay = 0.0;
        if (spec.kind == TargetKind::linear_comm &&
            schedule.placed_device[a] != schedule.placed_device[b]) {
            double size = spec.data_sizes.empty() ? g.runtimes[a] : spec.data_sizes[e];
            delay = spec.bandwidth_cost_a * size + spec.latency_b;
        }
        add_edge(a, b, delay);
    }
    for (const auto& [a, b] : chain_edges(schedule)) add_edge(a, b, 0.0);

    ProxyEvaluation ev;
    ev.start_times.assign(g.node_count, -1.0);
    std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
    for (int i = 0; i < g.node_count; ++i)
        if (indeg[i] == 0) ready.push(i);
    double max_finish = -std::numeric_limits<double>::infinity();
    double min_start = std::numeric_limits<double>::infinity();
    while (!ready.empty()) {
        int i = ready.top();
        ready.pop();
        double tau = 0.0;
        for (const auto& [k, delay] : parents[i])
            tau = std::max(tau, ev.start_times[k] + rho[k] + delay);
        ev.start_times[i] = tau;
        max_finish = std::max(max_finish, tau + rho[i]);
        min_start = std::min(min_start, tau);
        for (int c : children[i])
            if (--indeg[c] == 0) ready.push(c);
    }
    ev.makespan = max_finish - min_start;
    ev.speedup = g.total_runtime() / ev.makespan;  // unperturbed numerator
    return ev;
}

std::vector<std::pair<double, double>> correlation_report(std::span<const ScheduleState> schedules,
                                                          const TargetSpec& spec) {
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(schedules.size());
    for (const ScheduleState& s : schedules) {
        double proxy_u = proxy_evaluate(s).speedup;
        double target_u = target_evaluate(*s.graph, s, spec).speedup;
        pairs.emplace_back(proxy_u, target_u);
    }
    return pairs;
}

}  // namespace flowsched
