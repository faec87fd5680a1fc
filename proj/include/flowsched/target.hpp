#pragma once

#include <span>

#include "flowsched/proxy.hpp"

namespace flowsched {

enum class TargetKind { noisy_runtimes, linear_comm };

TargetKind target_kind_from_string(const std::string& s);
std::string to_string(TargetKind k);

// Deliberately mis-specified evaluator standing in for target hardware.
// noisy_runtimes: proxy recurrence with log-normally perturbed runtimes.
// linear_comm: cross-device precedence edges delay the consumer by
// a * data_size + b (linear transfer model).
struct TargetSpec {
    TargetKind kind = TargetKind::linear_comm;
    double noise_scale = 0.3;
    double bandwidth_cost_a = 0.0;    // per data unit
    double latency_b = 0.0;           // startup delay
    std::vector<double> data_sizes;   // per edge of the graph; empty = producer runtime
    std::uint64_t seed = 0;
};

TargetSpec noisy_target(double noise_scale = 0.3, std::uint64_t seed = 0);
TargetSpec bandwidth_limited_target(double a = 1.0, double b = 0.01);
TargetSpec latency_limited_target(double a = 0.01, double b = 0.5);

// Target makespan and speedup for a terminal schedule. Speedup uses the
// unperturbed total runtime, so noise only enters through the makespan.
ProxyEvaluation target_evaluate(const ComputationGraph& g, const ScheduleState& schedule,
                                const TargetSpec& spec);

// (proxy speedup, target speedup) per schedule, for scatter/CSV emission.
std::vector<std::pair<double, double>> correlation_report(std::span<const ScheduleState> schedules,
                                                          const TargetSpec& spec);

}  // namespace flowsched
