#pragma once

#include <Eigen/Core>

#include "flowsched/schedule.hpp"

namespace flowsched {

// Analytic makespan estimate. start_times[i] is -1 for unplaced ops; speedup
// is only meaningful (non-zero) for terminal schedules.
struct ProxyEvaluation {
    std::vector<double> start_times;
    double makespan = 0.0;
    double speedup = 0.0;
};

// Start times via the forward recurrence over precedence and chain edges,
// makespan as max finish minus min start.
ProxyEvaluation proxy_evaluate(const ScheduleState& s);

inline constexpr double kSigmaMin = 1e-4;

struct RewardSpec {
    int m = 4;            // device count
    double sigma = 0.25;  // reward temperature
};

// log R(x; m, sigma) = (U(x) - m) / sigma. Always <= 0 since U <= m.
double log_reward(double speedup, const RewardSpec& spec);

// Per-node rows: [runtime, start or -1, device one-hot (m), valid-forward,
// valid-backward, placed]. Width = m + 5.
Eigen::MatrixXd featurize(const ScheduleState& s, const ProxyEvaluation& proxy);

inline int feature_width(int device_count) { return device_count + 5; }

}  // namespace flowsched
