#pragma once

#include <functional>
#include <optional>
#include <span>

#include "flowsched/policy.hpp"

namespace flowsched {

// One sampled construction of a complete schedule, with per-step forward and
// backward log-probabilities recorded under the policy that sampled it.
struct Trajectory {
    std::vector<Action> actions;
    std::vector<double> log_pf;  // log P_F(s_{t+1} | s_t)
    std::vector<double> log_pb;  // log P_B(s_t | s_{t+1})
    double speedup = 0.0;
    double log_reward = 0.0;
    double sigma = 0.0;
    int graph_id = -1;

    double sum_log_pf() const { return kahan_sum(log_pf); }
    double sum_log_pb() const { return kahan_sum(log_pb); }
};

// Per-trajectory implicit log-partition estimate:
// zeta = log R(x) + sum log P_B - sum log P_F.
double zeta(const Trajectory& t);

enum class LossKind { logz_variance, trajectory_balance };

LossKind loss_kind_from_string(const std::string& s);
std::string to_string(LossKind k);

struct TrainConfig {
    int steps = 1000;
    int batch = 100;
    double lr = 1e-3;
    double lr_decay = 1.0;  // multiplicative, applied per step
    double sigma_lo = 0.01;
    double sigma_hi = 1.0;
    LossKind loss = LossKind::logz_variance;
    bool stop_grad_mean = false;  // Eq-level switch; the gradient is identical either way
    double clip_norm = 0.0;       // 0 disables clipping
    int subgraph_min = 0;         // 0 disables sub-graph windowing
    int subgraph_max = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct StepMetrics {
    int step;
    double loss;
    double mean_speedup;
    double mean_zeta;
    double sigma;
    int graph_id;
};

// Rolls forward from the empty schedule, sampling each action from the
// forward policy at temperature sigma. Gradient-free.
Trajectory sample_trajectory(const PolicyParams& params, const ComputationGraph& g,
                             const AttentionMasks& masks, double sigma, rng_t& rng);

// Loss values from the recorded log-probabilities.
// L_V = (1/b) sum_k (zeta_k - mean zeta)^2, b >= 2.
double loss_logz_variance(std::span<const Trajectory> batch);
// L_TB = (1/b) sum_k 1/2 (log Z + sum log P_F - log R - sum log P_B)^2.
double loss_trajectory_balance(std::span<const Trajectory> batch, double log_z);

// Recompute the loss under `params` by teacher-forcing the recorded actions
// and accumulate d loss / d params into `grads`. Returns the loss value.
double loss_grad_logz_variance(const PolicyParams& params, const ComputationGraph& g,
                               const AttentionMasks& masks, std::span<const Trajectory> batch,
                               Grads& grads);
double loss_grad_trajectory_balance(const PolicyParams& params, const ComputationGraph& g,
                                    const AttentionMasks& masks,
                                    std::span<const Trajectory> batch, Grads& grads);

// Loss value only, under arbitrary params (used by finite-difference checks).
double loss_value(const PolicyParams& params, const ComputationGraph& g,
                  const AttentionMasks& masks, std::span<const Trajectory> batch, LossKind kind);

struct AdamState {
    Grads m, v;
    long t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static AdamState init(const PolicyParams& p);
};
void adam_step(PolicyParams& params, const Grads& grads, AdamState& state, double lr);

// Scales grads in place when their global L2 norm exceeds max_norm (> 0).
void clip_gradients(Grads& grads, double max_norm);

struct TrainHooks {
    int interval = 0;  // 0 disables
    std::function<void(int step, const PolicyParams&)> on_interval;
};

struct TrainResult {
    PolicyParams params;
    std::vector<StepMetrics> metrics;
};

// Appendix-C loop: per step draw one graph, one temperature from
// LogUniform[sigma_lo, sigma_hi], a minibatch of on-policy trajectories,
// then one optimizer update. Aborts with a diagnostic snapshot on
// non-finite loss.
TrainResult train(const std::vector<ComputationGraph>& dataset, PolicyConfig policy_cfg,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

// n independent rollouts at inference temperature sigma.
std::vector<std::pair<ScheduleState, double>> sample_candidates(const PolicyParams& params,
                                                                const ComputationGraph& g,
                                                                double sigma, int n,
                                                                std::uint64_t seed);

}  // namespace flowsched
