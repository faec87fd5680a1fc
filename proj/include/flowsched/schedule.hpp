#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "flowsched/graph.hpp"

namespace flowsched {

// Placement of one operation onto one device.
struct Action {
    int op = -1;
    int device = -1;

    friend bool operator==(const Action&, const Action&) = default;
};

// Partial or complete schedule: one chain of operations per device.
// Immutable value; apply_action returns the successor state.
struct ScheduleState {
    const ComputationGraph* graph = nullptr;
    std::shared_ptr<const Adjacency> adj;
    int device_count = 0;
    std::vector<std::vector<int>> chains;
    std::vector<int> placed_device;        // -1 while unplaced
    std::vector<int> unplaced_pred_count;  // per node
    int step = 0;

    bool terminal() const { return step == graph->node_count; }
    bool placed(int op) const { return placed_device[op] >= 0; }
};

ScheduleState initial_state(const ComputationGraph& g, int device_count);

// All (op, device) pairs whose precedence constraints are met. Ordered by
// (op, device); empty exactly at terminal states.
std::vector<Action> valid_actions(const ScheduleState& s);

// Cheaper mask variant: ready[op] == 1 iff (op, d) is valid for every d.
std::vector<char> ready_ops(const ScheduleState& s);

ScheduleState apply_action(const ScheduleState& s, const Action& a);

// Ops removable by one backward step: last in their chain with no placed
// successor. Ascending op order.
std::vector<int> backward_actions(const ScheduleState& s);

// Chain edges D: consecutive pairs within each device chain.
std::vector<std::pair<int, int>> chain_edges(const ScheduleState& s);

// JSON {"m": int, "chains": [[op, ...], ...]}.
void save_schedule(const ScheduleState& s, const std::filesystem::path& path);
ScheduleState load_schedule(const ComputationGraph& g, const std::filesystem::path& path);

// Rebuilds a state from chains (validates precedence closure and order).
ScheduleState state_from_chains(const ComputationGraph& g, int device_count,
                                const std::vector<std::vector<int>>& chains);

}  // namespace flowsched
