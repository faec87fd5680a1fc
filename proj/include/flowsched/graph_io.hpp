#pragma once

#include <filesystem>

#include "flowsched/graph.hpp"

namespace flowsched {

// File format: {"nodes": [{"id": str, "runtime": num}, ...], "edges": [[src, dst], ...]}
// Edge endpoints are indices into the nodes array.

ComputationGraph load_graph(const std::filesystem::path& path);
void save_graph(const ComputationGraph& g, const std::filesystem::path& path);

}  // namespace flowsched
