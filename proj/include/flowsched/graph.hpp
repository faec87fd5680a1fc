#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flowsched/common.hpp"

namespace flowsched {

// DAG of operations. Edge (i, j) means operation i must finish before j
// starts. Runtimes are strictly positive.
struct ComputationGraph {
    int node_count = 0;
    std::vector<std::pair<int, int>> edges;
    std::vector<double> runtimes;
    std::vector<std::string> node_ids;  // optional stable labels; empty or size node_count

    // Throws validation_error on cycles, self-loops, duplicate edges,
    // out-of-range endpoints or non-positive runtimes.
    void validate() const;

    // Kahn order with ties broken by node index. Throws on cycle.
    std::vector<int> topological_order() const;

    double total_runtime() const;
};

// Predecessor/successor lists, built once per graph and shared by states.
struct Adjacency {
    std::vector<std::vector<int>> succ;
    std::vector<std::vector<int>> pred;

    Adjacency() = default;
    explicit Adjacency(const ComputationGraph& g);
};

enum class GraphFamily { erdos_renyi, layered, stochastic_block, watts_strogatz, barabasi_albert };

GraphFamily graph_family_from_string(const std::string& s);
std::string to_string(GraphFamily f);

struct GraphFamilySpec {
    GraphFamily family = GraphFamily::erdos_renyi;
    int node_count = 50;
    std::uint64_t seed = 0;

    double edge_prob = 0.1;  // erdos_renyi pair probability; layered inter-layer probability
    int layers = 5;          // layered
    int blocks = 3;          // stochastic_block
    double p_in = 0.3;       // stochastic_block intra-block probability
    double p_out = 0.02;     // stochastic_block inter-block probability
    int ws_k = 4;            // watts_strogatz ring neighbors (even)
    double ws_beta = 0.3;    // watts_strogatz rewiring probability
    int attach = 2;          // barabasi_albert edges per new node
};

// Directs every undirected edge from lower to higher position in a seeded
// random node permutation; the result is acyclic by construction.
std::vector<std::pair<int, int>> orient_acyclic(
    const std::vector<std::pair<int, int>>& undirected_edges, int node_count, std::uint64_t seed);

// Generates the DAG topology for a family spec. Runtimes are placeholders
// (1.0); draw real ones with sample_runtimes.
ComputationGraph generate_graph(const GraphFamilySpec& spec);

// Returns a copy with runtimes drawn i.i.d. from U(eps, 1), eps = 1e-6.
ComputationGraph sample_runtimes(const ComputationGraph& g, std::uint64_t seed);

// Induced subgraph on a contiguous window of a seeded random topological
// order. Window size is uniform in [n_min, n_max].
ComputationGraph sample_subgraph(const ComputationGraph& g, int n_min, int n_max, std::uint64_t seed);

}  // namespace flowsched
