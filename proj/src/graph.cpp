#include "flowsched/graph.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <set>
#include <unordered_set>

namespace flowsched {

namespace {

std::uint64_t edge_key(int a, int b) {
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

void ComputationGraph::validate() const {
    if (node_count <= 0)
        throw validation_error("graph: node_count must be positive");
    if (static_cast<int>(runtimes.size()) != node_count)
        throw validation_error("graph: runtimes size does not match node_count");
    if (!node_ids.empty() && static_cast<int>(node_ids.size()) != node_count)
        throw validation_error("graph: node_ids size does not match node_count");
    for (int i = 0; i < node_count; ++i) {
        double r = runtimes[i];
        if (!(r > 0.0) || !std::isfinite(r))
            throw validation_error("graph: runtime of node " + std::to_string(i) +
                                   " must be positive and finite");
    }
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(edges.size() * 2);
    for (const auto& [a, b] : edges) {
        if (a < 0 || a >= node_count || b < 0 || b >= node_count)
            throw validation_error("graph: edge endpoint out of range");
        if (a == b)
            throw validation_error("graph: self-loop at node " + std::to_string(a));
        if (!seen.insert(edge_key(a, b)).second)
            throw validation_error("graph: duplicate edge " + std::to_string(a) + "->" +
                                   std::to_string(b));
    }
    topological_order();  // throws on cycle
}

std::vector<int> ComputationGraph::topological_order() const {
    std::vector<int> indeg(node_count, 0);
    std::vector<std::vector<int>> succ(node_count);
    for (const auto& [a, b] : edges) {
        succ[a].push_back(b);
        ++indeg[b];
    }
    std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
    for (int i = 0; i < node_count; ++i)
        if (indeg[i] == 0) ready.push(i);
    std::vector<int> order;
    order.reserve(node_count);
    while (!ready.empty()) {
        int u = ready.top();
        ready.pop();
        order.push_back(u);
        for (int v : succ[u])
            if (--indeg[v] == 0) ready.push(v);
    }
    if (static_cast<int>(order.size()) != node_count)
        throw validation_error("graph: edge set contains a cycle");
    return order;
}

double ComputationGraph::total_runtime() const {
    return kahan_sum(runtimes);
}

Adjacency::Adjacency(const ComputationGraph& g) : succ(g.node_count), pred(g.node_count) {
    for (const auto& [a, b] : g.edges) {
        succ[a].push_back(b);
        pred[b].push_back(a);
    }
}

GraphFamily graph_family_from_string(const std::string& s) {
    if (s == "erdos_renyi") return GraphFamily::erdos_renyi;
    if (s == "layered") return GraphFamily::layered;
    if (s == "stochastic_block") return GraphFamily::stochastic_block;
    if (s == "watts_strogatz") return GraphFamily::watts_strogatz;
    if (s == "barabasi_albert") return GraphFamily::barabasi_albert;
    throw std::invalid_argument("unknown graph family: " + s);
}

std::string to_string(GraphFamily f) {
    switch (f) {
        case GraphFamily::erdos_renyi: return "erdos_renyi";
        case GraphFamily::layered: return "layered";
        case GraphFamily::stochastic_block: return "stochastic_block";
        case GraphFamily::watts_strogatz: return "watts_strogatz";
        case GraphFamily::barabasi_albert: return "barabasi_albert";
    }
    return "?";
}

std::vector<std::pair<int, int>> orient_acyclic(
    const std::vector<std::pair<int, int>>& undirected_edges, int node_count, std::uint64_t seed) {
    for (const auto& [a, b] : undirected_edges)
        if (a == b)
            throw validation_error("orient_acyclic: self-loop at node " + std::to_string(a));
    std::vector<int> perm(node_count);
    std::iota(perm.begin(), perm.end(), 0);
    rng_t rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    // rank[v] = position of node v in the random permutation
    std::vector<int> rank(node_count);
    for (int i = 0; i < node_count; ++i) rank[perm[i]] = i;
    std::vector<std::pair<int, int>> directed;
    directed.reserve(undirected_edges.size());
    for (const auto& [a, b] : undirected_edges) {
        if (rank[a] < rank[b])
            directed.emplace_back(a, b);
        else
            directed.emplace_back(b, a);
    }
    return directed;
}

namespace {

void check_prob(double p, const char* field) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument(std::string("generate_graph: ") + field +
                                    " must be in [0, 1]");
}

std::vector<std::pair<int, int>> gen_erdos_renyi(int n, double p, rng_t& rng) {
    std::vector<std::pair<int, int>> und;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (u(rng) < p) und.emplace_back(i, j);
    return und;
}

// Balanced contiguous layers; edges run between consecutive layers only.
std::vector<std::pair<int, int>> gen_layered(int n, int layers, double p, rng_t& rng) {
    std::vector<int> layer_of(n);
    for (int i = 0; i < n; ++i)
        layer_of[i] = static_cast<int>(static_cast<std::int64_t>(i) * layers / n);
    std::vector<std::pair<int, int>> edges;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (layer_of[j] == layer_of[i] + 1 && u(rng) < p) edges.emplace_back(i, j);
    return edges;
}

std::vector<std::pair<int, int>> gen_sbm(int n, int blocks, double p_in, double p_out,
                                         rng_t& rng) {
    std::vector<int> block_of(n);
    for (int i = 0; i < n; ++i)
        block_of[i] = static_cast<int>(static_cast<std::int64_t>(i) * blocks / n);
    std::vector<std::pair<int, int>> und;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double p = block_of[i] == block_of[j] ? p_in : p_out;
            if (u(rng) < p) und.emplace_back(i, j);
        }
    return und;
}

std::vector<std::pair<int, int>> gen_watts_strogatz(int n, int k, double beta, rng_t& rng) {
    std::set<std::pair<int, int>> edge_set;  // canonical (min, max)
    auto canon = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
    for (int i = 0; i < n; ++i)
        for (int d = 1; d <= k / 2; ++d) edge_set.insert(canon(i, (i + d) % n));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, n - 1);
    // Rewire the far endpoint of each lattice edge with probability beta.
    for (int i = 0; i < n; ++i) {
        for (int d = 1; d <= k / 2; ++d) {
            int j = (i + d) % n;
            if (u(rng) >= beta) continue;
            auto old_e = canon(i, j);
            if (!edge_set.count(old_e)) continue;
            int w = pick(rng);
            int attempts = 0;
            while ((w == i || edge_set.count(canon(i, w))) && attempts++ < 8 * n) w = pick(rng);
            if (w == i || edge_set.count(canon(i, w))) continue;  // saturated neighborhood
            edge_set.erase(old_e);
            edge_set.insert(canon(i, w));
        }
    }
    return {edge_set.begin(), edge_set.end()};
}

// Preferential attachment: `attach` isolated seed nodes, every later node
// links to `attach` distinct existing nodes drawn degree-proportionally.
std::vector<std::pair<int, int>> gen_barabasi_albert(int n, int attach, rng_t& rng) {
    std::vector<std::pair<int, int>> und;
    std::vector<int> repeated;  // one entry per edge endpoint
    std::vector<int> targets(attach);
    std::iota(targets.begin(), targets.end(), 0);
    for (int w = attach; w < n; ++w) {
        for (int t : targets) {
            und.emplace_back(t, w);
            repeated.push_back(t);
            repeated.push_back(w);
        }
        std::set<int> next;
        std::uniform_int_distribution<std::size_t> pick(0, repeated.size() - 1);
        while (static_cast<int>(next.size()) < attach) next.insert(repeated[pick(rng)]);
        targets.assign(next.begin(), next.end());
    }
    return und;
}

}  // namespace

ComputationGraph generate_graph(const GraphFamilySpec& spec) {
    const int n = spec.node_count;
    if (n <= 0) throw std::invalid_argument("generate_graph: node_count must be positive");

    rng_t rng(mix_seed(spec.seed, 1));
    std::vector<std::pair<int, int>> und;
    bool already_directed = false;

    switch (spec.family) {
        case GraphFamily::erdos_renyi:
            check_prob(spec.edge_prob, "edge_prob");
            und = gen_erdos_renyi(n, spec.edge_prob, rng);
            break;
        case GraphFamily::layered:
            check_prob(spec.edge_prob, "edge_prob");
            if (spec.layers < 1 || spec.layers > n)
                throw std::invalid_argument("generate_graph: layers must be in [1, node_count]");
            und = gen_layered(n, spec.layers, spec.edge_prob, rng);
            already_directed = true;  // lower layer -> higher layer
            break;
        case GraphFamily::stochastic_block:
            check_prob(spec.p_in, "p_in");
            check_prob(spec.p_out, "p_out");
            if (spec.blocks < 1 || spec.blocks > n)
                throw std::invalid_argument("generate_graph: blocks must be in [1, node_count]");
            und = gen_sbm(n, spec.blocks, spec.p_in, spec.p_out, rng);
            break;
        case GraphFamily::watts_strogatz:
            check_prob(spec.ws_beta, "ws_beta");
            if (spec.ws_k < 0 || spec.ws_k >= n || spec.ws_k % 2 != 0)
                throw std::invalid_argument("generate_graph: ws_k must be even and < node_count");
            und = gen_watts_strogatz(n, spec.ws_k, spec.ws_beta, rng);
            break;
        case GraphFamily::barabasi_albert:
            if (spec.attach < 1 || spec.attach >= n)
                throw std::invalid_argument("generate_graph: attach must be in [1, node_count)");
            und = gen_barabasi_albert(n, spec.attach, rng);
            break;
    }

    ComputationGraph g;
    g.node_count = n;
    g.edges = already_directed ? und : orient_acyclic(und, n, mix_seed(spec.seed, 2));
    std::sort(g.edges.begin(), g.edges.end());
    g.runtimes.assign(n, 1.0);
    g.validate();
    return g;
}

ComputationGraph sample_runtimes(const ComputationGraph& g, std::uint64_t seed) {
    constexpr double kEps = 1e-6;  // strict positivity for the proxy
    ComputationGraph out = g;
    rng_t rng(seed);
    std::uniform_real_distribution<double> u(kEps, 1.0);
    for (double& r : out.runtimes) r = u(rng);
    return out;
}

ComputationGraph sample_subgraph(const ComputationGraph& g, int n_min, int n_max,
                                 std::uint64_t seed) {
    if (n_min < 1 || n_min > n_max)
        throw std::invalid_argument("sample_subgraph: need 1 <= n_min <= n_max");
    if (n_max > g.node_count)
        throw std::invalid_argument("sample_subgraph: n_max exceeds node_count");

    rng_t rng(seed);

    // Random topological order: Kahn with uniformly chosen ready node.
    Adjacency adj(g);
    std::vector<int> indeg(g.node_count, 0);
    for (const auto& [a, b] : g.edges) {
        (void)a;
        ++indeg[b];
    }
    std::vector<int> ready;
    for (int i = 0; i < g.node_count; ++i)
        if (indeg[i] == 0) ready.push_back(i);
    std::vector<int> order;
    order.reserve(g.node_count);
    while (!ready.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, ready.size() - 1);
        std::size_t at = pick(rng);
        int u = ready[at];
        ready[at] = ready.back();
        ready.pop_back();
        order.push_back(u);
        for (int v : adj.succ[u])
            if (--indeg[v] == 0) ready.push_back(v);
    }

    std::uniform_int_distribution<int> size_dist(n_min, n_max);
    int size = size_dist(rng);
    std::uniform_int_distribution<int> start_dist(0, g.node_count - size);
    int start = start_dist(rng);

    std::vector<int> new_index(g.node_count, -1);
    for (int k = 0; k < size; ++k) new_index[order[start + k]] = k;

    ComputationGraph sub;
    sub.node_count = size;
    sub.runtimes.resize(size);
    if (!g.node_ids.empty()) sub.node_ids.resize(size);
    for (int k = 0; k < size; ++k) {
        int old = order[start + k];
        sub.runtimes[k] = g.runtimes[old];
        if (!g.node_ids.empty()) sub.node_ids[k] = g.node_ids[old];
    }
    for (const auto& [a, b] : g.edges)
        if (new_index[a] >= 0 && new_index[b] >= 0)
            sub.edges.emplace_back(new_index[a], new_index[b]);
    std::sort(sub.edges.begin(), sub.edges.end());
    return sub;
}

}  // namespace flowsched
