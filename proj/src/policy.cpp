#include "flowsched/policy.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace flowsched {

using ad::Matrix;
using ad::Tape;
using ad::Var;
using nlohmann::json;

void PolicyConfig::validate() const {
    if (layers < 1 || width < 1 || heads < 1 || temp_width < 1 || ffn_mult < 1 ||
        head_hidden < 1 || device_count < 1)
        throw std::invalid_argument("policy config: dimensions must be positive");
    if (width % heads != 0)
        throw std::invalid_argument("policy config: head count must divide width");
}

AttentionMasks build_masks(const ComputationGraph& g) {
    const int n = g.node_count;
    Adjacency adj(g);

    // reach(i, j): j is a strict descendant of i. BFS per node; graphs here
    // stay small enough that O(n * E) is fine.
    std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
    for (int s = 0; s < n; ++s) {
        std::vector<int> stack(adj.succ[s]);
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            if (reach[s][u]) continue;
            reach[s][u] = 1;
            for (int v : adj.succ[u]) stack.push_back(v);
        }
    }

    AttentionMasks m;
    for (auto& r : m.rel) r = ad::BoolMatrix::Constant(n, n, false);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            bool anc = reach[j][i];  // j reaches i => j is an ancestor of i
            bool desc = reach[i][j];
            m.rel[AttentionMasks::ancestors](i, j) = anc || i == j;
            m.rel[AttentionMasks::descendants](i, j) = desc || i == j;
            m.rel[AttentionMasks::incomparable](i, j) = (!anc && !desc);  // includes i == j
            m.rel[AttentionMasks::all](i, j) = true;
        }
    }
    return m;
}

namespace {

struct Builder {
    PolicyParams& p;
    rng_t rng;

    int tensor(const std::string& name, int rows, int cols, double fill) {
        p.names.push_back(name);
        p.tensors.push_back(Matrix::Constant(rows, cols, fill));
        return static_cast<int>(p.tensors.size() - 1);
    }

    // Scaled-uniform fan-in init for a weight used as x * W, W: in x out.
    int weight(const std::string& name, int in, int out) {
        int id = tensor(name, in, out, 0.0);
        double s = std::sqrt(1.0 / in);
        std::uniform_real_distribution<double> u(-s, s);
        for (int i = 0; i < in; ++i)
            for (int j = 0; j < out; ++j) p.tensors[id](i, j) = u(rng);
        return id;
    }

    int bias(const std::string& name, int out, double fill = 0.0) {
        return tensor(name, 1, out, fill);
    }
};

}  // namespace

PolicyParams PolicyParams::init(const PolicyConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    PolicyParams p;
    p.cfg = cfg;
    Builder b{p, rng_t(seed)};
    const int w = cfg.width, f = cfg.feature_width(), tw = cfg.temp_width, fh = cfg.ffn_hidden();

    p.idx.w_in = b.weight("w_in", f, w);
    p.idx.b_in = b.bias("b_in", w);
    p.idx.temp_wa = b.weight("temp_wa", 1, tw);
    p.idx.temp_ba = b.bias("temp_ba", tw);
    p.idx.temp_wb = b.weight("temp_wb", tw, tw);
    p.idx.temp_bb = b.bias("temp_bb", tw);

    for (int l = 0; l < cfg.layers; ++l) {
        std::string pre = "layer" + std::to_string(l) + ".";
        LayerIdx li;
        li.ln1_gain = b.bias(pre + "ln1_gain", w, 1.0);
        li.ln1_bias = b.bias(pre + "ln1_bias", w);
        li.wq = b.weight(pre + "wq", w, w);
        li.bq = b.bias(pre + "bq", w);
        li.wk = b.weight(pre + "wk", w, w);
        li.bk = b.bias(pre + "bk", w);
        li.wv = b.weight(pre + "wv", w, w);
        li.bv = b.bias(pre + "bv", w);
        li.wo = b.weight(pre + "wo", w, w);
        li.bo = b.bias(pre + "bo", w);
        li.ln2_gain = b.bias(pre + "ln2_gain", w, 1.0);
        li.ln2_bias = b.bias(pre + "ln2_bias", w);
        li.w1 = b.weight(pre + "w1", w, fh);
        li.b1 = b.bias(pre + "b1", fh);
        // FiLM starts near identity: scale bias 1, shift bias 0.
        li.film_scale_w = b.weight(pre + "film_scale_w", tw, fh);
        li.film_scale_b = b.bias(pre + "film_scale_b", fh, 1.0);
        li.film_shift_w = b.weight(pre + "film_shift_w", tw, fh);
        li.film_shift_b = b.bias(pre + "film_shift_b", fh);
        li.w2 = b.weight(pre + "w2", fh, w);
        li.b2 = b.bias(pre + "b2", w);
        p.idx.layer.push_back(li);
    }

    p.idx.fwd_w1 = b.weight("fwd_w1", w, cfg.head_hidden);
    p.idx.fwd_b1 = b.bias("fwd_b1", cfg.head_hidden);
    p.idx.fwd_w2 = b.weight("fwd_w2", cfg.head_hidden, cfg.device_count);
    p.idx.fwd_b2 = b.bias("fwd_b2", cfg.device_count);
    p.idx.bwd_w1 = b.weight("bwd_w1", w, cfg.head_hidden);
    p.idx.bwd_b1 = b.bias("bwd_b1", cfg.head_hidden);
    p.idx.bwd_w2 = b.weight("bwd_w2", cfg.head_hidden, 1);
    p.idx.bwd_b2 = b.bias("bwd_b2", 1);
    if (cfg.logz_head) {
        p.idx.logz_w1 = b.weight("logz_w1", w, cfg.head_hidden);
        p.idx.logz_b1 = b.bias("logz_b1", cfg.head_hidden);
        p.idx.logz_w2 = b.weight("logz_w2", cfg.head_hidden, 1);
        p.idx.logz_b2 = b.bias("logz_b2", 1);
    }
    return p;
}

Grads zero_grads(const PolicyParams& p) {
    Grads g;
    g.reserve(p.tensors.size());
    for (const Matrix& t : p.tensors) g.push_back(Matrix::Zero(t.rows(), t.cols()));
    return g;
}

void save_checkpoint(const PolicyParams& p, const std::filesystem::path& path) {
    json cfg;
    cfg["layers"] = p.cfg.layers;
    cfg["width"] = p.cfg.width;
    cfg["heads"] = p.cfg.heads;
    cfg["temp_width"] = p.cfg.temp_width;
    cfg["ffn_mult"] = p.cfg.ffn_mult;
    cfg["head_hidden"] = p.cfg.head_hidden;
    cfg["device_count"] = p.cfg.device_count;
    cfg["uniform_backward"] = p.cfg.uniform_backward;
    cfg["logz_head"] = p.cfg.logz_head;

    json tensors;
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
        const Matrix& t = p.tensors[i];
        json jt;
        jt["rows"] = t.rows();
        jt["cols"] = t.cols();
        std::vector<double> data;
        data.reserve(t.size());
        for (int r = 0; r < t.rows(); ++r)
            for (int c = 0; c < t.cols(); ++c) data.push_back(t(r, c));
        jt["data"] = std::move(data);
        tensors[p.names[i]] = std::move(jt);
    }

    json j;
    j["format_version"] = 1;
    j["config"] = std::move(cfg);
    j["tensors"] = std::move(tensors);

    std::ofstream out(path);
    if (!out) throw format_error("save_checkpoint: cannot open " + path.string());
    out << j.dump() << '\n';
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw format_error("load_checkpoint: cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw format_error("load_checkpoint: " + path.string() + ": " + e.what());
    }
    if (j.value("format_version", 0) != 1)
        throw format_error("load_checkpoint: unsupported format version");

    const json& cfg = j.at("config");
    PolicyConfig c;
    c.layers = cfg.at("layers").get<int>();
    c.width = cfg.at("width").get<int>();
    c.heads = cfg.at("heads").get<int>();
    c.temp_width = cfg.at("temp_width").get<int>();
    c.ffn_mult = cfg.at("ffn_mult").get<int>();
    c.head_hidden = cfg.at("head_hidden").get<int>();
    c.device_count = cfg.at("device_count").get<int>();
    c.uniform_backward = cfg.at("uniform_backward").get<bool>();
    c.logz_head = cfg.at("logz_head").get<bool>();

    PolicyParams p = PolicyParams::init(c, 0);
    const json& tensors = j.at("tensors");
    for (std::size_t i = 0; i < p.names.size(); ++i) {
        if (!tensors.contains(p.names[i]))
            throw format_error("load_checkpoint: missing tensor " + p.names[i]);
        const json& jt = tensors[p.names[i]];
        Matrix& t = p.tensors[i];
        if (jt.at("rows").get<int>() != t.rows() || jt.at("cols").get<int>() != t.cols())
            throw format_error("load_checkpoint: shape mismatch for tensor " + p.names[i]);
        const auto data = jt.at("data").get<std::vector<double>>();
        if (data.size() != static_cast<std::size_t>(t.size()))
            throw format_error("load_checkpoint: data size mismatch for tensor " + p.names[i]);
        std::size_t k = 0;
        for (int r = 0; r < t.rows(); ++r)
            for (int col = 0; col < t.cols(); ++col) t(r, col) = data[k++];
    }
    return p;
}

BoundParams bind_params(Tape& tape, const PolicyParams& p, bool requires_grad) {
    BoundParams b;
    b.v.reserve(p.tensors.size());
    for (const Matrix& t : p.tensors) b.v.push_back(tape.input(t, requires_grad));
    return b;
}

Var embed_temperature_var(Tape& tape, const BoundParams& b, const PolicyParams& p,
                          Var log_sigma) {
    const auto& ix = p.idx;
    Var h = tape.add(tape.matmul(log_sigma, b[ix.temp_wa]), b[ix.temp_ba]);
    h = tape.relu(h);
    h = tape.add(tape.matmul(h, b[ix.temp_wb]), b[ix.temp_bb]);
    return tape.relu(h);
}

Var embed_temperature(Tape& tape, const BoundParams& b, const PolicyParams& p, double sigma) {
    if (sigma < kSigmaMin)
        throw std::invalid_argument("embed_temperature: sigma below minimum temperature");
    return embed_temperature_var(tape, b, p, tape.scalar(std::log(sigma)));
}

Var encode(Tape& tape, const BoundParams& b, const PolicyParams& p, const Matrix& features,
           const AttentionMasks& masks, Var e_sigma) {
    const auto& cfg = p.cfg;
    const auto& ix = p.idx;
    if (features.cols() != cfg.feature_width())
        throw std::invalid_argument("encode: feature width does not match input projection");
    const int dh = cfg.width / cfg.heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Var x = tape.constant(features);
    Var h = tape.add_rowvec(tape.matmul(x, b[ix.w_in]), b[ix.b_in]);

    for (const auto& li : ix.layer) {
        // h' = h + MHA(LayerNorm(h)), attention masked per head relation
        Var t = tape.layer_norm(h, b[li.ln1_gain], b[li.ln1_bias]);
        Var q = tape.add_rowvec(tape.matmul(t, b[li.wq]), b[li.bq]);
        Var k = tape.add_rowvec(tape.matmul(t, b[li.wk]), b[li.bk]);
        Var v = tape.add_rowvec(tape.matmul(t, b[li.wv]), b[li.bv]);
        std::vector<Var> head_out;
        head_out.reserve(cfg.heads);
        for (int hd = 0; hd < cfg.heads; ++hd) {
            Var qh = tape.cols(q, hd * dh, dh);
            Var kh = tape.cols(k, hd * dh, dh);
            Var vh = tape.cols(v, hd * dh, dh);
            Var scores = tape.scale(tape.matmul_nt(qh, kh), att_scale);
            Var att = tape.masked_softmax_rows(scores, masks.rel[hd % 4]);
            head_out.push_back(tape.matmul(att, vh));
        }
        Var z = tape.hcat(head_out);
        h = tape.add(h, tape.add_rowvec(tape.matmul(z, b[li.wo]), b[li.bo]));

        // h = h' + lin2(ReLU(FiLM(lin1(LayerNorm(h')), e_sigma)))
        Var t2 = tape.layer_norm(h, b[li.ln2_gain], b[li.ln2_bias]);
        Var u = tape.add_rowvec(tape.matmul(t2, b[li.w1]), b[li.b1]);
        Var film_scale =
            tape.add(tape.matmul(e_sigma, b[li.film_scale_w]), b[li.film_scale_b]);
        Var film_shift =
            tape.add(tape.matmul(e_sigma, b[li.film_shift_w]), b[li.film_shift_b]);
        u = tape.add_rowvec(tape.mul_rowvec(u, film_scale), film_shift);
        Var a = tape.relu(u);
        h = tape.add(h, tape.add_rowvec(tape.matmul(a, b[li.w2]), b[li.b2]));
    }
    return h;
}

Var forward_policy(Tape& tape, const BoundParams& b, const PolicyParams& p, Var embeddings,
                   const ScheduleState& state) {
    if (state.terminal())
        throw std::logic_error("forward_policy: terminal state has no valid actions");
    const auto& ix = p.idx;
    const int m = state.device_count;
    if (m != p.cfg.device_count)
        throw std::invalid_argument("forward_policy: state device count differs from config");

    Var hidden = tape.relu(tape.add_rowvec(tape.matmul(embeddings, b[ix.fwd_w1]), b[ix.fwd_b1]));
    Var logits = tape.add_rowvec(tape.matmul(hidden, b[ix.fwd_w2]), b[ix.fwd_b2]);  // n x m
    Var flat = tape.flatten_rowmajor(logits);  // (n*m) x 1, index op*m + d

    std::vector<char> allowed(static_cast<std::size_t>(state.graph->node_count) * m, 0);
    std::vector<char> ready = ready_ops(state);
    for (int op = 0; op < state.graph->node_count; ++op)
        if (ready[op])
            for (int d = 0; d < m; ++d) allowed[static_cast<std::size_t>(op) * m + d] = 1;
    return tape.masked_log_softmax_vec(flat, allowed);
}

Var backward_policy(Tape& tape, const BoundParams& b, const PolicyParams& p, Var embeddings,
                    const ScheduleState& state) {
    if (state.step == 0)
        throw std::logic_error("backward_policy: initial state has no removable ops");
    const auto& ix = p.idx;
    const int n = state.graph->node_count;

    std::vector<int> removable = backward_actions(state);
    std::vector<char> allowed(n, 0);
    for (int op : removable) allowed[op] = 1;

    if (p.cfg.uniform_backward) {
        Matrix logp = Matrix::Constant(n, 1, ad::kMaskedLogit);
        double u = -std::log(static_cast<double>(removable.size()));
        for (int op : removable) logp(op, 0) = u;
        return tape.constant(std::move(logp));
    }

    Var hidden = tape.relu(tape.add_rowvec(tape.matmul(embeddings, b[ix.bwd_w1]), b[ix.bwd_b1]));
    Var logits = tape.add_rowvec(tape.matmul(hidden, b[ix.bwd_w2]), b[ix.bwd_b2]);  // n x 1
    return tape.masked_log_softmax_vec(logits, allowed);
}

Var logz_estimate(Tape& tape, const BoundParams& b, const PolicyParams& p, Var embeddings) {
    if (!p.cfg.logz_head)
        throw std::logic_error("logz_estimate: config has no log Z head");
    const auto& ix = p.idx;
    Var pooled = tape.mean_rows(embeddings);
    Var hidden = tape.relu(tape.add(tape.matmul(pooled, b[ix.logz_w1]), b[ix.logz_b1]));
    return tape.add(tape.matmul(hidden, b[ix.logz_w2]), b[ix.logz_b2]);
}

}  // namespace flowsched
