#pragma once

#include <array>
#include <filesystem>

#include "flowsched/autodiff.hpp"
#include "flowsched/proxy.hpp"

namespace flowsched {

struct PolicyConfig {
    int layers = 3;
    int width = 64;
    int heads = 4;
    int temp_width = 32;
    int ffn_mult = 2;      // feed-forward hidden width = ffn_mult * width
    int head_hidden = 64;  // policy head MLP hidden width
    int device_count = 4;
    bool uniform_backward = false;  // replace the learned P_B with uniform over removable ops
    bool logz_head = false;         // graph-conditioned log Z regressor (trajectory balance)

    int feature_width() const { return flowsched::feature_width(device_count); }
    int ffn_hidden() const { return ffn_mult * width; }
    void validate() const;
};

// One boolean node x node matrix per topology relation; self-attention is
// always allowed. Head h uses relation h % 4.
struct AttentionMasks {
    enum Relation { ancestors = 0, descendants = 1, incomparable = 2, all = 3 };
    std::array<ad::BoolMatrix, 4> rel;
};

AttentionMasks build_masks(const ComputationGraph& g);

// All weight tensors, flat and named. The Idx structs hold positions into
// `tensors` so hot paths never do string lookups.
struct PolicyParams {
    struct LayerIdx {
        int ln1_gain, ln1_bias;
        int wq, bq, wk, bk, wv, bv, wo, bo;
        int ln2_gain, ln2_bias;
        int w1, b1;
        int film_scale_w, film_scale_b, film_shift_w, film_shift_b;
        int w2, b2;
    };
    struct Idx {
        int w_in, b_in;
        int temp_wa, temp_ba, temp_wb, temp_bb;
        std::vector<LayerIdx> layer;
        int fwd_w1, fwd_b1, fwd_w2, fwd_b2;
        int bwd_w1, bwd_b1, bwd_w2, bwd_b2;
        int logz_w1 = -1, logz_b1 = -1, logz_w2 = -1, logz_b2 = -1;
    };

    PolicyConfig cfg;
    std::vector<std::string> names;
    std::vector<ad::Matrix> tensors;
    Idx idx;

    static PolicyParams init(const PolicyConfig& cfg, std::uint64_t seed);

    std::size_t tensor_count() const { return tensors.size(); }
};

using Grads = std::vector<ad::Matrix>;
Grads zero_grads(const PolicyParams& p);

// Versioned JSON tensor dump with a shape manifest; round-trips exactly.
void save_checkpoint(const PolicyParams& p, const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);

// Parameter leaves bound on a tape for one forward/backward pass.
struct BoundParams {
    std::vector<ad::Var> v;
    const ad::Var& operator[](int i) const { return v[i]; }
};
BoundParams bind_params(ad::Tape& tape, const PolicyParams& p, bool requires_grad = true);

// e_sigma = ReLU(lin_b(ReLU(lin_a(log sigma)))); one vector reused by every
// layer's FiLM conditioning.
ad::Var embed_temperature(ad::Tape& tape, const BoundParams& b, const PolicyParams& p,
                          double sigma);
ad::Var embed_temperature_var(ad::Tape& tape, const BoundParams& b, const PolicyParams& p,
                              ad::Var log_sigma);

// L pre-norm layers of topology-masked attention plus FiLM-conditioned
// feed-forward; returns node_count x width embeddings.
ad::Var encode(ad::Tape& tape, const BoundParams& b, const PolicyParams& p,
               const ad::Matrix& features, const AttentionMasks& masks, ad::Var e_sigma);

// Log-probabilities over flattened (op, device) actions, index op * m + d.
// Invalid pairs are masked to probability zero.
ad::Var forward_policy(ad::Tape& tape, const BoundParams& b, const PolicyParams& p,
                       ad::Var embeddings, const ScheduleState& state);

// Log-probabilities over ops (n x 1), masked to removable ops. With
// cfg.uniform_backward the result is the uniform distribution, constant on
// the tape.
ad::Var backward_policy(ad::Tape& tape, const BoundParams& b, const PolicyParams& p,
                        ad::Var embeddings, const ScheduleState& state);

// Scalar log Z(G_C, sigma) from mean-pooled embeddings. Requires cfg.logz_head.
ad::Var logz_estimate(ad::Tape& tape, const BoundParams& b, const PolicyParams& p,
                      ad::Var embeddings);

}  // namespace flowsched
