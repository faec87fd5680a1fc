#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "flowsched/common.hpp"

namespace flowsched::ad {

using Matrix = Eigen::MatrixXd;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Logit value used for masked-out entries. exp underflows to exactly zero,
// so masked actions carry probability 0 in linear space.
inline constexpr double kMaskedLogit = -1e30;

class Tape;

// Handle to a node on a tape. Cheap to copy; invalidated with its tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, int index) : tape_(tape), index_(index) {}

    const Matrix& value() const;
    const Matrix& grad() const;
    int rows() const { return static_cast<int>(value().rows()); }
    int cols() const { return static_cast<int>(value().cols()); }
    bool valid() const { return tape_ != nullptr; }
    int index() const { return index_; }

private:
    friend class Tape;
    Tape* tape_ = nullptr;
    int index_ = -1;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the reverse
// sweep is already topological. With grad_enabled=false the tape evaluates
// values only (used for rollouts that never need gradients).
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    // Leaves. Gradients accumulate only on requires_grad leaves and interior
    // nodes reachable from them.
    Var input(Matrix value, bool requires_grad);
    Var constant(Matrix value) { return input(std::move(value), false); }
    Var scalar(double v, bool requires_grad = false);

    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);  // A * B^T
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var cmul(Var a, Var b);
    Var add_rowvec(Var a, Var r);  // r is 1 x cols, broadcast over rows
    Var mul_rowvec(Var a, Var r);
    Var scale(Var a, double s);
    Var relu(Var a);
    // Row-wise normalization with learned gain/bias (1 x cols each).
    Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);
    Var cols(Var a, int start, int len);
    Var hcat(const std::vector<Var>& parts);
    // Row-wise softmax restricted to allowed entries; masked entries get
    // probability exactly 0. Every row must have at least one allowed entry.
    Var masked_softmax_rows(Var a, const BoolMatrix& allowed);
    // a is k x 1; log-softmax over allowed entries, kMaskedLogit elsewhere.
    Var masked_log_softmax_vec(Var a, const std::vector<char>& allowed);
    Var pick(Var a, int row, int col);  // 1x1
    Var sum(Var a);                     // 1x1
    Var mean_rows(Var a);               // 1 x cols
    // Row-major flatten to (rows*cols) x 1: entry r*cols + c = A(r, c).
    Var flatten_rowmajor(Var a);

    // Reverse sweep from `root` (1x1) seeded with `seed`.
    void backward(Var root, double seed = 1.0);

    std::size_t size() const { return nodes_.size(); }

private:
    friend class Var;

    // pull(tape, self_grad) accumulates self_grad into the parents' grads.
    using PullFn = std::function<void(Tape&, const Matrix&)>;

    struct Node {
        Matrix value;
        Matrix grad;
        PullFn pull;
        bool needs_grad = false;
    };

    Var emplace(Matrix value, bool needs_grad, PullFn pull, const char* op);
    bool needs(Var v) const { return nodes_[v.index()].needs_grad; }
    Matrix& grad_of(int index) { return nodes_[index].grad; }
    const Matrix& value_of(int index) const { return nodes_[index].value; }

    std::vector<Node> nodes_;
    bool grad_enabled_;
    int backward_at_ = -1;  // node whose pull is currently running
};

}  // namespace flowsched::ad
