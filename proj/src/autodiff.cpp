#include "flowsched/autodiff.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace flowsched::ad {

const Matrix& Var::value() const { return tape_->nodes_[index_].value; }
const Matrix& Var::grad() const { return tape_->nodes_[index_].grad; }

Var Tape::emplace(Matrix value, bool needs_grad, PullFn pull, const char* op) {
    if (!value.allFinite())
        throw numeric_error(std::string("autodiff: non-finite value produced by ") + op);
    Node n;
    n.value = std::move(value);
    n.needs_grad = grad_enabled_ && needs_grad;
    if (n.needs_grad) {
        n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
        n.pull = std::move(pull);
    }
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::input(Matrix value, bool requires_grad) {
    return emplace(std::move(value), requires_grad, {}, "input");
}

Var Tape::scalar(double v, bool requires_grad) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return input(std::move(m), requires_grad);
}

Var Tape::matmul(Var a, Var b) {
    if (a.cols() != b.rows()) throw std::logic_error("matmul: inner dimensions disagree");
    const int ia = a.index(), ib = b.index();
    return emplace(
        a.value() * b.value(), needs(a) || needs(b),
        [ia, ib](Tape& t, const Matrix& g) {
            if (t.nodes_[ia].needs_grad) t.grad_of(ia) += g * t.value_of(ib).transpose();
            if (t.nodes_[ib].needs_grad) t.grad_of(ib) += t.value_of(ia).transpose() * g;
        },
        "matmul");
}

Var Tape::matmul_nt(Var a, Var b) {
    if (a.cols() != b.cols()) throw std::logic_error("matmul_nt: inner dimensions disagree");
    const int ia = a.index(), ib = b.index();
    return emplace(
        a.value() * b.value().transpose(), needs(a) || needs(b),
        [ia, ib](Tape& t, const Matrix& g) {
            if (t.nodes_[ia].needs_grad) t.grad_of(ia) += g * t.value_of(ib);
            if (t.nodes_[ib].needs_grad) t.grad_of(ib) += g.transpose() * t.value_of(ia);
        },
        "matmul_nt");
}

Var Tape::add(Var a, Var b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::logic_error("add: shape mismatch");
    const int ia = a.index(), ib = b.index();
    return emplace(
        a.value() + b.value(), needs(a) || needs(b),
        [ia, ib](Tape& t, const Matrix& g) {
            if (t.nodes_[ia].needs_grad) t.grad_of(ia) += g;
            if (t.nodes_[ib].needs_grad) t.grad_of(ib) += g;
        },
        "add");
}

Var Tape::sub(Var a, Var b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::logic_error("sub: shape mismatch");
    const int ia = a.index(), ib = b.index();
    return emplace(
        a.value() - b.value(), needs(a) || needs(b),
        [ia, ib](Tape& t, const Matrix& g) {
            if (t.nodes_[ia].needs_grad) t.grad_of(ia) += g;
            if (t.nodes_[ib].needs_grad) t.grad_of(ib) -= g;
        },
        "sub");
}

Var Tape::cmul(Var a, Var b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::logic_error("cmul: shape mismatch");
    const int ia = a.index(), ib = b.index();
    return emplace(
        a.value().cwiseProduct(b.value()), needs(a) || needs(b),
        [ia, ib](Tape& t, const Matrix& g) {
            if (t.nodes_[ia].needs_grad) t.grad_of(ia) += g.cwiseProduct(t.value_of(ib));
            if (t.nodes_[ib].needs_grad) t.grad_of(ib) += g.cwiseProduct(t.value_of(ia));
        },
        "cmul");
}

Var Tape::add_rowvec(Var a, Var r) {
    if (r.rows() != 1 || r.cols() != a.cols())
        throw std::logic_error("add_rowvec: r must be 1 x cols(a)");
    const int ia = a.index(), ir = r.index();
    return emplace(
        a.value().rowwise() + r.value().row(0), needs(a) || needs(r),
        [ia, ir](Tape& t, const Matrix& g) {
            if (t.nodes_[ia].needs_grad) t.grad_of(ia) += g;
            if (t.nodes_[ir].needs_grad) t.grad_of(ir) += g.colwise().sum();
        },
        "add_rowvec");
}

Var Tape::mul_rowvec(Var a, Var r) {
    if (r.rows() != 1 || r.cols() != a.cols())
        throw std::logic_error("mul_rowvec: r must be 1 x cols(a)");
    const int ia = a.index(), ir = r.index();
    return emplace(
        a.value().array().rowwise() * r.value().row(0).array(), needs(a) || needs(r),
        [ia, ir](Tape& t, const Matrix& g) {
            if (t.nodes_[ia].needs_grad)
                t.grad_of(ia).array() += g.array().rowwise() * t.value_of(ir).row(0).array();
            if (t.nodes_[ir].needs_grad)
                t.grad_of(ir) += g.cwiseProduct(t.value_of(ia)).colwise().sum();
        },
        "mul_rowvec");
}

Var Tape::scale(Var a, double s) {
    const int ia = a.index();
    return emplace(
        a.value() * s, needs(a),
        [ia, s](Tape& t, const Matrix& g) {
            if (t.nodes_[ia].needs_grad) t.grad_of(ia) += g * s;
        },
        "scale");
}

Var Tape::relu(Var a) {
    const int ia = a.index();
    return emplace(
        a.value().cwiseMax(0.0), needs(a),
        [ia](Tape& t, const Matrix& g) {
            if (!t.nodes_[ia].needs_grad) return;
            t.grad_of(ia).array() += g.array() * (t.value_of(ia).array() > 0.0).cast<double>();
        },
        "relu");
}

Var Tape::layer_norm(Var a, Var gain, Var bias, double eps) {
    if (gain.rows() != 1 || gain.cols() != a.cols() || bias.rows() != 1 ||
        bias.cols() != a.cols())
        throw std::logic_error("layer_norm: gain/bias must be 1 x cols(a)");
    const int ia = a.index(), ig = gain.index(), ib = bias.index();
    const auto& x = a.value();
    const int n = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());

    Matrix xhat(n, w);
    Eigen::VectorXd inv_std(n);
    for (int i = 0; i < n; ++i) {
        double mu = x.row(i).mean();
        double var = (x.row(i).array() - mu).square().mean();
        double is = 1.0 / std::sqrt(var + eps);
        inv_std(i) = is;
        xhat.row(i) = (x.row(i).array() - mu) * is;
    }
    Matrix y = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
               bias.value().row(0).array();

    return emplace(
        std::move(y), needs(a) || needs(gain) || needs(bias),
        [ia, ig, ib, xhat, inv_std](Tape& t, const Matrix& g) {
            if (t.nodes_[ig].needs_grad) t.grad_of(ig) += g.cwiseProduct(xhat).colwise().sum();
            if (t.nodes_[ib].needs_grad) t.grad_of(ib) += g.colwise().sum();
            if (!t.nodes_[ia].needs_grad) return;
            Matrix dxhat = g.array().rowwise() * t.value_of(ig).row(0).array();
            Matrix& da = t.grad_of(ia);
            for (int i = 0; i < dxhat.rows(); ++i) {
                double m1 = dxhat.row(i).mean();
                double m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
                da.row(i).array() +=
                    inv_std(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
            }
        },
        "layer_norm");
}

Var Tape::cols(Var a, int start, int len) {
    if (start < 0 || len <= 0 || start + len > a.cols())
        throw std::logic_error("cols: slice out of range");
    const int ia = a.index();
    return emplace(
        a.value().middleCols(start, len), needs(a),
        [ia, start, len](Tape& t, const Matrix& g) {
            if (t.nodes_[ia].needs_grad) t.grad_of(ia).middleCols(start, len) += g;
        },
        "cols");
}

Var Tape::hcat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::logic_error("hcat: empty part list");
    int rows = parts.front().rows(), total = 0;
    bool any = false;
    for (const Var& p : parts) {
        if (p.rows() != rows) throw std::logic_error("hcat: row mismatch");
        total += p.cols();
        any = any || needs(p);
    }
    Matrix out(rows, total);
    std::vector<std::pair<int, int>> spans;  // (index, cols)
    int at = 0;
    for (const Var& p : parts) {
        out.middleCols(at, p.cols()) = p.value();
        spans.emplace_back(p.index(), p.cols());
        at += p.cols();
    }
    return emplace(
        std::move(out), any,
        [spans](Tape& t, const Matrix& g) {
            int from = 0;
            for (auto [idx, width] : spans) {
                if (t.nodes_[idx].needs_grad) t.grad_of(idx) += g.middleCols(from, width);
                from += width;
            }
        },
        "hcat");
}

Var Tape::masked_softmax_rows(Var a, const BoolMatrix& allowed) {
    const auto& x = a.value();
    if (allowed.rows() != x.rows() || allowed.cols() != x.cols())
        throw std::logic_error("masked_softmax_rows: mask shape mismatch");
    const int n = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
    Matrix p = Matrix::Zero(n, w);
    for (int i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < w; ++j)
            if (allowed(i, j)) mx = std::max(mx, x(i, j));
        if (!std::isfinite(mx))
            throw std::logic_error("masked_softmax_rows: row with no allowed entry");
        double z = 0.0;
        for (int j = 0; j < w; ++j)
            if (allowed(i, j)) {
                p(i, j) = std::exp(x(i, j) - mx);
                z += p(i, j);
            }
        p.row(i) /= z;
    }
    const int ia = a.index();
    return emplace(
        std::move(p), needs(a),
        [ia](Tape& t, const Matrix& g) {
            if (!t.nodes_[ia].needs_grad) return;
            // p is this node's value; masked entries are exactly 0 so they
            // contribute nothing.
            const Matrix& p = t.nodes_[t.backward_at_].value;
            Matrix& da = t.grad_of(ia);
            for (int i = 0; i < p.rows(); ++i) {
                double dot = g.row(i).dot(p.row(i));
                da.row(i).array() += p.row(i).array() * (g.row(i).array() - dot);
            }
        },
        "masked_softmax_rows");
}

Var Tape::masked_log_softmax_vec(Var a, const std::vector<char>& allowed) {
    const auto& x = a.value();
    if (x.cols() != 1 || static_cast<std::size_t>(x.rows()) != allowed.size())
        throw std::logic_error("masked_log_softmax_vec: expects k x 1 input matching mask");
    const int k = static_cast<int>(x.rows());
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j)
        if (allowed[j]) mx = std::max(mx, x(j, 0));
    if (!std::isfinite(mx))
        throw std::logic_error("masked_log_softmax_vec: no allowed entry");
    double z = 0.0;
    for (int j = 0; j < k; ++j)
        if (allowed[j]) z += std::exp(x(j, 0) - mx);
    double lse = mx + std::log(z);
    Matrix out(k, 1);
    for (int j = 0; j < k; ++j) out(j, 0) = allowed[j] ? x(j, 0) - lse : kMaskedLogit;

    const int ia = a.index();
    std::vector<char> mask = allowed;
    return emplace(
        std::move(out), needs(a),
        [ia, mask](Tape& t, const Matrix& g) {
            if (!t.nodes_[ia].needs_grad) return;
            const Matrix& logp = t.nodes_[t.backward_at_].value;
            double gsum = 0.0;
            for (int j = 0; j < g.rows(); ++j)
                if (mask[j]) gsum += g(j, 0);
            Matrix& da = t.grad_of(ia);
            for (int j = 0; j < g.rows(); ++j)
                if (mask[j]) da(j, 0) += g(j, 0) - gsum * std::exp(logp(j, 0));
        },
        "masked_log_softmax_vec");
}

Var Tape::pick(Var a, int row, int col) {
    if (row < 0 || row >= a.rows() || col < 0 || col >= a.cols())
        throw std::logic_error("pick: index out of range");
    const int ia = a.index();
    Matrix out(1, 1);
    out(0, 0) = a.value()(row, col);
    return emplace(
        std::move(out), needs(a),
        [ia, row, col](Tape& t, const Matrix& g) {
            if (t.nodes_[ia].needs_grad) t.grad_of(ia)(row, col) += g(0, 0);
        },
        "pick");
}

Var Tape::sum(Var a) {
    const int ia = a.index();
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return emplace(
        std::move(out), needs(a),
        [ia](Tape& t, const Matrix& g) {
            if (t.nodes_[ia].needs_grad) t.grad_of(ia).array() += g(0, 0);
        },
        "sum");
}

Var Tape::mean_rows(Var a) {
    const int ia = a.index();
    const double inv_n = 1.0 / static_cast<double>(a.rows());
    return emplace(
        a.value().colwise().mean(), needs(a),
        [ia, inv_n](Tape& t, const Matrix& g) {
            if (!t.nodes_[ia].needs_grad) return;
            t.grad_of(ia) += (Eigen::VectorXd::Ones(t.value_of(ia).rows()) * g.row(0)) * inv_n;
        },
        "mean_rows");
}

Var Tape::flatten_rowmajor(Var a) {
    const int ia = a.index();
    const int r = a.rows(), c = a.cols();
    Matrix out(r * c, 1);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out(i * c + j, 0) = a.value()(i, j);
    return emplace(
        std::move(out), needs(a),
        [ia, r, c](Tape& t, const Matrix& g) {
            if (!t.nodes_[ia].needs_grad) return;
            Matrix& da = t.grad_of(ia);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) da(i, j) += g(i * c + j, 0);
        },
        "flatten_rowmajor");
}

void Tape::backward(Var root, double seed) {
    if (!grad_enabled_) throw std::logic_error("backward: tape built with gradients disabled");
    if (root.rows() != 1 || root.cols() != 1)
        throw std::logic_error("backward: root must be a 1x1 scalar");
    Node& r = nodes_[root.index()];
    if (!r.needs_grad) return;  // loss does not depend on any parameter
    r.grad(0, 0) += seed;
    for (int i = root.index(); i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.needs_grad || !n.pull) continue;
        backward_at_ = i;
        n.pull(*this, n.grad);
    }
}

}  // namespace flowsched::ad
