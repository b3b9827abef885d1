#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dmk/tensor.hpp"

namespace dmk {

// Probability clamp applied before logarithms in the cross-entropy losses.
inline constexpr double kProbClampEps = 1e-7;

// Learnable tensor with an accumulated gradient of the same shape.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter(std::string name_, Tensor value_)
        : name(std::move(name_)), value(std::move(value_)), grad(Tensor::zeros(value.shape())) {}

    void zero_grad() { std::fill(grad.values().begin(), grad.values().end(), 0.0); }
};

inline void zero_grads(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) p->zero_grad();
}

class Tape;

// Handle to one node of a recorded computation.
struct Var {
    Tape* tape = nullptr;
    int index = -1;

    const Tensor& value() const;
    const Tensor& grad() const;
};

enum class Activation { Elu, Relu, Sigmoid, Tanh };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Elu: return "elu";
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
    }
    return "?";
}

// Dynamic tape for reverse-mode differentiation. Every operation appends a
// node holding its forward value and a closure that scatters the node's
// gradient back to its inputs; backward() sweeps the nodes in reverse
// creation order, which is already a topological order.
class Tape {
public:
    // Leaf the gradient sweep ignores.
    Var constant(Tensor v) { return push("constant", std::move(v), {}); }

    // Leaf bound to an external parameter; backward() adds into p.grad.
    Var param(Parameter& p) {
        Parameter* bound = &p;
        return push("param", p.value, [bound](Tape& t, int self) {
            const Tensor& g = t.nodes_[self].grad;
            for (std::size_t i = 0; i < g.size(); ++i) bound->grad[i] += g[i];
        });
    }

    Var add(Var a, Var b) {
        require_same_shape("add", a, b);
        Tensor out = val(a);
        const Tensor& vb = val(b);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
        int ia = a.index, ib = b.index;
        return push("add", std::move(out), [ia, ib](Tape& t, int self) {
            t.accumulate(ia, t.nodes_[self].grad);
            t.accumulate(ib, t.nodes_[self].grad);
        });
    }

    Var sub(Var a, Var b) {
        require_same_shape("sub", a, b);
        Tensor out = val(a);
        const Tensor& vb = val(b);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
        int ia = a.index, ib = b.index;
        return push("sub", std::move(out), [ia, ib](Tape& t, int self) {
            const Tensor& g = t.nodes_[self].grad;
            t.accumulate(ia, g);
            Tensor& gb = t.nodes_[ib].grad;
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        });
    }

    // Elementwise product.
    Var mul(Var a, Var b) {
        require_same_shape("mul", a, b);
        const Tensor& va = val(a);
        const Tensor& vb = val(b);
        Tensor out = va;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
        int ia = a.index, ib = b.index;
        return push("mul", std::move(out), [ia, ib](Tape& t, int self) {
            const Tensor& g = t.nodes_[self].grad;
            const Tensor& va2 = t.nodes_[ia].value;
            const Tensor& vb2 = t.nodes_[ib].value;
            Tensor& ga = t.nodes_[ia].grad;
            Tensor& gb = t.nodes_[ib].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i] * vb2[i];
                gb[i] += g[i] * va2[i];
            }
        });
    }

    Var scale(Var a, double c) {
        Tensor out = val(a);
        for (double& v : out.values()) v *= c;
        int ia = a.index;
        return push("scale", std::move(out), [ia, c](Tape& t, int self) {
            const Tensor& g = t.nodes_[self].grad;
            Tensor& ga = t.nodes_[ia].grad;
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
        });
    }

    // w: [m,n] row-major, x: [n] -> [m].
    Var matvec(Var w, Var x) {
        const Tensor& vw = val(w);
        const Tensor& vx = val(x);
        if (vw.rank() != 2 || vx.rank() != 1 || vw.dim(1) != vx.dim(0))
            throw std::invalid_argument("matvec: shape mismatch between weight " +
                                        vw.shape_string() + " and input " + vx.shape_string());
        std::size_t m = vw.dim(0), n = vw.dim(1);
        Tensor out = Tensor::zeros({m});
        for (std::size_t r = 0; r < m; ++r) {
            double acc = 0.0;
            const double* row = vw.data() + r * n;
            for (std::size_t c = 0; c < n; ++c) acc += row[c] * vx[c];
            out[r] = acc;
        }
        int iw = w.index, ix = x.index;
        return push("matvec", std::move(out), [iw, ix, m, n](Tape& t, int self) {
            const Tensor& g = t.nodes_[self].grad;
            const Tensor& vw2 = t.nodes_[iw].value;
            const Tensor& vx2 = t.nodes_[ix].value;
            Tensor& gw = t.nodes_[iw].grad;
            Tensor& gx = t.nodes_[ix].grad;
            for (std::size_t r = 0; r < m; ++r) {
                double gr = g[r];
                const double* wrow = vw2.data() + r * n;
                double* gwrow = gw.data() + r * n;
                for (std::size_t c = 0; c < n; ++c) {
                    gwrow[c] += gr * vx2[c];
                    gx[c] += gr * wrow[c];
                }
            }
        });
    }

    // w x + b
    Var linear(Var w, Var b, Var x) { return add(matvec(w, x), b); }

    Var elu(Var x) {
        Tensor out = val(x);
        for (double& v : out.values()) v = v > 0.0 ? v : std::expm1(v);
        int ix = x.index;
        return push("elu", std::move(out), [ix](Tape& t, int self) {
            const Tensor& g = t.nodes_[self].grad;
            const Tensor& vx = t.nodes_[ix].value;
            Tensor& gx = t.nodes_[ix].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                gx[i] += g[i] * (vx[i] > 0.0 ? 1.0 : std::exp(vx[i]));
        });
    }

    Var relu(Var x) {
        Tensor out = val(x);
        for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
        int ix = x.index;
        return push("relu", std::move(out), [ix](Tape& t, int self) {
            const Tensor& g = t.nodes_[self].grad;
            const Tensor& vx = t.nodes_[ix].value;
            Tensor& gx = t.nodes_[ix].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (vx[i] > 0.0) gx[i] += g[i];
        });
    }

    Var sigmoid(Var x) {
        Tensor out = val(x);
        for (double& v : out.values()) v = stable_sigmoid(v);
        int ix = x.index;
        Var r = push("sigmoid", std::move(out), [ix](Tape& t, int self) {
            const Tensor& g = t.nodes_[self].grad;
            const Tensor& s = t.nodes_[self].value;
            Tensor& gx = t.nodes_[ix].grad;
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s[i] * (1.0 - s[i]);
        });
        return r;
    }

    Var tanh(Var x) {
        Tensor out = val(x);
        for (double& v : out.values()) v = std::tanh(v);
        int ix = x.index;
        return push("tanh", std::move(out), [ix](Tape& t, int self) {
            const Tensor& g = t.nodes_[self].grad;
            const Tensor& y = t.nodes_[self].value;
            Tensor& gx = t.nodes_[ix].grad;
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
        });
    }

    Var activation(Activation kind, Var x) {
        switch (kind) {
            case Activation::Elu: return elu(x);
            case Activation::Relu: return relu(x);
            case Activation::Sigmoid: return sigmoid(x);
            case Activation::Tanh: return tanh(x);
        }
        throw std::logic_error("activation: unknown kind");
    }

    // Pass-through gradient strictly inside (lo, hi), zero outside.
    Var clamp(Var x, double lo, double hi) {
        Tensor out = val(x);
        for (double& v : out.values()) v = std::min(hi, std::max(lo, v));
        int ix = x.index;
        return push("clamp", std::move(out), [ix, lo, hi](Tape& t, int self) {
            const Tensor& g = t.nodes_[self].grad;
            const Tensor& vx = t.nodes_[ix].value;
            Tensor& gx = t.nodes_[ix].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (vx[i] > lo && vx[i] < hi) gx[i] += g[i];
        });
    }

    Var dot(Var a, Var b) {
        require_same_shape("dot", a, b);
        const Tensor& va = val(a);
        const Tensor& vb = val(b);
        double acc = 0.0;
        for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * vb[i];
        int ia = a.index, ib = b.index;
        return push("dot", Tensor::scalar(acc), [ia, ib](Tape& t, int self) {
            double g = t.nodes_[self].grad[0];
            const Tensor& va2 = t.nodes_[ia].value;
            const Tensor& vb2 = t.nodes_[ib].value;
            Tensor& ga = t.nodes_[ia].grad;
            Tensor& gb = t.nodes_[ib].grad;
            for (std::size_t i = 0; i < va2.size(); ++i) {
                ga[i] += g * vb2[i];
                gb[i] += g * va2[i];
            }
        });
    }

    Var sum(Var x) {
        const Tensor& vx = val(x);
        double acc = 0.0;
        for (double v : vx.values()) acc += v;
        int ix = x.index;
        return push("sum", Tensor::scalar(acc), [ix](Tape& t, int self) {
            double g = t.nodes_[self].grad[0];
            Tensor& gx = t.nodes_[ix].grad;
            for (double& v : gx.values()) v += g;
        });
    }

    Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(val(x).size())); }

    // Binary cross-entropy of a scalar prediction against a hard label.
    // The prediction is clamped to [eps, 1-eps] before the logarithms;
    // no gradient flows from the clamped region.
    Var bce_loss(Var pred, double label) {
        const Tensor& vp = val(pred);
        if (vp.size() != 1)
            throw std::invalid_argument("bce_loss: prediction must be scalar, got " +
                                        vp.shape_string());
        if (label != 0.0 && label != 1.0)
            throw std::invalid_argument("bce_loss: label must be 0 or 1, got " +
                                        std::to_string(label));
        double x = clamp_prob(vp[0]);
        double loss = -(label * std::log(x) + (1.0 - label) * std::log(1.0 - x));
        int ip = pred.index;
        return push("bce_loss", Tensor::scalar(loss), [ip, label](Tape& t, int self) {
            double g = t.nodes_[self].grad[0];
            double raw = t.nodes_[ip].value[0];
            if (raw <= kProbClampEps || raw >= 1.0 - kProbClampEps) return;
            t.nodes_[ip].grad[0] += g * (-label / raw + (1.0 - label) / (1.0 - raw));
        });
    }

    // -log softmax(logits)[target], stabilized by max subtraction.
    Var cross_entropy(Var logits, std::size_t target) {
        const Tensor& vl = val(logits);
        if (vl.rank() != 1 || vl.size() < 2)
            throw std::invalid_argument("cross_entropy: logits must be a vector of >= 2 classes, got " +
                                        vl.shape_string());
        if (target >= vl.size())
            throw std::out_of_range("cross_entropy: class " + std::to_string(target) +
                                    " out of range [0, " + std::to_string(vl.size()) + ")");
        double lse = log_sum_exp(vl.values());
        double loss = lse - vl[target];
        int il = logits.index;
        return push("cross_entropy", Tensor::scalar(loss), [il, target, lse](Tape& t, int self) {
            double g = t.nodes_[self].grad[0];
            const Tensor& l = t.nodes_[il].value;
            Tensor& gl = t.nodes_[il].grad;
            for (std::size_t i = 0; i < l.size(); ++i) {
                double p = std::exp(l[i] - lse);
                gl[i] += g * (p - (i == target ? 1.0 : 0.0));
            }
        });
    }

    // Seeds the root gradient with 1 and sweeps the tape in reverse.
    void backward(Var root) {
        check_owned("backward", root);
        Node& r = nodes_[root.index];
        if (r.value.size() != 1)
            throw std::invalid_argument("backward: root must be scalar, got " +
                                        r.value.shape_string());
        r.grad[0] = 1.0;
        for (int i = root.index; i >= 0; --i)
            if (nodes_[i].back) nodes_[i].back(*this, i);
    }

    const Tensor& value_of(Var v) const {
        check_owned("value_of", v);
        return nodes_[v.index].value;
    }

    const Tensor& grad_of(Var v) const {
        check_owned("grad_of", v);
        return nodes_[v.index].grad;
    }

    std::size_t node_count() const { return nodes_.size(); }

    static double stable_sigmoid(double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
    }

    static double clamp_prob(double x) {
        return std::min(1.0 - kProbClampEps, std::max(kProbClampEps, x));
    }

    static double log_sum_exp(const std::vector<double>& v) {
        double m = v[0];
        for (double x : v) m = std::max(m, x);
        double s = 0.0;
        for (double x : v) s += std::exp(x - m);
        return m + std::log(s);
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&, int)> back;
    };

    Var push(const char* op, Tensor value, std::function<void(Tape&, int)> back) {
        if (!value.all_finite())
            throw std::runtime_error(std::string("tape: non-finite result from '") + op + "'");
        Node n;
        n.grad = Tensor::zeros(value.shape());
        n.value = std::move(value);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Var{this, static_cast<int>(nodes_.size()) - 1};
    }

    const Tensor& val(Var v) const {
        check_owned("op input", v);
        return nodes_[v.index].value;
    }

    void accumulate(int index, const Tensor& g) {
        Tensor& dst = nodes_[index].grad;
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }

    void require_same_shape(const char* op, Var a, Var b) const {
        if (!val(a).same_shape(val(b)))
            throw std::invalid_argument(std::string(op) + ": shape mismatch between " +
                                        val(a).shape_string() + " and " + val(b).shape_string());
    }

    void check_owned(const char* what, Var v) const {
        if (v.tape != this || v.index < 0 || v.index >= static_cast<int>(nodes_.size()))
            throw std::logic_error(std::string(what) + ": Var does not belong to this tape");
    }

    std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value_of(*this); }
inline const Tensor& Var::grad() const { return tape->grad_of(*this); }

// Elementwise activations on plain tensors, for inference paths.
inline Tensor softmax(const Tensor& logits) {
    double lse = Tape::log_sum_exp(logits.values());
    Tensor out = logits;
    for (double& v : out.values()) v = std::exp(v - lse);
    return out;
}

inline Tensor log_softmax(const Tensor& logits) {
    double lse = Tape::log_sum_exp(logits.values());
    Tensor out = logits;
    for (double& v : out.values()) v -= lse;
    return out;
}

}  // namespace dmk
