#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "dcdm/tensor.hpp"

namespace dcdm {

/// Handle to a node on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode autodiff tape over dense tensors. A tape is built once per
/// forward pass and discarded after backward(); nodes are evaluated eagerly.
class Tape {
public:
    /// Constant leaf (no gradient tracked).
    Var value(Tensor v);
    /// Differentiable leaf (parameters, or inputs probed by gradient checks).
    Var param(Tensor v);

    const Tensor& val(Var v) const;
    const Tensor& grad(Var v) const;

    // elementwise
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, real c);
    Var silu(Var a);
    Var relu(Var a);
    Var tanh(Var a);

    // shape
    Var reshape(Var a, std::vector<int> shape);
    Var concat_last(Var a, Var b);
    Var transpose_last2(Var a);  // [B,S,K] -> [B,K,S]

    // linear algebra
    Var matmul(Var a, Var b);                      // [M,K]x[K,N]
    Var linear(Var x, Var w, Var b);               // [N,Din]x[Din,Dout]+[Dout]
    Var bmm(Var a, Var b);                         // [B,S,K]x[B,K,T]

    // conv / spatial ([N,H,W,C] layout)
    Var conv2d(Var x, Var w, Var b, int kh, int kw, int stride, int pad);
    Var upsample2x(Var x);
    Var gap(Var x);                                // [N,H,W,C] -> [N,C]
    Var add_chan(Var x, Var v);                    // x[N,H,W,C] + v[N,C] broadcast
    Var group_norm(Var x, Var gamma, Var beta, int groups, real eps = 1e-5);

    // lookups / broadcast
    Var rows(Var table, const std::vector<int>& indices);  // gather rows
    Var broadcast_rows(Var row, int n);                    // [1,D] -> [N,D]

    // reductions / losses
    Var softmax_last(Var a);
    Var mse(Var a, Var b);                                   // scalar mean((a-b)^2)
    Var cross_entropy(Var logits, const std::vector<int>& labels);  // scalar

    /// Seed d(loss)/d(loss)=1 and propagate to all leaves. loss must be scalar.
    void backward(Var loss);

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void()> backprop;  // empty for leaves
    };

    Var make(Tensor v, bool requires_grad, std::function<void()> backprop = nullptr);
    Node& node(Var v);
    const Node& node(Var v) const;
    bool needs_grad(Var v) const { return node(v).requires_grad; }
    void ensure_grad(Var v);
    Tensor& grad_ref(Var v);

    std::vector<Node> nodes_;
};

}  // namespace dcdm
