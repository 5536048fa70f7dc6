#pragma once

#include "owsm/tensor.hpp"

#include <functional>
#include <span>
#include <vector>

namespace owsm {

// Reverse-mode tape over the primitive set the model blocks are built from.
// Each op appends a node holding its output tensor and (when recording) a
// backward closure; backward() walks the tape in reverse creation order,
// which is a topological order by construction.
//
// All ops are pure: inputs are never written, outputs are freshly allocated.
// Reductions (matmul inner products, norms, softmax sums, the loss)
// accumulate in double regardless of the storage type.
template <class Real>
class Graph {
public:
    using Id = int;

    // record=false builds an inference-only graph: no grad buffers, no
    // closures, and bound parameters are only ever read.
    explicit Graph(bool record = true) : record_(record) {}

    bool recording() const { return record_; }
    size_t size() const { return nodes_.size(); }

    Id leaf(TensorT<Real> value, bool needs_grad = false);
    // Shares the parameter's value buffer; after backward() the node's
    // gradient is accumulated into p.grad.
    Id use(ParameterT<Real>& p);

    Id add(Id a, Id b);
    Id mul(Id a, Id b);
    Id scale(Id a, Real s);
    Id add_rowvec(Id x, Id b); // x[R,C] + b[C] broadcast over rows
    Id matmul(Id a, Id b);
    Id matmul_nt(Id a, Id b); // a[m,k] * b[n,k]^T -> [m,n]
    Id softmax_rows(Id x);    // softmax along the last axis of [R,C]
    Id causal_mask(Id s);     // square [L,L]; entries above the diagonal forced to -1e30
    Id layer_norm(Id x, Id gamma, Id beta, Real eps = Real(1e-5));
    Id dwconv(Id x, Id w); // x[T,C], w[K,C], same padding, K odd
    Id gelu(Id x);
    Id silu(Id x);
    Id sigmoid(Id x);
    Id slice_cols(Id x, int c0, int c1);
    Id concat_cols(Id a, Id b);
    Id embedding(std::vector<int> ids, Id table);
    Id unfold_k3_s2(Id x); // [T,C] -> [T/2, 3C]; window of 3 centered at odd rows
    Id sum_all(Id x);      // -> [1]
    // Mean negative log-softmax over positions whose target != ignore_id.
    Id cross_entropy(Id logits, std::vector<int> targets, int ignore_id);

    const TensorT<Real>& value(Id id) const { return nodes_[static_cast<size_t>(id)].val; }
    const std::vector<Real>& grad(Id id) const { return nodes_[static_cast<size_t>(id)].val.grad(); }

    void backward(Id loss);

private:
    struct Node {
        TensorT<Real> val;
        bool needs_grad = false;
        std::function<void(Graph&)> back; // empty for leaves / inference
    };

    Id push(TensorT<Real> val, bool needs_grad, std::function<void(Graph&)> back);
    TensorT<Real>& val_at(Id id) { return nodes_[static_cast<size_t>(id)].val; }
    std::vector<Real>& grad_at(Id id) { return nodes_[static_cast<size_t>(id)].val.grad(); }
    bool wants_grad(Id id) const { return record_ && nodes_[static_cast<size_t>(id)].needs_grad; }

    bool record_;
    std::vector<Node> nodes_;
    std::vector<std::pair<Id, ParameterT<Real>*>> bindings_;
};

using GraphF = Graph<float>;
using GraphD = Graph<double>;

// Max relative error between analytic gradients and central differences.
// loss_fn(true) must run forward+backward and leave gradients accumulated in
// the given parameters; loss_fn(false) must only return the loss. Samples up
// to max_coords coordinates per parameter (all of them when small).
double grad_check(const std::function<double(bool)>& loss_fn,
                  std::vector<ParameterT<double>*> params, double h = 1e-3,
                  int max_coords = 24, uint64_t sample_seed = 0);

} // namespace owsm
