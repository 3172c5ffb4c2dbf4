#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mlgcn/tensor.hpp"

namespace mlgcn {

class Tape;

// Handle to a value recorded on a tape. Cheap to copy; only meaningful with
// the tape that produced it.
class Var {
public:
    Var() = default;
    bool valid() const { return id_ >= 0; }

private:
    friend class Tape;
    explicit Var(std::int32_t id) : id_(id) {}
    std::int32_t id_ = -1;
};

// Define-by-run reverse-mode tape. Nodes are appended in execution order, so
// operands always precede their consumers; backward walks the list once in
// reverse and accumulates gradients additively across fan-out. One backward
// pass per tape.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers a tensor as a leaf. Gradients are retained only for leaves
    // whose tensor has requires_grad set.
    Var input(const Tensor& t);

    const Tensor& value(Var v) const;

    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var add(Var a, Var b);
    Var mul(Var a, Var b); // elementwise
    Var leaky_relu(Var x, double slope);
    Var sigmoid(Var x);
    Var global_max_pool(Var maps);

    // Scalar loss: mean over rows of the per-row class sums of the stable
    // logits-form binary cross-entropy. Targets are a fixed tensor, not a Var.
    Var bce_with_logits(Var scores, Tensor targets);

    // Gradient of `loss` (a scalar) w.r.t. every tracked leaf.
    void backward(Var loss);

    // Gradient of a tracked leaf after backward(); zero tensor if the leaf
    // did not participate in the loss.
    Tensor grad(Var v) const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        bool needs_grad = false;
        bool tracked_leaf = false;
        // Accumulates into the tape's gradient buffers of this node's inputs.
        std::function<void(Tape&, const std::vector<double>&)> backprop;
    };

    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
    bool backward_done_ = false;

    const Node& node_at(Var v) const;
    std::int32_t check(Var v) const;
    Var emit(Node&& n);
    bool needs(std::int32_t id) const { return nodes_[id].needs_grad; }
    std::vector<double>& grad_buffer(std::int32_t id);
};

} // namespace mlgcn
