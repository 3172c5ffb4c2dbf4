#include "mlgcn/autodiff.hpp"

#include <utility>

#include "mlgcn/errors.hpp"
#include "mlgcn/kernels.hpp"

namespace mlgcn {

std::int32_t Tape::check(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id_) >= nodes_.size()) {
        throw UsageError("variable does not belong to this tape");
    }
    return v.id_;
}

const Tape::Node& Tape::node_at(Var v) const { return nodes_[check(v)]; }

const Tensor& Tape::value(Var v) const { return node_at(v).value; }

Var Tape::emit(Node&& n) {
    nodes_.push_back(std::move(n));
    return Var(static_cast<std::int32_t>(nodes_.size() - 1));
}

std::vector<double>& Tape::grad_buffer(std::int32_t id) {
    auto& buf = grads_[id];
    if (buf.empty()) buf.assign(nodes_[id].value.numel(), 0.0);
    return buf;
}

Var Tape::input(const Tensor& t) {
    if (!t.defined()) throw UsageError("cannot record an undefined tensor");
    Node n;
    n.value = t;
    n.needs_grad = t.requires_grad();
    n.tracked_leaf = t.requires_grad();
    return emit(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
    const std::int32_t ia = check(a), ib = check(b);
    Node n;
    n.value = linalg::matmul(nodes_[ia].value, nodes_[ib].value);
    n.needs_grad = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
    if (n.needs_grad) {
        n.backprop = [ia, ib](Tape& t, const std::vector<double>& gout) {
            const Tensor& av = t.nodes_[ia].value;
            const Tensor& bv = t.nodes_[ib].value;
            const std::size_t m = av.dim(0), k = av.dim(1);
            const std::size_t nn = bv.rank() == 2 ? bv.dim(1) : 1;
            if (t.needs(ia)) {
                // dA += gout * B^T
                std::vector<double> bt(k * nn);
                kernels::transpose(bv.data().data(), bt.data(), k, nn);
                std::vector<double> da(m * k);
                kernels::matmul(gout.data(), bt.data(), da.data(), m, nn, k);
                kernels::axpy(1.0, da.data(), t.grad_buffer(ia).data(), m * k);
            }
            if (t.needs(ib)) {
                // dB += A^T * gout
                std::vector<double> at(m * k);
                kernels::transpose(av.data().data(), at.data(), m, k);
                std::vector<double> db(k * nn);
                kernels::matmul(at.data(), gout.data(), db.data(), k, m, nn);
                kernels::axpy(1.0, db.data(), t.grad_buffer(ib).data(), k * nn);
            }
        };
    }
    return emit(std::move(n));
}

Var Tape::transpose(Var a) {
    const std::int32_t ia = check(a);
    Node n;
    n.value = linalg::transpose(nodes_[ia].value);
    n.needs_grad = nodes_[ia].needs_grad;
    if (n.needs_grad) {
        const std::size_t rows = n.value.dim(0), cols = n.value.dim(1);
        n.backprop = [ia, rows, cols](Tape& t, const std::vector<double>& gout) {
            if (!t.needs(ia)) return;
            std::vector<double> gt(gout.size());
            kernels::transpose(gout.data(), gt.data(), rows, cols);
            kernels::axpy(1.0, gt.data(), t.grad_buffer(ia).data(), gt.size());
        };
    }
    return emit(std::move(n));
}

Var Tape::add(Var a, Var b) {
    const std::int32_t ia = check(a), ib = check(b);
    Node n;
    n.value = linalg::add(nodes_[ia].value, nodes_[ib].value);
    n.needs_grad = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
    if (n.needs_grad) {
        n.backprop = [ia, ib](Tape& t, const std::vector<double>& gout) {
            if (t.needs(ia)) kernels::axpy(1.0, gout.data(), t.grad_buffer(ia).data(), gout.size());
            if (t.needs(ib)) kernels::axpy(1.0, gout.data(), t.grad_buffer(ib).data(), gout.size());
        };
    }
    return emit(std::move(n));
}

Var Tape::mul(Var a, Var b) {
    const std::int32_t ia = check(a), ib = check(b);
    Node n;
    n.value = linalg::mul(nodes_[ia].value, nodes_[ib].value);
    n.needs_grad = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
    if (n.needs_grad) {
        n.backprop = [ia, ib](Tape& t, const std::vector<double>& gout) {
            const std::size_t sz = gout.size();
            std::vector<double> tmp(sz);
            if (t.needs(ia)) {
                kernels::mul(gout.data(), t.nodes_[ib].value.data().data(), tmp.data(), sz);
                kernels::axpy(1.0, tmp.data(), t.grad_buffer(ia).data(), sz);
            }
            if (t.needs(ib)) {
                kernels::mul(gout.data(), t.nodes_[ia].value.data().data(), tmp.data(), sz);
                kernels::axpy(1.0, tmp.data(), t.grad_buffer(ib).data(), sz);
            }
        };
    }
    return emit(std::move(n));
}

Var Tape::leaky_relu(Var x, double slope) {
    const std::int32_t ix = check(x);
    Node n;
    n.value = linalg::leaky_relu(nodes_[ix].value, slope);
    n.needs_grad = nodes_[ix].needs_grad;
    if (n.needs_grad) {
        n.backprop = [ix, slope](Tape& t, const std::vector<double>& gout) {
            if (!t.needs(ix)) return;
            kernels::leaky_relu_grad(t.nodes_[ix].value.data().data(), gout.data(),
                                     t.grad_buffer(ix).data(), gout.size(), slope);
        };
    }
    return emit(std::move(n));
}

Var Tape::sigmoid(Var x) {
    const std::int32_t ix = check(x);
    Node n;
    n.value = linalg::sigmoid(nodes_[ix].value);
    n.needs_grad = nodes_[ix].needs_grad;
    if (n.needs_grad) {
        n.backprop = [ix, y = n.value](Tape& t, const std::vector<double>& gout) {
            if (!t.needs(ix)) return;
            kernels::sigmoid_grad(y.data().data(), gout.data(),
                                  t.grad_buffer(ix).data(), gout.size());
        };
    }
    return emit(std::move(n));
}

Var Tape::global_max_pool(Var maps) {
    const std::int32_t im = check(maps);
    std::vector<std::size_t> argmax;
    Node n;
    n.value = linalg::global_max_pool(nodes_[im].value, &argmax);
    n.needs_grad = nodes_[im].needs_grad;
    if (n.needs_grad) {
        const std::size_t spatial = nodes_[im].value.dim(1) * nodes_[im].value.dim(2);
        n.backprop = [im, spatial, arg = std::move(argmax)](Tape& t,
                                                            const std::vector<double>& gout) {
            if (!t.needs(im)) return;
            auto& gin = t.grad_buffer(im);
            for (std::size_t c = 0; c < gout.size(); ++c) {
                gin[c * spatial + arg[c]] += gout[c];
            }
        };
    }
    return emit(std::move(n));
}

Var Tape::bce_with_logits(Var scores, Tensor targets) {
    const std::int32_t is = check(scores);
    const double loss = linalg::bce_with_logits(nodes_[is].value, targets);
    Node n;
    n.value = Tensor::scalar(loss);
    n.needs_grad = nodes_[is].needs_grad;
    if (n.needs_grad) {
        const double inv_batch = 1.0 / static_cast<double>(nodes_[is].value.dim(0));
        n.backprop = [is, inv_batch, y = std::move(targets)](Tape& t,
                                                             const std::vector<double>& gout) {
            if (!t.needs(is)) return;
            const Tensor& s = t.nodes_[is].value;
            kernels::bce_with_logits_grad(s.data().data(), y.data().data(),
                                          gout[0] * inv_batch,
                                          t.grad_buffer(is).data(), s.numel());
        };
    }
    return emit(std::move(n));
}

void Tape::backward(Var loss) {
    const std::int32_t il = check(loss);
    if (backward_done_) {
        throw UsageError("backward already ran on this tape; record a new forward pass");
    }
    if (nodes_[il].value.numel() != 1) {
        throw UsageError("backward needs a scalar loss, got " +
                         shape_str(nodes_[il].value.shape()));
    }
    backward_done_ = true;
    grads_.assign(nodes_.size(), {});
    grad_buffer(il)[0] = 1.0;
    for (std::int32_t i = il; i >= 0; --i) {
        if (!nodes_[i].needs_grad || grads_[i].empty() || !nodes_[i].backprop) continue;
        nodes_[i].backprop(*this, grads_[i]);
    }
}

Tensor Tape::grad(Var v) const {
    const std::int32_t id = check(v);
    if (!nodes_[id].tracked_leaf) {
        throw UsageError("gradient requested for an untracked tensor");
    }
    if (!backward_done_) throw UsageError("backward has not run on this tape");
    if (grads_[id].empty()) return Tensor::zeros(nodes_[id].value.shape());
    return Tensor(nodes_[id].value.shape(), grads_[id]);
}

} // namespace mlgcn
