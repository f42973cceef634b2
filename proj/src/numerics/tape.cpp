#include "fump/numerics/tape.hpp"

#include <stdexcept>
#include <string>

#include "fump/simd/kernels.hpp"

namespace fump::num {

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Tape::param(std::string_view name) {
    if (store_ == nullptr) throw std::logic_error("tape has no parameter store bound");
    const std::size_t index = store_->index_of(name);
    if (const auto it = bound_params_.find(index); it != bound_params_.end()) return Var(this, it->second);
    const Var v = push(store_->at(index).value, record_, nullptr);
    bound_params_.emplace(index, v.id());
    return v;
}

Var Tape::push(Tensor value, bool needs_grad, std::function<void()> backward_fn) {
    if (consumed_) throw std::logic_error("tape already replayed; start a new forward pass");
    Node node;
    node.value = std::move(value);
    node.needs_grad = needs_grad && record_;
    if (node.needs_grad) node.backward_fn = std::move(backward_fn);
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor& Tape::grad(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

void Tape::backward(Var loss) {
    if (consumed_) throw std::logic_error("backward called twice on the same forward pass");
    if (!record_) throw std::logic_error("backward on a non-recording tape");
    if (loss.value().size() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_string(loss.value().shape()));
    }
    consumed_ = true;
    if (store_) store_->zero_grad();
    if (!nodes_[loss.id()].needs_grad) return;

    grad(loss.id())[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.needs_grad || n.grad.empty() || !n.backward_fn) continue;
        n.backward_fn();
    }
    const auto& k = simd::kernels();
    for (const auto& [index, node_id] : bound_params_) {
        const Tensor& g = nodes_[node_id].grad;
        if (g.empty()) continue;
        Tensor& dst = store_->at(index).grad;
        k.axpy(g.size(), 1.0, g.data().data(), dst.data().data());
    }
}

}  // namespace fump::num
