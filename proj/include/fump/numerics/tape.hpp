#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fump/numerics/params.hpp"
#include "fump/numerics/tensor.hpp"

namespace fump::num {

class Tape;

/// Handle to a value recorded on a tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    bool needs_grad() const;
    Tape& tape() const { return *tape_; }
    std::uint32_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

/// Reverse-mode tape. Operations append nodes during the forward pass and
/// register a closure that pushes the node's gradient to its inputs;
/// `backward` replays the closures in reverse order.
///
/// A tape is bound to one ParameterStore. Parameters are copied onto the tape
/// once, on first use, and their gradients are written back to the store by
/// `backward`. A tape constructed with `record = false` keeps values only,
/// which is what inference uses.
class Tape {
public:
    explicit Tape(ParameterStore* store = nullptr, bool record = true) : store_(store), record_(record) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var param(std::string_view name);

    /// Zeroes every gradient in the bound store, then accumulates d(loss)/d(param)
    /// for every parameter reachable from `loss`. A tape can be replayed once.
    void backward(Var loss);

    bool recording() const { return record_; }
    ParameterStore* store() const { return store_; }
    std::size_t node_count() const { return nodes_.size(); }

    // Op-author interface.
    Var push(Tensor value, bool needs_grad, std::function<void()> backward_fn);
    const Tensor& value(std::uint32_t id) const { return nodes_[id].value; }
    bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }
    /// Gradient buffer of a node, allocated as zeros on first access.
    Tensor& grad(std::uint32_t id);
    bool has_grad(std::uint32_t id) const { return !nodes_[id].grad.empty() || nodes_[id].value.empty(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void()> backward_fn;
        bool needs_grad = false;
    };

    ParameterStore* store_;
    bool record_;
    bool consumed_ = false;
    std::vector<Node> nodes_;
    std::unordered_map<std::size_t, std::uint32_t> bound_params_;  // store index -> node
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline bool Var::needs_grad() const { return tape_->needs_grad(id_); }

}  // namespace fump::num
