#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "fump/numerics/ops.hpp"

namespace fump::num {

using Rng = std::mt19937_64;

/// Fully connected stack: SiLU on hidden layers, identity on the output.
/// Parameters live in the store as `<prefix>.l<i>.w` (in x out) and
/// `<prefix>.l<i>.b` (1 x out).
class Mlp {
public:
    Mlp() = default;
    Mlp(std::string prefix, std::vector<std::size_t> widths);

    /// Registers Xavier-uniform weights and zero biases. `output_gain` scales
    /// the last layer's weights.
    void init(ParameterStore& store, Rng& rng, double output_gain = 1.0) const;
    Var forward(Tape& tape, Var x) const;

    std::size_t in_width() const { return widths_.front(); }
    std::size_t out_width() const { return widths_.back(); }
    std::size_t layers() const { return widths_.size() - 1; }
    const std::string& prefix() const { return prefix_; }
    std::string weight_name(std::size_t layer) const;
    std::string bias_name(std::size_t layer) const;

private:
    std::string prefix_;
    std::vector<std::size_t> widths_;
};

/// `in -> hidden x depth -> out` widths.
std::vector<std::size_t> mlp_widths(std::size_t in, std::size_t hidden, std::size_t depth, std::size_t out);

struct AttentionResult {
    Var out;      // m x d
    Var weights;  // m x n, rows sum to one
};

/// Single-head cross-attention with learned query/key/value/output
/// projections: softmax((q Wq)(k Wk)^T / sqrt(d)) (v Wv) Wo.
class CrossAttention {
public:
    CrossAttention() = default;
    CrossAttention(std::string prefix, std::size_t dim);

    void init(ParameterStore& store, Rng& rng) const;
    /// Overwrites all four projections with the identity (tests and oracles).
    void set_identity(ParameterStore& store) const;

    AttentionResult attend(Tape& tape, Var q, Var k, Var v) const;
    Var forward(Tape& tape, Var q, Var k, Var v) const { return attend(tape, q, k, v).out; }

    std::size_t dim() const { return dim_; }
    std::string name(const char* which) const { return prefix_ + "." + which; }

private:
    std::string prefix_;
    std::size_t dim_ = 0;
};

Tensor xavier_uniform(std::size_t in, std::size_t out, Rng& rng, double gain = 1.0);

}  // namespace fump::num
