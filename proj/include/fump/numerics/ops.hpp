#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fump/numerics/tape.hpp"

namespace fump::num {

// Differentiable operations on rank-2 tape values. Shape errors throw
// std::invalid_argument naming the operation.

Var matmul(Var a, Var b);     // a[m x k] * b[k x n]
Var matmul_nt(Var a, Var b);  // a[m x n] * b[k x n]^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_row(Var a, Var row);  // broadcast a 1 x c row over every row of a
Var mul_col(Var a, Var col);  // scale row r of a by col[r]
Var scale(Var a, double s);
Var silu(Var a);
Var sigmoid(Var a);
Var softmax_rows(Var a);
Var sum(Var a);   // 1 x 1
Var mean(Var a);  // 1 x 1

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var broadcast_rows(Var row, std::size_t rows);

/// out[i] = a[index[i]]; repeated indices accumulate gradient.
Var gather_rows(Var a, std::span<const std::size_t> index);
/// out[index[i]] += a[i] for an output with `rows` rows.
Var scatter_add_rows(Var a, std::span<const std::size_t> index, std::size_t rows);
/// Column-wise max over each row group; an empty group yields a zero row.
/// Gradient goes to the first row attaining the max.
Var segment_max(Var a, const std::vector<std::vector<std::size_t>>& groups);

/// Per row, interprets the columns as `modes` blocks of `steps` (x,y) pairs
/// and replaces each block with its running sum over steps.
Var cumsum_steps(Var a, std::size_t modes, std::size_t steps);

/// Records a node with a hand-written backward. `fn(tape, out)` reads
/// `tape.grad(out)` and accumulates into the inputs' gradients.
Var record_op(Tape& tape, Tensor value, bool needs_grad, std::function<void(Tape&, std::uint32_t)> fn);

/// Value copy with no gradient path.
Var detach(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

}  // namespace fump::num
