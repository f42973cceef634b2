#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "fump/numerics/tape.hpp"

namespace fump::num {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t coords_checked = 0;
};

/// Builds the scalar loss on the given tape. Must be deterministic.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients with central differences of step `step`
/// on `samples_per_param` random coordinates of every parameter (all of them
/// when the tensor is smaller). The error measure per coordinate is
/// |analytic - numeric| / max(1, |numeric|). Throws on a non-finite loss.
GradCheckResult finite_diff_check(ParameterStore& store, const LossBuilder& loss, double step,
                                  std::size_t samples_per_param, std::uint64_t seed);

}  // namespace fump::num
