#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fump/numerics/tensor.hpp"

namespace fump::num {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor moment1;
    Tensor moment2;
};

/// Named parameters with gradient buffers and Adam moments. Iteration order
/// is insertion order, which keeps checkpoints and updates deterministic.
class ParameterStore {
public:
    Parameter& add(std::string name, Tensor init);
    bool contains(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;
    Parameter& at(std::string_view name);
    const Parameter& at(std::string_view name) const;
    Parameter& at(std::size_t index) { return params_[index]; }
    const Parameter& at(std::size_t index) const { return params_[index]; }

    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad();

    std::int64_t adam_steps() const { return adam_steps_; }
    void set_adam_steps(std::int64_t steps) { adam_steps_ = steps; }

private:
    std::vector<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
    std::int64_t adam_steps_ = 0;
};

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam update over every parameter. Moments persist in the
/// store across calls.
void adam_step(ParameterStore& store, const AdamConfig& config);

}  // namespace fump::num
