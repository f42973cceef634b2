#include "fump/numerics/params.hpp"

#include <cmath>
#include <stdexcept>

namespace fump::num {

Parameter& ParameterStore::add(std::string name, Tensor init) {
    if (index_.contains(name)) throw std::invalid_argument("parameter '" + name + "' already exists");
    index_.emplace(name, params_.size());
    Parameter p;
    p.grad = Tensor(init.shape());
    p.moment1 = Tensor(init.shape());
    p.moment2 = Tensor(init.shape());
    p.value = std::move(init);
    p.name = std::move(name);
    params_.push_back(std::move(p));
    return params_.back();
}

bool ParameterStore::contains(std::string_view name) const { return index_.contains(std::string(name)); }

std::size_t ParameterStore::index_of(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    if (it == index_.end()) throw std::out_of_range("unknown parameter '" + std::string(name) + "'");
    return it->second;
}

Parameter& ParameterStore::at(std::string_view name) { return params_[index_of(name)]; }
const Parameter& ParameterStore::at(std::string_view name) const { return params_[index_of(name)]; }

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

void adam_step(ParameterStore& store, const AdamConfig& config) {
    const std::int64_t t = store.adam_steps() + 1;
    store.set_adam_steps(t);
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
    for (auto& p : store) {
        auto value = p.value.data();
        auto grad = p.grad.data();
        auto m = p.moment1.data();
        auto v = p.moment2.data();
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            value[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
        }
    }
}

}  // namespace fump::num
