#include "fump/numerics/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace fump::num {

Tensor xavier_uniform(std::size_t in, std::size_t out, Rng& rng, double gain) {
    const double bound = gain * std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor w = Tensor::matrix(in, out);
    for (auto& v : w.data()) v = dist(rng);
    return w;
}

std::vector<std::size_t> mlp_widths(std::size_t in, std::size_t hidden, std::size_t depth, std::size_t out) {
    std::vector<std::size_t> w{in};
    for (std::size_t i = 0; i < depth; ++i) w.push_back(hidden);
    w.push_back(out);
    return w;
}

Mlp::Mlp(std::string prefix, std::vector<std::size_t> widths) : prefix_(std::move(prefix)), widths_(std::move(widths)) {
    if (widths_.size() < 2) throw std::invalid_argument("mlp '" + prefix_ + "': needs at least one layer");
}

std::string Mlp::weight_name(std::size_t layer) const { return prefix_ + ".l" + std::to_string(layer) + ".w"; }
std::string Mlp::bias_name(std::size_t layer) const { return prefix_ + ".l" + std::to_string(layer) + ".b"; }

void Mlp::init(ParameterStore& store, Rng& rng, double output_gain) const {
    for (std::size_t l = 0; l < layers(); ++l) {
        const double gain = l + 1 == layers() ? output_gain : 1.0;
        store.add(weight_name(l), xavier_uniform(widths_[l], widths_[l + 1], rng, gain));
        store.add(bias_name(l), Tensor::matrix(1, widths_[l + 1]));
    }
}

Var Mlp::forward(Tape& tape, Var x) const {
    for (std::size_t l = 0; l < layers(); ++l) {
        if (x.cols() != widths_[l]) {
            throw std::invalid_argument("mlp '" + prefix_ + "' layer " + std::to_string(l) + ": expected input width " +
                                        std::to_string(widths_[l]) + ", got " + std::to_string(x.cols()));
        }
        x = add_row(matmul(x, tape.param(weight_name(l))), tape.param(bias_name(l)));
        if (l + 1 < layers()) x = silu(x);
    }
    return x;
}

CrossAttention::CrossAttention(std::string prefix, std::size_t dim) : prefix_(std::move(prefix)), dim_(dim) {}

void CrossAttention::init(ParameterStore& store, Rng& rng) const {
    for (const char* w : {"wq", "wk", "wv", "wo"}) store.add(name(w), xavier_uniform(dim_, dim_, rng));
}

void CrossAttention::set_identity(ParameterStore& store) const {
    for (const char* w : {"wq", "wk", "wv", "wo"}) {
        Tensor& t = store.at(name(w)).value;
        t.fill(0.0);
        for (std::size_t i = 0; i < dim_; ++i) t(i, i) = 1.0;
    }
}

AttentionResult CrossAttention::attend(Tape& tape, Var q, Var k, Var v) const {
    if (k.rows() == 0 || v.rows() == 0) throw std::invalid_argument("cross-attention '" + prefix_ + "': empty key set");
    if (k.rows() != v.rows()) throw std::invalid_argument("cross-attention '" + prefix_ + "': key/value count mismatch");
    for (const Var* x : {&q, &k, &v}) {
        if (x->cols() != dim_) {
            throw std::invalid_argument("cross-attention '" + prefix_ + "': expected width " + std::to_string(dim_) +
                                        ", got " + std::to_string(x->cols()));
        }
    }
    const Var qp = matmul(q, tape.param(name("wq")));
    const Var kp = matmul(k, tape.param(name("wk")));
    const Var vp = matmul(v, tape.param(name("wv")));
    const Var weights = softmax_rows(scale(matmul_nt(qp, kp), 1.0 / std::sqrt(static_cast<double>(dim_))));
    return {matmul(matmul(weights, vp), tape.param(name("wo"))), weights};
}

}  // namespace fump::num
