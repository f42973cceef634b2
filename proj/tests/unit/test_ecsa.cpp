#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "fump/data/generator.hpp"
#include "fump/ecsa/ecsa.hpp"

using namespace fump;
using namespace fump::ecsa;

namespace {

using Row = std::vector<double>;

// Reference MLP evaluation straight from the stored weights.
Row mlp(const num::ParameterStore& store, const num::Mlp& m, Row x) {
    for (std::size_t l = 0; l < m.layers(); ++l) {
        const auto& w = store.at(m.weight_name(l)).value;
        const auto& b = store.at(m.bias_name(l)).value;
        Row y(w.cols());
        for (std::size_t j = 0; j < w.cols(); ++j) {
            double s = b[j];
            for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w(i, j);
            y[j] = l + 1 < m.layers() ? s / (1.0 + std::exp(-s)) : s;
        }
        x = std::move(y);
    }
    return x;
}

Row cat(Row a, const Row& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

EcsaConfig small() {
    EcsaConfig c;
    c.d_model = 12;
    c.hidden = 12;
    c.edge_dim = 6;
    c.depth = 1;
    return c;
}

}  // namespace

TEST_CASE("egcl_layer: matches a per-edge loop") {
    const std::size_t d = 4, e = 3;
    const EgclLayer layer = EgclLayer::make("t", d, e, 8, 1);
    num::ParameterStore store;
    num::Rng rng(1);
    layer.init(store, rng);

    std::mt19937_64 g(2);
    std::normal_distribution<double> n(0.0, 1.0);
    num::Tensor nodes = num::Tensor::matrix(3, d);
    for (auto& v : nodes.data()) v = n(g);
    const std::size_t target[] = {0, 0, 1};
    const std::size_t source[] = {1, 2, 2};
    num::Tensor edges = num::Tensor::matrix(3, e);
    for (auto& v : edges.data()) v = n(g);

    num::Tape tape(&store, false);
    const num::Var out = egcl_layer(tape, layer, tape.constant(nodes), tape.constant(edges), target, source);

    auto row = [](const num::Tensor& t, std::size_t r) { return Row(t.row_span(r).begin(), t.row_span(r).end()); };
    std::vector<Row> x1(3);
    std::vector<double> indeg{2, 1, 0};
    for (std::size_t i = 0; i < 3; ++i) x1[i] = row(nodes, i);
    std::vector<Row> msum(3);
    for (std::size_t k = 0; k < 3; ++k) {
        const Row m = mlp(store, layer.g_e, cat(cat(row(nodes, target[k]), row(nodes, source[k])), row(edges, k)));
        const double gate = 1.0 / (1.0 + std::exp(-mlp(store, layer.gate, m)[0]));
        const Row dx = mlp(store, layer.g_x, m);
        for (std::size_t c = 0; c < d; ++c) x1[target[k]][c] += gate * dx[c] / indeg[target[k]];
        if (msum[target[k]].empty()) msum[target[k]].assign(m.size(), 0.0);
        for (std::size_t c = 0; c < m.size(); ++c) msum[target[k]][c] += m[c];
    }
    for (std::size_t i = 0; i < 3; ++i) {
        if (msum[i].empty()) msum[i].assign(layer.g_e.out_width(), 0.0);
        const Row expect = mlp(store, layer.g_h, cat(x1[i], msum[i]));
        for (std::size_t c = 0; c < expect.size(); ++c) {
            CHECK(out.value()(i, c) == doctest::Approx(expect[c]).epsilon(1e-12));
        }
    }
}

TEST_CASE("egcl_layer: no edges uses a zero aggregate") {
    const EgclLayer layer = EgclLayer::make("t", 3, 2, 5, 1);
    num::ParameterStore store;
    num::Rng rng(3);
    layer.init(store, rng);
    num::Tensor nodes = num::Tensor::row({0.5, -1.0, 2.0});
    num::Tape tape(&store, false);
    const num::Var out = egcl_layer(tape, layer, tape.constant(nodes), tape.constant(num::Tensor::matrix(0, 2)), {}, {});
    const Row expect = mlp(store, layer.g_h, {0.5, -1.0, 2.0, 0.0, 0.0, 0.0});
    for (std::size_t c = 0; c < expect.size(); ++c) CHECK(out.value()[c] == doctest::Approx(expect[c]).epsilon(1e-12));
}

TEST_CASE("egcl_layer: mismatched edge arrays throw") {
    const EgclLayer layer = EgclLayer::make("t", 3, 2, 5, 1);
    num::ParameterStore store;
    num::Rng rng(4);
    layer.init(store, rng);
    num::Tape tape(&store, false);
    const std::size_t t[] = {0};
    CHECK_THROWS_AS(egcl_layer(tape, layer, tape.constant(num::Tensor::matrix(2, 3)),
                               tape.constant(num::Tensor::matrix(2, 2)), t, t),
                    std::invalid_argument);
}

TEST_CASE("global_edge_features: invariant under rigid motion") {
    const scene::Vec2 ci{3, 4}, vi{1, 2}, cj{-5, 1}, vj{0.5, -3};
    const auto base = global_edge_features(ci, vi, cj, vj);
    const double a = 1.1;
    const scene::Vec2 shift{40, -7};
    auto move = [&](scene::Vec2 p) { return geo::rotate(p, a) + shift; };
    const auto moved = global_edge_features(move(ci), geo::rotate(vi, a), move(cj), geo::rotate(vj, a));
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(moved[i] == doctest::Approx(base[i]).epsilon(1e-12));
    CHECK(base.back() == doctest::Approx(std::hypot(1, 2) - std::hypot(0.5, 3)));
}

TEST_CASE("Ecsa: embeddings are frame invariant") {
    const Ecsa enc(small());
    num::ParameterStore store;
    num::Rng rng(5);
    enc.init(store, rng);
    std::mt19937_64 g(6);
    std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi), off(-80, 80);
    for (int i = 0; i < 5; ++i) {
        const scene::Scene s = data::generate_scene(data::scene_seed(31, i), {}, i);
        num::Tape t0(&store, false);
        const num::Tensor a = enc.forward(t0, s).embeddings.value();
        CHECK(a.rows() == s.agents.size() + s.map.size());
        CHECK(a.cols() == 12);
        num::Tape t1(&store, false);
        const num::Tensor b = enc.forward(t1, scene::transform_scene(s, ang(g), {off(g), off(g)})).embeddings.value();
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(b[k] == doctest::Approx(a[k]).epsilon(1e-9));
    }
}

TEST_CASE("PlainEncoder: one row per node") {
    const PlainEncoder enc(small());
    num::ParameterStore store;
    num::Rng rng(7);
    enc.init(store, rng);
    const scene::Scene s = data::generate_scene(data::scene_seed(32, 0), {});
    num::Tape tape(&store, false);
    const auto out = enc.forward(tape, s);
    CHECK(out.embeddings.rows() == s.agents.size() + s.map.size());
    CHECK(out.embeddings.cols() == 12);
}
