#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "fump/numerics/checkpoint.hpp"
#include "fump/numerics/gradcheck.hpp"
#include "fump/numerics/nn.hpp"

using namespace fump::num;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Tensor t = Tensor::matrix(r, c);
    for (auto& v : t.data()) v = u(rng);
    return t;
}

double silu_ref(double x) { return x / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("mlp: zero weights give zeros, identity passes through") {
    ParameterStore store;
    Rng rng(1);
    Mlp zero("z", {3, 4, 2});
    zero.init(store, rng);
    for (auto& p : store) p.value.fill(0.0);
    Tape tape(&store, false);
    const Var out = zero.forward(tape, tape.constant(Tensor::row({1.0, -2.0, 3.0})));
    CHECK(out.value() == Tensor::matrix(1, 2));

    ParameterStore s2;
    Mlp id("id", {2, 2});
    id.init(s2, rng);
    s2.at("id.l0.w").value = Tensor({2, 2}, std::vector<double>{1, 0, 0, 1});
    Tape t2(&s2, false);
    const Var y = id.forward(t2, t2.constant(Tensor::row({1.0, 2.0})));
    CHECK(y.value()[0] == 1.0);
    CHECK(y.value()[1] == 2.0);
}

TEST_CASE("mlp: matches straight-line forward") {
    ParameterStore store;
    Rng rng(7);
    Mlp mlp("m", {3, 5, 2});
    mlp.init(store, rng);
    for (auto& p : store) p.value = random_matrix(p.value.rows(), p.value.cols(), rng);
    const Tensor x = random_matrix(4, 3, rng);
    Tape tape(&store, false);
    const Tensor out = mlp.forward(tape, tape.constant(x)).value();
    const Tensor& w0 = store.at("m.l0.w").value;
    const Tensor& b0 = store.at("m.l0.b").value;
    const Tensor& w1 = store.at("m.l1.w").value;
    const Tensor& b1 = store.at("m.l1.b").value;
    for (std::size_t r = 0; r < 4; ++r) {
        double h[5];
        for (std::size_t j = 0; j < 5; ++j) {
            double s = b0[j];
            for (std::size_t i = 0; i < 3; ++i) s += x(r, i) * w0(i, j);
            h[j] = silu_ref(s);
        }
        for (std::size_t j = 0; j < 2; ++j) {
            double s = b1[j];
            for (std::size_t i = 0; i < 5; ++i) s += h[i] * w1(i, j);
            CHECK(out(r, j) == doctest::Approx(s).epsilon(1e-13));
        }
    }
}

TEST_CASE("mlp: shape mismatch names the layer") {
    ParameterStore store;
    Rng rng(1);
    Mlp mlp("enc.node", {3, 2});
    mlp.init(store, rng);
    Tape tape(&store, false);
    CHECK_THROWS_WITH_AS(mlp.forward(tape, tape.constant(Tensor::row({1.0, 2.0}))),
                         doctest::Contains("'enc.node' layer 0"), std::invalid_argument);
}

TEST_CASE("cross attention: single key, identical keys, brute force") {
    Rng rng(3);
    ParameterStore store;
    CrossAttention ca("ca", 3);
    ca.init(store, rng);
    ca.set_identity(store);
    {
        Tape tape(&store, false);
        const Var q = tape.constant(random_matrix(4, 3, rng));
        const Tensor v1 = random_matrix(1, 3, rng);
        const auto r = ca.attend(tape, q, tape.constant(random_matrix(1, 3, rng)), tape.constant(v1));
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t c = 0; c < 3; ++c) CHECK(r.out.value()(i, c) == doctest::Approx(v1[c]).epsilon(1e-15));
    }
    {
        Tape tape(&store, false);
        Tensor keys = Tensor::matrix(3, 3, 0.5);
        const Tensor vals = random_matrix(3, 3, rng);
        const auto r = ca.attend(tape, tape.constant(random_matrix(2, 3, rng)), tape.constant(keys), tape.constant(vals));
        for (std::size_t c = 0; c < 3; ++c) {
            const double avg = (vals(0, c) + vals(1, c) + vals(2, c)) / 3.0;
            CHECK(r.out.value()(1, c) == doctest::Approx(avg).epsilon(1e-13));
        }
    }
    {
        ParameterStore s2;
        CrossAttention full("fa", 4);
        full.init(s2, rng);
        const Tensor q = random_matrix(3, 4, rng), k = random_matrix(5, 4, rng), v = random_matrix(5, 4, rng);
        Tape tape(&s2, false);
        const auto r = full.attend(tape, tape.constant(q), tape.constant(k), tape.constant(v));
        auto proj = [&](const Tensor& x, const char* w) {
            const Tensor& W = s2.at(full.name(w)).value;
            Tensor o = Tensor::matrix(x.rows(), 4);
            for (std::size_t i = 0; i < x.rows(); ++i)
                for (std::size_t j = 0; j < 4; ++j)
                    for (std::size_t l = 0; l < 4; ++l) o(i, j) += x(i, l) * W(l, j);
            return o;
        };
        const Tensor Q = proj(q, "wq"), K = proj(k, "wk"), Vv = proj(v, "wv");
        Tensor att = Tensor::matrix(3, 4);
        for (std::size_t i = 0; i < 3; ++i) {
            double logits[5], mx = -1e300, z = 0.0, wsum = 0.0;
            for (std::size_t j = 0; j < 5; ++j) {
                logits[j] = 0.0;
                for (std::size_t l = 0; l < 4; ++l) logits[j] += Q(i, l) * K(j, l);
                logits[j] /= 2.0;
                mx = std::max(mx, logits[j]);
            }
            for (std::size_t j = 0; j < 5; ++j) z += std::exp(logits[j] - mx);
            for (std::size_t j = 0; j < 5; ++j) {
                const double w = std::exp(logits[j] - mx) / z;
                wsum += r.weights.value()(i, j);
                for (std::size_t l = 0; l < 4; ++l) att(i, l) += w * Vv(j, l);
            }
            CHECK(std::abs(wsum - 1.0) <= 1e-12);
        }
        const Tensor expect = proj(att, "wo");
        for (std::size_t i = 0; i < expect.size(); ++i) CHECK(r.out.value()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
}

TEST_CASE("cross attention: empty key set") {
    Rng rng(3);
    ParameterStore store;
    CrossAttention ca("ca", 2);
    ca.init(store, rng);
    Tape tape(&store, false);
    CHECK_THROWS_WITH(ca.forward(tape, tape.constant(Tensor::matrix(1, 2)), tape.constant(Tensor::matrix(0, 2)),
                                 tape.constant(Tensor::matrix(0, 2))),
                      doctest::Contains("empty key set"));
}

TEST_CASE("backward: sum gives ones, zero loss gives zeros, twice throws") {
    ParameterStore store;
    store.add("p", Tensor({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}));
    store.add("q", Tensor::matrix(1, 1, 2.0));
    Tape tape(&store);
    const Var l = sum(tape.param("p"));
    tape.backward(l);
    for (double g : store.at("p").grad.data()) CHECK(g == 1.0);
    CHECK(store.at("q").grad[0] == 0.0);
    CHECK_THROWS(tape.backward(l));

    Tape t2(&store);
    t2.backward(scale(sum(mul(t2.param("p"), t2.param("p"))), 0.0));
    for (double g : store.at("p").grad.data()) CHECK(g == 0.0);
}

TEST_CASE("gradients of every op agree with central differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        ParameterStore store;
        store.add("a", random_matrix(3, 4, rng));
        store.add("b", random_matrix(4, 2, rng));
        store.add("c", random_matrix(3, 4, rng));
        store.add("r", random_matrix(1, 4, rng));
        store.add("col", random_matrix(3, 1, rng));
        const std::vector<std::size_t> idx{2, 0, 2, 1};
        const std::vector<std::vector<std::size_t>> groups{{0, 2}, {}, {1}};
        const LossBuilder loss = [&](Tape& t) {
            const Var a = t.param("a"), b = t.param("b"), c = t.param("c");
            const Var h = silu(matmul(add_row(mul(a, c), t.param("r")), b));            // 3x2
            const Var s = softmax_rows(matmul_nt(a, c));                                // 3x3
            const Var g = gather_rows(sigmoid(mul_col(sub(a, c), t.param("col"))), idx);  // 4x4
            const Var sc = scatter_add_rows(g, idx, 3);                                 // 3x4
            const Var cat = concat_cols(std::vector<Var>{h, s, slice_cols(sc, 1, 2)});  // 3x7
            const Var rows = concat_rows(std::vector<Var>{cat, broadcast_rows(gather_rows(cat, std::vector<std::size_t>{1}), 2)});
            const Var mx = segment_max(matmul(reshape(a, 4, 3), t.constant(Tensor({3, 3}, 0.3))), groups);
            const Var cs = cumsum_steps(reshape(c, 1, 12), 1, 6);
            return sum(mul(rows, rows)) + scale(mean(mx), 2.0) + sum(mul(cs, cs));
        };
        const auto r = finite_diff_check(store, loss, 1e-6, 100, seed);
        INFO("seed " << seed << " worst " << r.worst_param << "[" << r.worst_index << "]");
        CHECK(r.max_rel_error <= 1e-5);
        CHECK(r.coords_checked == store.scalar_count());
    }
}

TEST_CASE("detach blocks gradient") {
    ParameterStore store;
    store.add("x", Tensor::row({1.5, -2.0}));
    Tape t(&store);
    const Var x = t.param("x");
    t.backward(sum(mul(detach(x), x)));
    CHECK(store.at("x").grad[0] == 1.5);
    CHECK(store.at("x").grad[1] == -2.0);
}

TEST_CASE("gradients of mlp + cross attention") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 100);
        ParameterStore store;
        Mlp mlp("m", mlp_widths(5, 8, 2, 4));
        mlp.init(store, rng);
        CrossAttention ca("ca", 4);
        ca.init(store, rng);
        const Tensor x = random_matrix(6, 5, rng), q = random_matrix(2, 4, rng);
        const LossBuilder loss = [&](Tape& t) {
            const Var v = mlp.forward(t, t.constant(x));
            const Var o = ca.forward(t, t.constant(q), v, v);
            return sum(mul(o, o));
        };
        const auto r = finite_diff_check(store, loss, 1e-6, 50, seed);
        CHECK(r.max_rel_error <= 1e-5);
    }
}

TEST_CASE("finite_diff_check: quadratic, constant, non-finite") {
    ParameterStore store;
    store.add("x", Tensor::row({0.3, -1.2, 2.5}));
    const auto quad = finite_diff_check(
        store, [](Tape& t) { const Var x = t.param("x"); return sum(mul(x, x)) + scale(sum(x), 3.0); }, 1e-6, 10, 1);
    CHECK(quad.max_rel_error <= 1e-8);
    const auto cst = finite_diff_check(store, [](Tape& t) { return t.constant(Tensor::scalar(4.0)); }, 1e-6, 10, 1);
    CHECK(cst.max_rel_error == 0.0);
    CHECK_THROWS(finite_diff_check(
        store, [](Tape& t) { return scale(sum(t.param("x")), std::numeric_limits<double>::infinity()); }, 1e-6, 10, 1));
}

TEST_CASE("adam: zero gradient, first step, convex decrease") {
    ParameterStore store;
    store.add("x", Tensor::row({1.0, -2.0}));
    store.zero_grad();
    adam_step(store, {});
    CHECK(store.at("x").value[0] == 1.0);

    ParameterStore s2;
    s2.add("x", Tensor::row({1.0, -2.0}));
    s2.zero_grad();
    s2.at("x").grad = Tensor::row({0.5, -4.0});
    AdamConfig cfg;
    cfg.lr = 0.01;
    adam_step(s2, cfg);
    // Bias-corrected first step moves each coordinate by lr * g / (|g| + eps').
    CHECK(s2.at("x").value[0] == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
    CHECK(s2.at("x").value[1] == doctest::Approx(-2.0 + 0.01 * 4.0 / (4.0 + 1e-8)).epsilon(1e-12));

    ParameterStore s3;
    s3.add("x", Tensor::row({3.0, -2.0, 1.5}));
    cfg.lr = 0.05;
    std::vector<double> losses;
    for (int step = 0; step < 200; ++step) {
        Tape t(&s3);
        const Var x = t.param("x");
        const Var l = sum(mul(x, x));
        losses.push_back(l.value()[0]);
        t.backward(l);
        adam_step(s3, cfg);
    }
    for (std::size_t i = 20; i < 60; ++i) CHECK(losses[i + 1] < losses[i]);
    CHECK(losses.back() < 0.05 * losses.front());
}

TEST_CASE("checkpoint: parameters and adam state round trip") {
    Rng rng(5);
    ParameterStore store;
    Mlp mlp("m", {3, 4, 2});
    mlp.init(store, rng);
    for (auto& p : store) {
        p.moment1 = random_matrix(p.value.rows(), p.value.cols(), rng);
        p.moment2 = random_matrix(p.value.rows(), p.value.cols(), rng);
    }
    store.set_adam_steps(17);
    CheckpointFile file;
    file.config_hash = fnv1a64("cfg");
    file.put("params", encode_parameters(store));
    file.put("adam", encode_adam_state(store));
    const auto bytes = serialize_checkpoint(file);
    const CheckpointFile back = parse_checkpoint(bytes);
    CHECK(back.config_hash == file.config_hash);

    ParameterStore fresh;
    mlp.init(fresh, rng);
    decode_parameters(back.require("params"), fresh);
    decode_adam_state(back.require("adam"), fresh);
    CHECK(fresh.adam_steps() == 17);
    for (std::size_t i = 0; i < store.size(); ++i) {
        CHECK(fresh.at(i).value == store.at(i).value);
        CHECK(fresh.at(i).moment2 == store.at(i).moment2);
    }
    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    CHECK_THROWS(parse_checkpoint(truncated));

    ParameterStore other;
    Mlp("m", {3, 5, 2}).init(other, rng);
    CHECK_THROWS(decode_parameters(back.require("params"), other));
}

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}
