#include <doctest.h>

#include <cmath>
#include <random>

#include "fump/data/generator.hpp"
#include "fump/uttd/model.hpp"

using namespace fump;
using namespace fump::uttd;

namespace {

constexpr std::size_t kSteps = scene::kHorizon;

Trajectory straight(double step, double lateral = 0.0) {
    Trajectory t{};
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = {step * static_cast<double>(i + 1), lateral};
    return t;
}

num::Tensor row_of_modes(const std::vector<Trajectory>& modes) {
    num::Tensor t = num::Tensor::matrix(1, modes.size() * kSteps * 2);
    for (std::size_t k = 0; k < modes.size(); ++k) {
        for (std::size_t s = 0; s < kSteps; ++s) {
            t[k * kSteps * 2 + 2 * s] = modes[k][s].x;
            t[k * kSteps * 2 + 2 * s + 1] = modes[k][s].y;
        }
    }
    return t;
}

ecsa::EcsaConfig small_encoder() {
    ecsa::EcsaConfig c;
    c.d_model = 16;
    c.hidden = 16;
    c.edge_dim = 8;
    c.depth = 1;
    return c;
}

}  // namespace

TEST_CASE("state mask: both branches") {
    const EgoState s{8.0, 0.1, -1.0};
    CHECK(apply_state_mask(s, 0.01).second == 0);
    CHECK(apply_state_mask(s, 0.01).first == EgoState{});
    CHECK(apply_state_mask(s, kMaskProbability).second == 1);
    CHECK(apply_state_mask(s, 0.9).first == s);
    const num::Tensor zero = masked_state_row(s, 0.0);
    for (double v : zero.data()) CHECK(v == 0.0);
    const num::Tensor kept = masked_state_row(s, 0.5);
    CHECK(kept[0] == doctest::Approx(0.8));
    CHECK(kept[1] == doctest::Approx(0.2));
    CHECK(kept[2] == doctest::Approx(-0.5));
}

TEST_CASE("state mask: zero rate over many draws") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 200000;
    int zeros = 0;
    for (int i = 0; i < n; ++i) zeros += apply_state_mask(EgoState{1, 1, 1}, u(rng)).second == 0 ? 1 : 0;
    const double rate = static_cast<double>(zeros) / n;
    const double sigma = std::sqrt(kMaskProbability * (1 - kMaskProbability) / n);
    CHECK(std::abs(rate - kMaskProbability) < 5 * sigma);
}

TEST_CASE("state_row round trip") {
    const EgoState s{12.5, -0.3, 1.75};
    const num::Tensor r = state_row(s);
    const EgoState back = state_from_row(r.data());
    CHECK(back.speed == doctest::Approx(s.speed));
    CHECK(back.yaw_rate == doctest::Approx(s.yaw_rate));
    CHECK(back.accel == doctest::Approx(s.accel));
}

TEST_CASE("wta_loss: matches a direct evaluation") {
    const std::vector<Trajectory> modes{straight(1.0), straight(2.0, 0.5), straight(1.5, -1.0)};
    const Trajectory gt = straight(1.9, 0.3);
    num::Tape tape(nullptr, false);
    const Var traj = tape.constant(row_of_modes(modes));
    const Var scores = tape.constant(num::Tensor::row({0.2, -0.4, 1.1}));
    const Trajectory gts[] = {gt};
    const WtaLoss w = wta_loss(traj, scores, gts, 3);

    double best = 1e300;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        double d = 0;
        for (std::size_t s = 0; s < kSteps; ++s) d += std::hypot(modes[k][s].x - gt[s].x, modes[k][s].y - gt[s].y);
        d /= kSteps;
        if (d < best) {
            best = d;
            best_k = k;
        }
    }
    const double z = std::exp(0.2) + std::exp(-0.4) + std::exp(1.1);
    const double ce = -std::log(std::exp(std::vector<double>{0.2, -0.4, 1.1}[best_k]) / z);
    CHECK(w.best[0] == best_k);
    CHECK(w.best[0] == 1);
    CHECK(w.loss.value()[0] == doctest::Approx(best + ce).epsilon(1e-12));

    const WtaLoss cls_only = wta_loss(traj, scores, gts, 3, false);
    CHECK(cls_only.loss.value()[0] == doctest::Approx(ce).epsilon(1e-12));
}

TEST_CASE("stage1_plan_loss: endpoint term plus WTA") {
    const std::vector<Trajectory> modes{straight(1.0), straight(2.0)};
    const Vec2 targets[] = {{6.0, 1.0}, {12.0, 0.0}};
    num::Tape tape(nullptr, false);
    const Var row = tape.constant(row_of_modes(modes));
    // plan_gt equals mode 0, so the WTA part vanishes.
    const double got = stage1_plan_loss(row, targets, modes[0], 0.0, 2).value()[0];
    CHECK(got == doctest::Approx((1.0 + 0.0) / 2.0));
    const double hinged = stage1_plan_loss(row, targets, modes[0], 0.5, 2).value()[0];
    CHECK(hinged == doctest::Approx(0.5 / 2.0));
}

TEST_CASE("pseudo_plan_gt: circle meets a straight lane") {
    scene::AgentRecord ego;
    ego.position = {0, 0};
    ego.heading = 0.0;
    ego.speed = 5.0;
    scene::MapPolyline lane;
    lane.points = {{-50, 0}, {0, 0}, {50, 0}};
    scene::MapPolyline beside;
    beside.points = {{-50, 3}, {50, 3}};
    const scene::MapPolyline map[] = {lane, beside};
    const auto pts = pseudo_plan_gt(ego, map, 3.0);
    REQUIRE(pts.size() == 2);
    std::vector<Vec2> sorted = pts;
    std::sort(sorted.begin(), sorted.end(), [](Vec2 a, Vec2 b) { return a.y < b.y; });
    CHECK(sorted[0].x == doctest::Approx(15.0));
    CHECK(sorted[0].y == doctest::Approx(0.0));
    CHECK(sorted[1].x == doctest::Approx(std::sqrt(225.0 - 9.0)));

    ego.speed = 0.0;
    const auto still = pseudo_plan_gt(ego, map, 3.0);
    REQUIRE(still.size() == 1);
    CHECK(still[0].x == 0.0);
}

TEST_CASE("stage2: zero residual head returns the stage-1 proposals") {
    DecoderConfig dc;
    dc.d_model = 8;
    dc.hidden = 8;
    dc.depth = 1;
    const Decoder dec(dc);
    num::ParameterStore store;
    num::Rng rng(3);
    dec.init(store, rng);
    const num::Mlp& head = dec.refine_head();
    const std::size_t last = head.layers() - 1;
    store.at(head.weight_name(last)).value.fill(0.0);
    store.at(head.bias_name(last)).value.fill(0.0);

    num::Tape tape(&store, false);
    std::vector<Trajectory> modes;
    for (std::size_t k = 0; k < kModes; ++k) modes.push_back(straight(1.0 + 0.1 * k, 0.2 * k));
    const num::Tensor s1 = row_of_modes(modes);
    const Refined r = dec.stage2(tape, tape.constant(num::Tensor::matrix(1, 8, 0.1)),
                                 tape.constant(state_row({5, 0, 0})), tape.constant(s1));
    for (std::size_t i = 0; i < s1.size(); ++i) CHECK(r.trajectories.value()[i] == s1[i]);
    for (double v : r.scores.value().data()) CHECK(v == 0.0);
}

TEST_CASE("proposal and argmax") {
    const std::vector<Trajectory> modes{straight(1.0), straight(2.0, 1.0)};
    const num::Tensor row = row_of_modes(modes);
    CHECK(proposal(row.data(), 1) == modes[1]);
    const double scores[] = {0.1, 0.7, 0.7, -1.0};
    CHECK(argmax(scores) == 1);
}

TEST_CASE("infer_plan: ego-frame output and disabled stage II") {
    data::ScenarioConfig sc;
    sc.min_agents = sc.max_agents = 3;
    const scene::Scene s = data::generate_scene(data::scene_seed(21, 0), sc);
    ModelConfig mc;
    mc.encoder = small_encoder();
    for (bool stage2 : {true, false}) {
        mc.use_stage2 = stage2;
        const Model model(mc);
        num::ParameterStore store;
        num::Rng rng(4);
        model.init(store, rng);
        const PlanResult r = infer_plan(model, store, nullptr, s, StateMode::GroundTruth);
        CHECK(r.stage1.size() == kModes);
        CHECK(r.refined.size() == (stage2 ? kModes : 0));
        const auto& pool = stage2 ? r.refined : r.stage1;
        const bool found = std::any_of(pool.begin(), pool.end(),
                                       [&](const Trajectory& t) { return scene::heading_x_to_y(t) == r.plan; });
        CHECK(found);
        for (const auto& p : r.plan) CHECK((std::isfinite(p.x) && std::isfinite(p.y)));
    }
}

TEST_CASE("infer_plan: all-zero parameters give zero trajectories") {
    data::ScenarioConfig sc;
    sc.min_agents = sc.max_agents = 4;
    const scene::Scene s = data::generate_scene(data::scene_seed(22, 0), sc);
    ModelConfig mc;
    mc.encoder = small_encoder();
    const Model model(mc);
    num::ParameterStore store;
    num::Rng rng(5);
    model.init(store, rng);
    for (auto& p : store) p.value.fill(0.0);
    const PlanResult r = infer_plan(model, store, nullptr, s, StateMode::Predicted);
    for (const auto& p : r.plan) {
        CHECK(p.x == 0.0);
        CHECK(p.y == 0.0);
    }
    CHECK(r.state == EgoState{});
}

TEST_CASE("scene_loss: motion term only with joint motion") {
    data::ScenarioConfig sc;
    sc.min_agents = sc.max_agents = 3;
    const scene::Scene s = data::generate_scene(data::scene_seed(23, 0), sc);
    for (bool joint : {true, false}) {
        ModelConfig mc;
        mc.encoder = small_encoder();
        mc.joint_motion = joint;
        const Model model(mc);
        num::ParameterStore store;
        num::Rng rng(6);
        model.init(store, rng);
        num::Tape tape(&store, true);
        const SceneLoss l = model.scene_loss(tape, s, nullptr, 0.5);
        CHECK(std::isfinite(l.total.value()[0]));
        if (joint) {
            CHECK(l.motion > 0.0);
            CHECK(l.candidates.size() == s.agents.size() - 1);
        } else {
            CHECK(l.motion == 0.0);
            CHECK(l.candidates.empty());
        }
    }
}
