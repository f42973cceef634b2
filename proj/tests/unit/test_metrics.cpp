#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "fump/metrics/metrics.hpp"

using namespace fump;
using namespace fump::metrics;
using geo::Vec2;

namespace {

Trajectory random_traj(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-10, 10);
    Trajectory t{};
    for (auto& p : t) p = {u(rng), u(rng)};
    return t;
}

}  // namespace

TEST_CASE("l2 at horizons") {
    std::mt19937_64 rng(3);
    const Trajectory a = random_traj(rng);
    const HorizonValues zero = l2_at_horizons(a, a);
    CHECK(zero.avg == 0.0);

    Trajectory off = a;
    for (auto& p : off) p = p + Vec2{0.6, 0.8};
    const HorizonValues one = l2_at_horizons(off, a);
    for (double v : one.at) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));

    for (int trial = 0; trial < 50; ++trial) {
        const Trajectory p = random_traj(rng), g = random_traj(rng);
        const HorizonValues h = l2_at_horizons(p, g);
        double acc = 0.0;
        double expect[3];
        for (int t = 0; t < 6; ++t) {
            acc += std::sqrt((p[t].x - g[t].x) * (p[t].x - g[t].x) + (p[t].y - g[t].y) * (p[t].y - g[t].y));
            if (t == 1) expect[0] = acc / 2;
            if (t == 3) expect[1] = acc / 4;
            if (t == 5) expect[2] = acc / 6;
        }
        for (int i = 0; i < 3; ++i) CHECK(h.at[static_cast<std::size_t>(i)] == doctest::Approx(expect[i]).epsilon(1e-14));
        CHECK(h.avg == doctest::Approx((expect[0] + expect[1] + expect[2]) / 3).epsilon(1e-14));
        CHECK(h == l2_at_horizons(g, p));
    }
}

TEST_CASE("collision step and rate by hand") {
    Trajectory ego{};
    for (std::size_t t = 0; t < 6; ++t) ego[t] = {0.0, 2.0 * static_cast<double>(t + 1)};
    Trajectory parked{};
    parked.fill({2.9, 4.0});  // 2.9 m from step 1 (y = 4); 3.57 m from step 0
    const Trajectory agents[] = {parked};
    const auto step = first_collision_step(ego, agents);
    REQUIRE(step.has_value());
    CHECK(*step == 1);
    CHECK_FALSE(first_collision_step(ego, {}).has_value());

    const std::optional<std::size_t> steps[] = {step, std::nullopt, std::size_t{4}, std::nullopt};
    const HorizonValues r = collision_rate(steps);
    CHECK(r.at[0] == 25.0);
    CHECK(r.at[1] == 25.0);
    CHECK(r.at[2] == 50.0);
    CHECK(r.avg == doctest::Approx(100.0 / 3.0));
    CHECK(r.at[0] <= r.at[1]);
    CHECK(r.at[1] <= r.at[2]);
}

TEST_CASE("min ade") {
    std::mt19937_64 rng(5);
    const Trajectory g = random_traj(rng);
    const Trajectory exact[] = {g};
    CHECK(min_ade(exact, g) == 0.0);
    Trajectory off = g;
    for (auto& p : off) p = p + Vec2{0.0, 1.5};
    const Trajectory single[] = {off};
    CHECK(min_ade(single, g) == doctest::Approx(1.5));

    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Trajectory> props;
        for (int k = 0; k < 6; ++k) props.push_back(random_traj(rng));
        double best = 1e300;
        for (const auto& p : props) {
            double s = 0;
            for (int t = 0; t < 6; ++t) s += geo::distance(p[t], g[t]);
            best = std::min(best, s / 6);
        }
        CHECK(min_ade(props, g) == doctest::Approx(best).epsilon(1e-14));
    }
    CHECK_THROWS_AS(min_ade(std::span<const Trajectory>{}, g), std::invalid_argument);
}

TEST_CASE("cegr") {
    CHECK(std::abs(cegr(0.39, 0.61, 1.0, 2.0) - 18.03) <= 0.01);
    CHECK(cegr(0.61, 0.61, 1.0, 2.0) == 0.0);
    CHECK(cegr(0.39, 0.61, 2.0, 2.0) == 0.0);
    CHECK(cegr(0.8, 0.61, 1.0, 2.0) < 0.0);
    CHECK(cegr(0.9, 0.6, 1.0, 4.0, false) == doctest::Approx(37.5));
    CHECK_THROWS_AS(cegr(0.3, 0.0, 1.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(cegr(0.3, 0.5, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("report aggregation and serialisation") {
    std::vector<SampleMetrics> s(3);
    s[0].l2.at = {1, 2, 3};
    s[1].l2.at = {0, 0, 0};
    s[2].l2.at = {2, 1, 3};
    s[2].collision_step = 5;
    s[0].min_ade = 0.5;
    s[1].min_ade = 1.5;
    EvalReport r = aggregate(s);
    CHECK(r.l2.at[0] == 1.0);
    CHECK(r.l2.at[2] == 2.0);
    CHECK(r.l2.avg == doctest::Approx(4.0 / 3.0));
    CHECK(r.collision.at[2] == doctest::Approx(100.0 / 3.0));
    CHECK(r.collision.at[1] == 0.0);
    CHECK(*r.min_ade == 1.0);
    r.config_hash = "abc";
    r.cegr.emplace_back("L2", 3.25);
    CHECK(EvalReport::from_json(r.to_json()) == r);
    CHECK(r.to_text().find("CEGR L2") != std::string::npos);
    CHECK(r.to_csv().find("horizon_s,l2_m,collision_pct") == 0);
    CHECK_THROWS_WITH(aggregate(std::span<const SampleMetrics>{}), "no samples");
}
