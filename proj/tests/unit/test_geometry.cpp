#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "fump/geometry/transform.hpp"

using namespace fump::geo;

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs_diff(const RigidTransform& a, const RigidTransform& b) {
    double m = 0.0;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m = std::max(m, std::abs(a(r, c) - b(r, c)));
    return m;
}

}  // namespace

TEST_CASE("normalize_angle wraps into (-pi, pi]") {
    CHECK(normalize_angle(kPi) == kPi);
    CHECK(normalize_angle(-kPi) == kPi);
    CHECK(normalize_angle(3 * kPi) == doctest::Approx(kPi));
    CHECK(normalize_angle(0.25) == 0.25);
    CHECK(normalize_angle(2 * kPi + 0.25) == doctest::Approx(0.25));
}

TEST_CASE("world_to_target examples") {
    CHECK(max_abs_diff(world_to_target(Pose{}), RigidTransform::identity()) == 0.0);

    const Pose p = Pose::make(3.0, -4.0, 1.5, 0.7);
    const Vec3 o = world_to_target(p).apply(Vec3{3.0, -4.0, 1.5});
    CHECK(std::abs(o.x) <= 1e-15);
    CHECK(std::abs(o.y) <= 1e-15);
    CHECK(std::abs(o.z) <= 1e-15);

    const Vec3 ahead = world_to_target(Pose::make(1, 2, 0, kPi / 2)).apply(Vec3{1, 3, 0});
    CHECK(ahead.x == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(ahead.y) <= 1e-15);
    CHECK(world_to_target(p).is_valid());
}

TEST_CASE("compose: identity, inverse, translations") {
    const RigidTransform t = world_to_target(Pose::make(5, 1, 2, -2.1));
    CHECK(max_abs_diff(compose(t, RigidTransform::identity()), t) == 0.0);
    CHECK(max_abs_diff(compose(t, t.inverse()), RigidTransform::identity()) <= 1e-12);
    const RigidTransform s = compose(RigidTransform::translation(1, 2, 3), RigidTransform::translation(-4, 0.5, 1));
    const Vec3 tr = s.translation_part();
    CHECK(tr.x == -3.0);
    CHECK(tr.y == 2.5);
    CHECK(tr.z == 4.0);
    CHECK(compose(t, s).is_valid());
}

TEST_CASE("transform_chain errors") {
    std::vector<Pose> boxes;
    std::vector<RigidTransform> ego;
    CHECK_THROWS_AS(transform_chain(boxes, ego), std::invalid_argument);
    boxes.push_back(Pose{});
    CHECK_THROWS_AS(transform_chain(boxes, ego), std::invalid_argument);
}

TEST_CASE("transform_chain: static object and static ego") {
    const std::vector<Pose> boxes(6, Pose::make(4, 1, 0, 0.3));
    const std::vector<RigidTransform> ego(6, RigidTransform::from_pose(Pose::make(10, -3, 0.5, 1.1)));
    for (const Vec2 p : transform_chain(boxes, ego)) {
        CHECK(std::abs(p.x) <= 1e-12);
        CHECK(std::abs(p.y) <= 1e-12);
    }
}

TEST_CASE("transform_chain: straight object at 2 m/s under curving ego") {
    const double heading = 0.6;
    std::vector<Pose> boxes;
    std::vector<RigidTransform> ego;
    for (int i = 0; i < 7; ++i) {
        const double t = 0.5 * i;
        // Ego drives an arc of radius 20 m at 5 m/s.
        const double th = 5.0 * t / 20.0;
        const Pose e = Pose::make(20 * std::sin(th), 20 * (1 - std::cos(th)), 0.2, th);
        const Pose obj_world = Pose::make(3 + 2 * t * std::cos(heading), -7 + 2 * t * std::sin(heading), 0.0, heading);
        const RigidTransform e2w = RigidTransform::from_pose(e);
        boxes.push_back(e2w.inverse().apply(obj_world));
        ego.push_back(e2w);
    }
    const auto traj = transform_chain(boxes, ego);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        CHECK(traj[i].x == doctest::Approx(1.0 * static_cast<double>(i)).epsilon(1e-12));
        CHECK(std::abs(traj[i].y) <= 1e-12);
    }
}

TEST_CASE("transform_chain equals a direct world-to-target mapping") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> pos(-50, 50), ang(-kPi, kPi);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Pose> world, boxes;
        std::vector<RigidTransform> ego;
        for (int i = 0; i < 6; ++i) {
            world.push_back(Pose::make(pos(rng), pos(rng), 0.1 * pos(rng), ang(rng)));
            const RigidTransform e2w = RigidTransform::from_pose(Pose::make(pos(rng), pos(rng), 0.0, ang(rng)));
            boxes.push_back(e2w.inverse().apply(world.back()));
            ego.push_back(e2w);
        }
        const auto traj = transform_chain(boxes, ego);
        const double c = std::cos(world[0].yaw), s = std::sin(world[0].yaw);
        for (std::size_t i = 0; i < 6; ++i) {
            const double dx = world[i].x - world[0].x, dy = world[i].y - world[0].y;
            CHECK(std::abs(traj[i].x - (c * dx + s * dy)) <= 1e-9);
            CHECK(std::abs(traj[i].y - (-s * dx + c * dy)) <= 1e-9);
        }
        CHECK(std::abs(traj[0].x) <= 1e-12);
        CHECK(std::abs(traj[0].y) <= 1e-12);
    }
}
