#include "fump/data/generator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>

#include "fump/geometry/transform.hpp"

namespace fump::data {

using geo::Pose;
using geo::RigidTransform;
using geo::Vec2;
using scene::AgentClass;
using scene::AgentRecord;
using scene::MapPolyline;
using scene::PolylineKind;
using scene::Scene;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kT0 = -2.0;  // first history sample
constexpr std::size_t kSamples = scene::kHistory + 1 + scene::kHorizon;  // t = -2.0 .. 3.0

double sample_time(std::size_t i) { return kT0 + geo::kStepSeconds * static_cast<double>(i); }

struct Primitive {
    double length;
    double curvature;  // 1/m, positive turns left
};

struct PathPoint {
    Vec2 p;
    double heading;
    double curvature;
};

/// Chain of straight and constant-curvature pieces from a start pose,
/// continued straight before the start and after the end.
class Path {
public:
    Path(Vec2 start, double heading, std::vector<Primitive> prims)
        : start_(start), heading_(heading), prims_(std::move(prims)) {}

    PathPoint at(double s) const {
        if (s < 0.0) return {start_ + s * geo::unit(heading_), heading_, 0.0};
        Vec2 p = start_;
        double h = heading_;
        for (const Primitive& pr : prims_) {
            const double u = std::min(s, pr.length);
            const Vec2 q = advance(p, h, pr.curvature, u);
            if (s <= pr.length) return {q, h + pr.curvature * u, pr.curvature};
            p = q;
            h += pr.curvature * pr.length;
            s -= pr.length;
        }
        return {p + s * geo::unit(h), h, 0.0};
    }

private:
    static Vec2 advance(Vec2 p, double h, double k, double s) {
        if (k == 0.0) return p + s * geo::unit(h);
        return p + Vec2{(std::sin(h + k * s) - std::sin(h)) / k, -(std::cos(h + k * s) - std::cos(h)) / k};
    }

    Vec2 start_;
    double heading_;
    std::vector<Primitive> prims_;
};

double smoothstep5(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

double smoothstep5_dot(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return 30.0 * u * u * (1.0 - u) * (1.0 - u);
}

/// Along-path motion s(t) = s0 + v0 t + a t^2 / 2 (held once the speed
/// reaches zero under braking) with a smooth lateral shift.
struct Motion {
    const Path* path = nullptr;
    double offset = 0.0;  // lateral, left positive
    double s0 = 0.0;
    double v0 = 0.0;
    double accel = 0.0;
    double shift = 0.0;  // total lateral change
    double shift_start = 0.0;
    double shift_duration = 3.0;

    double stop_time() const {
        return accel < 0.0 && v0 > 0.0 ? -v0 / accel : std::numeric_limits<double>::infinity();
    }
    double s(double t) const {
        const double tt = std::min(t, stop_time());
        return s0 + v0 * tt + 0.5 * accel * tt * tt;
    }
    double s_dot(double t) const { return t >= stop_time() ? 0.0 : v0 + accel * t; }
    double lateral(double t) const {
        return offset + shift * smoothstep5((t - shift_start) / shift_duration);
    }
    double lateral_dot(double t) const {
        return shift / shift_duration * smoothstep5_dot((t - shift_start) / shift_duration);
    }

    Vec2 velocity(double t) const {
        const PathPoint c = path->at(s(t));
        const Vec2 tangent = geo::unit(c.heading);
        const Vec2 normal{-tangent.y, tangent.x};
        return s_dot(t) * (1.0 - c.curvature * lateral(t)) * tangent + lateral_dot(t) * normal;
    }

    Pose pose(double t) const {
        const PathPoint c = path->at(s(t));
        const Vec2 tangent = geo::unit(c.heading);
        const Vec2 p = c.p + lateral(t) * Vec2{-tangent.y, tangent.x};
        const Vec2 v = velocity(t);
        const double h = geo::norm(v) > 1e-9 ? std::atan2(v.y, v.x) : c.heading + (s_dot(t) < 0.0 ? kPi : 0.0);
        return Pose::make(p.x, p.y, 0.0, h);
    }

    double speed(double t) const { return geo::norm(velocity(t)); }
};

struct Lane {
    const Path* path;
    double offset;
    bool oncoming = false;
};

enum class Layout { Straight, Curve, Intersection };

struct World {
    std::vector<std::unique_ptr<Path>> paths;
    std::vector<Lane> lanes;       // drivable lanes for vehicles and cyclists
    std::vector<Lane> sidewalks;
    std::vector<MapPolyline> map;  // layout frame
    const Path* turn_left = nullptr;
    const Path* turn_right = nullptr;

    const Path* add(Path p) {
        paths.push_back(std::make_unique<Path>(std::move(p)));
        return paths.back().get();
    }
};

void add_polylines(World& w, const Path& path, double offset, double s_lo, double s_hi, PolylineKind kind,
                   double chunk = 20.0, double spacing = 5.0) {
    for (double a = s_lo; a < s_hi - 1e-9; a += chunk) {
        MapPolyline pl;
        pl.kind = kind;
        const double b = std::min(a + chunk, s_hi);
        const int pts = std::max(2, static_cast<int>(std::round((b - a) / spacing)) + 1);
        for (int i = 0; i < pts; ++i) {
            const double s = a + (b - a) * i / (pts - 1);
            const PathPoint c = path.at(s);
            const Vec2 t = geo::unit(c.heading);
            pl.points.push_back(c.p + offset * Vec2{-t.y, t.x});
        }
        w.map.push_back(std::move(pl));
    }
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
bool chance(std::mt19937_64& rng, double p) { return uniform(rng, 0.0, 1.0) < p; }

struct EgoPlan {
    std::string tag;
    Layout layout = Layout::Straight;
    int lanes = 2;
    int ego_lane = 0;
};

EgoPlan draw_maneuver(std::mt19937_64& rng, const ScenarioConfig& cfg) {
    const ManeuverMix& m = cfg.mix;
    const double u = uniform(rng, 0.0, m.total());
    EgoPlan p;
    p.lanes = chance(rng, 0.5) ? 2 : 3;
    if (u < m.keep_lane || u >= m.keep_lane + m.turn + m.lane_change + m.overtake) {
        p.tag = u < m.keep_lane ? "keep_lane" : "stop";
        if (chance(rng, cfg.intersection_probability)) {
            p.layout = Layout::Intersection;
            p.lanes = 2;
        } else {
            p.layout = chance(rng, cfg.curve_probability) ? Layout::Curve : Layout::Straight;
        }
        p.ego_lane = static_cast<int>(uniform(rng, 0.0, p.lanes - 1e-9));
    } else if (u < m.keep_lane + m.turn) {
        p.tag = chance(rng, 0.5) ? "turn_left" : "turn_right";
        p.layout = Layout::Intersection;
        p.lanes = 2;
        p.ego_lane = p.tag == "turn_left" ? 1 : 0;
    } else if (u < m.keep_lane + m.turn + m.lane_change) {
        const bool left = chance(rng, 0.5);
        p.tag = left ? "lane_change_left" : "lane_change_right";
        p.ego_lane = left ? static_cast<int>(uniform(rng, 0.0, p.lanes - 1 - 1e-9))
                          : 1 + static_cast<int>(uniform(rng, 0.0, p.lanes - 1 - 1e-9));
    } else {
        p.tag = "overtake";
        p.ego_lane = static_cast<int>(uniform(rng, 0.0, p.lanes - 1 - 1e-9));
    }
    return p;
}

// Builds lanes, sidewalks and polylines in the layout frame. Returns the
// reference path of the ego's road.
const Path* build_world(World& w, const EgoPlan& plan, const ScenarioConfig& cfg, std::mt19937_64& rng,
                        double& ego_s) {
    const double lw = cfg.lane_width;
    if (plan.layout == Layout::Intersection) {
        const double xs = 20.0 - lw / 2, xn = 20.0 + lw / 2;
        const double r_right = 8.0, r_left = 12.0;
        const Path* road = w.add(Path({-80.0, 0.0}, 0.0, {{200.0, 0.0}}));
        const Path* south = w.add(Path({xs, 80.0}, -kPi / 2, {{200.0, 0.0}}));
        const Path* north = w.add(Path({xn, -80.0}, kPi / 2, {{200.0, 0.0}}));
        const double a = xs - r_right, b = xn - r_left;
        w.turn_right = w.add(Path({-80.0, 0.0}, 0.0, {{a + 80.0, 0.0}, {kPi / 2 * r_right, -1.0 / r_right}, {100.0, 0.0}}));
        w.turn_left = w.add(Path({-80.0, lw}, 0.0, {{b + 80.0, 0.0}, {kPi / 2 * r_left, 1.0 / r_left}, {100.0, 0.0}}));
        w.lanes = {{road, 0.0}, {road, lw}, {south, 0.0}, {north, 0.0}};
        w.sidewalks = {{road, -lw / 2 - 2.5}, {road, 1.5 * lw + 2.5}};
        add_polylines(w, *road, 0.0, 40.0, 140.0, PolylineKind::LaneCenter);
        add_polylines(w, *road, lw, 40.0, 140.0, PolylineKind::LaneCenter);
        add_polylines(w, *road, -lw / 2, 40.0, 140.0, PolylineKind::Boundary);
        add_polylines(w, *road, 1.5 * lw, 40.0, 140.0, PolylineKind::Boundary);
        add_polylines(w, *south, 0.0, 40.0, 120.0, PolylineKind::LaneCenter);
        add_polylines(w, *north, 0.0, 40.0, 120.0, PolylineKind::LaneCenter);
        add_polylines(w, *w.turn_right, 0.0, a + 80.0, a + 80.0 + kPi / 2 * r_right, PolylineKind::LaneCenter, 20.0, 2.0);
        add_polylines(w, *w.turn_left, 0.0, b + 80.0, b + 80.0 + kPi / 2 * r_left, PolylineKind::LaneCenter, 20.0, 2.0);
        ego_s = 80.0;  // placeholder, the caller positions the ego along its turn path
        return road;
    }
    const Path* road;
    if (plan.layout == Layout::Curve) {
        const double r = uniform(rng, cfg.curve_radius_min, cfg.curve_radius_max);
        const double k = (chance(rng, 0.5) ? 1.0 : -1.0) / r;
        road = w.add(Path({0.0, 0.0}, 0.0, {{260.0, k}}));
    } else {
        road = w.add(Path({-100.0, 0.0}, 0.0, {{300.0, 0.0}}));
    }
    ego_s = 100.0;
    for (int l = 0; l < plan.lanes; ++l) w.lanes.push_back({road, l * lw});
    w.lanes.push_back({road, plan.lanes * lw, true});  // oncoming
    w.sidewalks = {{road, -lw / 2 - 2.5}, {road, (plan.lanes + 0.5) * lw + 2.5}};
    const double lo = ego_s - 35.0, hi = ego_s + 65.0;
    for (const Lane& lane : w.lanes) add_polylines(w, *road, lane.offset, lo, hi, PolylineKind::LaneCenter);
    add_polylines(w, *road, -lw / 2, lo, hi, PolylineKind::Boundary);
    add_polylines(w, *road, (plan.lanes + 0.5) * lw, lo, hi, PolylineKind::Boundary);
    return road;
}

Motion ego_motion(const EgoPlan& plan, const World& w, const Path* road, double ego_s, const ScenarioConfig& cfg,
                  std::mt19937_64& rng, const Path*& ego_path) {
    Motion m;
    m.path = road;
    m.offset = plan.ego_lane * cfg.lane_width;
    m.s0 = ego_s;
    m.v0 = uniform(rng, cfg.ego_speed_min, cfg.ego_speed_max);
    if (plan.layout == Layout::Intersection) m.s0 = uniform(rng, 60.0, 95.0);
    if (plan.tag == "stop") {
        m.v0 = uniform(rng, std::max(3.0, cfg.ego_speed_min), std::min(8.0, cfg.ego_speed_max));
        m.accel = -m.v0 / uniform(rng, 1.5, 4.0);
    } else if (plan.tag == "turn_left" || plan.tag == "turn_right") {
        const bool left = plan.tag == "turn_left";
        m.path = left ? w.turn_left : w.turn_right;
        m.offset = 0.0;
        m.v0 = uniform(rng, 3.0, 6.0);
        const double arc_start = left ? (20.0 + cfg.lane_width / 2 - 12.0 + 80.0) : (20.0 - cfg.lane_width / 2 - 8.0 + 80.0);
        m.s0 = arc_start - m.v0 * uniform(rng, -0.6, 0.5);
    } else if (plan.tag == "lane_change_left" || plan.tag == "lane_change_right") {
        m.shift = (plan.tag == "lane_change_left" ? 1.0 : -1.0) * cfg.lane_width;
        m.shift_start = uniform(rng, -1.0, 0.5);
        m.shift_duration = uniform(rng, 2.5, 3.5);
    } else if (plan.tag == "overtake") {
        m.v0 = uniform(rng, std::max(5.0, cfg.ego_speed_min), cfg.ego_speed_max);
        m.accel = uniform(rng, 0.8, 1.8);
        m.accel = std::min(m.accel, (m.v0 - 0.5) / 2.0);
        m.shift = cfg.lane_width;
        m.shift_start = uniform(rng, -1.0, 0.0);
        m.shift_duration = uniform(rng, 2.5, 3.0);
    }
    ego_path = m.path;
    return m;
}

std::array<Pose, kSamples> sample_poses(const Motion& m) {
    std::array<Pose, kSamples> out{};
    for (std::size_t i = 0; i < kSamples; ++i) out[i] = m.pose(sample_time(i));
    return out;
}

bool clear_of(const std::array<Pose, kSamples>& a, const std::array<Pose, kSamples>& b, double gap) {
    for (std::size_t i = 0; i < kSamples; ++i) {
        if (geo::distance(a[i].xy(), b[i].xy()) < gap) return false;
    }
    return true;
}

struct Candidate {
    Motion motion;
    AgentClass cls;
};

Candidate draw_agent(const World& w, const Motion& ego, const ScenarioConfig& cfg, std::mt19937_64& rng) {
    Candidate c;
    const double u = uniform(rng, 0.0, 1.0);
    c.cls = u < 0.75 ? AgentClass::Vehicle : (u < 0.88 ? AgentClass::Cyclist : AgentClass::Pedestrian);
    Motion& m = c.motion;
    const double ego_s = ego.s0;
    if (c.cls == AgentClass::Pedestrian) {
        const Lane& sw = w.sidewalks[static_cast<std::size_t>(uniform(rng, 0.0, w.sidewalks.size() - 1e-9))];
        m.path = sw.path;
        m.offset = sw.offset;
        m.s0 = ego_s + uniform(rng, -25.0, 35.0);
        m.v0 = (chance(rng, 0.5) ? 1.0 : -1.0) * uniform(rng, 0.8, 1.8);
        if (w.turn_left != nullptr) m.s0 = 80.0 + uniform(rng, -40.0, 15.0);
        return c;
    }
    const bool turning = w.turn_left != nullptr && c.cls == AgentClass::Vehicle && chance(rng, 0.5);
    if (turning) {
        m.path = chance(rng, 0.5) ? w.turn_left : w.turn_right;
        m.s0 = uniform(rng, 70.0, 105.0);
        m.v0 = uniform(rng, 2.0, 6.0);
        return c;
    }
    const Lane& lane = w.lanes[static_cast<std::size_t>(uniform(rng, 0.0, w.lanes.size() - 1e-9))];
    m.path = lane.path;
    m.offset = lane.offset;
    const bool cyclist = c.cls == AgentClass::Cyclist;
    const double speed = cyclist ? uniform(rng, 3.0, 6.0) : uniform(rng, 2.0, 12.0);
    m.v0 = lane.oncoming ? -speed : speed;
    if (cyclist) m.offset += lane.oncoming ? 1.0 : -1.0;
    const bool cross = w.turn_left != nullptr && lane.path != w.lanes[0].path;
    m.s0 = cross ? 80.0 + uniform(rng, -50.0, 40.0) : ego_s + uniform(rng, -30.0, 40.0);
    if (!cyclist && !lane.oncoming) {
        const double b = uniform(rng, 0.0, 1.0);
        if (b < 0.1) {
            m.accel = -speed / uniform(rng, 1.5, 5.0);
        } else if (b < 0.35 && !cross) {
            const double dir = m.offset > 0.0 ? -1.0 : 1.0;
            m.shift = dir * cfg.lane_width;
            m.shift_start = uniform(rng, -1.5, 1.0);
            m.shift_duration = uniform(rng, 2.5, 3.5);
        } else {
            m.accel = std::clamp(uniform(rng, -0.5, 0.5), -speed / 5.0, (speed - 0.5) / 2.0);
        }
    }
    return c;
}

AgentRecord make_record(int id, AgentClass cls, const std::array<Pose, kSamples>& poses, const Motion& m,
                        double noise, std::mt19937_64& rng) {
    AgentRecord a;
    a.id = id;
    a.cls = cls;
    const Pose& now = poses[scene::kHistory];
    a.position = now.xy();
    a.heading = now.yaw;
    a.speed = m.speed(0.0);
    std::normal_distribution<double> n(0.0, noise);
    for (std::size_t i = 0; i < scene::kHistory; ++i) {
        a.history[i] = poses[i].xy();
        if (noise > 0.0) a.history[i] = a.history[i] + Vec2{n(rng), n(rng)};
    }
    return a;
}

}  // namespace

void ScenarioConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("scenario config: " + what); };
    if (min_agents < 1) fail("min_agents must be >= 1");
    if (max_agents < min_agents) fail("max_agents must be >= min_agents");
    if (!(lane_width > 0.0)) fail("lane_width must be positive");
    if (!(curve_probability >= 0.0 && curve_probability <= 1.0)) fail("curve_probability must lie in [0, 1]");
    if (!(intersection_probability >= 0.0 && intersection_probability <= 1.0)) {
        fail("intersection_probability must lie in [0, 1]");
    }
    if (!(curve_radius_min > 0.0 && curve_radius_max >= curve_radius_min)) fail("curve radius range is empty");
    if (!(ego_speed_min > 0.0 && ego_speed_max >= ego_speed_min)) fail("ego speed range is empty");
    if (!(history_noise >= 0.0)) fail("history_noise must be >= 0");
    if (!(min_clearance >= 0.0)) fail("min_clearance must be >= 0");
    const ManeuverMix& m = mix;
    for (double p : {m.keep_lane, m.turn, m.lane_change, m.overtake, m.stop}) {
        if (!(p >= 0.0 && p <= 1.0)) fail("maneuver probabilities must lie in [0, 1]");
    }
    if (std::abs(m.total() - 1.0) > 1e-9) fail("maneuver probabilities must sum to 1");
}

std::uint64_t scene_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 of the pair
    std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + index + 1;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Scene generate_scene(std::uint64_t seed, const ScenarioConfig& cfg, int scene_id) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    const EgoPlan plan = draw_maneuver(rng, cfg);
    World world;
    double ego_s = 0.0;
    const Path* road = build_world(world, plan, cfg, rng, ego_s);
    const Path* ego_path = nullptr;
    const Motion ego = ego_motion(plan, world, road, ego_s, cfg, rng, ego_path);
    const auto ego_poses = sample_poses(ego);

    const int n_agents = static_cast<int>(uniform(rng, cfg.min_agents, cfg.max_agents + 1 - 1e-9));
    std::vector<Candidate> accepted;
    std::vector<std::array<Pose, kSamples>> accepted_poses;
    if (plan.tag == "overtake") {
        // Slow lead vehicle in the ego's original lane.
        Candidate lead;
        lead.cls = AgentClass::Vehicle;
        lead.motion.path = road;
        lead.motion.offset = plan.ego_lane * cfg.lane_width;
        lead.motion.v0 = std::max(1.0, ego.v0 - uniform(rng, 3.0, 5.0));
        for (int attempt = 0; attempt < 40; ++attempt) {
            lead.motion.s0 = ego.s0 + uniform(rng, 8.0, 18.0);
            const auto p = sample_poses(lead.motion);
            if (clear_of(p, ego_poses, cfg.min_clearance)) {
                accepted.push_back(lead);
                accepted_poses.push_back(p);
                break;
            }
        }
    }
    for (int attempt = 0; attempt < 60 * cfg.max_agents && static_cast<int>(accepted.size()) < n_agents - 1; ++attempt) {
        Candidate c = draw_agent(world, ego, cfg, rng);
        const auto p = sample_poses(c.motion);
        if (!clear_of(p, ego_poses, cfg.min_clearance)) continue;
        bool ok = true;
        for (const auto& q : accepted_poses) ok = ok && clear_of(p, q, 2.0);
        if (!ok) continue;
        accepted.push_back(c);
        accepted_poses.push_back(p);
    }

    // Random placement of the whole layout in the world frame.
    const double rot = uniform(rng, -kPi, kPi);
    const Vec2 shift{uniform(rng, -50.0, 50.0), uniform(rng, -50.0, 50.0)};
    const RigidTransform place = RigidTransform::from_pose(Pose::make(shift.x, shift.y, 0.0, rot));
    auto placed = [&](const std::array<Pose, kSamples>& poses) {
        std::array<Pose, kSamples> out{};
        for (std::size_t i = 0; i < kSamples; ++i) out[i] = place.apply(poses[i]);
        return out;
    };
    const auto ego_world = placed(ego_poses);

    // Ego-frame boxes and ego poses at t0 .. t0 + 3 s, as an annotation source would give them.
    std::vector<RigidTransform> ego_to_world;
    for (std::size_t i = scene::kHistory; i < kSamples; ++i) ego_to_world.push_back(RigidTransform::from_pose(ego_world[i]));
    auto future_of = [&](const std::array<Pose, kSamples>& world_poses) {
        std::vector<Pose> boxes;
        for (std::size_t i = scene::kHistory; i < kSamples; ++i) {
            boxes.push_back(ego_to_world[i - scene::kHistory].inverse().apply(world_poses[i]));
        }
        const auto local = geo::transform_chain(boxes, ego_to_world);
        scene::Trajectory f{};
        for (std::size_t t = 0; t < scene::kHorizon; ++t) f[t] = local[t + 1];
        return f;
    };

    Scene s;
    s.scene_id = scene_id;
    s.ego_id = 1;
    s.maneuver_tag = plan.tag;
    AgentRecord ego_rec = make_record(1, AgentClass::Vehicle, ego_world, ego, cfg.history_noise, rng);
    ego_rec.future_gt = future_of(ego_world);
    s.agents.push_back(ego_rec);
    for (std::size_t i = 0; i < accepted.size(); ++i) {
        const auto wp = placed(accepted_poses[i]);
        AgentRecord a = make_record(static_cast<int>(i) + 2, accepted[i].cls, wp, accepted[i].motion, cfg.history_noise, rng);
        a.future_gt = future_of(wp);
        s.agents.push_back(a);
    }
    for (auto pl : world.map) {
        for (auto& p : pl.points) p = place.apply(p);
        s.map.push_back(std::move(pl));
    }

    constexpr double h = 1e-4;
    s.ego_state_gt.speed = ego.speed(0.0);
    s.ego_state_gt.accel = (ego.speed(h) - ego.speed(-h)) / (2.0 * h);
    s.ego_state_gt.yaw_rate = geo::normalize_angle(ego.pose(h).yaw - ego.pose(-h).yaw) / (2.0 * h);
    s.ego_future_gt = scene::heading_x_to_y(ego_rec.future_gt);
    return s;
}

std::vector<Scene> generate_dataset(std::uint64_t seed, std::size_t count, const ScenarioConfig& config) {
    std::vector<Scene> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(generate_scene(scene_seed(seed, i), config, static_cast<int>(i)));
    return out;
}

}  // namespace fump::data
