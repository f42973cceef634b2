#include "fump/checks/checks.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fump/data/generator.hpp"
#include "fump/ecsa/ecsa.hpp"
#include "fump/geometry/transform.hpp"
#include "fump/memory/queue.hpp"
#include "fump/numerics/gradcheck.hpp"
#include "fump/numerics/ops.hpp"
#include "fump/uttd/model.hpp"

namespace fump::checks {

using geo::Pose;
using geo::RigidTransform;
using geo::Vec2;

namespace {

constexpr double kPi = std::numbers::pi;

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

CaseResult bound(std::string name, double value, double tolerance, std::string detail = {}) {
    return CaseResult{std::move(name), value <= tolerance, value, tolerance, std::move(detail)};
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Rotation in (-pi, pi].
double rotation(std::mt19937_64& rng) { return -uniform(rng, -kPi, kPi); }

double max_abs_diff(const num::Tensor& a, const num::Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

bool bitwise_equal(const num::Tensor& a, const num::Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
    }
    return true;
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

bool SuiteResult::passed() const {
    return std::all_of(cases.begin(), cases.end(), [](const CaseResult& c) { return c.passed; });
}

double SuiteResult::worst() const {
    double w = 0.0;
    for (const auto& c : cases) w = std::max(w, c.value);
    return w;
}

std::string SuiteResult::report() const {
    std::ostringstream os;
    char buf[64];
    for (const auto& c : cases) {
        os << (c.passed ? "PASS " : "FAIL ") << suite << '/' << c.name;
        std::snprintf(buf, sizeof buf, " value=%.3e tol=%.3e", c.value, c.tolerance);
        os << buf;
        if (!c.detail.empty()) os << " (" << c.detail << ')';
        os << '\n';
    }
    std::size_t ok = 0;
    for (const auto& c : cases) ok += c.passed ? 1 : 0;
    std::snprintf(buf, sizeof buf, " %.2fs", seconds);
    os << (passed() ? "PASS " : "FAIL ") << suite << ": " << ok << '/' << cases.size() << " cases, worst "
       << worst() << buf << '\n';
    return os.str();
}

SuiteResult equivariance_suite(const EquivarianceOptions& o) {
    Timer timer;
    SuiteResult res{"equivariance", {}, 0.0};
    const ecsa::EcsaConfig cfg;
    const ecsa::Ecsa enc(cfg);
    num::ParameterStore store;
    num::Rng init_rng(o.seed);
    enc.init(store, init_rng);
    std::mt19937_64 rng(o.seed + 1);
    const data::ScenarioConfig sc;
    for (std::size_t i = 0; i < o.scenes; ++i) {
        const scene::Scene s = data::generate_scene(data::scene_seed(o.seed, i), sc, static_cast<int>(i));
        num::Tape base_tape(&store, false);
        const num::Tensor base = enc.forward(base_tape, s).embeddings.value();
        double worst = 0.0;
        for (std::size_t t = 0; t < o.transforms; ++t) {
            const double angle = rotation(rng);
            const Vec2 shift{uniform(rng, -100.0, 100.0), uniform(rng, -100.0, 100.0)};
            num::Tape tape(&store, false);
            const num::Tensor moved = enc.forward(tape, scene::transform_scene(s, angle, shift)).embeddings.value();
            worst = std::max(worst, max_abs_diff(base, moved));
        }
        res.cases.push_back(bound("scene " + std::to_string(i), worst, o.tolerance,
                                  std::to_string(base.rows()) + " nodes x " + std::to_string(o.transforms) +
                                      " transforms"));
    }
    res.seconds = timer.seconds();
    return res;
}

SuiteResult gradient_suite(const GradientOptions& o) {
    Timer timer;
    SuiteResult res{"gradients", {}, 0.0};
    data::ScenarioConfig sc;
    sc.min_agents = sc.max_agents = o.agents;
    for (std::size_t seed = 1; seed <= o.seeds; ++seed) {
        uttd::ModelConfig mc;
        mc.encoder = small_encoder();
        const uttd::Model model(mc);
        num::ParameterStore store;
        num::Rng rng(seed);
        model.init(store, rng);
        const scene::Scene s = data::generate_scene(data::scene_seed(seed, 77), sc);

        // A filled queue so the fusion branch is on the loss path.
        memory::HardSampleQueue queue(8);
        std::vector<memory::MemoryEntry> entries;
        for (const auto& a : s.agents) entries.push_back({a.future_gt, 1.0, {}});
        queue.batch_update(entries, rng);

        const num::LossBuilder loss = [&](num::Tape& tape) { return model.scene_loss(tape, s, &queue, 0.5).total; };
        const auto r = num::finite_diff_check(store, loss, o.step, o.samples_per_param, seed);
        res.cases.push_back(bound("seed " + std::to_string(seed), r.max_rel_error, o.tolerance,
                                  std::to_string(r.coords_checked) + " coordinates, worst " + r.worst_param + "[" +
                                      std::to_string(r.worst_index) + "]"));
    }
    res.seconds = timer.seconds();
    return res;
}

SuiteResult geometry_suite(const GeometryOptions& o) {
    Timer timer;
    SuiteResult res{"geometry", {}, 0.0};
    std::mt19937_64 rng(o.seed);
    double round_trip = 0.0, anchor = 0.0, world = 0.0;
    for (std::size_t c = 0; c < o.chains; ++c) {
        const std::size_t n = 2 + rng() % 7;
        std::vector<Pose> ego_w, obj_w, boxes;
        Pose e = Pose::make(uniform(rng, -500, 500), uniform(rng, -500, 500), uniform(rng, -2, 2), rotation(rng));
        Pose b = Pose::make(e.x + uniform(rng, -60, 60), e.y + uniform(rng, -60, 60), e.z + uniform(rng, -1, 1),
                            rotation(rng));
        for (std::size_t t = 0; t < n; ++t) {
            ego_w.push_back(e);
            obj_w.push_back(b);
            e = Pose::make(e.x + uniform(rng, -8, 8), e.y + uniform(rng, -8, 8), e.z, e.yaw + uniform(rng, -0.4, 0.4));
            b = Pose::make(b.x + uniform(rng, -8, 8), b.y + uniform(rng, -8, 8), b.z, b.yaw + uniform(rng, -0.4, 0.4));
        }

        // Boxes as a detector in each ego frame would report them.
        std::vector<RigidTransform> e2w;
        for (std::size_t t = 0; t < n; ++t) {
            const geo::Vec3 p = geo::world_to_target(ego_w[t]).apply(geo::Vec3{obj_w[t].x, obj_w[t].y, obj_w[t].z});
            boxes.push_back(Pose::make(p.x, p.y, p.z, obj_w[t].yaw - ego_w[t].yaw));
            e2w.push_back(RigidTransform::from_pose(ego_w[t]));
        }
        const auto track = geo::transform_chain(boxes, e2w);

        const RigidTransform direct = geo::world_to_target(obj_w[0]);
        const RigidTransform back = RigidTransform::from_pose(obj_w[0]);
        for (std::size_t t = 0; t < n; ++t) {
            round_trip = std::max(round_trip, geo::distance(track[t], direct.apply(obj_w[t].xy())));
            round_trip = std::max(round_trip, geo::distance(back.apply(track[t]), obj_w[t].xy()));
        }
        anchor = std::max(anchor, std::hypot(track[0].x, track[0].y));

        // Re-express the world in another frame; the ego-frame boxes stay put.
        const RigidTransform g = RigidTransform::from_pose(
            Pose::make(uniform(rng, -1000, 1000), uniform(rng, -1000, 1000), uniform(rng, -5, 5), rotation(rng)));
        std::vector<RigidTransform> moved;
        for (const auto& m : e2w) moved.push_back(geo::compose(g, m));
        const auto track2 = geo::transform_chain(boxes, moved);
        for (std::size_t t = 0; t < n; ++t) world = std::max(world, geo::distance(track[t], track2[t]));
    }
    const std::string chains = std::to_string(o.chains) + " chains";
    res.cases.push_back(bound("round trip (m)", round_trip, o.round_trip_tolerance, chains));
    res.cases.push_back(bound("t0 anchoring (m)", anchor, o.anchor_tolerance, chains));
    res.cases.push_back(bound("world-frame choice (m)", world, o.world_frame_tolerance, chains));
    res.seconds = timer.seconds();
    return res;
}

namespace {

// Straight restatement of the queue rules, used as the oracle.
struct QueueModel {
    std::size_t capacity;
    double threshold = 0.0;
    std::vector<memory::MemoryEntry> entries;

    bool update(const std::vector<memory::MemoryEntry>& candidates, std::mt19937_64& rng) {
        std::size_t admitted = 0;
        std::optional<std::size_t> best_rejected;
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            const auto& cand = candidates[c];
            bool in = false;
            if (cand.loss > threshold) {
                if (entries.size() < capacity) {
                    entries.push_back(cand);
                    in = true;
                } else {
                    auto lowest = std::min_element(entries.begin(), entries.end(),
                                                   [](const auto& a, const auto& b) { return a.loss < b.loss; });
                    if (cand.loss > lowest->loss) {
                        *lowest = cand;
                        in = true;
                    }
                }
            }
            if (in) {
                ++admitted;
            } else if (!best_rejected || cand.loss > candidates[*best_rejected].loss) {
                best_rejected = c;
            }
        }
        if (admitted > 0 && best_rejected) {
            entries[std::uniform_int_distribution<std::size_t>(0, entries.size() - 1)(rng)] =
                candidates[*best_rejected];
            return true;
        }
        return false;
    }
};

double ulp_distance(double a, double b) {
    if (a == b) return 0.0;
    auto key = [](double x) {
        const auto u = std::bit_cast<std::int64_t>(x);
        return u < 0 ? std::numeric_limits<std::int64_t>::min() - u : u;
    };
    return std::abs(static_cast<double>(key(a) - key(b)));
}

scene::Trajectory random_trajectory(std::mt19937_64& rng) {
    scene::Trajectory t{};
    for (auto& p : t) p = {uniform(rng, -20, 20), uniform(rng, -20, 20)};
    return t;
}

}  // namespace

SuiteResult memory_suite(const MemoryOptions& o) {
    Timer timer;
    SuiteResult res{"memory", {}, 0.0};
    double capacity_violations = 0, model_mismatches = 0, gate_violations = 0, eviction_violations = 0;
    double unchanged_violations = 0, worst_ulps = 0, match_mismatches = 0;
    std::size_t ops_run = 0;
    for (std::size_t seed = 1; seed <= o.seeds; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t cap = 1 + rng() % o.max_capacity;
        const double gamma = uniform(rng, 0.05, 0.95);
        memory::HardSampleQueue q(cap, gamma);
        QueueModel model{cap, 0.0, {}};
        std::mt19937_64 q_rng(seed * 31), m_rng(seed * 31);
        const std::size_t n_ops = 1 + rng() % o.max_ops;
        double next_id = 0.0;
        for (std::size_t op = 0; op < n_ops; ++op, ++ops_run) {
            const auto kind = rng() % 3;
            if (kind == 0) {
                const double eps = q.threshold();
                const double loss = uniform(rng, 0.0, 10.0);
                const double got = q.update_threshold(loss);
                const long double exact = static_cast<long double>(gamma) * eps +
                                          (1.0L - static_cast<long double>(gamma)) * loss;
                worst_ulps = std::max(worst_ulps, ulp_distance(got, static_cast<double>(exact)));
                model.threshold = got;
            } else if (kind == 1) {
                std::vector<memory::MemoryEntry> cands(rng() % 6);
                for (auto& c : cands) {
                    // Coarse losses so ties occur.
                    c.loss = std::floor(uniform(rng, 0.0, 10.0) * 2.0) / 2.0;
                    c.trajectory = random_trajectory(rng);
                    c.embedding = {next_id++};
                }
                const auto before = q.entries();
                const auto stats = q.batch_update(cands, q_rng);
                const bool model_replaced = model.update(cands, m_rng);
                if (model.entries != q.entries() || model_replaced != stats.random_replacement) ++model_mismatches;
                const auto& after = q.entries();
                if (after.size() > cap) ++capacity_violations;
                if (stats.admitted == 0 && after != before) ++unchanged_violations;

                auto present = [](const std::vector<memory::MemoryEntry>& v, double id) {
                    return std::any_of(v.begin(), v.end(), [&](const auto& e) { return e.embedding[0] == id; });
                };
                // New entries must have cleared the gate, except one random slot.
                std::size_t below_gate = 0;
                for (const auto& e : after) {
                    if (!present(before, e.embedding[0]) && !(e.loss > q.threshold())) ++below_gate;
                }
                if (below_gate > (stats.random_replacement ? 1u : 0u)) ++gate_violations;
                // Retained entries outrank every evicted one, except one random eviction.
                std::size_t outranked = 0;
                for (const auto& e : before) {
                    if (present(after, e.embedding[0])) continue;
                    const bool beaten = std::any_of(after.begin(), after.end(), [&](const auto& r) {
                        return present(before, r.embedding[0]) && r.loss < e.loss;
                    });
                    if (beaten) ++outranked;
                }
                if (outranked > (stats.random_replacement ? 1u : 0u)) ++eviction_violations;
            } else {
                const scene::Trajectory probe = random_trajectory(rng);
                const auto slot = q.match(probe);
                if (q.empty()) {
                    if (slot) ++match_mismatches;
                    continue;
                }
                double best = std::numeric_limits<double>::infinity();
                for (const auto& e : q.entries()) best = std::min(best, memory::mean_step_distance(e.trajectory, probe));
                if (!slot || memory::mean_step_distance(q.entries()[*slot].trajectory, probe) != best) {
                    ++match_mismatches;
                }
                // Reversed slot order gives the same minimal distance.
                memory::HardSampleQueue rev(cap, gamma);
                std::vector<memory::MemoryEntry> reversed(q.entries().rbegin(), q.entries().rend());
                std::mt19937_64 scratch(0);
                rev.set_threshold(-1.0);
                rev.batch_update(reversed, scratch);
                const auto rs = rev.match(probe);
                if (!rs || memory::mean_step_distance(rev.entries()[*rs].trajectory, probe) != best) ++match_mismatches;
            }
        }
    }
    const std::string ops = std::to_string(ops_run) + " operations over " + std::to_string(o.seeds) + " seeds";
    res.cases.push_back(bound("capacity never exceeded", capacity_violations, 0.0, ops));
    res.cases.push_back(bound("admission gate", gate_violations, 0.0));
    res.cases.push_back(bound("min-eviction", eviction_violations, 0.0));
    res.cases.push_back(bound("no admission leaves the queue unchanged", unchanged_violations, 0.0));
    res.cases.push_back(bound("agrees with the reference model", model_mismatches, 0.0));
    res.cases.push_back(bound("threshold recurrence vs closed form (ulp)", worst_ulps, 1.0));
    res.cases.push_back(bound("match equals exhaustive scan", match_mismatches, 0.0));

    // Constant loss: eps_t - L = gamma^t (eps_0 - L).
    double worst_geo = 0.0;
    for (double eps0 : {0.0, 3.0, -2.0}) {
        double eps = eps0;
        for (int t = 1; t <= 30; ++t) {
            eps = memory::update_threshold(eps, 1.5, 0.2);
            worst_geo = std::max(worst_geo, std::abs((eps - 1.5) - std::pow(0.2, t) * (eps0 - 1.5)));
        }
    }
    res.cases.push_back(bound("constant loss converges geometrically", worst_geo, 1e-15));
    res.seconds = timer.seconds();
    return res;
}

SuiteResult masking_suite(const MaskingOptions& o) {
    Timer timer;
    SuiteResult res{"masking", {}, 0.0};
    uttd::ModelConfig mc;
    mc.encoder = small_encoder();
    const uttd::Model model(mc);
    num::ParameterStore store;
    num::Rng rng(o.seed);
    model.init(store, rng);
    const data::ScenarioConfig sc;
    std::size_t differing = 0, inert = 0;
    for (std::size_t i = 0; i < o.scenes; ++i) {
        const scene::Scene s = data::generate_scene(data::scene_seed(o.seed, i), sc, static_cast<int>(i));
        num::Tape tape(&store, false);
        const auto enc = model.encode(tape, s);
        const uttd::StageOne s1 = model.decode(tape, enc, s);
        const std::size_t row0[] = {0};
        const num::Var q = num::gather_rows(s1.queries, row0);
        const num::Var traj = num::gather_rows(s1.trajectories, row0);
        const scene::Trajectory matched = s.agents.back().future_gt;

        auto run = [&](const scene::EgoState& st, double u) {
            const num::Var state = tape.constant(uttd::masked_state_row(st, u));
            const uttd::Refined r = model.decoder().stage2(tape, q, state, traj, &model.fusion(), &matched);
            return std::make_pair(r.trajectories.value(), r.scores.value());
        };
        auto draw = [&] {
            return scene::EgoState{uniform(rng, 0, 15), uniform(rng, -0.5, 0.5), uniform(rng, -4, 2)};
        };
        const auto first = run(draw(), 0.0);
        bool same = true;
        for (std::size_t k = 1; k < o.states; ++k) {
            const auto other = run(draw(), uniform(rng, 0.0, uttd::kMaskProbability));
            same = same && bitwise_equal(other.first, first.first) && bitwise_equal(other.second, first.second);
        }
        if (!same) ++differing;
        // With m = 1 the state must reach the output, or the check is vacuous.
        if (bitwise_equal(run(draw(), 0.5).first, run(draw(), 0.5).first)) ++inert;
    }
    const std::string n = std::to_string(o.scenes) + " scenes x " + std::to_string(o.states) + " states";
    res.cases.push_back(bound("m = 0 outputs bitwise identical", static_cast<double>(differing), 0.0, n));
    res.cases.push_back(bound("m = 1 outputs depend on the state", static_cast<double>(inert), 0.0, n));
    res.seconds = timer.seconds();
    return res;
}

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"equivariance", "gradients", "geometry", "memory", "masking"};
    return names;
}

SuiteResult run_suite(const std::string& name) {
    if (name == "equivariance") return equivariance_suite();
    if (name == "gradients") return gradient_suite();
    if (name == "geometry") return geometry_suite();
    if (name == "memory") return memory_suite();
    if (name == "masking") return masking_suite();
    throw std::invalid_argument("unknown suite '" + name + "'");
}

}  // namespace fump::checks
