#include "fump/uttd/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fump/scene/graph.hpp"

namespace fump::uttd {

using num::Tensor;

Decoder::Decoder(const DecoderConfig& c) : config_(c) {
    const std::size_t d = c.d_model;
    const std::size_t out = row_width() + c.modes;
    ca_ = num::CrossAttention("uttd.ca", d);
    tdc_ = num::Mlp("uttd.tdc", num::mlp_widths(d, c.hidden, c.depth, out));
    stp_ = num::Mlp("uttd.stp", num::mlp_widths(d + kHistoryEncodingWidth, c.hidden, c.depth, 3));
    state_embed_ = num::Mlp("uttd.state", num::mlp_widths(3, c.hidden, 1, d));
    traj_embed_ = num::Mlp("uttd.traj", num::mlp_widths(row_width(), c.hidden, 1, d));
    refine_ = num::Mlp("uttd.refine", num::mlp_widths(3 * d, c.hidden, c.depth, out));
}

void Decoder::init(num::ParameterStore& store, num::Rng& rng) const {
    store.add(kPlanQuery, num::xavier_uniform(1, config_.d_model, rng));
    store.add(kMotionQuery, num::xavier_uniform(1, config_.d_model, rng));
    ca_.init(store, rng);
    tdc_.init(store, rng, 0.5);
    stp_.init(store, rng);
    state_embed_.init(store, rng);
    traj_embed_.init(store, rng);
    refine_.init(store, rng, 0.1);
}

StageOne Decoder::stage1(num::Tape& tape, Var nodes, std::size_t ego_node,
                         std::span<const std::size_t> agent_nodes) const {
    std::vector<std::size_t> rows{ego_node};
    rows.insert(rows.end(), agent_nodes.begin(), agent_nodes.end());
    std::vector<Var> learned{tape.param(kPlanQuery)};
    if (!agent_nodes.empty()) learned.push_back(num::broadcast_rows(tape.param(kMotionQuery), agent_nodes.size()));
    const Var q0 = num::add(num::concat_rows(learned), num::gather_rows(nodes, rows));
    const Var q = num::add(q0, ca_.forward(tape, q0, nodes, nodes));
    const Var out = tdc_.forward(tape, q);
    StageOne s;
    s.queries = q;
    s.trajectories = num::scale(
        num::cumsum_steps(num::slice_cols(out, 0, row_width()), config_.modes, scene::kHorizon), kDisplacementScale);
    s.scores = num::slice_cols(out, row_width(), config_.modes);
    return s;
}

Var Decoder::predict_state(num::Tape& tape, Var query_row, Var history) const {
    const Var parts[] = {query_row, history};
    return stp_.forward(tape, num::concat_cols(parts));
}

Refined Decoder::stage2(num::Tape& tape, Var query_row, Var state, Var stage1_row, const memory::MemoryFusion* fusion,
                        const Trajectory* matched) const {
    Var q = query_row;
    if (fusion != nullptr && matched != nullptr) q = fusion->fuse(tape, q, *matched);
    const Var se = state_embed_.forward(tape, state);
    const Var te = traj_embed_.forward(tape, num::scale(stage1_row, 1.0 / memory::kTrajectoryInputScale));
    const Var parts[] = {q, se, te};
    const Var out = refine_.forward(tape, num::concat_cols(parts));
    Refined r;
    r.trajectories = num::add(stage1_row, num::scale(num::slice_cols(out, 0, row_width()), kDisplacementScale));
    r.scores = num::slice_cols(out, row_width(), config_.modes);
    return r;
}

Tensor state_row(const EgoState& s) {
    return Tensor::row({s.speed / kStateScale[0], s.yaw_rate / kStateScale[1], s.accel / kStateScale[2]});
}

EgoState state_from_row(std::span<const double> row) {
    return EgoState{row[0] * kStateScale[0], row[1] * kStateScale[1], row[2] * kStateScale[2]};
}

Tensor history_encoding(const scene::AgentRecord& a) {
    const auto f = scene::agent_node_features(a);
    Tensor t = Tensor::matrix(1, kHistoryEncodingWidth);
    std::copy(f.begin() + scene::kNodeClasses + 1, f.end(), t.data().begin());
    return t;
}

std::pair<EgoState, int> apply_state_mask(const EgoState& s, double u, double p) {
    if (u < p) return {EgoState{}, 0};
    return {s, 1};
}

Tensor masked_state_row(const EgoState& s, double u, double p) {
    const auto [masked, m] = apply_state_mask(s, u, p);
    return m == 0 ? Tensor::matrix(1, 3) : state_row(masked);
}

std::vector<Vec2> pseudo_plan_gt(const scene::AgentRecord& ego, std::span<const scene::MapPolyline> map,
                                 double t_traj_seconds) {
    const double radius = ego.speed * t_traj_seconds;
    const Vec2 c = ego.position;
    const Vec2 fwd = geo::unit(ego.heading);
    std::vector<Vec2> out;
    if (radius > 0.0) {
        auto keep = [&](Vec2 p) {
            if (geo::dot(p - c, fwd) <= 0.0) return;
            for (const Vec2& q : out) {
                if (geo::distance(p, q) <= 1e-9) return;
            }
            out.push_back(p);
        };
        for (const auto& pl : map) {
            if (pl.kind != scene::PolylineKind::LaneCenter) continue;
            for (std::size_t i = 0; i + 1 < pl.points.size(); ++i) {
                const Vec2 p0 = pl.points[i];
                const Vec2 d = pl.points[i + 1] - p0;
                const Vec2 f = p0 - c;
                const double a = geo::dot(d, d);
                const double b = 2.0 * geo::dot(f, d);
                const double cc = geo::dot(f, f) - radius * radius;
                const double disc = b * b - 4.0 * a * cc;
                if (a == 0.0 || disc < 0.0) continue;
                const double sq = std::sqrt(disc);
                // Citardauq form keeps both roots accurate.
                const double qq = -0.5 * (b + std::copysign(sq, b));
                double roots[2] = {qq / a, qq != 0.0 ? cc / qq : qq / a};
                if (roots[0] > roots[1]) std::swap(roots[0], roots[1]);
                for (double t : roots) {
                    if (t >= 0.0 && t <= 1.0) keep(p0 + t * d);
                }
            }
        }
    }
    if (out.empty()) out.push_back(c);
    return out;
}

Trajectory proposal(std::span<const double> row, std::size_t k) {
    Trajectory t{};
    const std::size_t base = k * scene::kHorizon * 2;
    for (std::size_t s = 0; s < scene::kHorizon; ++s) t[s] = {row[base + 2 * s], row[base + 2 * s + 1]};
    return t;
}

std::size_t argmax(std::span<const double> scores) {
    return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

WtaLoss wta_loss(Var trajectories, Var scores, std::span<const Trajectory> gt, std::size_t modes, bool regression) {
    const Tensor& tv = trajectories.value();
    const std::size_t rows = tv.rows();
    const std::size_t steps = scene::kHorizon;
    const std::size_t width = modes * steps * 2;
    if (tv.cols() != width || gt.size() != rows) {
        throw std::invalid_argument("wta_loss: expected " + std::to_string(gt.size()) + " x " + std::to_string(width) +
                                    " trajectories, got " + num::shape_string(tv.shape()));
    }
    const bool with_scores = scores.valid();
    if (with_scores && (scores.rows() != rows || scores.cols() != modes)) {
        throw std::invalid_argument("wta_loss: scores shape " + num::shape_string(scores.value().shape()));
    }
    if (!regression && !with_scores) throw std::invalid_argument("wta_loss: nothing to compute");

    WtaLoss res;
    res.row_loss.resize(rows);
    res.best.resize(rows);
    std::vector<double> probs(with_scores ? rows * modes : 0);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = &tv.data()[r * width];
        double best_d = std::numeric_limits<double>::infinity();
        std::size_t best_k = 0;
        for (std::size_t k = 0; k < modes; ++k) {
            double dsum = 0.0;
            for (std::size_t s = 0; s < steps; ++s) {
                dsum += std::hypot(row[k * steps * 2 + 2 * s] - gt[r][s].x, row[k * steps * 2 + 2 * s + 1] - gt[r][s].y);
            }
            const double dk = dsum / static_cast<double>(steps);
            if (dk < best_d) {
                best_d = dk;
                best_k = k;
            }
        }
        double l = regression ? best_d : 0.0;
        if (with_scores) {
            const double* sc = &scores.value().data()[r * modes];
            const double mx = *std::max_element(sc, sc + modes);
            double z = 0.0;
            for (std::size_t k = 0; k < modes; ++k) z += std::exp(sc[k] - mx);
            for (std::size_t k = 0; k < modes; ++k) probs[r * modes + k] = std::exp(sc[k] - mx) / z;
            l += mx + std::log(z) - sc[best_k];
        }
        res.row_loss[r] = l;
        res.best[r] = best_k;
        total += l;
    }
    const double inv_rows = 1.0 / static_cast<double>(rows);
    const bool needs = (regression && trajectories.needs_grad()) || (with_scores && scores.needs_grad());
    const auto it = trajectories.id();
    const auto is = with_scores ? scores.id() : 0;
    const std::vector<std::size_t> best = res.best;
    std::vector<Trajectory> gts(gt.begin(), gt.end());
    res.loss = num::record_op(
        trajectories.tape(), Tensor::scalar(total * inv_rows), needs,
        [=, gts = std::move(gts), probs = std::move(probs)](num::Tape& t, std::uint32_t o) {
            const double g = t.grad(o)[0] * inv_rows;
            if (regression && t.needs_grad(it)) {
                const Tensor& v = t.value(it);
                Tensor& gv = t.grad(it);
                for (std::size_t r = 0; r < rows; ++r) {
                    const std::size_t base = r * width + best[r] * steps * 2;
                    for (std::size_t s = 0; s < steps; ++s) {
                        const double dx = v.data()[base + 2 * s] - gts[r][s].x;
                        const double dy = v.data()[base + 2 * s + 1] - gts[r][s].y;
                        const double n = std::hypot(dx, dy);
                        if (n == 0.0) continue;
                        const double w = g / (static_cast<double>(steps) * n);
                        gv.data()[base + 2 * s] += w * dx;
                        gv.data()[base + 2 * s + 1] += w * dy;
                    }
                }
            }
            if (with_scores && t.needs_grad(is)) {
                Tensor& gs = t.grad(is);
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t k = 0; k < modes; ++k) {
                        gs.data()[r * modes + k] += g * (probs[r * modes + k] - (k == best[r] ? 1.0 : 0.0));
                    }
                }
            }
        });
    return res;
}

Var stage1_plan_loss(Var trajectory_row, std::span<const Vec2> targets, const Trajectory& plan_gt, double hinge_d,
                     std::size_t modes) {
    if (targets.empty()) throw std::invalid_argument("stage1_plan_loss: empty target set");
    const Tensor& tv = trajectory_row.value();
    const std::size_t steps = scene::kHorizon;
    if (tv.rows() != 1 || tv.cols() != modes * steps * 2) {
        throw std::invalid_argument("stage1_plan_loss: trajectory row shape " + num::shape_string(tv.shape()));
    }
    double total = 0.0;
    std::vector<double> gx(modes, 0.0), gy(modes, 0.0);  // d(term)/d(endpoint)
    for (std::size_t k = 0; k < modes; ++k) {
        const std::size_t e = k * steps * 2 + 2 * (steps - 1);
        const Vec2 end{tv.data()[e], tv.data()[e + 1]};
        double best = std::numeric_limits<double>::infinity();
        Vec2 best_t;
        for (const Vec2& p : targets) {
            const double d = geo::distance(end, p);
            if (d < best) {
                best = d;
                best_t = p;
            }
        }
        if (best - hinge_d > 0.0) {
            total += best - hinge_d;
            if (best > 0.0) {
                gx[k] = (end.x - best_t.x) / best;
                gy[k] = (end.y - best_t.y) / best;
            }
        }
    }
    const double inv_k = 1.0 / static_cast<double>(modes);
    const auto it = trajectory_row.id();
    const Var dist = num::record_op(trajectory_row.tape(), Tensor::scalar(total * inv_k), trajectory_row.needs_grad(),
                                    [=](num::Tape& t, std::uint32_t o) {
                                        const double g = t.grad(o)[0] * inv_k;
                                        Tensor& gv = t.grad(it);
                                        for (std::size_t k = 0; k < modes; ++k) {
                                            const std::size_t e = k * steps * 2 + 2 * (steps - 1);
                                            gv.data()[e] += g * gx[k];
                                            gv.data()[e + 1] += g * gy[k];
                                        }
                                    });
    const Trajectory gts[] = {plan_gt};
    return num::add(dist, wta_loss(trajectory_row, Var{}, gts, modes).loss);
}

Var state_loss(Var predicted_row, const EgoState& truth) {
    const Var diff = num::sub(predicted_row, predicted_row.tape().constant(state_row(truth)));
    return num::sum(num::mul(diff, diff));
}

}  // namespace fump::uttd
