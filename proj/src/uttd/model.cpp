#include "fump/uttd/model.hpp"

#include <numeric>
#include <stdexcept>

namespace fump::uttd {

using num::Tensor;

namespace {

std::vector<std::size_t> agent_rows(const scene::Scene& s) {
    std::vector<std::size_t> rows(s.agents.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

Var row_of(Var m, std::size_t r) {
    const std::size_t idx[] = {r};
    return num::gather_rows(m, idx);
}

std::vector<Trajectory> split_modes(std::span<const double> row, std::size_t modes) {
    std::vector<Trajectory> out;
    for (std::size_t k = 0; k < modes; ++k) out.push_back(proposal(row, k));
    return out;
}

// Inference never records or writes gradients, so the store is only read.
num::ParameterStore* readonly(const num::ParameterStore& store) { return const_cast<num::ParameterStore*>(&store); }

}  // namespace

Model::Model(const ModelConfig& c) : config_(c) {
    if (c.use_ecsa) {
        ecsa_ = ecsa::Ecsa(c.encoder);
    } else {
        plain_ = ecsa::PlainEncoder(c.encoder);
    }
    decoder_ = Decoder(DecoderConfig{c.encoder.d_model, c.encoder.hidden, c.encoder.depth, c.modes});
    if (c.use_memory && c.use_stage2) fusion_ = memory::MemoryFusion(c.encoder.d_model, c.encoder.hidden, 1);
}

void Model::init(num::ParameterStore& store, num::Rng& rng) const {
    if (config_.use_ecsa) {
        ecsa_.init(store, rng);
    } else {
        plain_.init(store, rng);
    }
    decoder_.init(store, rng);
    if (config_.use_memory && config_.use_stage2) fusion_.init(store, rng);
}

ecsa::NodeEmbeddingSet Model::encode(num::Tape& tape, const scene::Scene& s) const {
    return config_.use_ecsa ? ecsa_.forward(tape, s) : plain_.forward(tape, s);
}

StageOne Model::decode(num::Tape& tape, const ecsa::NodeEmbeddingSet& enc, const scene::Scene& s) const {
    const auto rows = agent_rows(s);
    return decoder_.stage1(tape, enc.embeddings, s.ego_index(), rows);
}

std::vector<Vec2> plan_targets(const scene::Scene& s, double horizon_seconds) {
    const auto& ego = s.ego();
    std::vector<Vec2> out;
    for (const Vec2& p : pseudo_plan_gt(ego, s.map, horizon_seconds)) {
        out.push_back(geo::rotate(p - ego.position, -ego.heading));
    }
    return out;
}

SceneLoss Model::scene_loss(num::Tape& tape, const scene::Scene& s, const memory::HardSampleQueue* queue,
                            double mask_u) const {
    const auto enc = encode(tape, s);
    const StageOne s1 = decode(tape, enc, s);
    const std::size_t ego = s.ego_index();
    const LossWeights& w = config_.weights;
    const Trajectory plan_gt = scene::heading_y_to_x(s.ego_future_gt);
    const Trajectory plan_gts[] = {plan_gt};

    SceneLoss out;
    const Var plan_traj = row_of(s1.trajectories, 0);
    const Var plan_scores = row_of(s1.scores, 0);
    const auto targets = plan_targets(s, config_.plan_horizon_seconds);
    Var plan1 = stage1_plan_loss(plan_traj, targets, plan_gt, config_.hinge_d, config_.modes);
    plan1 = num::add(plan1, wta_loss(plan_traj, plan_scores, plan_gts, config_.modes, false).loss);
    out.plan1 = plan1.value()[0];
    Var total = num::scale(plan1, w.plan1);

    if (config_.joint_motion) {
        std::vector<std::size_t> rows(s.agents.size());
        std::iota(rows.begin(), rows.end(), std::size_t{1});
        std::vector<Trajectory> gts;
        for (const auto& a : s.agents) gts.push_back(a.future_gt);
        const auto m = wta_loss(num::gather_rows(s1.trajectories, rows), num::gather_rows(s1.scores, rows), gts,
                                config_.modes);
        out.motion = m.loss.value()[0];
        total = num::add(total, num::scale(m.loss, w.motion));
        const Tensor& q = s1.queries.value();
        for (std::size_t i = 0; i < s.agents.size(); ++i) {
            if (i == ego) continue;
            memory::MemoryEntry e;
            e.trajectory = s.agents[i].future_gt;
            e.loss = m.row_loss[i];
            const auto qr = q.row_span(i + 1);
            e.embedding.assign(qr.begin(), qr.end());
            out.candidates.push_back(std::move(e));
        }
    }

    if (config_.use_stage2) {
        const Var q_plan = row_of(s1.queries, 0);
        const Var state = tape.constant(masked_state_row(s.ego_state_gt, mask_u, config_.mask_probability));
        std::optional<Trajectory> matched;
        if (config_.use_memory && queue != nullptr) {
            const auto& pv = plan_traj.value();
            const Trajectory best = proposal(pv.data(), argmax(plan_scores.value().data()));
            if (const auto slot = queue->match(best)) matched = queue->entries()[*slot].trajectory;
        }
        const Refined r = decoder_.stage2(tape, q_plan, state, plan_traj, config_.use_memory ? &fusion_ : nullptr,
                                          matched ? &*matched : nullptr);
        const Var plan2 = wta_loss(r.trajectories, r.scores, plan_gts, config_.modes).loss;
        out.plan2 = plan2.value()[0];
        const Var hist = tape.constant(history_encoding(s.agents[ego]));
        const Var stp = state_loss(decoder_.predict_state(tape, q_plan, hist), s.ego_state_gt);
        out.stp = stp.value()[0];
        total = num::add(total, num::add(num::scale(plan2, w.plan2), num::scale(stp, w.stp)));
    }
    out.total = total;
    return out;
}

PlanResult infer_plan(const Model& model, const num::ParameterStore& store, const memory::HardSampleQueue* queue,
                      const scene::Scene& s, StateMode mode) {
    num::Tape tape(readonly(store), false);
    const auto enc = model.encode(tape, s);
    const StageOne s1 = model.decode(tape, enc, s);
    const std::size_t modes = model.config().modes;
    const std::size_t ego = s.ego_index();

    PlanResult res;
    const Var plan_traj = row_of(s1.trajectories, 0);
    res.stage1 = split_modes(plan_traj.value().data(), modes);
    const std::size_t best1 = argmax(s1.scores.value().row_span(0));
    Trajectory chosen = res.stage1[best1];

    if (model.config().use_stage2) {
        const Var q_plan = row_of(s1.queries, 0);
        Var state;
        if (mode == StateMode::Predicted) {
            state = model.decoder().predict_state(tape, q_plan, tape.constant(history_encoding(s.agents[ego])));
            res.state = state_from_row(state.value().data());
        } else {
            state = tape.constant(state_row(s.ego_state_gt));
            res.state = s.ego_state_gt;
        }
        const Trajectory* matched = nullptr;
        if (model.config().use_memory && queue != nullptr) {
            res.memory_slot = queue->match(chosen);
            if (res.memory_slot) matched = &queue->entries()[*res.memory_slot].trajectory;
        }
        const Refined r = model.decoder().stage2(tape, q_plan, state, plan_traj,
                                                 model.config().use_memory ? &model.fusion() : nullptr, matched);
        res.refined = split_modes(r.trajectories.value().data(), modes);
        chosen = res.refined[argmax(r.scores.value().data())];
    }
    res.plan = scene::heading_x_to_y(chosen);
    return res;
}

MotionResult infer_motion_refined(const Model& model, const num::ParameterStore& store, const scene::Scene& s,
                                  bool enable) {
    num::Tape tape(readonly(store), false);
    const auto enc = model.encode(tape, s);
    const StageOne s1 = model.decode(tape, enc, s);
    const std::size_t modes = model.config().modes;
    const bool refine = enable && model.config().use_stage2;
    MotionResult res;
    for (std::size_t i = 0; i < s.agents.size(); ++i) {
        const std::size_t r = i + 1;
        if (!refine) {
            res.proposals.push_back(split_modes(s1.trajectories.value().row_span(r), modes));
            res.selected.push_back(argmax(s1.scores.value().row_span(r)));
            continue;
        }
        const Var q = row_of(s1.queries, r);
        const Var state = model.decoder().predict_state(tape, q, tape.constant(history_encoding(s.agents[i])));
        const Refined ref = model.decoder().stage2(tape, q, state, row_of(s1.trajectories, r));
        res.proposals.push_back(split_modes(ref.trajectories.value().data(), modes));
        res.selected.push_back(argmax(ref.scores.value().data()));
    }
    return res;
}

}  // namespace fump::uttd
