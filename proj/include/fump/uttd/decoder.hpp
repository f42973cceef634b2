#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "fump/memory/queue.hpp"
#include "fump/numerics/nn.hpp"
#include "fump/scene/scene.hpp"

namespace fump::uttd {

using num::Var;
using scene::EgoState;
using scene::Trajectory;
using scene::Vec2;

inline constexpr std::size_t kModes = 6;
/// Metres per unit of the decoder's raw displacement outputs.
inline constexpr double kDisplacementScale = 4.0;
/// Per-field scale of (speed, yaw_rate, accel) seen by the networks.
inline constexpr std::array<double, 3> kStateScale{10.0, 0.5, 2.0};
inline constexpr double kMaskProbability = 0.0625;
inline constexpr std::size_t kHistoryEncodingWidth = 2 * scene::kHistory;

struct DecoderConfig {
    std::size_t d_model = 64;
    std::size_t hidden = 64;
    std::size_t depth = 2;
    std::size_t modes = kModes;
};

/// Stage-I output. Row 0 belongs to the plan query; row r >= 1 to the motion
/// query of agent r - 1 (scene agent order). Trajectories are flattened
/// K x T x 2 per row in each agent's own frame (heading along +x).
struct StageOne {
    Var queries;       // R x d
    Var trajectories;  // R x (K*T*2)
    Var scores;        // R x K
};

struct Refined {
    Var trajectories;  // 1 x (K*T*2)
    Var scores;        // 1 x K
};

class Decoder {
public:
    Decoder() = default;
    explicit Decoder(const DecoderConfig& config);

    void init(num::ParameterStore& store, num::Rng& rng) const;

    /// Queries Q0 = learned query + own node embedding, Q = Q0 + CA(Q0, V, V),
    /// then the shared trajectory head. `agent_nodes` lists the node row of
    /// every agent, `ego_node` the ego's.
    StageOne stage1(num::Tape& tape, Var nodes, std::size_t ego_node, std::span<const std::size_t> agent_nodes) const;

    /// Normalised (speed, yaw_rate, accel) from a query row and the 1 x 8
    /// history encoding.
    Var predict_state(num::Tape& tape, Var query_row, Var history) const;

    /// Residual refinement of one row of stage-1 proposals given a normalised
    /// state row. When `fusion` and `matched` are both set the query is first
    /// fused with the matched memory trajectory.
    Refined stage2(num::Tape& tape, Var query_row, Var state_row, Var stage1_row,
                   const memory::MemoryFusion* fusion = nullptr, const Trajectory* matched = nullptr) const;

    const DecoderConfig& config() const { return config_; }
    std::size_t row_width() const { return config_.modes * scene::kHorizon * 2; }
    const num::Mlp& tdc() const { return tdc_; }
    const num::Mlp& refine_head() const { return refine_; }
    const num::Mlp& state_predictor() const { return stp_; }
    const num::Mlp& state_embed() const { return state_embed_; }
    const num::Mlp& trajectory_embed() const { return traj_embed_; }
    const num::CrossAttention& attention() const { return ca_; }
    static constexpr const char* kPlanQuery = "uttd.query.plan";
    static constexpr const char* kMotionQuery = "uttd.query.motion";

private:
    DecoderConfig config_;
    num::CrossAttention ca_;
    num::Mlp tdc_;
    num::Mlp stp_;
    num::Mlp state_embed_;
    num::Mlp traj_embed_;
    num::Mlp refine_;
};

/// 1 x 3 normalised state row.
num::Tensor state_row(const EgoState& s);
EgoState state_from_row(std::span<const double> row);

/// Per-step displacement of the last H samples (history then current
/// position) in the agent's own frame, divided by 5 m.
num::Tensor history_encoding(const scene::AgentRecord& a);

/// m = 0 when u < p (all three fields zeroed together), else 1.
std::pair<EgoState, int> apply_state_mask(const EgoState& s, double u, double p = kMaskProbability);

/// Stage-II state input during training: m * state_row(s).
num::Tensor masked_state_row(const EgoState& s, double u, double p = kMaskProbability);

/// Circle of radius speed * t_traj around the ego intersected with every
/// lane-centre segment, keeping points strictly ahead of the ego heading.
/// Returns {ego position} when the radius is zero or nothing intersects.
/// Points are in the scene frame.
std::vector<Vec2> pseudo_plan_gt(const scene::AgentRecord& ego, std::span<const scene::MapPolyline> map,
                                 double t_traj_seconds);

/// Trajectory k of a flattened proposal row.
Trajectory proposal(std::span<const double> row, std::size_t k);
std::size_t argmax(std::span<const double> scores);

struct WtaLoss {
    Var loss;                       // mean over rows
    std::vector<double> row_loss;   // per-row values
    std::vector<std::size_t> best;  // per-row winning mode
};

/// Per row: min over modes of the mean per-step distance to the row's ground
/// truth, plus (when `scores` is valid) the cross-entropy of the scores
/// against that winning mode. `regression` = false keeps only the score term.
WtaLoss wta_loss(Var trajectories, Var scores, std::span<const Trajectory> gt, std::size_t modes,
                 bool regression = true);

/// Mean over modes of max(0, min over targets of |endpoint - target| - hinge_d)
/// plus the winner-take-all distance to `plan_gt`. Targets and trajectories
/// share the ego's own frame.
Var stage1_plan_loss(Var trajectory_row, std::span<const Vec2> targets, const Trajectory& plan_gt, double hinge_d,
                     std::size_t modes);

/// Squared distance between a normalised predicted state row and the truth.
Var state_loss(Var predicted_row, const EgoState& truth);

}  // namespace fump::uttd
