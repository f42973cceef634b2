#pragma once

#include <optional>
#include <vector>

#include "fump/ecsa/ecsa.hpp"
#include "fump/memory/queue.hpp"
#include "fump/uttd/decoder.hpp"

namespace fump::uttd {

struct LossWeights {
    double motion = 1.0;
    double plan1 = 1.0;
    double plan2 = 1.0;
    double stp = 0.5;
};

/// Network shape plus the ablation switches. A disabled module registers no
/// parameters and is never evaluated.
struct ModelConfig {
    ecsa::EcsaConfig encoder;
    std::size_t modes = kModes;
    double hinge_d = 0.0;
    double plan_horizon_seconds = scene::kHorizonSeconds;
    double mask_probability = kMaskProbability;
    bool use_ecsa = true;
    bool use_stage2 = true;
    bool use_memory = true;
    bool joint_motion = true;
    LossWeights weights;
};

enum class StateMode { GroundTruth, Predicted };

struct SceneLoss {
    Var total;
    double motion = 0.0;
    double plan1 = 0.0;
    double plan2 = 0.0;
    double stp = 0.0;
    /// One per non-ego agent when motion is decoded: ground-truth future,
    /// its loss and the detached stage-1 query.
    std::vector<memory::MemoryEntry> candidates;
};

struct PlanResult {
    Trajectory plan{};  // ego frame, heading along +y
    std::vector<Trajectory> stage1;   // own frame, +x
    std::vector<Trajectory> refined;  // empty when stage II is off
    EgoState state{};
    std::optional<std::size_t> memory_slot;
};

struct MotionResult {
    std::vector<std::vector<Trajectory>> proposals;  // per agent, K modes, own frame
    std::vector<std::size_t> selected;               // argmax mode per agent
};

class Model {
public:
    Model() = default;
    explicit Model(const ModelConfig& config);

    void init(num::ParameterStore& store, num::Rng& rng) const;

    ecsa::NodeEmbeddingSet encode(num::Tape& tape, const scene::Scene& s) const;
    StageOne decode(num::Tape& tape, const ecsa::NodeEmbeddingSet& enc, const scene::Scene& s) const;

    /// Weighted training loss of one scene. `mask_u` is the uniform draw for
    /// the state mask; `queue` may be null.
    SceneLoss scene_loss(num::Tape& tape, const scene::Scene& s, const memory::HardSampleQueue* queue,
                         double mask_u) const;

    const ModelConfig& config() const { return config_; }
    const Decoder& decoder() const { return decoder_; }
    const ecsa::Ecsa& ecsa() const { return ecsa_; }
    const memory::MemoryFusion& fusion() const { return fusion_; }

private:
    ModelConfig config_;
    ecsa::Ecsa ecsa_;
    ecsa::PlainEncoder plain_;
    Decoder decoder_;
    memory::MemoryFusion fusion_;
};

/// Plan targets from the lane/circle intersection, in the ego's own frame.
std::vector<Vec2> plan_targets(const scene::Scene& s, double horizon_seconds);

/// Encoder, stage I, memory match (read-only) and stage II with either the
/// ground-truth or the predicted state; returns the highest-scoring proposal.
PlanResult infer_plan(const Model& model, const num::ParameterStore& store, const memory::HardSampleQueue* queue,
                      const scene::Scene& s, StateMode mode);

/// Stage-I proposals for every agent; with `enable` each agent's row also
/// goes through stage II using its own predicted state.
MotionResult infer_motion_refined(const Model& model, const num::ParameterStore& store, const scene::Scene& s,
                                  bool enable);

}  // namespace fump::uttd
