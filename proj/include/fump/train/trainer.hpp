#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fump/memory/queue.hpp"
#include "fump/metrics/metrics.hpp"
#include "fump/numerics/params.hpp"
#include "fump/uttd/model.hpp"

namespace fump::train {

struct TrainConfig {
    std::uint64_t seed = 1;
    std::size_t epochs = 30;
    std::size_t batch_size = 8;
    double lr = 3e-4;
    /// "cosine" decays from lr to lr * lr_min_fraction over the run;
    /// "constant" keeps lr.
    std::string lr_schedule = "cosine";
    double lr_min_fraction = 0.05;
    uttd::LossWeights weights;
    std::size_t queue_capacity = memory::HardSampleQueue::kDefaultCapacity;
    double queue_gamma = memory::HardSampleQueue::kDefaultGamma;
    double mask_probability = uttd::kMaskProbability;
    double hinge_d = 0.0;
    bool use_ecsa = true;
    bool use_stage2 = true;
    bool use_memory = true;
    bool joint_motion = true;
    ecsa::EcsaConfig encoder;
    std::string train_path;
    std::string eval_path;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
    uttd::ModelConfig model_config() const;

    /// Every field, in a fixed order.
    std::string to_json() const;
    /// Missing keys keep their defaults; unknown keys are rejected.
    static TrainConfig from_json(const std::string& text);
    /// Hash of the fields that shape the network and its training run;
    /// dataset paths are excluded.
    std::uint64_t hash() const;
};

std::string hash_hex(std::uint64_t h);

/// Learning rate for a step in [0, total_steps).
double learning_rate(const TrainConfig& config, std::size_t step, std::size_t total_steps);

struct LossRecord {
    std::size_t epoch = 0;
    std::size_t batch = 0;
    double total = 0.0;
    double motion = 0.0;
    double plan1 = 0.0;
    double plan2 = 0.0;
    double stp = 0.0;
    double threshold = 0.0;
    std::size_t queue_size = 0;

    friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

std::string loss_csv(const std::vector<LossRecord>& records);

/// Non-finite loss; the message names the epoch, batch and scene ids.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything needed to continue or evaluate a run.
struct TrainState {
    TrainConfig config;
    uttd::Model model;
    num::ParameterStore store;
    memory::HardSampleQueue queue;
    std::mt19937_64 rng;
    std::size_t epochs_done = 0;

    /// Fresh model initialised from `config.seed`.
    explicit TrainState(const TrainConfig& config);
};

/// Runs epochs until `config.epochs` are done (or `stop_after_epochs` more,
/// when set). One tape per batch, Adam after every batch, then the memory
/// threshold and queue update.
std::vector<LossRecord> train(TrainState& state, const std::vector<scene::Scene>& scenes,
                              std::optional<std::size_t> stop_after_epochs = std::nullopt);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

struct EvalOptions {
    uttd::StateMode state_mode = uttd::StateMode::Predicted;
    bool motion_refine = false;
    metrics::CollisionRadii radii;
    /// 0 reads FUMP_THREADS (default 1).
    std::size_t threads = 0;
};

std::size_t threads_from_env();

/// Per-scene inference and metric reduction in scene order. Throws
/// std::invalid_argument("no samples") on an empty set.
metrics::EvalReport evaluate(const TrainState& state, const std::vector<scene::Scene>& scenes,
                             const EvalOptions& options = {});

/// Throws std::runtime_error when the stored configuration hash differs
/// from `expected`.
void check_config_hash(const TrainState& state, const TrainConfig& expected);

/// Ego and total supervised trajectory counts of a training set: one ego
/// trajectory per scene, one per agent (ego included) in the total.
std::pair<double, double> trajectory_counts(const std::vector<scene::Scene>& scenes);

struct AblationRow {
    std::string name;
    bool joint_motion = false;
    bool use_ecsa = false;
    bool use_stage2 = false;
    metrics::EvalReport report;
    double cegr_l2 = 0.0;
};

/// Baseline, +UMP, +UMP+ECSA, +UMP+ECSA+UTTD trained with one shared seed.
std::vector<AblationRow> ablate(const TrainConfig& base, const std::vector<scene::Scene>& train_set,
                                const std::vector<scene::Scene>& heldout, const EvalOptions& options = {});

std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace fump::train
