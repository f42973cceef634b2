#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fump/numerics/nn.hpp"
#include "fump/scene/scene.hpp"

namespace fump::memory {

struct MemoryEntry {
    scene::Trajectory trajectory{};  // own frame, heading along +x
    double loss = 0.0;
    std::vector<double> embedding;  // detached stage-1 query

    friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

/// eps_t = gamma * eps_prev + (1 - gamma) * batch_mean_loss, evaluated in
/// extended precision and rounded once.
inline double update_threshold(double eps_prev, double batch_mean_loss, double gamma) {
    const long double g = gamma;
    return static_cast<double>(g * eps_prev + (1.0L - g) * batch_mean_loss);
}

struct BatchUpdateStats {
    std::size_t admitted = 0;
    std::size_t evicted = 0;
    bool random_replacement = false;
};

class HardSampleQueue {
public:
    static constexpr std::size_t kDefaultCapacity = 700;
    static constexpr double kDefaultGamma = 0.2;

    explicit HardSampleQueue(std::size_t capacity = kDefaultCapacity, double gamma = kDefaultGamma);

    std::size_t capacity() const { return capacity_; }
    double gamma() const { return gamma_; }
    double threshold() const { return threshold_; }
    void set_threshold(double eps) { threshold_ = eps; }
    const std::vector<MemoryEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    /// Applies the EMA update with this batch's mean loss and returns the new
    /// threshold.
    double update_threshold(double batch_mean_loss);

    /// Admits candidates whose loss exceeds the threshold: appended while the
    /// queue has room, otherwise each replaces the minimum-loss entry (earliest
    /// slot on ties) when its loss is higher. If anything was admitted, one
    /// uniformly chosen slot is then overwritten by the highest-loss candidate
    /// that was not admitted, when one exists.
    BatchUpdateStats batch_update(std::span<const MemoryEntry> candidates, std::mt19937_64& rng);

    /// Entry with the smallest mean per-step distance to `traj`; earliest slot
    /// on ties; nullopt when empty.
    std::optional<std::size_t> match(const scene::Trajectory& traj) const;

    std::string serialize() const;
    static HardSampleQueue deserialize(std::string_view bytes);

    friend bool operator==(const HardSampleQueue&, const HardSampleQueue&) = default;

private:
    std::size_t capacity_;
    double gamma_;
    double threshold_ = 0.0;
    std::vector<MemoryEntry> entries_;
};

/// Mean over steps of the Euclidean distance between two trajectories.
double mean_step_distance(const scene::Trajectory& a, const scene::Trajectory& b);

/// Q_p' = Fusion([Q_p, psi_e(traj)]) with psi_e an MLP over the flattened
/// trajectory and Fusion a linear map back to d.
class MemoryFusion {
public:
    MemoryFusion() = default;
    MemoryFusion(std::size_t d, std::size_t hidden, std::size_t depth);

    void init(num::ParameterStore& store, num::Rng& rng) const;
    num::Var fuse(num::Tape& tape, num::Var q_row, const scene::Trajectory& traj) const;

    const num::Mlp& encoder() const { return psi_; }
    const num::Mlp& fusion() const { return fusion_; }

private:
    num::Mlp psi_;
    num::Mlp fusion_;
};

/// Metres per unit when trajectories are fed to a network.
inline constexpr double kTrajectoryInputScale = 10.0;

/// Flattened (x0, y0, x1, ...) row divided by `scale`.
num::Tensor trajectory_row(const scene::Trajectory& traj, double scale);

}  // namespace fump::memory
