#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fump/scene/scene.hpp"

namespace fump::metrics {

using scene::Trajectory;

/// Values at the 1 s, 2 s and 3 s horizons plus their mean.
struct HorizonValues {
    std::array<double, 3> at{};
    double avg = 0.0;

    friend bool operator==(const HorizonValues&, const HorizonValues&) = default;
};

inline constexpr std::array<std::size_t, 3> kHorizonSteps = {2, 4, 6};

/// Horizon h: mean step displacement error over the steps up to h.
HorizonValues l2_at_horizons(const Trajectory& pred, const Trajectory& gt);

struct CollisionRadii {
    double ego = 2.0;
    double agent = 1.0;
};

/// First step (0-based) at which the ego disc overlaps an agent disc, all in
/// one frame.
std::optional<std::size_t> first_collision_step(const Trajectory& ego, std::span<const Trajectory> agents,
                                                 CollisionRadii radii = {});

/// Places a plan (ego frame, heading along +y) and every non-ego agent's
/// ground-truth future in the scene frame and checks them.
std::optional<std::size_t> scene_collision_step(const scene::Scene& s, const Trajectory& plan,
                                                CollisionRadii radii = {});

/// Percent of samples colliding at or before each horizon.
HorizonValues collision_rate(std::span<const std::optional<std::size_t>> first_steps);

/// Minimum over proposals of the mean step displacement error.
double min_ade(std::span<const Trajectory> proposals, const Trajectory& gt);

/// Improvement over the baseline (inverted for lower-is-better metrics),
/// scaled by the share of non-ego trajectories, in percent.
double cegr(double acc, double acc_base, double d_ego, double d_total, bool lower_is_better = true);

struct EvalReport {
    HorizonValues l2;
    HorizonValues collision;  // percent
    std::optional<double> min_ade;
    std::vector<std::pair<std::string, double>> cegr;  // percent
    std::size_t samples = 0;
    std::string config_hash;
    std::string state_mode;

    std::string to_text() const;
    std::string to_json() const;
    /// horizon,l2,collision rows.
    std::string to_csv() const;
    static EvalReport from_json(const std::string& text);

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Per-scene values reduced in index order.
struct SampleMetrics {
    HorizonValues l2;
    std::optional<std::size_t> collision_step;
    std::optional<double> min_ade;  // mean over the scene's non-ego agents
};

EvalReport aggregate(std::span<const SampleMetrics> samples);

}  // namespace fump::metrics
