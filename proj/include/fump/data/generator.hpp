#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fump/scene/scene.hpp"

namespace fump::data {

struct ManeuverMix {
    double keep_lane = 0.60;
    double turn = 0.12;
    double lane_change = 0.12;
    double overtake = 0.06;
    double stop = 0.10;

    double total() const { return keep_lane + turn + lane_change + overtake + stop; }
};

struct ScenarioConfig {
    int min_agents = 6;  // including the ego
    int max_agents = 10;
    double lane_width = 3.5;
    double intersection_probability = 0.3;  // keep-lane and stop scenes crossing a junction
    double curve_probability = 0.4;         // of the remaining keep-lane and stop scenes
    double curve_radius_min = 60.0;
    double curve_radius_max = 150.0;
    double ego_speed_min = 3.0;
    double ego_speed_max = 12.0;
    double history_noise = 0.03;  // std of history position noise, m
    double min_clearance = 3.5;   // agents never come closer to the ego, m
    ManeuverMix mix;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// One scene from `seed`. Positions are in an arbitrary world frame; every
/// agent's future is derived from ego-frame boxes through transform_chain.
scene::Scene generate_scene(std::uint64_t seed, const ScenarioConfig& config, int scene_id = 0);

/// `count` scenes with per-scene seeds derived from `seed`; scene ids 0..count-1.
std::vector<scene::Scene> generate_dataset(std::uint64_t seed, std::size_t count, const ScenarioConfig& config);

/// Seed of scene `index` in a dataset seeded with `seed`.
std::uint64_t scene_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace fump::data
