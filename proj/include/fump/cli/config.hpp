#pragma once

#include <filesystem>
#include <string>

#include "fump/data/generator.hpp"
#include "fump/metrics/metrics.hpp"
#include "fump/train/trainer.hpp"

namespace fump::cli {

/// Configuration file of the command-line tool: the training keys at the top
/// level (as written by TrainConfig::to_json) plus the optional objects
/// "scenario" and "collision_radii". Every key is optional.
struct RunConfig {
    train::TrainConfig train;
    data::ScenarioConfig scenario;
    metrics::CollisionRadii radii;

    std::string to_json() const;
    /// Unknown keys throw std::invalid_argument naming the key.
    static RunConfig from_json(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);
};

}  // namespace fump::cli
