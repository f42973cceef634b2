#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fump/scene/scene.hpp"

namespace fump::data {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using FeatureMatrix = std::vector<std::vector<double>>;

struct ClusterResult {
    std::vector<int> labels;                // per point, -1 = noise
    std::vector<std::size_t> ordering;      // OPTICS visit order
    std::vector<double> reachability;       // per point; infinity for each ordering start
    std::vector<double> core_distance;      // per point
    std::vector<std::size_t> cluster_sizes; // indexed by label
    double cut = 0.0;                       // flat reachability threshold
};

/// OPTICS ordering plus a flat cut. The core distance is the distance to the
/// min_pts-th nearest point counting the point itself (infinite beyond
/// max_eps). Among equal reachabilities the lower index is expanded first;
/// a new ordering starts from the lowest unprocessed index.
/// Throws std::invalid_argument when there are fewer than min_pts points.
ClusterResult optics(const FeatureMatrix& points, std::size_t min_pts, double max_eps = kInf);

/// Same contract as `optics`, written as the textbook quadratic scan. Kept
/// for cross-checking.
ClusterResult optics_reference(const FeatureMatrix& points, std::size_t min_pts, double max_eps = kInf);

/// Threshold from the sorted finite reachabilities: the value at the given
/// percentile, unless the widest ratio gap between consecutive values at or
/// above it reaches `dominant_ratio`, in which case the cut sits at the
/// geometric mean of that pair. With no finite value, 0.
double reachability_cut(std::span<const double> reachability, double percentile = 0.90,
                        double dominant_ratio = 2.0);

/// Walks the ordering: a point above the cut opens a cluster when its core
/// distance is within the cut and is noise otherwise; a point within the
/// cut joins the current cluster.
std::vector<int> extract_flat(std::span<const std::size_t> ordering, std::span<const double> reachability,
                              std::span<const double> core_distance, double cut);

struct CurateResult {
    std::vector<std::size_t> indices;   // ascending scene indices
    std::vector<int> selected_clusters;
    ClusterResult clusters;
    std::optional<std::string> warning;
};

/// Flattened ego future (12 values per scene).
FeatureMatrix longtail_features(const std::vector<scene::Scene>& scenes);

/// Scenes whose ego futures fall in the k smallest clusters (ties by label).
CurateResult curate_longtail(const std::vector<scene::Scene>& scenes, std::size_t k_smallest, std::size_t min_pts = 5,
                             double max_eps = kInf);

}  // namespace fump::data
