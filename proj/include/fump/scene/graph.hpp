#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "fump/numerics/tensor.hpp"
#include "fump/scene/scene.hpp"

namespace fump::scene {

enum class ZoneId : int { Forward = 0, LateralRight = 1, LateralLeft = 2, Rear = 3 };
inline constexpr std::size_t kZones = 4;

/// Zone of `position` around the ego. Angles are measured counter-clockwise
/// from the ego's right-hand axis, so straight ahead is +90 degrees:
/// Forward (30, 150], LateralRight (-30, 30], LateralLeft (150, 210],
/// Rear otherwise. A point at the ego position is Forward.
ZoneId assign_zone(Vec2 position, const geo::Pose& ego_pose);

inline constexpr std::size_t kDistanceEncodingWidth = 16;
inline constexpr std::size_t kNodeFeatureWidth = kNodeClasses + 1 + 2 * kHistory;
inline constexpr std::size_t kEdgeFeatureWidth = kDistanceEncodingWidth + 1 + 2 * kNodeClasses;
inline constexpr std::size_t kGlobalEdgeFeatureWidth = kDistanceEncodingWidth + 1;

/// sin/cos of d / lambda_f for eight wavelengths spaced geometrically in
/// [1, 200] m.
std::array<double, kDistanceEncodingWidth> encode_distance(double d);

struct GraphNode {
    Vec2 position;
    double speed = 0.0;
    Vec2 velocity;  // zero for map nodes
    int cls = 0;
    ZoneId zone = ZoneId::Forward;
    bool is_agent = true;
    std::size_t source = 0;  // index into Scene::agents or Scene::map
};

struct Subgraph {
    ZoneId zone = ZoneId::Forward;
    std::vector<std::size_t> nodes;  // scene node indices, ascending
    std::size_t edge_begin = 0;      // range into SceneGraph edge arrays
    std::size_t edge_end = 0;
};

/// All four zone subgraphs of a scene. Node order is the scene order: every
/// agent, then one node per polyline. Edge e delivers a message from
/// `edge_source[e]` to `edge_target[e]`; edges are stored zone by zone and,
/// within a zone, grouped by target in node order with neighbours sorted by
/// (distance, index).
struct SceneGraph {
    std::vector<GraphNode> nodes;
    std::array<Subgraph, kZones> zones;
    std::vector<std::size_t> edge_target;
    std::vector<std::size_t> edge_source;
    num::Tensor node_features;  // n x kNodeFeatureWidth
    num::Tensor edge_features;  // E x kEdgeFeatureWidth, pre-MLP r_ij
    std::size_t ego_node = 0;

    std::size_t edge_count() const { return edge_target.size(); }
};

/// Invariant pre-MLP edge vector r_ij: [encode(|c_i - c_j|), speed_i - speed_j,
/// onehot(cls_i), onehot(cls_j)].
std::array<double, kEdgeFeatureWidth> edge_features(const GraphNode& i, const GraphNode& j);

/// Frame-invariant raw node features: class one-hot, speed, and four motion
/// steps in the agent's own frame (map nodes: length, total turn, and the end
/// points in a frame at the midpoint aligned with the chord).
std::array<double, kNodeFeatureWidth> agent_node_features(const AgentRecord& a);
std::array<double, kNodeFeatureWidth> map_node_features(const MapPolyline& p);

/// Zone partition plus, inside each zone, directed edges from each node's
/// k nearest zone members. Distances are compared after rounding to 1e-6 m;
/// equal distances go to the lower node index.
SceneGraph build_subgraphs(const Scene& scene, std::size_t k_neighbors);

}  // namespace fump::scene
