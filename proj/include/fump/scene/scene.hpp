#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "fump/geometry/transform.hpp"
#include "fump/geometry/vec.hpp"

namespace fump::scene {

using geo::Vec2;

inline constexpr std::size_t kHorizon = 6;  // future samples at 0.5 s
inline constexpr std::size_t kHistory = 4;  // past samples at 0.5 s
inline constexpr double kHorizonSeconds = kHorizon * geo::kStepSeconds;

enum class AgentClass : int { Vehicle = 0, Pedestrian = 1, Cyclist = 2 };
enum class PolylineKind : int { LaneCenter = 0, Boundary = 1 };

/// Node classes seen by the encoder: the three agent classes, then the two
/// polyline kinds.
inline constexpr std::size_t kNodeClasses = 5;
inline int node_class(AgentClass c) { return static_cast<int>(c); }
inline int node_class(PolylineKind k) { return 3 + static_cast<int>(k); }

struct EgoState {
    double speed = 0.0;     // m/s
    double yaw_rate = 0.0;  // rad/s
    double accel = 0.0;     // m/s^2

    friend bool operator==(const EgoState&, const EgoState&) = default;
};

using Trajectory = std::array<Vec2, kHorizon>;
using History = std::array<Vec2, kHistory>;

struct AgentRecord {
    int id = 0;
    AgentClass cls = AgentClass::Vehicle;
    Vec2 position;        // scene frame, m
    double heading = 0.0; // rad
    double speed = 0.0;   // m/s
    History history{};    // scene-frame positions at t = -2.0, -1.5, -1.0, -0.5 s
    Trajectory future_gt{};  // own frame at t0 (heading along +x), t = 0.5 .. 3.0 s

    geo::Pose pose() const { return geo::Pose{position.x, position.y, 0.0, heading}; }
    friend bool operator==(const AgentRecord&, const AgentRecord&) = default;
};

struct MapPolyline {
    PolylineKind kind = PolylineKind::LaneCenter;
    std::vector<Vec2> points;

    /// Heading of the segment leaving each point (the last point repeats the
    /// previous segment's heading).
    std::vector<double> tangent_headings() const;
    double length() const;
    /// Point and tangent heading at half the arc length.
    std::pair<Vec2, double> midpoint() const;

    friend bool operator==(const MapPolyline&, const MapPolyline&) = default;
};

struct Scene {
    int scene_id = 0;
    int ego_id = 0;
    std::vector<AgentRecord> agents;
    std::vector<MapPolyline> map;
    EgoState ego_state_gt;
    /// Ego future in the ego frame with the heading along +y.
    Trajectory ego_future_gt{};
    std::string maneuver_tag;

    std::size_t ego_index() const;
    const AgentRecord& ego() const { return agents[ego_index()]; }
    /// Throws std::invalid_argument when an invariant is broken.
    void validate() const;

    friend bool operator==(const Scene&, const Scene&) = default;
};

/// Own-frame (heading along +x) to ego-frame (heading along +y) and back.
inline Vec2 heading_x_to_y(Vec2 p) { return {-p.y, p.x}; }
inline Vec2 heading_y_to_x(Vec2 p) { return {p.y, -p.x}; }
Trajectory heading_x_to_y(const Trajectory& t);
Trajectory heading_y_to_x(const Trajectory& t);

/// Own-frame trajectory mapped into the scene frame given the t0 pose.
Trajectory local_to_scene(const Trajectory& local, Vec2 position, double heading);

/// Rigidly moves a whole scene: positions, histories and polylines rotate
/// by `angle` then shift by `shift`; headings rotate. Own-frame quantities
/// (futures, ego state) are unchanged.
Scene transform_scene(const Scene& s, double angle, Vec2 shift);

}  // namespace fump::scene
