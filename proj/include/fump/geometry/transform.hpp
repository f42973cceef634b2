#pragma once

#include <array>
#include <span>
#include <vector>

#include "fump/geometry/vec.hpp"

namespace fump::geo {

/// Sample spacing of every trajectory in this project.
inline constexpr double kStepSeconds = 0.5;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

/// Planar pose with a vertical offset. Construct through `make` to get the
/// yaw wrapped into (-pi, pi].
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double yaw = 0.0;

    static Pose make(double x, double y, double z, double yaw) { return {x, y, z, normalize_angle(yaw)}; }
    Vec2 xy() const { return {x, y}; }
};

/// 4x4 homogeneous transform whose rotation is a yaw about z.
class RigidTransform {
public:
    RigidTransform() : m_{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1} {}

    static RigidTransform identity() { return {}; }
    static RigidTransform translation(double x, double y, double z);
    /// Maps coordinates expressed in the pose's frame into the parent frame.
    static RigidTransform from_pose(const Pose& pose);

    double operator()(int r, int c) const { return m_[static_cast<std::size_t>(r * 4 + c)]; }
    const std::array<double, 16>& matrix() const { return m_; }

    double yaw() const;
    Vec3 translation_part() const { return {m_[3], m_[7], m_[11]}; }

    Vec3 apply(Vec3 p) const;
    Vec2 apply(Vec2 p) const;
    /// Transforms the position and adds this transform's yaw to the heading.
    Pose apply(const Pose& p) const;

    RigidTransform inverse() const;
    /// Bottom row exact, rotation block orthonormal with det +1 within `tol`.
    bool is_valid(double tol = 1e-12) const;

    friend RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
    friend RigidTransform world_to_target(const Pose& pose_w);

private:
    explicit RigidTransform(const std::array<double, 16>& m) : m_(m) {}
    std::array<double, 16> m_;
};

/// a * b: applies b first, then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

/// World-to-object matrix for an object at `pose_w`:
///   [ cos  sin 0  -x cos - y sin ]
///   [-sin  cos 0   x sin - y cos ]
///   [ 0    0   1  -z             ]
/// so the object's own position maps to the origin and its heading to +x.
RigidTransform world_to_target(const Pose& pose_w);

/// Converts one tracked object's per-frame poses, each expressed in that
/// frame's ego coordinates, into the object's own frame at the first sample.
/// Returns the (x, y) track; element 0 is the origin.
///
/// The reference heading is the sum of the object's ego-frame yaw and the
/// ego's world yaw at the first sample, wrapped into (-pi, pi].
std::vector<Vec2> transform_chain(std::span<const Pose> boxes_ego, std::span<const RigidTransform> ego_to_world);

}  // namespace fump::geo
