#include "fump/geometry/transform.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fump::geo {

RigidTransform RigidTransform::translation(double x, double y, double z) {
    return RigidTransform({1, 0, 0, x, 0, 1, 0, y, 0, 0, 1, z, 0, 0, 0, 1});
}

RigidTransform RigidTransform::from_pose(const Pose& p) {
    const double c = std::cos(p.yaw), s = std::sin(p.yaw);
    return RigidTransform({c, -s, 0, p.x, s, c, 0, p.y, 0, 0, 1, p.z, 0, 0, 0, 1});
}

double RigidTransform::yaw() const { return std::atan2(m_[4], m_[0]); }

Vec3 RigidTransform::apply(Vec3 p) const {
    return {m_[0] * p.x + m_[1] * p.y + m_[2] * p.z + m_[3], m_[4] * p.x + m_[5] * p.y + m_[6] * p.z + m_[7],
            m_[8] * p.x + m_[9] * p.y + m_[10] * p.z + m_[11]};
}

Vec2 RigidTransform::apply(Vec2 p) const {
    return {m_[0] * p.x + m_[1] * p.y + m_[3], m_[4] * p.x + m_[5] * p.y + m_[7]};
}

Pose RigidTransform::apply(const Pose& p) const {
    const Vec3 q = apply(Vec3{p.x, p.y, p.z});
    return Pose::make(q.x, q.y, q.z, p.yaw + yaw());
}

RigidTransform RigidTransform::inverse() const {
    // [R t]^-1 = [R^T  -R^T t]
    std::array<double, 16> r{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) r[static_cast<std::size_t>(i * 4 + j)] = m_[static_cast<std::size_t>(j * 4 + i)];
    }
    for (int i = 0; i < 3; ++i) {
        double t = 0.0;
        for (int j = 0; j < 3; ++j) t -= r[static_cast<std::size_t>(i * 4 + j)] * m_[static_cast<std::size_t>(j * 4 + 3)];
        r[static_cast<std::size_t>(i * 4 + 3)] = t;
    }
    r[15] = 1.0;
    return RigidTransform(r);
}

bool RigidTransform::is_valid(double tol) const {
    if (m_[12] != 0.0 || m_[13] != 0.0 || m_[14] != 0.0 || m_[15] != 1.0) return false;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double d = 0.0;
            for (int k = 0; k < 3; ++k) {
                d += m_[static_cast<std::size_t>(i * 4 + k)] * m_[static_cast<std::size_t>(j * 4 + k)];
            }
            if (std::abs(d - (i == j ? 1.0 : 0.0)) > tol) return false;
        }
    }
    const double det = m_[0] * (m_[5] * m_[10] - m_[6] * m_[9]) - m_[1] * (m_[4] * m_[10] - m_[6] * m_[8]) +
                       m_[2] * (m_[4] * m_[9] - m_[5] * m_[8]);
    return std::abs(det - 1.0) <= tol;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    std::array<double, 16> r{};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
            r[static_cast<std::size_t>(i * 4 + j)] = s;
        }
    }
    // Keep the homogeneous row exact.
    r[12] = r[13] = r[14] = 0.0;
    r[15] = 1.0;
    return RigidTransform(r);
}

RigidTransform world_to_target(const Pose& pose_w) {
    const double c = std::cos(pose_w.yaw), s = std::sin(pose_w.yaw);
    const double x = pose_w.x, y = pose_w.y, z = pose_w.z;
    return RigidTransform({c, s, 0, -x * c - y * s, -s, c, 0, x * s - y * c, 0, 0, 1, -z, 0, 0, 0, 1});
}

std::vector<Vec2> transform_chain(std::span<const Pose> boxes_ego, std::span<const RigidTransform> ego_to_world) {
    if (boxes_ego.empty()) throw std::invalid_argument("transform_chain: empty input");
    if (boxes_ego.size() != ego_to_world.size()) {
        throw std::invalid_argument("transform_chain: " + std::to_string(boxes_ego.size()) + " boxes but " +
                                    std::to_string(ego_to_world.size()) + " ego poses");
    }
    std::vector<Pose> world;
    world.reserve(boxes_ego.size());
    for (std::size_t i = 0; i < boxes_ego.size(); ++i) world.push_back(ego_to_world[i].apply(boxes_ego[i]));

    const double psi = normalize_angle(boxes_ego[0].yaw + ego_to_world[0].yaw());
    const RigidTransform to_target = world_to_target(Pose{world[0].x, world[0].y, world[0].z, psi});

    std::vector<Vec2> out;
    out.reserve(world.size());
    for (const Pose& p : world) {
        const Vec3 q = to_target.apply(Vec3{p.x, p.y, p.z});
        out.push_back({q.x, q.y});
    }
    return out;
}

}  // namespace fump::geo
