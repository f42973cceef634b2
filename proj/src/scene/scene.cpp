#include "fump/scene/scene.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fump::scene {

std::vector<double> MapPolyline::tangent_headings() const {
    std::vector<double> out(points.size(), 0.0);
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        const Vec2 d = points[i + 1] - points[i];
        out[i] = std::atan2(d.y, d.x);
    }
    if (points.size() >= 2) out.back() = out[points.size() - 2];
    return out;
}

double MapPolyline::length() const {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) s += geo::distance(points[i], points[i + 1]);
    return s;
}

std::pair<Vec2, double> MapPolyline::midpoint() const {
    const double half = 0.5 * length();
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        const Vec2 d = points[i + 1] - points[i];
        const double len = geo::norm(d);
        if (s + len >= half && len > 0.0) {
            const double u = (half - s) / len;
            return {points[i] + u * d, std::atan2(d.y, d.x)};
        }
        s += len;
    }
    const Vec2 d = points.back() - points[points.size() - 2];
    return {points.back(), std::atan2(d.y, d.x)};
}

std::size_t Scene::ego_index() const {
    for (std::size_t i = 0; i < agents.size(); ++i) {
        if (agents[i].id == ego_id) return i;
    }
    throw std::invalid_argument("scene " + std::to_string(scene_id) + ": ego id " + std::to_string(ego_id) +
                                " not among agents");
}

void Scene::validate() const {
    (void)ego_index();
    for (const auto& a : agents) {
        if (!(a.speed >= 0.0)) throw std::invalid_argument("scene: agent " + std::to_string(a.id) + " has negative speed");
        for (const auto& p : a.history) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::invalid_argument("scene: non-finite history");
        }
        for (const auto& p : a.future_gt) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::invalid_argument("scene: non-finite future");
        }
    }
    for (const auto& pl : map) {
        if (pl.points.size() < 2) throw std::invalid_argument("scene: polyline with fewer than 2 points");
        for (std::size_t i = 0; i + 1 < pl.points.size(); ++i) {
            if (pl.points[i] == pl.points[i + 1]) throw std::invalid_argument("scene: repeated polyline point");
        }
    }
    if (!(ego_state_gt.speed >= 0.0)) throw std::invalid_argument("scene: negative ego speed");
}

Trajectory heading_x_to_y(const Trajectory& t) {
    Trajectory out{};
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = heading_x_to_y(t[i]);
    return out;
}

Trajectory heading_y_to_x(const Trajectory& t) {
    Trajectory out{};
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = heading_y_to_x(t[i]);
    return out;
}

Trajectory local_to_scene(const Trajectory& local, Vec2 position, double heading) {
    Trajectory out{};
    for (std::size_t i = 0; i < local.size(); ++i) out[i] = position + geo::rotate(local[i], heading);
    return out;
}

Scene transform_scene(const Scene& s, double angle, Vec2 shift) {
    Scene out = s;
    auto move = [&](Vec2 p) { return geo::rotate(p, angle) + shift; };
    for (auto& a : out.agents) {
        a.position = move(a.position);
        a.heading = geo::normalize_angle(a.heading + angle);
        for (auto& h : a.history) h = move(h);
    }
    for (auto& pl : out.map) {
        for (auto& p : pl.points) p = move(p);
    }
    return out;
}

}  // namespace fump::scene
