#include "fump/scene/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fump::scene {

ZoneId assign_zone(Vec2 position, const geo::Pose& ego_pose) {
    const Vec2 rel = position - ego_pose.xy();
    if (rel.x == 0.0 && rel.y == 0.0) return ZoneId::Forward;
    const Vec2 local = geo::rotate(rel, -ego_pose.yaw);
    double deg = std::atan2(local.y, local.x) * 180.0 / std::numbers::pi + 90.0;
    if (deg > 180.0) deg -= 360.0;  // now in (-180, 180]
    if (deg > 30.0 && deg <= 150.0) return ZoneId::Forward;
    if (deg > -30.0 && deg <= 30.0) return ZoneId::LateralRight;
    if (deg > 150.0 || deg <= -150.0) return ZoneId::LateralLeft;
    return ZoneId::Rear;
}

std::array<double, kDistanceEncodingWidth> encode_distance(double d) {
    std::array<double, kDistanceEncodingWidth> out{};
    constexpr std::size_t bands = kDistanceEncodingWidth / 2;
    for (std::size_t f = 0; f < bands; ++f) {
        const double lambda = std::pow(200.0, static_cast<double>(f) / static_cast<double>(bands - 1));
        out[2 * f] = std::sin(d / lambda);
        out[2 * f + 1] = std::cos(d / lambda);
    }
    return out;
}

std::array<double, kEdgeFeatureWidth> edge_features(const GraphNode& i, const GraphNode& j) {
    std::array<double, kEdgeFeatureWidth> r{};
    const auto enc = encode_distance(geo::distance(i.position, j.position));
    std::copy(enc.begin(), enc.end(), r.begin());
    r[kDistanceEncodingWidth] = i.speed - j.speed;
    r[kDistanceEncodingWidth + 1 + static_cast<std::size_t>(i.cls)] = 1.0;
    r[kDistanceEncodingWidth + 1 + kNodeClasses + static_cast<std::size_t>(j.cls)] = 1.0;
    return r;
}

std::array<double, kNodeFeatureWidth> agent_node_features(const AgentRecord& a) {
    std::array<double, kNodeFeatureWidth> f{};
    f[static_cast<std::size_t>(node_class(a.cls))] = 1.0;
    f[kNodeClasses] = a.speed / 10.0;
    std::array<Vec2, kHistory + 1> seq{};
    std::copy(a.history.begin(), a.history.end(), seq.begin());
    seq[kHistory] = a.position;
    for (std::size_t s = 0; s < kHistory; ++s) {
        const Vec2 step = geo::rotate(seq[s + 1] - seq[s], -a.heading);
        f[kNodeClasses + 1 + 2 * s] = step.x / 5.0;
        f[kNodeClasses + 2 + 2 * s] = step.y / 5.0;
    }
    return f;
}

std::array<double, kNodeFeatureWidth> map_node_features(const MapPolyline& p) {
    std::array<double, kNodeFeatureWidth> f{};
    f[static_cast<std::size_t>(node_class(p.kind))] = 1.0;
    const Vec2 mid = p.midpoint().first;
    const Vec2 chord = p.points.back() - p.points.front();
    const double heading = std::atan2(chord.y, chord.x);
    const auto tangents = p.tangent_headings();
    const Vec2 first = geo::rotate(p.points.front() - mid, -heading);
    const Vec2 last = geo::rotate(p.points.back() - mid, -heading);
    const std::size_t o = kNodeClasses + 1;
    f[o + 0] = p.length() / 50.0;
    f[o + 1] = geo::normalize_angle(tangents.back() - tangents.front());
    f[o + 2] = first.x / 50.0;
    f[o + 3] = first.y / 50.0;
    f[o + 4] = last.x / 50.0;
    f[o + 5] = last.y / 50.0;
    return f;
}

SceneGraph build_subgraphs(const Scene& scene, std::size_t k_neighbors) {
    if (k_neighbors < 1) throw std::invalid_argument("build_subgraphs: k_neighbors must be >= 1");
    if (scene.agents.empty()) throw std::invalid_argument("build_subgraphs: empty scene");
    SceneGraph g;
    const std::size_t ego = scene.ego_index();
    const geo::Pose ego_pose = scene.agents[ego].pose();
    g.ego_node = ego;

    const std::size_t n = scene.agents.size() + scene.map.size();
    g.node_features = num::Tensor::matrix(n, kNodeFeatureWidth);
    for (std::size_t i = 0; i < scene.agents.size(); ++i) {
        const auto& a = scene.agents[i];
        GraphNode node;
        node.position = a.position;
        node.speed = a.speed;
        node.velocity = a.speed * geo::unit(a.heading);
        node.cls = node_class(a.cls);
        node.is_agent = true;
        node.source = i;
        node.zone = i == ego ? ZoneId::Forward : assign_zone(a.position, ego_pose);
        g.nodes.push_back(node);
        const auto f = agent_node_features(a);
        std::copy(f.begin(), f.end(), g.node_features.row_span(i).begin());
    }
    for (std::size_t i = 0; i < scene.map.size(); ++i) {
        const auto& pl = scene.map[i];
        GraphNode node;
        node.position = pl.midpoint().first;
        node.cls = node_class(pl.kind);
        node.is_agent = false;
        node.source = i;
        node.zone = assign_zone(node.position, ego_pose);
        g.nodes.push_back(node);
        const auto f = map_node_features(pl);
        std::copy(f.begin(), f.end(), g.node_features.row_span(scene.agents.size() + i).begin());
    }

    for (std::size_t z = 0; z < kZones; ++z) {
        g.zones[z].zone = static_cast<ZoneId>(z);
        for (std::size_t i = 0; i < n; ++i) {
            if (static_cast<std::size_t>(g.nodes[i].zone) == z) g.zones[z].nodes.push_back(i);
        }
    }

    std::vector<std::array<double, kEdgeFeatureWidth>> feats;
    for (auto& zone : g.zones) {
        zone.edge_begin = g.edge_target.size();
        const auto& members = zone.nodes;
        const std::size_t keep = std::min(k_neighbors, members.empty() ? 0 : members.size() - 1);
        // Distances are ranked on a 1 um grid so that exact ties in the
        // layout stay ties after a rigid motion; ties go to the lower index.
        std::vector<std::pair<long long, std::size_t>> cand;
        for (std::size_t a : members) {
            cand.clear();
            for (std::size_t b : members) {
                if (b == a) continue;
                cand.emplace_back(std::llround(geo::distance(g.nodes[a].position, g.nodes[b].position) * 1e6), b);
            }
            std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end());
            for (std::size_t e = 0; e < keep; ++e) {
                g.edge_target.push_back(a);
                g.edge_source.push_back(cand[e].second);
                feats.push_back(edge_features(g.nodes[a], g.nodes[cand[e].second]));
            }
        }
        zone.edge_end = g.edge_target.size();
    }
    g.edge_features = num::Tensor::matrix(feats.size(), kEdgeFeatureWidth);
    for (std::size_t e = 0; e < feats.size(); ++e) {
        std::copy(feats[e].begin(), feats[e].end(), g.edge_features.row_span(e).begin());
    }
    return g;
}

}  // namespace fump::scene
