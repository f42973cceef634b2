#include "fump/data/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace fump::data {

using geo::Pose;
using geo::RigidTransform;
using geo::Vec2;
using nlohmann::json;
using scene::AgentClass;
using scene::PolylineKind;
using scene::Scene;

namespace {

const char* class_name(AgentClass c) {
    switch (c) {
        case AgentClass::Vehicle: return "vehicle";
        case AgentClass::Pedestrian: return "pedestrian";
        case AgentClass::Cyclist: return "cyclist";
    }
    return "vehicle";
}

AgentClass class_from(const std::string& s) {
    if (s == "vehicle") return AgentClass::Vehicle;
    if (s == "pedestrian") return AgentClass::Pedestrian;
    if (s == "cyclist") return AgentClass::Cyclist;
    throw std::runtime_error("unknown agent class '" + s + "'");
}

const char* kind_name(PolylineKind k) { return k == PolylineKind::LaneCenter ? "lane_center" : "boundary"; }

PolylineKind kind_from(const std::string& s) {
    if (s == "lane_center") return PolylineKind::LaneCenter;
    if (s == "boundary") return PolylineKind::Boundary;
    throw std::runtime_error("unknown polyline kind '" + s + "'");
}

json point(Vec2 p) { return json::array({p.x, p.y}); }

Vec2 point_from(const json& j) {
    if (!j.is_array() || j.size() != 2) throw std::runtime_error("point must be [x, y]");
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

template <std::size_t N>
std::array<Vec2, N> points_fixed(const json& j, const char* what) {
    if (!j.is_array() || j.size() != N) {
        throw std::runtime_error(std::string(what) + " must hold " + std::to_string(N) + " points");
    }
    std::array<Vec2, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = point_from(j[i]);
    return out;
}

json pose_json(const Pose& p, bool with_yaw = true) {
    json j = {{"x", p.x}, {"y", p.y}, {"z", p.z}};
    if (with_yaw) j["yaw"] = p.yaw;
    return j;
}

Pose pose_from(const json& j, bool* has_yaw = nullptr) {
    Pose p{j.at("x").get<double>(), j.at("y").get<double>(), j.value("z", 0.0), 0.0};
    const bool yaw = j.contains("yaw") && !j.at("yaw").is_null();
    if (yaw) p.yaw = j.at("yaw").get<double>();
    if (has_yaw != nullptr) {
        *has_yaw = yaw;
    } else if (!yaw) {
        throw std::runtime_error("pose without yaw");
    }
    return p;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

double heading_between(Vec2 a, Vec2 b, double fallback) {
    const Vec2 d = b - a;
    return geo::norm(d) > 0.0 ? std::atan2(d.y, d.x) : fallback;
}

}  // namespace

std::string scene_to_line(const Scene& s) {
    json agents = json::array();
    for (const auto& a : s.agents) {
        json hist = json::array(), fut = json::array();
        for (const Vec2& p : a.history) hist.push_back(point(p));
        for (const Vec2& p : a.future_gt) fut.push_back(point(p));
        agents.push_back({{"id", a.id},
                          {"class", class_name(a.cls)},
                          {"heading", a.heading},
                          {"speed", a.speed},
                          {"position", point(a.position)},
                          {"history", hist},
                          {"future_local", fut}});
    }
    json map = json::array();
    for (const auto& pl : s.map) {
        json pts = json::array();
        for (const Vec2& p : pl.points) pts.push_back(point(p));
        map.push_back({{"kind", kind_name(pl.kind)}, {"points", pts}});
    }
    const json j = {{"version", kDatasetVersion},
                    {"scene_id", s.scene_id},
                    {"ego_id", s.ego_id},
                    {"ego_state",
                     {{"speed", s.ego_state_gt.speed}, {"yaw_rate", s.ego_state_gt.yaw_rate}, {"accel", s.ego_state_gt.accel}}},
                    {"agents", agents},
                    {"map", map},
                    {"maneuver_tag", s.maneuver_tag}};
    return j.dump();
}

Scene scene_from_line(std::string_view line, std::size_t line_no) {
    const std::string where = "dataset line " + std::to_string(line_no) + ": ";
    try {
        const json j = json::parse(line);
        const int version = j.at("version").get<int>();
        if (version != kDatasetVersion) {
            throw std::runtime_error("version " + std::to_string(version) + " is not supported (expected " +
                                     std::to_string(kDatasetVersion) + ")");
        }
        Scene s;
        s.scene_id = j.at("scene_id").get<int>();
        s.ego_id = j.at("ego_id").get<int>();
        const json& st = j.at("ego_state");
        s.ego_state_gt = {st.at("speed").get<double>(), st.at("yaw_rate").get<double>(), st.at("accel").get<double>()};
        for (const json& ja : j.at("agents")) {
            scene::AgentRecord a;
            a.id = ja.at("id").get<int>();
            a.cls = class_from(ja.at("class").get<std::string>());
            a.heading = ja.at("heading").get<double>();
            a.speed = ja.at("speed").get<double>();
            a.position = point_from(ja.at("position"));
            a.history = points_fixed<scene::kHistory>(ja.at("history"), "history");
            a.future_gt = points_fixed<scene::kHorizon>(ja.at("future_local"), "future_local");
            s.agents.push_back(a);
        }
        for (const json& jm : j.at("map")) {
            scene::MapPolyline pl;
            pl.kind = kind_from(jm.at("kind").get<std::string>());
            for (const json& p : jm.at("points")) pl.points.push_back(point_from(p));
            s.map.push_back(std::move(pl));
        }
        s.maneuver_tag = j.at("maneuver_tag").get<std::string>();
        s.ego_future_gt = scene::heading_x_to_y(s.ego().future_gt);
        s.validate();
        return s;
    } catch (const std::exception& e) {
        throw std::runtime_error(where + e.what());
    }
}

void write_dataset(const std::vector<Scene>& scenes, const std::filesystem::path& path) {
    std::ofstream out = open_out(path);
    for (const Scene& s : scenes) out << scene_to_line(s) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Scene> read_dataset(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    std::vector<Scene> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(scene_from_line(line, n));
    }
    return out;
}

std::vector<LocalTrack> convert_annotations(const Annotations& ann) {
    struct Sample {
        std::size_t frame;
        AnnotationBox box;
    };
    std::map<int, std::vector<Sample>> tracks;
    for (std::size_t f = 0; f < ann.frames.size(); ++f) {
        const AnnotationFrame& fr = ann.frames[f];
        if (!fr.boxes.empty() && !fr.ego_pose) {
            throw std::runtime_error("annotation frame " + std::to_string(f) + " (t=" + std::to_string(fr.t) +
                                     ") has boxes but no ego_pose");
        }
        for (const AnnotationBox& b : fr.boxes) tracks[b.track_id].push_back({f, b});
    }

    std::vector<LocalTrack> out;
    for (auto& [id, samples] : tracks) {
        std::vector<Pose> boxes;
        std::vector<RigidTransform> ego_to_world;
        for (const Sample& s : samples) {
            boxes.push_back(s.box.pose);
            ego_to_world.push_back(RigidTransform::from_pose(*ann.frames[s.frame].ego_pose));
        }
        if (!samples.front().box.has_yaw) {
            const Vec2 p0 = ego_to_world[0].apply(boxes[0].xy());
            const double ego_yaw = ego_to_world[0].yaw();
            double heading = ego_yaw;
            for (std::size_t i = 1; i < boxes.size(); ++i) {
                const Vec2 p = ego_to_world[i].apply(boxes[i].xy());
                if (p != p0) {
                    heading = heading_between(p0, p, ego_yaw);
                    break;
                }
            }
            boxes[0].yaw = geo::normalize_angle(heading - ego_yaw);
        }
        LocalTrack t;
        t.track_id = id;
        t.points = geo::transform_chain(boxes, ego_to_world);
        for (const Sample& s : samples) t.times.push_back(ann.frames[s.frame].t);
        out.push_back(std::move(t));
    }
    return out;
}

Annotations export_annotations(const Scene& s, bool include_yaw) {
    const auto& ego = s.ego();
    const std::size_t steps = scene::kHorizon + 1;
    auto world_track = [](const scene::AgentRecord& a) {
        std::vector<Pose> out{Pose::make(a.position.x, a.position.y, 0.0, a.heading)};
        const auto fut = scene::local_to_scene(a.future_gt, a.position, a.heading);
        for (const Vec2& p : fut) {
            out.push_back(Pose::make(p.x, p.y, 0.0, heading_between(out.back().xy(), p, out.back().yaw)));
        }
        return out;
    };
    const std::vector<Pose> ego_world = world_track(ego);
    std::vector<std::vector<Pose>> tracks;
    for (const auto& a : s.agents) tracks.push_back(world_track(a));

    Annotations ann;
    for (std::size_t k = 0; k < steps; ++k) {
        AnnotationFrame fr;
        fr.t = geo::kStepSeconds * static_cast<double>(k);
        fr.ego_pose = ego_world[k];
        const RigidTransform world_to_ego = RigidTransform::from_pose(ego_world[k]).inverse();
        for (std::size_t i = 0; i < s.agents.size(); ++i) {
            fr.boxes.push_back({s.agents[i].id, world_to_ego.apply(tracks[i][k]), include_yaw});
        }
        ann.frames.push_back(std::move(fr));
    }
    return ann;
}

Annotations read_annotations(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    Annotations ann;
    try {
        const json j = json::parse(in);
        const json& frames = j.at("frames");
        for (std::size_t f = 0; f < frames.size(); ++f) {
            const json& jf = frames[f];
            AnnotationFrame fr;
            fr.t = jf.at("t").get<double>();
            if (jf.contains("ego_pose") && !jf.at("ego_pose").is_null()) fr.ego_pose = pose_from(jf.at("ego_pose"));
            for (const json& jb : jf.value("boxes", json::array())) {
                AnnotationBox b;
                b.track_id = jb.at("track_id").get<int>();
                b.pose = pose_from(jb.at("pose"), &b.has_yaw);
                fr.boxes.push_back(b);
            }
            ann.frames.push_back(std::move(fr));
        }
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    return ann;
}

void write_annotations(const Annotations& ann, const std::filesystem::path& path) {
    json frames = json::array();
    for (const AnnotationFrame& fr : ann.frames) {
        json boxes = json::array();
        for (const AnnotationBox& b : fr.boxes) boxes.push_back({{"track_id", b.track_id}, {"pose", pose_json(b.pose, b.has_yaw)}});
        json jf = {{"t", fr.t}, {"boxes", boxes}};
        if (fr.ego_pose) jf["ego_pose"] = pose_json(*fr.ego_pose);
        frames.push_back(std::move(jf));
    }
    std::ofstream out = open_out(path);
    out << json{{"frames", frames}}.dump() << '\n';
}

void write_tracks(const std::vector<LocalTrack>& tracks, const std::filesystem::path& path) {
    json arr = json::array();
    for (const LocalTrack& t : tracks) {
        json pts = json::array();
        for (const Vec2& p : t.points) pts.push_back(point(p));
        arr.push_back({{"track_id", t.track_id}, {"t", t.times}, {"points", pts}});
    }
    std::ofstream out = open_out(path);
    out << json{{"version", kDatasetVersion}, {"tracks", arr}}.dump() << '\n';
}

std::vector<LocalTrack> read_tracks(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    std::vector<LocalTrack> out;
    try {
        const json j = json::parse(in);
        for (const json& jt : j.at("tracks")) {
            LocalTrack t;
            t.track_id = jt.at("track_id").get<int>();
            t.times = jt.at("t").get<std::vector<double>>();
            for (const json& p : jt.at("points")) t.points.push_back(point_from(p));
            out.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    return out;
}

}  // namespace fump::data
