#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fump/scene/scene.hpp"

namespace fump::data {

inline constexpr int kDatasetVersion = 1;

/// One JSON object per line. Numbers are written in shortest round-trip
/// form, so reading back gives bitwise-equal doubles.
std::string scene_to_line(const scene::Scene& s);
/// `line_no` is 1-based and only used in error messages.
scene::Scene scene_from_line(std::string_view line, std::size_t line_no = 1);

void write_dataset(const std::vector<scene::Scene>& scenes, const std::filesystem::path& path);
/// Blank lines are skipped. Throws std::runtime_error naming the line on
/// malformed records or a version mismatch.
std::vector<scene::Scene> read_dataset(const std::filesystem::path& path);

// Annotation conversion ------------------------------------------------------

struct AnnotationBox {
    int track_id = 0;
    geo::Pose pose;  // in the frame's ego coordinates
    bool has_yaw = true;
};

struct AnnotationFrame {
    double t = 0.0;
    std::optional<geo::Pose> ego_pose;  // ego in world coordinates
    std::vector<AnnotationBox> boxes;
};

struct Annotations {
    std::vector<AnnotationFrame> frames;  // chronological
};

struct LocalTrack {
    int track_id = 0;
    std::vector<double> times;
    std::vector<geo::Vec2> points;  // own frame at the first sample; points[0] is the origin
};

/// Per track id (ascending), the chain from its first frame onward. A box
/// without yaw takes the heading of the track's first nonzero world
/// displacement, or the ego heading when the track never moves. Throws
/// std::runtime_error naming the frame when a frame with boxes has no ego
/// pose.
std::vector<LocalTrack> convert_annotations(const Annotations& ann);

/// Ego-frame boxes of every agent at t0 and each future step, with the ego
/// poses those frames need. Converting the result reproduces each agent's
/// future_gt.
Annotations export_annotations(const scene::Scene& s, bool include_yaw = true);

Annotations read_annotations(const std::filesystem::path& path);
void write_annotations(const Annotations& ann, const std::filesystem::path& path);
void write_tracks(const std::vector<LocalTrack>& tracks, const std::filesystem::path& path);
std::vector<LocalTrack> read_tracks(const std::filesystem::path& path);

}  // namespace fump::data
