#include "fump/metrics/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fump::metrics {

using geo::Vec2;
using nlohmann::json;

namespace {

double mean_step_error(const Trajectory& a, const Trajectory& b, std::size_t steps) {
    double s = 0.0;
    for (std::size_t t = 0; t < steps; ++t) s += geo::distance(a[t], b[t]);
    return s / static_cast<double>(steps);
}

json horizons_json(const HorizonValues& h) {
    return {{"1s", h.at[0]}, {"2s", h.at[1]}, {"3s", h.at[2]}, {"avg", h.avg}};
}

HorizonValues horizons_from(const json& j) {
    HorizonValues h;
    h.at = {j.at("1s").get<double>(), j.at("2s").get<double>(), j.at("3s").get<double>()};
    h.avg = j.at("avg").get<double>();
    return h;
}

}  // namespace

HorizonValues l2_at_horizons(const Trajectory& pred, const Trajectory& gt) {
    HorizonValues h;
    for (std::size_t i = 0; i < kHorizonSteps.size(); ++i) h.at[i] = mean_step_error(pred, gt, kHorizonSteps[i]);
    h.avg = (h.at[0] + h.at[1] + h.at[2]) / 3.0;
    return h;
}

std::optional<std::size_t> first_collision_step(const Trajectory& ego, std::span<const Trajectory> agents,
                                                 CollisionRadii radii) {
    const double reach = radii.ego + radii.agent;
    for (std::size_t t = 0; t < scene::kHorizon; ++t) {
        for (const Trajectory& a : agents) {
            if (geo::distance(ego[t], a[t]) < reach) return t;
        }
    }
    return std::nullopt;
}

std::optional<std::size_t> scene_collision_step(const scene::Scene& s, const Trajectory& plan, CollisionRadii radii) {
    const auto& ego = s.ego();
    const Trajectory ego_scene = scene::local_to_scene(scene::heading_y_to_x(plan), ego.position, ego.heading);
    std::vector<Trajectory> others;
    for (const auto& a : s.agents) {
        if (a.id != ego.id) others.push_back(scene::local_to_scene(a.future_gt, a.position, a.heading));
    }
    return first_collision_step(ego_scene, others, radii);
}

HorizonValues collision_rate(std::span<const std::optional<std::size_t>> first_steps) {
    HorizonValues h;
    if (first_steps.empty()) return h;
    for (std::size_t i = 0; i < kHorizonSteps.size(); ++i) {
        std::size_t hits = 0;
        for (const auto& s : first_steps) hits += s && *s < kHorizonSteps[i];
        h.at[i] = 100.0 * static_cast<double>(hits) / static_cast<double>(first_steps.size());
    }
    h.avg = (h.at[0] + h.at[1] + h.at[2]) / 3.0;
    return h;
}

double min_ade(std::span<const Trajectory> proposals, const Trajectory& gt) {
    if (proposals.empty()) throw std::invalid_argument("min_ade: no proposals");
    double best = std::numeric_limits<double>::infinity();
    for (const Trajectory& p : proposals) best = std::min(best, mean_step_error(p, gt, scene::kHorizon));
    return best;
}

double cegr(double acc, double acc_base, double d_ego, double d_total, bool lower_is_better) {
    if (d_total == 0.0) throw std::invalid_argument("cegr: d_total is zero");
    if (acc_base == 0.0) throw std::invalid_argument("cegr: baseline value is zero");
    if (!(d_ego > 0.0 && d_ego <= d_total)) throw std::invalid_argument("cegr: need 0 < d_ego <= d_total");
    const double improvement = lower_is_better ? (acc_base - acc) / acc_base : (acc - acc_base) / acc_base;
    return improvement * (1.0 - d_ego / d_total) * 100.0;
}

EvalReport aggregate(std::span<const SampleMetrics> samples) {
    if (samples.empty()) throw std::invalid_argument("no samples");
    EvalReport r;
    r.samples = samples.size();
    std::vector<std::optional<std::size_t>> steps;
    double ade = 0.0;
    std::size_t ade_n = 0;
    for (const SampleMetrics& s : samples) {
        for (std::size_t i = 0; i < 3; ++i) r.l2.at[i] += s.l2.at[i];
        steps.push_back(s.collision_step);
        if (s.min_ade) {
            ade += *s.min_ade;
            ++ade_n;
        }
    }
    const double n = static_cast<double>(samples.size());
    for (double& v : r.l2.at) v /= n;
    r.l2.avg = (r.l2.at[0] + r.l2.at[1] + r.l2.at[2]) / 3.0;
    r.collision = collision_rate(steps);
    if (ade_n > 0) r.min_ade = ade / static_cast<double>(ade_n);
    return r;
}

std::string EvalReport::to_text() const {
    std::ostringstream o;
    o << std::fixed << std::setprecision(4);
    o << "samples      " << samples << '\n';
    o << "config_hash  " << config_hash << '\n';
    if (!state_mode.empty()) o << "state_mode   " << state_mode << '\n';
    o << "             1s        2s        3s        avg\n";
    o << "L2 (m)       " << l2.at[0] << "    " << l2.at[1] << "    " << l2.at[2] << "    " << l2.avg << '\n';
    o << "Col. (%)     " << collision.at[0] << "    " << collision.at[1] << "    " << collision.at[2] << "    "
      << collision.avg << '\n';
    if (min_ade) o << "minADE (m)   " << *min_ade << '\n';
    for (const auto& [name, v] : cegr) o << "CEGR " << name << " (%)  " << v << '\n';
    return o.str();
}

std::string EvalReport::to_json() const {
    json c = json::array();
    for (const auto& [name, v] : cegr) c.push_back({{"name", name}, {"value", v}});
    json j = {{"samples", samples},       {"config_hash", config_hash}, {"state_mode", state_mode},
              {"l2", horizons_json(l2)}, {"collision", horizons_json(collision)}, {"cegr", c}};
    j["min_ade"] = min_ade ? json(*min_ade) : json(nullptr);
    return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
    const json j = json::parse(text);
    EvalReport r;
    r.samples = j.at("samples").get<std::size_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.state_mode = j.value("state_mode", "");
    r.l2 = horizons_from(j.at("l2"));
    r.collision = horizons_from(j.at("collision"));
    if (!j.at("min_ade").is_null()) r.min_ade = j.at("min_ade").get<double>();
    for (const json& c : j.at("cegr")) r.cegr.emplace_back(c.at("name").get<std::string>(), c.at("value").get<double>());
    return r;
}

std::string EvalReport::to_csv() const {
    std::ostringstream o;
    o << std::setprecision(17);
    o << "horizon_s,l2_m,collision_pct\n";
    for (std::size_t i = 0; i < 3; ++i) o << i + 1 << ',' << l2.at[i] << ',' << collision.at[i] << '\n';
    return o.str();
}

}  // namespace fump::metrics
