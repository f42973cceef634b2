#include "fump/cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fump::cli {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument("config key '" + where + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw std::invalid_argument("unknown config key '" + where + "." + key + "'");
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string RunConfig::to_json() const {
    ordered_json j = ordered_json::parse(train.to_json());
    const data::ScenarioConfig& s = scenario;
    j["scenario"] = {{"min_agents", s.min_agents},
                     {"max_agents", s.max_agents},
                     {"lane_width", s.lane_width},
                     {"intersection_probability", s.intersection_probability},
                     {"curve_probability", s.curve_probability},
                     {"curve_radius_min", s.curve_radius_min},
                     {"curve_radius_max", s.curve_radius_max},
                     {"ego_speed_min", s.ego_speed_min},
                     {"ego_speed_max", s.ego_speed_max},
                     {"history_noise", s.history_noise},
                     {"min_clearance", s.min_clearance},
                     {"mix",
                      {{"keep_lane", s.mix.keep_lane},
                       {"turn", s.mix.turn},
                       {"lane_change", s.mix.lane_change},
                       {"overtake", s.mix.overtake},
                       {"stop", s.mix.stop}}}};
    j["collision_radii"] = {{"ego", radii.ego}, {"agent", radii.agent}};
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    RunConfig c;
    try {
        if (j.contains("scenario")) {
            const json& s = j.at("scenario");
            reject_unknown(s,
                           {"min_agents", "max_agents", "lane_width", "intersection_probability", "curve_probability",
                            "curve_radius_min", "curve_radius_max", "ego_speed_min", "ego_speed_max", "history_noise",
                            "min_clearance", "mix"},
                           "scenario");
            data::ScenarioConfig& o = c.scenario;
            read_field(s, "min_agents", o.min_agents);
            read_field(s, "max_agents", o.max_agents);
            read_field(s, "lane_width", o.lane_width);
            read_field(s, "intersection_probability", o.intersection_probability);
            read_field(s, "curve_probability", o.curve_probability);
            read_field(s, "curve_radius_min", o.curve_radius_min);
            read_field(s, "curve_radius_max", o.curve_radius_max);
            read_field(s, "ego_speed_min", o.ego_speed_min);
            read_field(s, "ego_speed_max", o.ego_speed_max);
            read_field(s, "history_noise", o.history_noise);
            read_field(s, "min_clearance", o.min_clearance);
            if (s.contains("mix")) {
                const json& m = s.at("mix");
                reject_unknown(m, {"keep_lane", "turn", "lane_change", "overtake", "stop"}, "scenario.mix");
                read_field(m, "keep_lane", o.mix.keep_lane);
                read_field(m, "turn", o.mix.turn);
                read_field(m, "lane_change", o.mix.lane_change);
                read_field(m, "overtake", o.mix.overtake);
                read_field(m, "stop", o.mix.stop);
            }
            j.erase("scenario");
        }
        if (j.contains("collision_radii")) {
            const json& r = j.at("collision_radii");
            reject_unknown(r, {"ego", "agent"}, "collision_radii");
            read_field(r, "ego", c.radii.ego);
            read_field(r, "agent", c.radii.agent);
            j.erase("collision_radii");
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config field has the wrong type: ") + e.what());
    }
    if (!(c.radii.ego > 0.0 && c.radii.agent > 0.0)) {
        throw std::invalid_argument("collision_radii: radii must be positive");
    }
    c.scenario.validate();
    c.train = train::TrainConfig::from_json(j.dump());
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return from_json(text.str());
}

}  // namespace fump::cli
