#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mergeplan/sim.hpp"

namespace mergeplan {

namespace detail {

using nlohmann::json;

[[noreturn]] inline void config_error(const std::string& where, const std::string& what) {
  throw std::runtime_error("config: " + where + ": " + what);
}

/// Speeds carry an explicit unit tag: {"kph": 80} or {"mps": 22.2}.
inline double read_speed(const json& j, const std::string& where) {
  if (!j.is_object()) config_error(where, "expected a {\"kph\": x} or {\"mps\": x} object");
  if (j.contains("kph") == j.contains("mps"))
    config_error(where, "exactly one of kph/mps required");
  if (j.contains("kph")) return j.at("kph").get<double>() / 3.6;
  return j.at("mps").get<double>();
}

inline double read_num(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) config_error(where, std::string("missing field '") + key + "'");
  return j.at(key).get<double>();
}

inline double read_num_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

inline int read_int(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) config_error(where, std::string("missing field '") + key + "'");
  return j.at(key).get<int>();
}

}  // namespace detail

inline ScenarioConfig load_scenario(const std::string& path) {
  using detail::json;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config: " + path + ": " + e.what());
  }

  ScenarioConfig cfg;
  {
    const json& g = doc.at("grid");
    cfg.grid.dt = detail::read_num(g, "dt", "grid");
    cfg.grid.dj = detail::read_num(g, "dj", "grid");
    cfg.grid.n_t = detail::read_int(g, "n_t", "grid");
    cfg.grid.n_j = detail::read_int(g, "n_j", "grid");
    cfg.grid.n_g = detail::read_int(g, "n_g", "grid");
    cfg.grid.n_v = detail::read_int(g, "n_v", "grid");
    cfg.grid.n_l = detail::read_int(g, "n_l", "grid");
    cfg.grid.thin_k = g.contains("thin_k") ? g.at("thin_k").get<int>() : 1;
  }
  if (doc.contains("reward")) {
    const json& r = doc.at("reward");
    cfg.gamma = detail::read_num_or(r, "gamma", 0.95);
    if (r.contains("rear_attenuation")) {
      const std::string form = r.at("rear_attenuation").get<std::string>();
      if (form == "corrected")
        cfg.rear_form = RearAttenuationForm::corrected;
      else if (form == "printed")
        cfg.rear_form = RearAttenuationForm::printed;
      else
        detail::config_error("reward.rear_attenuation", "must be 'corrected' or 'printed'");
    }
  }
  {
    const json& m = doc.at("margins");
    cfg.margins.rear_hard = detail::read_num(m, "rear_hard", "margins");
    cfg.margins.rear_caution = detail::read_num(m, "rear_caution", "margins");
    cfg.margins.front_hard = detail::read_num(m, "front_hard", "margins");
    cfg.margins.front_caution = detail::read_num(m, "front_caution", "margins");
    cfg.margins.headway = detail::read_num_or(m, "headway", 0.0);
  }
  {
    const json& l = doc.at("limit");
    const std::string mode = l.contains("mode") ? l.at("mode").get<std::string>() : "step";
    if (mode == "step")
      cfg.limit.mode = SpeedLimitProfile::Mode::step;
    else if (mode == "linear")
      cfg.limit.mode = SpeedLimitProfile::Mode::linear;
    else
      detail::config_error("limit.mode", "must be 'step' or 'linear'");
    if (!l.contains("breakpoints") || !l.at("breakpoints").is_array())
      detail::config_error("limit", "breakpoints array required");
    for (const auto& bp : l.at("breakpoints")) {
      SpeedLimitProfile::Breakpoint b;
      b.pos = detail::read_num(bp, "pos", "limit.breakpoints");
      b.v_max = detail::read_speed(bp.at("v_max"), "limit.breakpoints.v_max");
      cfg.limit.breakpoints.push_back(b);
    }
  }
  {
    const json& e = doc.at("ego0");
    cfg.ego0.t = 0.0;
    cfg.ego0.pos = detail::read_num(e, "pos", "ego0");
    cfg.ego0.vel = detail::read_speed(e.at("vel"), "ego0.vel");
    cfg.ego0.accel = detail::read_num_or(e, "accel", 0.0);
  }
  if (doc.contains("vehicles")) {
    int n = 0;
    for (const auto& v : doc.at("vehicles")) {
      VehicleConfig vc;
      ++n;
      vc.id = v.contains("id") ? v.at("id").get<std::string>() : "veh" + std::to_string(n);
      vc.pos0 = detail::read_num(v, "pos0", "vehicles");
      vc.speed = detail::read_speed(v.at("speed"), "vehicles.speed");
      vc.accel = detail::read_num_or(v, "accel", 0.0);
      if (v.contains("schedule")) {
        for (const auto& s : v.at("schedule")) {
          SchedulePoint p;
          p.t = detail::read_num(s, "t", "vehicles.schedule");
          p.speed = detail::read_speed(s.at("speed"), "vehicles.schedule.speed");
          vc.schedule.push_back(p);
        }
      }
      cfg.vehicles.push_back(std::move(vc));
    }
  }
  cfg.merge_end_pos = doc.at("merge_end_pos").get<double>();
  cfg.cycle_dt = doc.contains("cycle_dt") ? doc.at("cycle_dt").get<double>() : 0.1;
  cfg.sim_duration = doc.at("sim_duration").get<double>();
  if (doc.contains("idm")) {
    const json& i = doc.at("idm");
    cfg.idm.v0 = detail::read_speed(i.at("v0"), "idm.v0");
    cfg.idm.T_hw = detail::read_num_or(i, "T_hw", 1.5);
    cfg.idm.a_max = detail::read_num_or(i, "a_max", 1.5);
    cfg.idm.b_comf = detail::read_num_or(i, "b_comf", 2.0);
    cfg.idm.s0 = detail::read_num_or(i, "s0", 2.0);
    cfg.idm.delta = detail::read_num_or(i, "delta", 4.0);
  }
  cfg.validate();
  return cfg;
}

}  // namespace mergeplan
