#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mergeplan/csv.hpp"
#include "mergeplan/grid.hpp"
#include "mergeplan/idm.hpp"
#include "mergeplan/reward.hpp"
#include "mergeplan/scene.hpp"
#include "mergeplan/solver.hpp"

namespace mergeplan {

struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchedulePoint {
  double t = 0.0;
  double speed = 0.0;  // m/s
};

/// Piecewise-linear speed over time with closed-form traveled distance, so
/// vehicle states are evaluated exactly at any query time.
class SpeedSchedule {
 public:
  SpeedSchedule() = default;

  SpeedSchedule(double initial_speed, const std::vector<SchedulePoint>& points) {
    knots_.push_back({0.0, initial_speed});
    for (const auto& p : points) {
      if (p.t < knots_.back().t)
        throw std::invalid_argument("schedule: points must be sorted by time");
      if (p.t == knots_.back().t) {
        knots_.back().speed = p.speed;
        continue;
      }
      knots_.push_back(p);
    }
    dist_.assign(knots_.size(), 0.0);
    for (size_t i = 1; i < knots_.size(); ++i) {
      const double dt = knots_[i].t - knots_[i - 1].t;
      dist_[i] = dist_[i - 1] + 0.5 * (knots_[i - 1].speed + knots_[i].speed) * dt;
    }
  }

  double speed_at(double t) const {
    const size_t i = segment(t);
    if (i + 1 >= knots_.size()) return knots_.back().speed;
    const double w = (t - knots_[i].t) / (knots_[i + 1].t - knots_[i].t);
    return knots_[i].speed + w * (knots_[i + 1].speed - knots_[i].speed);
  }

  double accel_at(double t) const {
    const size_t i = segment(t);
    if (i + 1 >= knots_.size()) return 0.0;
    return (knots_[i + 1].speed - knots_[i].speed) / (knots_[i + 1].t - knots_[i].t);
  }

  /// Distance traveled from t = 0 to t.
  double distance_at(double t) const {
    const size_t i = segment(t);
    if (i + 1 >= knots_.size()) return dist_.back() + knots_.back().speed * (t - knots_.back().t);
    const double dt = t - knots_[i].t;
    return dist_[i] + knots_[i].speed * dt + 0.5 * accel_at(t) * dt * dt;
  }

 private:
  size_t segment(double t) const {
    size_t i = 0;
    while (i + 1 < knots_.size() && knots_[i + 1].t <= t) ++i;
    return i;
  }

  std::vector<SchedulePoint> knots_{{0.0, 0.0}};
  std::vector<double> dist_{0.0};
};

struct VehicleConfig {
  std::string id;
  double pos0 = 0.0;
  double speed = 0.0;
  double accel = 0.0;  // fallback constant acceleration when no schedule is given
  std::vector<SchedulePoint> schedule;
};

/// Everything one closed-loop run needs; loaded from a scenario file.
struct ScenarioConfig {
  GridSpec grid;
  double gamma = 0.95;
  RearAttenuationForm rear_form = RearAttenuationForm::corrected;
  CorridorMargins margins;
  SpeedLimitProfile limit;
  PhysicalState ego0;
  std::vector<VehicleConfig> vehicles;
  double merge_end_pos = 0.0;
  double cycle_dt = 0.1;
  double sim_duration = 0.0;
  IdmParams idm;

  void validate() const {
    Grid grid_check = Grid::build(grid);
    margins.validate();
    limit.validate();
    idm.validate();
    if (!(gamma > 0.0 && gamma < 1.0))
      throw std::invalid_argument("config: gamma must be in (0,1)");
    if (!(cycle_dt > 0.0)) throw std::invalid_argument("config: cycle_dt must be positive");
    if (!(sim_duration > 0.0)) throw std::invalid_argument("config: sim_duration must be positive");
    if (merge_end_pos < 0.0 || merge_end_pos > grid_check.max_position())
      throw std::invalid_argument("config: merge_end_pos outside the grid position range");
    for (const auto& v : vehicles) {
      if (v.speed < 0.0) throw std::invalid_argument("config: vehicle speed must be >= 0");
      for (size_t i = 1; i < v.schedule.size(); ++i)
        if (v.schedule[i].t < v.schedule[i - 1].t)
          throw std::invalid_argument("config: vehicle schedule must be sorted by time");
    }
  }
};

enum class PlannerKind { mdp, idm };

inline const char* planner_name(PlannerKind p) { return p == PlannerKind::mdp ? "mdp" : "idm"; }

struct CycleRecord {
  double t = 0.0;  // simulation time at cycle start
  PhysicalState ego;
  double jerk = 0.0;  // applied over this cycle
  double v_max = 0.0;
  double min_att = 1.0;
  bool feasible = true;
  double solve_ms = 0.0;
  std::vector<double> veh_pos, veh_vel, gap;  // gap[i] = veh_pos[i] - ego.pos
};

struct SimulationLog {
  std::string planner;
  std::vector<std::string> vehicle_ids;
  double cycle_dt = 0.1;
  double merge_end_pos = 0.0;
  bool merged = false;  // run ended by passing merge_end_pos
  std::vector<CycleRecord> cycles;
};

/// Scene snapshot at simulation time `t`: vehicles at their scheduled
/// positions with linear prediction of their current speed.
inline Scene scene_at(const ScenarioConfig& cfg, const std::vector<SpeedSchedule>& schedules,
                      double t) {
  Scene scene;
  scene.margins = cfg.margins;
  scene.limit = cfg.limit;
  scene.gamma = cfg.gamma;
  scene.rear_form = cfg.rear_form;
  scene.vehicles.reserve(cfg.vehicles.size());
  for (size_t i = 0; i < cfg.vehicles.size(); ++i) {
    const auto& vc = cfg.vehicles[i];
    VehicleTrack track;
    track.id = vc.id;
    if (vc.schedule.empty()) {
      track.pos0 = vc.pos0 + vc.speed * t + 0.5 * vc.accel * t * t;
      track.speed = std::max(0.0, vc.speed + vc.accel * t);
      track.accel = vc.accel;
    } else {
      // linear prediction of the current speed; extrapolating the momentary
      // ramp slope across the whole horizon overshoots wildly, and the 0.1 s
      // replanning absorbs the schedule changes anyway
      track.pos0 = vc.pos0 + schedules[i].distance_at(t);
      track.speed = schedules[i].speed_at(t);
      track.accel = 0.0;
    }
    scene.vehicles.push_back(std::move(track));
  }
  return scene;
}

namespace detail {

inline CycleRecord make_record(double t, const PhysicalState& ego, double jerk,
                               const Scene& scene, bool feasible, double solve_ms) {
  CycleRecord rec;
  rec.t = t;
  rec.ego = ego;
  rec.jerk = jerk;
  rec.v_max = speed_limit(scene.limit, ego.pos);
  PhysicalState rel = ego;
  rel.t = 0.0;  // attenuation against the current vehicle positions
  rec.min_att = 1.0;
  for (const auto& v : scene.vehicles)
    rec.min_att = std::min(rec.min_att, attenuation(rel, v, scene));
  rec.feasible = feasible;
  rec.solve_ms = solve_ms;
  for (const auto& v : scene.vehicles) {
    rec.veh_pos.push_back(v.pos0);
    rec.veh_vel.push_back(v.speed);
    rec.gap.push_back(v.pos0 - ego.pos);
  }
  return rec;
}

}  // namespace detail

/// Closed-loop run: every cycle the scene is rebuilt from the scheduled
/// vehicle motion, the selected planner produces a command, and the ego
/// advances one cycle under exact triple-integrator kinematics. Stops at
/// sim_duration or once the ego passes merge_end_pos.
inline SimulationLog run_scenario(const ScenarioConfig& cfg, PlannerKind planner,
                                  const SolveOptions& opts = {}) {
  cfg.validate();
  const Grid grid = Grid::build(cfg.grid);
  const RewardParams rp = RewardParams::from_grid(grid, cfg.gamma);

  std::vector<SpeedSchedule> schedules;
  schedules.reserve(cfg.vehicles.size());
  for (const auto& v : cfg.vehicles) schedules.emplace_back(v.speed, v.schedule);

  SimulationLog log;
  log.planner = planner_name(planner);
  for (const auto& v : cfg.vehicles) log.vehicle_ids.push_back(v.id);
  log.cycle_dt = cfg.cycle_dt;
  log.merge_end_pos = cfg.merge_end_pos;

  PhysicalState ego = cfg.ego0;
  ego.t = 0.0;
  const double h = cfg.cycle_dt;
  const long long n_cycles = static_cast<long long>(cfg.sim_duration / cfg.cycle_dt + 1e-9);

  for (long long c = 0; c < n_cycles; ++c) {
    const double t = static_cast<double>(c) * h;
    if (ego.pos >= cfg.merge_end_pos) {
      log.merged = true;
      break;
    }
    const Scene scene = scene_at(cfg, schedules, t);

    if (planner == PlannerKind::mdp) {
      const Plan plan = plan_cycle(grid, scene, rp, ego, opts);
      if (!plan.feasible)
        throw InfeasibleError("mdp planner found no feasible plan at t=" +
                              format_double(t) + " s");
      // First planned jerk plus a proportional pull toward the plan's lattice
      // acceleration. Raw jerk application leaves the sub-resolution part of
      // the acceleration uncorrected, and that residue integrates into
      // velocity until the quantized state crosses the prohibition boundary.
      // On-lattice states reduce this to exactly the planned jerk.
      const double k_track = 2.0 / grid.dt();
      const double jerk =
          std::clamp(plan.jerks.front() + k_track * (plan.states.front().accel - ego.accel),
                     -grid.max_jerk(), grid.max_jerk());
      log.cycles.push_back(detail::make_record(t, ego, jerk, scene, true, plan.solve_ms));
      ego.pos += ego.vel * h + 0.5 * ego.accel * h * h + jerk * h * h * h / 6.0;
      ego.vel += ego.accel * h + 0.5 * jerk * h * h;
      ego.accel += jerk * h;
      ego.t = t + h;
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      const auto leader = nearest_leader(scene.vehicles, ego.pos);
      const PhysicalState next = idm_plan_step(ego, leader, cfg.idm, h);
      const auto t1 = std::chrono::steady_clock::now();
      const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      const double jerk = (next.accel - ego.accel) / h;
      log.cycles.push_back(detail::make_record(t, ego, jerk, scene, true, ms));
      ego = next;
    }
  }
  if (!log.merged && ego.pos >= cfg.merge_end_pos) log.merged = true;
  return log;
}

/// Trajectory CSV: one row per cycle, fixed column layout plus three columns
/// per vehicle.
inline std::vector<std::string> trajectory_header(const SimulationLog& log) {
  std::vector<std::string> h = {"t_s",       "ego_pos_m", "ego_vel_mps",
                                "ego_accel_mps2", "ego_jerk_mps3", "v_max_mps",
                                "min_att",   "feasible",  "solve_ms"};
  for (size_t i = 0; i < log.vehicle_ids.size(); ++i) {
    const std::string n = std::to_string(i + 1);
    h.push_back("veh" + n + "_pos_m");
    h.push_back("veh" + n + "_vel_mps");
    h.push_back("gap" + n + "_m");
  }
  return h;
}

inline void export_csv(const SimulationLog& log, const std::string& path) {
  if (log.cycles.empty()) throw std::runtime_error("export_csv: empty log: " + path);
  std::vector<std::vector<double>> rows;
  rows.reserve(log.cycles.size());
  for (const auto& c : log.cycles) {
    std::vector<double> row = {c.t,     c.ego.pos, c.ego.vel,          c.ego.accel, c.jerk,
                               c.v_max, c.min_att, c.feasible ? 1.0 : 0.0, c.solve_ms};
    for (size_t i = 0; i < c.veh_pos.size(); ++i) {
      row.push_back(c.veh_pos[i]);
      row.push_back(c.veh_vel[i]);
      row.push_back(c.gap[i]);
    }
    rows.push_back(std::move(row));
  }
  write_csv(path, trajectory_header(log), rows);
}

/// Gap and comfort metrics of one run; all derivable from the CSV rows.
struct RunMetrics {
  double min_abs_gap = std::numeric_limits<double>::infinity();
  double front_gap_at_end = std::numeric_limits<double>::quiet_NaN();
  double rear_gap_at_end = std::numeric_limits<double>::quiet_NaN();
  double max_abs_jerk = 0.0;
  double max_abs_accel = 0.0;
};

inline RunMetrics compute_metrics(const SimulationLog& log) {
  RunMetrics m;
  for (const auto& c : log.cycles) {
    for (const double g : c.gap) m.min_abs_gap = std::min(m.min_abs_gap, std::abs(g));
    m.max_abs_jerk = std::max(m.max_abs_jerk, std::abs(c.jerk));
    m.max_abs_accel = std::max(m.max_abs_accel, std::abs(c.ego.accel));
  }
  if (!log.cycles.empty()) {
    const auto& last = log.cycles.back();
    for (const double g : last.gap) {
      if (g > 0.0 && !(g >= m.front_gap_at_end)) m.front_gap_at_end = g;
      if (g < 0.0 && !(-g >= m.rear_gap_at_end)) m.rear_gap_at_end = -g;
    }
  }
  return m;
}

struct CompareResult {
  SimulationLog mdp_log;
  SimulationLog idm_log;
  RunMetrics mdp_metrics;
  RunMetrics idm_metrics;
};

/// Runs both planners on the identical configuration.
inline CompareResult compare(const ScenarioConfig& cfg, const SolveOptions& opts = {}) {
  CompareResult res;
  res.mdp_log = run_scenario(cfg, PlannerKind::mdp, opts);
  res.idm_log = run_scenario(cfg, PlannerKind::idm, opts);
  res.mdp_metrics = compute_metrics(res.mdp_log);
  res.idm_metrics = compute_metrics(res.idm_log);
  return res;
}

struct BenchReport {
  int repetitions = 0;
  int threads = 0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  double avg_ms = 0.0;
};

struct BenchResult {
  BenchReport scene;         ///< the configured scenario at t = 0
  BenchReport no_vehicle;    ///< empty road, limit at the grid's top speed
};

namespace detail {

inline BenchReport bench_one(const Grid& grid, const Scene& scene, const RewardParams& rp,
                             const StateIndex& initial, int repetitions, int threads) {
  BenchReport rep;
  rep.repetitions = repetitions;
  rep.threads = threads;
  rep.min_ms = std::numeric_limits<double>::infinity();
  SolveOptions opts;
  opts.threads = threads;
  for (int i = 0; i < repetitions; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const SolveResult r = solve(grid, scene, rp, initial, opts);
    const auto t1 = std::chrono::steady_clock::now();
    (void)r;
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    rep.min_ms = std::min(rep.min_ms, ms);
    rep.max_ms = std::max(rep.max_ms, ms);
    rep.avg_ms += ms;
  }
  rep.avg_ms /= repetitions;
  return rep;
}

}  // namespace detail

/// Times the solver on the configured scene and on the slowest case, an
/// empty road with the limit raised to the grid's top speed (the fewest
/// termination states, hence the most lookahead work).
inline BenchResult bench(const ScenarioConfig& cfg, int repetitions, int threads) {
  if (repetitions < 1) throw std::invalid_argument("bench: repetitions must be >= 1");
  cfg.validate();
  const Grid grid = Grid::build(cfg.grid);
  const RewardParams rp = RewardParams::from_grid(grid, cfg.gamma);
  std::vector<SpeedSchedule> schedules;
  for (const auto& v : cfg.vehicles) schedules.emplace_back(v.speed, v.schedule);

  PhysicalState ego = cfg.ego0;
  ego.t = 0.0;
  const StateIndex initial = grid.quantize(ego);

  BenchResult res;
  const Scene scene = scene_at(cfg, schedules, 0.0);
  res.scene = detail::bench_one(grid, scene, rp, initial, repetitions, threads);

  Scene open_road = scene;
  open_road.vehicles.clear();
  open_road.limit.mode = SpeedLimitProfile::Mode::step;
  open_road.limit.breakpoints = {{0.0, grid.max_velocity()}};
  res.no_vehicle = detail::bench_one(grid, open_road, rp, initial, repetitions, threads);
  return res;
}

}  // namespace mergeplan
