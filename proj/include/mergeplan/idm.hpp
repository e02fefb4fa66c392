#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "mergeplan/grid.hpp"
#include "mergeplan/scene.hpp"

namespace mergeplan {

/// Intelligent Driver Model parameters with the usual literature defaults.
struct IdmParams {
  double v0 = 30.0;     ///< desired speed [m/s]
  double T_hw = 1.5;    ///< desired time headway [s]
  double a_max = 1.5;   ///< maximum acceleration [m/s^2]
  double b_comf = 2.0;  ///< comfortable deceleration [m/s^2]
  double s0 = 2.0;      ///< minimum gap [m]
  double delta = 4.0;   ///< free-flow exponent

  void validate() const {
    if (!(v0 > 0.0 && T_hw > 0.0 && a_max > 0.0 && b_comf > 0.0 && s0 > 0.0))
      throw std::invalid_argument("idm: parameters must be positive");
    if (!(delta >= 1.0)) throw std::invalid_argument("idm: delta must be >= 1");
  }
};

/// IDM acceleration law. `dv` is the approach rate toward the leader
/// (ego speed minus leader speed); a free road is gap = +infinity, dv = 0.
inline double idm_accel(double v, double dv, double gap, const IdmParams& p) {
  if (!(gap > 0.0)) throw std::invalid_argument("idm: non-positive gap to leader");
  const double s_star =
      p.s0 + std::max(0.0, v * p.T_hw + v * dv / (2.0 * std::sqrt(p.a_max * p.b_comf)));
  const double s_ratio = s_star / gap;
  return p.a_max * (1.0 - std::pow(v / p.v0, p.delta) - s_ratio * s_ratio);
}

/// One Euler step of the IDM follower. `leader` may be absent.
inline PhysicalState idm_plan_step(const PhysicalState& ego,
                                   const std::optional<VehicleTrack>& leader, const IdmParams& p,
                                   double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("idm: dt must be positive");
  double gap = std::numeric_limits<double>::infinity();
  double dv = 0.0;
  if (leader.has_value()) {
    gap = leader->pos0 - ego.pos;
    dv = ego.vel - leader->speed;
  }
  const double a = idm_accel(ego.vel, dv, gap, p);
  PhysicalState next;
  next.t = ego.t + dt;
  next.accel = a;
  next.vel = std::max(0.0, ego.vel + a * dt);
  next.pos = ego.pos + ego.vel * dt + 0.5 * a * dt * dt;
  return next;
}

/// Nearest vehicle strictly ahead of `pos` along the trajectory coordinate.
inline std::optional<VehicleTrack> nearest_leader(const std::vector<VehicleTrack>& vehicles,
                                                  double pos) {
  std::optional<VehicleTrack> best;
  for (const auto& v : vehicles) {
    if (v.pos0 > pos && (!best || v.pos0 < best->pos0)) best = v;
  }
  return best;
}

}  // namespace mergeplan
