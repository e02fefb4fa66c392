#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mergeplan/grid.hpp"

namespace mergeplan {

/// Another vehicle projected onto the ego trajectory coordinate.
struct VehicleTrack {
  std::string id;
  double pos0 = 0.0;   ///< position at plan time [m]
  double speed = 0.0;  ///< [m/s], >= 0
  double accel = 0.0;  ///< optional constant acceleration [m/s^2]
};

/// Fixed corridor margins around a vehicle's predicted position. Hard margins
/// bound the prohibited band; caution margins bound the attenuation band.
/// `headway` widens all four bounds in proportion to the vehicle's speed.
struct CorridorMargins {
  double rear_hard = 5.0;
  double rear_caution = 15.0;
  double front_hard = 5.0;
  double front_caution = 15.0;
  double headway = 0.0;  ///< seconds

  void validate() const {
    if (!(rear_hard > 0.0) || !(front_hard > 0.0))
      throw std::invalid_argument("margins: hard margins must be positive");
    if (!(rear_caution > rear_hard) || !(front_caution > front_hard))
      throw std::invalid_argument("margins: caution margins must exceed hard margins");
    if (headway < 0.0) throw std::invalid_argument("margins: headway must be >= 0");
  }
};

/// Corridor bounds of one vehicle at one query time, ordered
/// l_cr < l_pr <= l_pf < l_cf along the trajectory coordinate.
struct CorridorBounds {
  double l_cr = 0.0;  ///< rear caution boundary
  double l_pr = 0.0;  ///< rear prohibited boundary
  double l_pf = 0.0;  ///< front prohibited boundary
  double l_cf = 0.0;  ///< front caution boundary
};

/// Position-dependent speed limit, sampled from ordered breakpoints.
struct SpeedLimitProfile {
  enum class Mode { step, linear };

  struct Breakpoint {
    double pos = 0.0;
    double v_max = 0.0;
  };

  Mode mode = Mode::step;
  std::vector<Breakpoint> breakpoints;

  void validate() const {
    if (breakpoints.empty()) throw std::invalid_argument("speed limit: no breakpoints");
    for (size_t i = 0; i < breakpoints.size(); ++i) {
      if (!(breakpoints[i].v_max > 0.0))
        throw std::invalid_argument("speed limit: v_max must be positive");
      if (i > 0 && !(breakpoints[i].pos > breakpoints[i - 1].pos))
        throw std::invalid_argument("speed limit: breakpoints must be strictly increasing");
    }
  }
};

/// How the rear attenuation branch is evaluated; see attenuation() in
/// reward.hpp. The corrected form is continuous at l_cr and reaches 0 at the
/// prohibited boundary; the printed form is kept for comparison runs.
enum class RearAttenuationForm { corrected, printed };

/// The merge environment for one planning cycle: other vehicles, corridor
/// margins, the speed limit, and the value discount.
struct Scene {
  std::vector<VehicleTrack> vehicles;
  CorridorMargins margins;
  SpeedLimitProfile limit;
  double gamma = 0.95;  ///< discount, in (0,1)
  RearAttenuationForm rear_form = RearAttenuationForm::corrected;

  void validate() const {
    margins.validate();
    limit.validate();
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("scene: gamma must be in (0,1)");
    for (const auto& v : vehicles)
      if (v.speed < 0.0) throw std::invalid_argument("scene: vehicle speed must be >= 0");
  }
};

/// Predicted position of a vehicle `t` seconds after plan time. Linear, or
/// quadratic when an acceleration is given; a decelerating vehicle freezes at
/// its standstill point rather than extrapolating backwards.
inline double predict_position(const VehicleTrack& v, double t) {
  if (v.accel == 0.0) return v.pos0 + v.speed * t;
  if (v.accel < 0.0) {
    const double t_stop = -v.speed / v.accel;
    if (t >= t_stop) return v.pos0 + v.speed * t_stop + 0.5 * v.accel * t_stop * t_stop;
  }
  return v.pos0 + v.speed * t + 0.5 * v.accel * t * t;
}

/// Predicted speed at `t`, floored at standstill.
inline double predict_speed(const VehicleTrack& v, double t) {
  return std::max(0.0, v.speed + v.accel * t);
}

/// Corridor bounds of vehicle `v` at time `t`.
inline CorridorBounds corridor(const VehicleTrack& v, double t, const CorridorMargins& m) {
  const double x = predict_position(v, t);
  const double h = m.headway * predict_speed(v, t);
  CorridorBounds cb;
  cb.l_cr = x - (m.rear_caution + h);
  cb.l_pr = x - (m.rear_hard + h);
  cb.l_pf = x + (m.front_hard + h);
  cb.l_cf = x + (m.front_caution + h);
  return cb;
}

/// Speed limit at `pos`; clamps to the first/last breakpoint value outside
/// the covered range.
inline double speed_limit(const SpeedLimitProfile& p, double pos) {
  const auto& bps = p.breakpoints;
  if (pos <= bps.front().pos) return bps.front().v_max;
  if (pos >= bps.back().pos) return bps.back().v_max;
  // first breakpoint strictly beyond pos
  size_t hi = 1;
  while (bps[hi].pos <= pos) ++hi;
  if (p.mode == SpeedLimitProfile::Mode::step) return bps[hi - 1].v_max;
  const auto& a = bps[hi - 1];
  const auto& b = bps[hi];
  const double w = (pos - a.pos) / (b.pos - a.pos);
  return a.v_max + w * (b.v_max - a.v_max);
}

/// Prohibited-state test: inside any vehicle's hard band, or above the speed
/// limit at the state's position.
inline bool is_prohibited(const PhysicalState& p, const Scene& scene) {
  for (const auto& v : scene.vehicles) {
    const CorridorBounds cb = corridor(v, p.t, scene.margins);
    if (cb.l_pr <= p.pos && p.pos <= cb.l_pf) return true;
  }
  return p.vel > speed_limit(scene.limit, p.pos);
}

/// Whether the straight-line position segment from `from` to `to` (over the
/// corresponding time interval) enters any vehicle's hard band. Sampled at a
/// fixed subdivision; band widths are large against the per-sample relative
/// motion at the grid resolutions in use.
inline bool segment_crosses_hard_band(const PhysicalState& from, const PhysicalState& to,
                                      const Scene& scene) {
  constexpr int kSamples = 16;
  for (int k = 0; k <= kSamples; ++k) {
    const double w = static_cast<double>(k) / kSamples;
    const double t = from.t + w * (to.t - from.t);
    const double pos = from.pos + w * (to.pos - from.pos);
    for (const auto& v : scene.vehicles) {
      const CorridorBounds cb = corridor(v, t, scene.margins);
      if (cb.l_pr <= pos && pos <= cb.l_pf) return true;
    }
  }
  return false;
}

}  // namespace mergeplan
