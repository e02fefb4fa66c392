#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mergeplan/grid.hpp"
#include "mergeplan/scene.hpp"

namespace mergeplan {

/// Scaling constants of the reward shaping. The jerk and acceleration scales
/// are the grid's maxima, so a full-scale action or state costs exactly one
/// e-fold.
struct RewardParams {
  double max_jerk = 1.0;   ///< n_j * dj
  double max_accel = 1.0;  ///< n_g * dj * dt
  double gamma = 0.95;

  static RewardParams from_grid(const Grid& grid, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
      throw std::invalid_argument("reward: gamma must be in (0,1)");
    return RewardParams{grid.max_jerk(), grid.max_accel(), gamma};
  }
};

namespace detail {
inline double sq(double x) { return x * x; }
}  // namespace detail

/// Smoothness factor of an action, 1 at zero jerk, e^-1 at full scale.
inline double action_reward(double jerk, const RewardParams& rp) {
  return std::exp(-detail::sq(jerk / rp.max_jerk));
}

/// Desirability of a state: low acceleration and velocity near the local
/// speed limit.
inline double state_reward(const PhysicalState& p, const Scene& scene, const RewardParams& rp) {
  const double fa = std::exp(-detail::sq(p.accel / rp.max_accel));
  const double vm = speed_limit(scene.limit, p.pos);
  const double fv = std::exp(-detail::sq((p.vel - vm) / vm));
  return fa * fv;
}

/// Per-vehicle caution-band factor in [0,1]: 1 outside the caution band,
/// falling linearly to 0 at the prohibited boundary. Positions inside the
/// hard band (never reached from non-terminal queries) evaluate to 0.
inline double attenuation(const PhysicalState& p, const VehicleTrack& v, const Scene& scene) {
  const CorridorBounds cb = corridor(v, p.t, scene.margins);
  if (p.pos < cb.l_cr || p.pos > cb.l_cf) return 1.0;
  if (p.pos < cb.l_pr) {
    if (scene.rear_form == RearAttenuationForm::corrected)
      return (cb.l_pr - p.pos) / (cb.l_pr - cb.l_cr);
    return (p.pos - cb.l_cr) / (cb.l_pr - cb.l_cr);
  }
  if (p.pos > cb.l_pf) return (p.pos - cb.l_pf) / (cb.l_cf - cb.l_pf);
  return 0.0;
}

/// Composite one-step reward: zero into dead successors, otherwise the
/// product of the worst vehicle attenuation, the action factor and the
/// successor state factor.
inline double transition_reward(const PhysicalState& /*s*/, double jerk,
                                const PhysicalState& s_next, double v_next, const Scene& scene,
                                const RewardParams& rp) {
  if (v_next == 0.0) return 0.0;
  double att = 1.0;
  for (const auto& v : scene.vehicles) att = std::min(att, attenuation(s_next, v, scene));
  return att * action_reward(jerk, rp) * state_reward(s_next, scene, rp);
}

/// Value assigned to termination states: 0 when prohibited, otherwise the
/// state factor scaled by 1/(1-gamma) so horizon-end values match the scale
/// of an indefinitely continued unit reward.
inline double terminal_value(const PhysicalState& p, const Scene& scene, const RewardParams& rp) {
  if (is_prohibited(p, scene)) return 0.0;
  return state_reward(p, scene, rp) / (1.0 - rp.gamma);
}

}  // namespace mergeplan
