#pragma once

#include <algorithm>
#include <barrier>
#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "mergeplan/grid.hpp"
#include "mergeplan/reward.hpp"
#include "mergeplan/scene.hpp"

namespace mergeplan {

struct SolveOptions {
  bool prune = true;  ///< restrict computation to cells reachable from the initial state
  int threads = 0;    ///< worker threads; 0 = hardware concurrency
};

namespace detail {
constexpr int8_t kNoAction = std::numeric_limits<int8_t>::min();

inline size_t cell_offset(const LayerBounds& b, int thin_k, int wv, int wl, const StateIndex& s) {
  const size_t gi = static_cast<size_t>(s.i_g - b.g_lo);
  const size_t vi = static_cast<size_t>(s.i_v - b.v_lo);
  const size_t si = static_cast<size_t>(s.i_l / thin_k - b.l_lo / thin_k);
  return (gi * wv + vi) * wl + si;
}
}  // namespace detail

/// State values per lattice cell, stored per time layer over the swept index
/// windows (reachability bounds, or the full grid when pruning is off).
class ValueTable {
 public:
  struct Layer {
    LayerBounds bounds;
    int wv = 0, wl = 0;  // velocity width, kept-position width
    std::vector<double> data;
  };

  int thin_k = 1;
  std::vector<Layer> layers;

  bool contains(const StateIndex& s) const {
    if (s.i_t < 0 || s.i_t >= static_cast<int>(layers.size())) return false;
    const Layer& L = layers[static_cast<size_t>(s.i_t)];
    const LayerBounds& b = L.bounds;
    return !b.empty() && s.i_g >= b.g_lo && s.i_g <= b.g_hi && s.i_v >= b.v_lo &&
           s.i_v <= b.v_hi && s.i_l >= b.l_lo && s.i_l <= b.l_hi && s.i_l % thin_k == 0;
  }

  double at(const StateIndex& s) const {
    if (!contains(s)) throw std::out_of_range("value table: cell outside swept bounds");
    const Layer& L = layers[static_cast<size_t>(s.i_t)];
    return L.data[detail::cell_offset(L.bounds, thin_k, L.wv, L.wl, s)];
  }

  size_t cell_count() const {
    size_t n = 0;
    for (const auto& L : layers) n += L.data.size();
    return n;
  }

  friend bool operator==(const ValueTable& a, const ValueTable& b) {
    if (a.thin_k != b.thin_k || a.layers.size() != b.layers.size()) return false;
    for (size_t i = 0; i < a.layers.size(); ++i) {
      if (!(a.layers[i].bounds == b.layers[i].bounds) || a.layers[i].data != b.layers[i].data)
        return false;
    }
    return true;
  }
};

/// Greedy argmax action per non-terminal cell; cells with no live action
/// store no entry.
class PolicyTable {
 public:
  struct Layer {
    LayerBounds bounds;
    int wv = 0, wl = 0;
    std::vector<int8_t> data;
  };

  int thin_k = 1;
  std::vector<Layer> layers;

  std::optional<int> action_at(const StateIndex& s) const {
    if (s.i_t < 0 || s.i_t >= static_cast<int>(layers.size()))
      throw std::out_of_range("policy table: layer outside range");
    const Layer& L = layers[static_cast<size_t>(s.i_t)];
    const LayerBounds& b = L.bounds;
    if (b.empty() || s.i_g < b.g_lo || s.i_g > b.g_hi || s.i_v < b.v_lo || s.i_v > b.v_hi ||
        s.i_l < b.l_lo || s.i_l > b.l_hi || s.i_l % thin_k != 0)
      throw std::out_of_range("policy table: cell outside swept bounds");
    const int8_t a = L.data[detail::cell_offset(b, thin_k, L.wv, L.wl, s)];
    if (a == detail::kNoAction) return std::nullopt;
    return static_cast<int>(a);
  }
};

struct SolveResult {
  ValueTable values;
  PolicyTable policy;
};

/// Planned state/jerk sequence from an initial cell to the time horizon or
/// the end of the position range.
struct Plan {
  std::vector<PhysicalState> states;  // states.size() == jerks.size() + 1 when feasible
  std::vector<double> jerks;
  bool feasible = false;
  bool horizon_exit = false;
  double solve_ms = 0.0;  // filled by plan_cycle
};

namespace detail {

inline ReachabilityBounds full_bounds(const Grid& grid) {
  const GridSpec& sp = grid.spec();
  ReachabilityBounds rb;
  rb.layers.assign(static_cast<size_t>(sp.n_t) + 1,
                   LayerBounds{-sp.n_g, sp.n_g, 0, sp.n_v, 0,
                               grid.kept_index(grid.kept_position_count() - 1)});
  return rb;
}

/// Backward layer sweep over the bounded lattice. All reward and prohibition
/// quantities are precomputed by calling the same scene/reward functions the
/// per-state formulation uses, so cached and direct evaluation agree bitwise.
class Sweep {
 public:
  Sweep(const Grid& grid, const Scene& scene, const RewardParams& rp,
        const ReachabilityBounds& rb)
      : grid_(grid), scene_(scene), rp_(rp), rb_(rb), sp_(grid.spec()) {
    const int slots = grid_.kept_position_count();
    vm_.resize(static_cast<size_t>(slots));
    seg_.resize(static_cast<size_t>(slots));
    int runs = 0;
    for (int s = 0; s < slots; ++s) {
      vm_[static_cast<size_t>(s)] = speed_limit(scene_.limit, grid_.pos_at(grid_.kept_index(s)));
      if (s == 0 || vm_[static_cast<size_t>(s)] != vm_[static_cast<size_t>(s - 1)]) ++runs;
      seg_[static_cast<size_t>(s)] = runs - 1;
    }
    vel_.resize(static_cast<size_t>(sp_.n_v) + 1);
    for (int v = 0; v <= sp_.n_v; ++v) vel_[static_cast<size_t>(v)] = grid_.vel_at(v);
    exp_a_.resize(static_cast<size_t>(2 * sp_.n_g) + 1);
    for (int g = -sp_.n_g; g <= sp_.n_g; ++g)
      exp_a_[static_cast<size_t>(g + sp_.n_g)] =
          std::exp(-detail::sq(grid_.accel_at(g) / rp_.max_accel));
    const size_t vw = static_cast<size_t>(sp_.n_v) + 1;
    exp_v_.resize(static_cast<size_t>(runs) * vw);
    int run = -1;
    for (int s = 0; s < slots; ++s) {
      if (s > 0 && vm_[static_cast<size_t>(s)] == vm_[static_cast<size_t>(s - 1)]) continue;
      ++run;
      const double vm = vm_[static_cast<size_t>(s)];
      for (int v = 0; v <= sp_.n_v; ++v)
        exp_v_[static_cast<size_t>(run) * vw + static_cast<size_t>(v)] =
            std::exp(-detail::sq((vel_[static_cast<size_t>(v)] - vm) / vm));
    }
    ra_.resize(static_cast<size_t>(2 * sp_.n_j) + 1);
    for (int j = -sp_.n_j; j <= sp_.n_j; ++j)
      ra_[static_cast<size_t>(j + sp_.n_j)] = action_reward(grid_.jerk_at(j), rp_);
    action_order_.push_back(0);
    for (int m = 1; m <= sp_.n_j; ++m) {
      action_order_.push_back(-m);
      action_order_.push_back(m);
    }
    build_layer_ctx();
  }

  SolveResult run(int threads) {
    SolveResult res;
    res.values.thin_k = sp_.thin_k;
    res.policy.thin_k = sp_.thin_k;
    res.values.layers.resize(static_cast<size_t>(sp_.n_t) + 1);
    res.policy.layers.resize(static_cast<size_t>(sp_.n_t) + 1);
    for (int k = 0; k <= sp_.n_t; ++k) {
      const LayerBounds& b = rb_.at(k);
      auto& vl = res.values.layers[static_cast<size_t>(k)];
      auto& pl = res.policy.layers[static_cast<size_t>(k)];
      vl.bounds = b;
      pl.bounds = b;
      if (b.empty()) continue;
      vl.wv = b.v_hi - b.v_lo + 1;
      vl.wl = (b.l_hi - b.l_lo) / sp_.thin_k + 1;
      pl.wv = vl.wv;
      pl.wl = vl.wl;
      const size_t n = static_cast<size_t>(b.g_hi - b.g_lo + 1) * vl.wv * vl.wl;
      vl.data.assign(n, 0.0);
      pl.data.assign(n, kNoAction);
    }

    if (threads <= 1) {
      for (int k = sp_.n_t; k >= 0; --k) {
        const int rows = row_count(res.values, k);
        sweep_rows(res, k, 0, rows);
      }
    } else {
      std::barrier sync(threads);
      std::vector<std::jthread> pool;
      pool.reserve(static_cast<size_t>(threads));
      for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
          for (int k = sp_.n_t; k >= 0; --k) {
            const int rows = row_count(res.values, k);
            const int r0 = static_cast<int>(static_cast<long long>(rows) * w / threads);
            const int r1 = static_cast<int>(static_cast<long long>(rows) * (w + 1) / threads);
            sweep_rows(res, k, r0, r1);
            sync.arrive_and_wait();
          }
        });
      }
    }
    return res;
  }

 private:
  struct LayerCtx {
    int slot_lo = 0;
    std::vector<uint8_t> band;    // inside some vehicle's hard band
    std::vector<double> att_min;  // min attenuation over vehicles
  };

  void build_layer_ctx() {
    ctx_.resize(static_cast<size_t>(sp_.n_t) + 1);
    for (int k = 0; k <= sp_.n_t; ++k) {
      const LayerBounds& b = rb_.at(k);
      LayerCtx& c = ctx_[static_cast<size_t>(k)];
      if (b.empty()) continue;
      const double t = grid_.time_at(k);
      const int slot_lo = b.l_lo / sp_.thin_k;
      const int wl = (b.l_hi - b.l_lo) / sp_.thin_k + 1;
      c.slot_lo = slot_lo;
      c.band.assign(static_cast<size_t>(wl), 0);
      c.att_min.assign(static_cast<size_t>(wl), 1.0);
      std::vector<CorridorBounds> cbs;
      cbs.reserve(scene_.vehicles.size());
      for (const auto& v : scene_.vehicles) cbs.push_back(corridor(v, t, scene_.margins));
      for (int s = 0; s < wl; ++s) {
        PhysicalState p;
        p.t = t;
        p.pos = grid_.pos_at(grid_.kept_index(slot_lo + s));
        for (size_t i = 0; i < scene_.vehicles.size(); ++i) {
          if (cbs[i].l_pr <= p.pos && p.pos <= cbs[i].l_pf) c.band[static_cast<size_t>(s)] = 1;
          c.att_min[static_cast<size_t>(s)] = std::min(
              c.att_min[static_cast<size_t>(s)], attenuation(p, scene_.vehicles[i], scene_));
        }
      }
    }
  }

  static int row_count(const ValueTable& vt, int k) {
    const auto& L = vt.layers[static_cast<size_t>(k)];
    if (L.bounds.empty()) return 0;
    return (L.bounds.g_hi - L.bounds.g_lo + 1) * L.wv;
  }

  void sweep_rows(SolveResult& res, int k, int r0, int r1) {
    auto& vl = res.values.layers[static_cast<size_t>(k)];
    auto& pl = res.policy.layers[static_cast<size_t>(k)];
    if (vl.bounds.empty() || r0 >= r1) return;
    const LayerBounds& b = vl.bounds;
    const LayerCtx& own = ctx_[static_cast<size_t>(k)];
    const double* vm_own = vm_.data() + own.slot_lo;
    const size_t vw = static_cast<size_t>(sp_.n_v) + 1;
    const double one_minus_gamma = 1.0 - rp_.gamma;
    const int thin = sp_.thin_k;

    if (k == sp_.n_t) {
      // horizon-end layer: terminal values only
      for (int row = r0; row < r1; ++row) {
        const int g = b.g_lo + row / vl.wv;
        const int v = b.v_lo + row % vl.wv;
        const double ea = exp_a_[static_cast<size_t>(g + sp_.n_g)];
        const double vel = vel_[static_cast<size_t>(v)];
        double* out = vl.data.data() + static_cast<size_t>(row) * vl.wl;
        for (int s = 0; s < vl.wl; ++s) {
          if (own.band[static_cast<size_t>(s)] || vel > vm_own[s]) {
            out[s] = 0.0;
            continue;
          }
          const int seg = seg_[static_cast<size_t>(own.slot_lo + s)];
          const double ev = exp_v_[static_cast<size_t>(seg) * vw + static_cast<size_t>(v)];
          out[s] = (ea * ev) / one_minus_gamma;
        }
      }
      return;
    }

    const auto& nvl = res.values.layers[static_cast<size_t>(k) + 1];
    const LayerBounds& nb = nvl.bounds;
    const LayerCtx& nc = ctx_[static_cast<size_t>(k) + 1];
    const double gamma = rp_.gamma;
    const int n_actions = static_cast<int>(action_order_.size());

    struct ActionCand {
      int j;
      int v2;                // successor velocity index
      int dl;                // raw position index shift
      double ra;
      double ea2;            // accel factor of the successor
      const double* vrow;    // successor value row, null when pruned out
    };
    std::vector<ActionCand> cands(static_cast<size_t>(n_actions));

    for (int row = r0; row < r1; ++row) {
      const int g = b.g_lo + row / vl.wv;
      const int v = b.v_lo + row % vl.wv;
      const double vel = vel_[static_cast<size_t>(v)];
      double* out = vl.data.data() + static_cast<size_t>(row) * vl.wl;
      int8_t* pout = pl.data.data() + static_cast<size_t>(row) * vl.wl;

      int ncand = 0;
      for (int ai = 0; ai < n_actions; ++ai) {
        const int j = action_order_[static_cast<size_t>(ai)];
        const int g2 = g + j;
        if (g2 < -sp_.n_g || g2 > sp_.n_g) continue;
        const int v2 = v + 2 * g + j;
        if (v2 < 0 || v2 > sp_.n_v) continue;
        ActionCand cand;
        cand.j = j;
        cand.v2 = v2;
        cand.dl = 3 * v + 3 * g + j;
        cand.ra = ra_[static_cast<size_t>(j + sp_.n_j)];
        cand.ea2 = exp_a_[static_cast<size_t>(g2 + sp_.n_g)];
        cand.vrow = nullptr;
        if (!nb.empty() && g2 >= nb.g_lo && g2 <= nb.g_hi && v2 >= nb.v_lo && v2 <= nb.v_hi) {
          cand.vrow = nvl.data.data() +
                      (static_cast<size_t>(g2 - nb.g_lo) * nvl.wv + static_cast<size_t>(v2 - nb.v_lo)) *
                          nvl.wl;
        }
        cands[static_cast<size_t>(ncand++)] = cand;
      }

      for (int s = 0; s < vl.wl; ++s) {
        if (own.band[static_cast<size_t>(s)] || vel > vm_own[s]) {
          out[s] = 0.0;
          pout[s] = kNoAction;
          continue;
        }
        const int l = grid_.kept_index(own.slot_lo + s);
        double best = 0.0;
        int8_t best_act = kNoAction;
        for (int ci = 0; ci < ncand; ++ci) {
          const ActionCand& cand = cands[static_cast<size_t>(ci)];
          const int l2raw = l + cand.dl;
          if (l2raw < 0) continue;
          double q;
          if (l2raw > sp_.n_l) {
            q = exit_q(k, g, v, l, cand.j);
            if (q < 0.0) continue;
          } else {
            if (cand.vrow == nullptr) continue;  // pruned out of the next layer
            const int l2 = grid_.round_to_kept(l2raw);
            if (l2 < nb.l_lo || l2 > nb.l_hi) continue;
            const int s2 = l2 / thin - nc.slot_lo;
            const double vn = cand.vrow[s2];
            if (vn == 0.0) {
              q = 0.0;
            } else {
              const int seg = seg_[static_cast<size_t>(nc.slot_lo + s2)];
              const double r =
                  (nc.att_min[static_cast<size_t>(s2)] * cand.ra) *
                  (cand.ea2 *
                   exp_v_[static_cast<size_t>(seg) * vw + static_cast<size_t>(cand.v2)]);
              q = r + gamma * vn;
            }
          }
          if (q > best) {
            best = q;
            best_act = static_cast<int8_t>(cand.j);
          }
        }
        out[s] = best;
        pout[s] = best > 0.0 ? best_act : kNoAction;
      }
    }
  }

  /// Q value of an action that leaves the position range before the time
  /// horizon; negative when the exit is unsafe and the action is invalid.
  double exit_q(int k, int g, int v, int l, int j) const {
    const int g2 = g + j;
    const int v2 = v + 2 * g + j;
    const int l2raw = l + 3 * v + 3 * g + j;
    const PhysicalState cur = grid_.dequantize(StateIndex{k, g, v, l});
    const PhysicalState exit_state = grid_.dequantize(StateIndex{k + 1, g2, v2, l2raw});
    if (segment_crosses_hard_band(cur, exit_state, scene_)) return -1.0;
    const double tv = terminal_value(exit_state, scene_, rp_);
    const double r = transition_reward(cur, grid_.jerk_at(j), exit_state, tv, scene_, rp_);
    return r + rp_.gamma * tv;
  }

  const Grid& grid_;
  const Scene& scene_;
  const RewardParams& rp_;
  const ReachabilityBounds& rb_;
  GridSpec sp_;

  std::vector<double> vm_;    // speed limit per kept slot
  std::vector<int> seg_;      // constant-limit run id per kept slot
  std::vector<double> vel_;   // velocity per index
  std::vector<double> exp_a_; // accel factor per accel index
  std::vector<double> exp_v_; // velocity factor per (run, velocity index)
  std::vector<double> ra_;    // action factor per jerk index
  std::vector<int> action_order_;
  std::vector<LayerCtx> ctx_;
};

}  // namespace detail

/// Backward value computation over the lattice: terminal values at the
/// horizon and at prohibited cells, greedy one-step lookahead everywhere
/// else, swept from the last layer to the first.
inline SolveResult solve(const Grid& grid, const Scene& scene, const RewardParams& rp,
                         const StateIndex& initial, const SolveOptions& opts = {}) {
  scene.validate();
  if (!grid.in_bounds(initial)) throw std::invalid_argument("solve: initial state out of bounds");
  if (!grid.is_kept(initial.i_l))
    throw std::invalid_argument("solve: initial position index not on the kept lattice");
  if (is_prohibited(grid.dequantize(initial), scene))
    throw std::invalid_argument("solve: initial state is prohibited");
  const ReachabilityBounds rb =
      opts.prune ? grid.reachable_bounds(initial) : detail::full_bounds(grid);
  int threads = opts.threads;
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  detail::Sweep sweep(grid, scene, rp, rb);
  return sweep.run(threads);
}

/// Follows the stored policy from the initial cell. Infeasible when the
/// initial cell has value 0; the returned plan then carries no states.
inline Plan extract_plan(const SolveResult& tables, const Grid& grid, const Scene& scene,
                         const StateIndex& initial) {
  Plan plan;
  if (!tables.values.contains(initial))
    throw std::invalid_argument("extract_plan: initial cell outside solved bounds");
  if (tables.values.at(initial) == 0.0) {
    plan.feasible = false;
    return plan;
  }
  plan.feasible = true;
  StateIndex s = initial;
  plan.states.push_back(grid.dequantize(s));
  while (s.i_t < grid.spec().n_t) {
    const auto act = tables.policy.action_at(s);
    if (!act.has_value())
      throw std::logic_error("extract_plan: live cell without stored action");
    const TransitionResult tr = grid.transition(s, ActionIndex{*act});
    plan.jerks.push_back(grid.jerk_at(*act));
    if (tr.status == TransitionStatus::horizon_exit) {
      plan.states.push_back(grid.dequantize(tr.next));
      plan.horizon_exit = true;
      break;
    }
    if (tr.status != TransitionStatus::ok)
      throw std::logic_error("extract_plan: stored action leaves the grid");
    s = tr.next;
    plan.states.push_back(grid.dequantize(s));
  }
  for (const auto& p : plan.states) {
    if (is_prohibited(p, scene)) throw std::logic_error("extract_plan: prohibited state in plan");
  }
  return plan;
}

/// One replanning cycle: quantize the ego state onto the lattice (plan time
/// becomes layer 0), solve, and extract the greedy plan. Reports the
/// wall-clock duration of the solve + extraction.
inline Plan plan_cycle(const Grid& grid, const Scene& scene, const RewardParams& rp,
                       const PhysicalState& ego, const SolveOptions& opts = {}) {
  PhysicalState rel = ego;
  rel.t = 0.0;
  const StateIndex initial = grid.quantize(rel);
  const auto t0 = std::chrono::steady_clock::now();
  const SolveResult tables = solve(grid, scene, rp, initial, opts);
  Plan plan = extract_plan(tables, grid, scene, initial);
  const auto t1 = std::chrono::steady_clock::now();
  plan.solve_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return plan;
}

}  // namespace mergeplan
