#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mergeplan {

/// Quantization parameters for the (time, accel, velocity, position) lattice.
///
/// All non-time axes derive their unit steps from the jerk step `dj` and the
/// time step `dt`, so that one planning step of constant jerk moves a state
/// exactly onto another lattice point.
struct GridSpec {
  double dt = 1.0;  ///< time step [s], > 0
  double dj = 1.0;  ///< jerk step [m/s^3], > 0
  int n_t = 1;      ///< time layers (indices 0..n_t)
  int n_j = 1;      ///< jerk levels per sign (actions -n_j..n_j)
  int n_g = 1;      ///< accel levels per sign (indices -n_g..n_g)
  int n_v = 1;      ///< velocity levels (indices 0..n_v)
  int n_l = 1;      ///< position levels (indices 0..n_l)
  int thin_k = 1;   ///< position thinning stride, >= 1 (1 = keep all)
};

/// Lattice coordinates of one state.
struct StateIndex {
  int i_t = 0;  ///< time layer, 0..n_t
  int i_g = 0;  ///< acceleration, -n_g..n_g
  int i_v = 0;  ///< velocity, 0..n_v
  int i_l = 0;  ///< position, 0..n_l

  friend bool operator==(const StateIndex&, const StateIndex&) = default;
};

/// Jerk action; physical jerk is i_j * dj.
struct ActionIndex {
  int i_j = 0;
};

/// SI-valued state.
struct PhysicalState {
  double t = 0.0;      ///< seconds
  double accel = 0.0;  ///< m/s^2
  double vel = 0.0;    ///< m/s
  double pos = 0.0;    ///< meters
};

enum class TransitionStatus {
  ok,            ///< in-bounds successor (position rounded to a kept index)
  out_accel,     ///< |i_g + i_j| > n_g: invalid action
  out_velocity,  ///< successor velocity index < 0 or > n_v: invalid action
  out_position,  ///< successor position index < 0: invalid action
  horizon_exit,  ///< position index > n_l before the final layer; `next` holds
                 ///< the raw (unthinned) successor for terminal scoring
  at_final_layer  ///< transition requested from the last time layer
};

struct TransitionResult {
  TransitionStatus status = TransitionStatus::ok;
  StateIndex next;  // valid for ok and horizon_exit

  bool ok() const { return status == TransitionStatus::ok; }
};

/// Per-layer inclusive index intervals bounding everything reachable from the
/// initial state. An empty layer is encoded as lo > hi.
struct LayerBounds {
  int g_lo = 0, g_hi = -1;
  int v_lo = 0, v_hi = -1;
  int l_lo = 0, l_hi = -1;  // kept position indices when thinning is active

  bool empty() const { return g_lo > g_hi || v_lo > v_hi || l_lo > l_hi; }

  friend bool operator==(const LayerBounds&, const LayerBounds&) = default;
};

struct ReachabilityBounds {
  std::vector<LayerBounds> layers;  // size n_t + 1

  const LayerBounds& at(int i_t) const { return layers.at(static_cast<size_t>(i_t)); }
};

/// Nearest integer with ties toward the smaller value.
inline long long nearest_index(double x) {
  return static_cast<long long>(std::ceil(x - 0.5));
}

/// The quantized state lattice: unit steps, index bounds, thinning, and the
/// exact integer transition arithmetic.
class Grid {
 public:
  static Grid build(const GridSpec& spec) {
    if (!(spec.dt > 0.0) || !(spec.dj > 0.0))
      throw std::invalid_argument("grid: dt and dj must be positive");
    if (spec.n_t < 1 || spec.n_j < 1 || spec.n_g < 1 || spec.n_v < 1 || spec.n_l < 1)
      throw std::invalid_argument("grid: all index counts must be >= 1");
    if (spec.thin_k < 1) throw std::invalid_argument("grid: thin_k must be >= 1");
    if (spec.thin_k > spec.n_l)
      throw std::invalid_argument("grid: thin_k exceeds position index range");
    return Grid(spec);
  }

  const GridSpec& spec() const { return spec_; }
  double dt() const { return spec_.dt; }
  double accel_unit() const { return unit_a_; }
  double velocity_unit() const { return unit_v_; }
  double position_unit() const { return unit_l_; }

  double jerk_at(int i_j) const { return i_j * spec_.dj; }
  double time_at(int i_t) const { return i_t * spec_.dt; }
  double accel_at(int i_g) const { return i_g * unit_a_; }
  double vel_at(int i_v) const { return i_v * unit_v_; }
  double pos_at(int i_l) const { return i_l * unit_l_; }

  double max_jerk() const { return spec_.n_j * spec_.dj; }
  double max_accel() const { return spec_.n_g * unit_a_; }
  double max_velocity() const { return spec_.n_v * unit_v_; }
  double max_position() const { return spec_.n_l * unit_l_; }

  /// Number of kept position indices under thinning.
  int kept_position_count() const { return kept_slots_; }
  /// Kept position index for a slot in [0, kept_position_count()).
  int kept_index(int slot) const { return slot * spec_.thin_k; }
  /// Slot of a kept position index.
  int slot_of(int i_l) const { return i_l / spec_.thin_k; }
  bool is_kept(int i_l) const { return i_l % spec_.thin_k == 0; }

  /// Nearest kept position index (ties toward the smaller index), clamped to
  /// the kept range.
  int round_to_kept(int i_l_raw) const {
    if (spec_.thin_k == 1) return i_l_raw;
    const int k = spec_.thin_k;
    int slot = static_cast<int>((2LL * i_l_raw + k - 1) / (2LL * k));
    if (slot >= kept_slots_) slot = kept_slots_ - 1;
    if (slot < 0) slot = 0;
    return slot * k;
  }

  bool in_bounds(const StateIndex& s) const {
    return s.i_t >= 0 && s.i_t <= spec_.n_t && s.i_g >= -spec_.n_g && s.i_g <= spec_.n_g &&
           s.i_v >= 0 && s.i_v <= spec_.n_v && s.i_l >= 0 && s.i_l <= spec_.n_l;
  }

  /// One step of the index-arithmetic state transition.
  TransitionResult transition(const StateIndex& s, ActionIndex a) const {
    TransitionResult r;
    if (s.i_t >= spec_.n_t) {
      r.status = TransitionStatus::at_final_layer;
      return r;
    }
    const int j = a.i_j;
    const int g2 = s.i_g + j;
    const int v2 = s.i_v + 2 * s.i_g + j;
    const int l2 = s.i_l + 3 * s.i_v + 3 * s.i_g + j;
    r.next = StateIndex{s.i_t + 1, g2, v2, l2};
    if (g2 < -spec_.n_g || g2 > spec_.n_g) {
      r.status = TransitionStatus::out_accel;
    } else if (v2 < 0 || v2 > spec_.n_v) {
      r.status = TransitionStatus::out_velocity;
    } else if (l2 < 0) {
      r.status = TransitionStatus::out_position;
    } else if (l2 > spec_.n_l) {
      r.status = TransitionStatus::horizon_exit;  // next keeps the raw index
    } else {
      r.status = TransitionStatus::ok;
      r.next.i_l = round_to_kept(l2);
    }
    return r;
  }

  /// Indices to SI values. Accepts raw out-of-range indices as well, which is
  /// what horizon-exit scoring needs.
  PhysicalState dequantize(const StateIndex& s) const {
    return PhysicalState{time_at(s.i_t), accel_at(s.i_g), vel_at(s.i_v), pos_at(s.i_l)};
  }

  /// Nearest lattice point (ties toward the smaller index). Throws
  /// std::out_of_range when `p` lies outside the physical ranges the grid
  /// covers.
  StateIndex quantize(const PhysicalState& p) const {
    if (p.t < 0.0 || p.t > spec_.n_t * spec_.dt)
      throw std::out_of_range("quantize: time outside grid range: " + std::to_string(p.t));
    if (p.accel < -max_accel() || p.accel > max_accel())
      throw std::out_of_range("quantize: accel outside grid range: " + std::to_string(p.accel));
    if (p.vel < 0.0 || p.vel > max_velocity())
      throw std::out_of_range("quantize: velocity outside grid range: " + std::to_string(p.vel));
    if (p.pos < 0.0 || p.pos > max_position())
      throw std::out_of_range("quantize: position outside grid range: " + std::to_string(p.pos));
    StateIndex s;
    s.i_t = static_cast<int>(nearest_index(p.t / spec_.dt));
    s.i_g = static_cast<int>(nearest_index(p.accel / unit_a_));
    s.i_v = static_cast<int>(nearest_index(p.vel / unit_v_));
    int slot = static_cast<int>(nearest_index(p.pos / (unit_l_ * spec_.thin_k)));
    if (slot >= kept_slots_) slot = kept_slots_ - 1;
    s.i_l = kept_index(slot);
    return s;
  }

  /// Tight per-layer index intervals containing every state reachable from
  /// `initial` under the bounded-jerk transition.
  ReachabilityBounds reachable_bounds(const StateIndex& initial) const {
    if (!in_bounds(initial)) throw std::out_of_range("reachable_bounds: initial out of bounds");
    const int gw = 2 * spec_.n_g + 1;
    const int vw = spec_.n_v + 1;
    // Reachable (g, v) cells with the hull of reachable positions per cell.
    struct Cell {
      bool live = false;
      int l_lo = 0, l_hi = 0;
    };
    std::vector<Cell> cur(static_cast<size_t>(gw) * vw), nxt(cur.size());
    auto cell = [&](std::vector<Cell>& buf, int g, int v) -> Cell& {
      return buf[static_cast<size_t>(g + spec_.n_g) * vw + v];
    };

    ReachabilityBounds rb;
    rb.layers.assign(static_cast<size_t>(spec_.n_t) + 1, LayerBounds{});
    cell(cur, initial.i_g, initial.i_v) = Cell{true, initial.i_l, initial.i_l};
    rb.layers[static_cast<size_t>(initial.i_t)] =
        LayerBounds{initial.i_g, initial.i_g, initial.i_v, initial.i_v, initial.i_l, initial.i_l};

    for (int t = initial.i_t; t < spec_.n_t; ++t) {
      for (auto& c : nxt) c.live = false;
      LayerBounds lb;
      for (int g = -spec_.n_g; g <= spec_.n_g; ++g) {
        for (int v = 0; v <= spec_.n_v; ++v) {
          const Cell& c = cell(cur, g, v);
          if (!c.live) continue;
          for (int j = -spec_.n_j; j <= spec_.n_j; ++j) {
            const int g2 = g + j;
            const int v2 = v + 2 * g + j;
            if (g2 < -spec_.n_g || g2 > spec_.n_g || v2 < 0 || v2 > spec_.n_v) continue;
            const int dl = 3 * v + 3 * g + j;
            int lo = c.l_lo + dl, hi = c.l_hi + dl;
            if (lo < 0) lo = 0;
            if (hi > spec_.n_l) hi = spec_.n_l;
            if (lo > hi) continue;  // every successor position left the grid
            lo = round_to_kept(lo);
            hi = round_to_kept(hi);
            Cell& d = cell(nxt, g2, v2);
            if (!d.live) {
              d = Cell{true, lo, hi};
            } else {
              d.l_lo = std::min(d.l_lo, lo);
              d.l_hi = std::max(d.l_hi, hi);
            }
          }
        }
      }
      for (int g = -spec_.n_g; g <= spec_.n_g; ++g) {
        for (int v = 0; v <= spec_.n_v; ++v) {
          const Cell& d = cell(nxt, g, v);
          if (!d.live) continue;
          if (lb.empty()) {
            lb = LayerBounds{g, g, v, v, d.l_lo, d.l_hi};
          } else {
            lb.g_lo = std::min(lb.g_lo, g);
            lb.g_hi = std::max(lb.g_hi, g);
            lb.v_lo = std::min(lb.v_lo, v);
            lb.v_hi = std::max(lb.v_hi, v);
            lb.l_lo = std::min(lb.l_lo, d.l_lo);
            lb.l_hi = std::max(lb.l_hi, d.l_hi);
          }
        }
      }
      rb.layers[static_cast<size_t>(t) + 1] = lb;
      cur.swap(nxt);
    }
    return rb;
  }

 private:
  explicit Grid(const GridSpec& spec)
      : spec_(spec),
        unit_a_(spec.dj * spec.dt),
        unit_v_(spec.dj * spec.dt * spec.dt / 2.0),
        unit_l_(spec.dj * spec.dt * spec.dt * spec.dt / 6.0),
        kept_slots_(spec.n_l / spec.thin_k + 1) {}

  GridSpec spec_;
  double unit_a_, unit_v_, unit_l_;
  int kept_slots_;
};

}  // namespace mergeplan
