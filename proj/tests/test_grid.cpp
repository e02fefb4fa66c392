#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mergeplan/grid.hpp"
#include "support/oracle.hpp"

using namespace mergeplan;
using testsupport::forward_reachable;

namespace {

GridSpec small_spec() {
  GridSpec sp;
  sp.dt = 1.0;
  sp.dj = 1.0;
  sp.n_t = 4;
  sp.n_j = 1;
  sp.n_g = 2;
  sp.n_v = 6;
  sp.n_l = 80;
  return sp;
}

}  // namespace

TEST_CASE("unit steps follow the jerk and time steps") {
  GridSpec sp = small_spec();
  const Grid g = Grid::build(sp);
  CHECK(g.accel_unit() == 1.0);
  CHECK(g.velocity_unit() == 0.5);
  CHECK(g.position_unit() == Catch::Approx(1.0 / 6.0).epsilon(0.0).margin(1e-18));

  sp.dt = 0.5;
  sp.dj = 2.0;
  const Grid g2 = Grid::build(sp);
  CHECK(g2.velocity_unit() == 0.25);
  CHECK(g2.accel_unit() == 1.0);
}

TEST_CASE("grid construction rejects invalid specs") {
  GridSpec sp = small_spec();
  sp.dt = 0.0;
  CHECK_THROWS_AS(Grid::build(sp), std::invalid_argument);
  sp = small_spec();
  sp.dj = -1.0;
  CHECK_THROWS_AS(Grid::build(sp), std::invalid_argument);
  sp = small_spec();
  sp.n_v = 0;
  CHECK_THROWS_AS(Grid::build(sp), std::invalid_argument);
  sp = small_spec();
  sp.thin_k = sp.n_l + 1;
  CHECK_THROWS_AS(Grid::build(sp), std::invalid_argument);
}

TEST_CASE("thin_k=1 keeps every position index") {
  const Grid g = Grid::build(small_spec());
  CHECK(g.kept_position_count() == g.spec().n_l + 1);
  for (int l = 0; l <= g.spec().n_l; ++l) {
    CHECK(g.is_kept(l));
    CHECK(g.round_to_kept(l) == l);
  }
}

TEST_CASE("transition matches the worked examples") {
  GridSpec sp = small_spec();
  sp.n_v = 8;
  const Grid g = Grid::build(sp);

  const TransitionResult rest = g.transition(StateIndex{0, 0, 0, 0}, ActionIndex{0});
  REQUIRE(rest.ok());
  CHECK(rest.next == StateIndex{1, 0, 0, 0});

  const TransitionResult up = g.transition(StateIndex{0, 1, 2, 0}, ActionIndex{1});
  REQUIRE(up.ok());
  CHECK(up.next == StateIndex{1, 2, 5, 10});

  const TransitionResult down = g.transition(StateIndex{0, 0, 1, 0}, ActionIndex{-1});
  REQUIRE(down.ok());
  CHECK(down.next == StateIndex{1, -1, 0, 2});

  const TransitionResult blocked =
      g.transition(StateIndex{0, -sp.n_g, 0, 0}, ActionIndex{-1});
  CHECK(blocked.status == TransitionStatus::out_accel);
}

namespace {

/// Exact rational arithmetic for the kinematics oracle.
struct Frac {
  long long n = 0, d = 1;

  static long long gcd(long long a, long long b) { return b == 0 ? (a < 0 ? -a : a) : gcd(b, a % b); }

  static Frac make(long long n, long long d) {
    if (n == 0) return Frac{0, 1};
    if (d < 0) {
      n = -n;
      d = -d;
    }
    const long long g = gcd(n, d);
    return Frac{n / g, d / g};
  }
  friend Frac operator+(Frac a, Frac b) { return make(a.n * b.d + b.n * a.d, a.d * b.d); }
  friend Frac operator*(Frac a, Frac b) { return make(a.n * b.n, a.d * b.d); }
  friend Frac operator/(Frac a, Frac b) { return make(a.n * b.d, a.d * b.n); }
  friend bool operator==(Frac a, Frac b) { return a.n == b.n && a.d == b.d; }
  bool is_integer(long long v) const { return d == 1 && n == v; }
};

}  // namespace

TEST_CASE("transition agrees exactly with continuous kinematics") {
  // exact rational evaluation: integrate the motion over one step, divide by
  // the unit steps, and require integer indices identical to the transition
  struct Step {
    long long dt_n, dt_d, dj_n, dj_d;
  };
  for (const Step st : {Step{1, 2, 1, 1}, Step{1, 1, 1, 2}, Step{2, 1, 3, 1}, Step{3, 10, 7, 5}}) {
    const Frac dt = Frac::make(st.dt_n, st.dt_d);
    const Frac dj = Frac::make(st.dj_n, st.dj_d);
    GridSpec sp = small_spec();
    sp.dt = static_cast<double>(st.dt_n) / st.dt_d;
    sp.dj = static_cast<double>(st.dj_n) / st.dj_d;
    sp.n_v = 8;
    sp.n_l = 400;
    const Grid g = Grid::build(sp);

    const Frac unit_a = dj * dt;
    const Frac unit_v = dj * dt * dt / Frac{2, 1};
    const Frac unit_l = dj * dt * dt * dt / Frac{6, 1};

    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> dg(-sp.n_g, sp.n_g), dv(0, sp.n_v), dl(0, sp.n_l),
        djx(-sp.n_j, sp.n_j), dtx(0, sp.n_t - 1);
    for (int it = 0; it < 300; ++it) {
      const StateIndex s{dtx(rng), dg(rng), dv(rng), dl(rng)};
      const ActionIndex a{djx(rng)};
      const TransitionResult tr = g.transition(s, a);
      if (!tr.ok()) continue;

      const Frac accel = Frac{s.i_g, 1} * unit_a;
      const Frac vel = Frac{s.i_v, 1} * unit_v;
      const Frac pos = Frac{s.i_l, 1} * unit_l;
      const Frac jerk = Frac{a.i_j, 1} * dj;

      const Frac accel2 = accel + jerk * dt;
      const Frac vel2 = vel + accel * dt + jerk * dt * dt / Frac{2, 1};
      const Frac pos2 =
          pos + vel * dt + accel * dt * dt / Frac{2, 1} + jerk * dt * dt * dt / Frac{6, 1};

      CHECK((accel2 / unit_a).is_integer(tr.next.i_g));
      CHECK((vel2 / unit_v).is_integer(tr.next.i_v));
      CHECK((pos2 / unit_l).is_integer(tr.next.i_l));

      // and the floating-point view stays within rounding of the same values
      const PhysicalState q = g.dequantize(tr.next);
      const PhysicalState p = g.dequantize(s);
      const double jerk_fp = g.jerk_at(a.i_j);
      CHECK(q.accel == Catch::Approx(p.accel + jerk_fp * sp.dt).margin(1e-12));
      CHECK(q.vel ==
            Catch::Approx(p.vel + p.accel * sp.dt + jerk_fp * sp.dt * sp.dt / 2.0).margin(1e-12));
      CHECK(q.pos == Catch::Approx(p.pos + p.vel * sp.dt + p.accel * sp.dt * sp.dt / 2.0 +
                                   jerk_fp * sp.dt * sp.dt * sp.dt / 6.0)
                         .margin(1e-12));
    }
  }
}

TEST_CASE("transition never returns an out-of-bounds ok state") {
  GridSpec sp = small_spec();
  sp.n_l = 30;  // small enough that overflow happens often
  const Grid g = Grid::build(sp);
  for (int t = 0; t < sp.n_t; ++t)
    for (int gg = -sp.n_g; gg <= sp.n_g; ++gg)
      for (int v = 0; v <= sp.n_v; ++v)
        for (int l = 0; l <= sp.n_l; ++l)
          for (int j = -sp.n_j; j <= sp.n_j; ++j) {
            const TransitionResult tr = g.transition(StateIndex{t, gg, v, l}, ActionIndex{j});
            if (tr.ok()) {
              CHECK(g.in_bounds(tr.next));
            } else if (tr.status == TransitionStatus::horizon_exit) {
              CHECK(tr.next.i_l > sp.n_l);
            }
          }
}

TEST_CASE("dequantize evaluates the index products") {
  const Grid g = Grid::build(small_spec());
  const PhysicalState origin = g.dequantize(StateIndex{0, 0, 0, 0});
  CHECK(origin.t == 0.0);
  CHECK(origin.accel == 0.0);
  CHECK(origin.vel == 0.0);
  CHECK(origin.pos == 0.0);

  const PhysicalState p = g.dequantize(StateIndex{2, 1, 3, 4});
  CHECK(p.t == 2.0);
  CHECK(p.accel == 1.0);
  CHECK(p.vel == 1.5);
  CHECK(p.pos == Catch::Approx(2.0 / 3.0).epsilon(0.0).margin(1e-15));

  GridSpec sp = small_spec();
  sp.dt = 0.5;
  sp.dj = 2.0;
  const Grid g2 = Grid::build(sp);
  CHECK(g2.dequantize(StateIndex{0, 0, 4, 0}).vel == 1.0);
}

TEST_CASE("quantize inverts dequantize on lattice points") {
  GridSpec sp = small_spec();
  sp.thin_k = 1;
  const Grid g = Grid::build(sp);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dg(-sp.n_g, sp.n_g), dv(0, sp.n_v), dl(0, sp.n_l),
      dt(0, sp.n_t);
  for (int it = 0; it < 300; ++it) {
    const StateIndex s{dt(rng), dg(rng), dv(rng), dl(rng)};
    CHECK(g.quantize(g.dequantize(s)) == s);
  }
}

TEST_CASE("quantize rounds to the nearest index, ties downward") {
  const Grid g = Grid::build(small_spec());
  PhysicalState p;
  p.vel = 1.6;  // 3.2 velocity units
  CHECK(g.quantize(p).i_v == 3);
  p.vel = 1.25;  // exactly half way between indices 2 and 3
  CHECK(g.quantize(p).i_v == 2);
  p.vel = 1.3;
  CHECK(g.quantize(p).i_v == 3);
}

TEST_CASE("quantize rejects states outside the covered ranges") {
  const Grid g = Grid::build(small_spec());
  PhysicalState p;
  p.vel = g.max_velocity() + 1e-9;
  CHECK_THROWS_AS(g.quantize(p), std::out_of_range);
  p = PhysicalState{};
  p.vel = -1e-9;
  CHECK_THROWS_AS(g.quantize(p), std::out_of_range);
  p = PhysicalState{};
  p.accel = g.max_accel() + 0.1;
  CHECK_THROWS_AS(g.quantize(p), std::out_of_range);
  p = PhysicalState{};
  p.pos = g.max_position() + 0.1;
  CHECK_THROWS_AS(g.quantize(p), std::out_of_range);
}

TEST_CASE("reachable bounds start as the initial singleton") {
  const Grid g = Grid::build(small_spec());
  const StateIndex init{0, 1, 3, 2};
  const ReachabilityBounds rb = g.reachable_bounds(init);
  const LayerBounds& l0 = rb.at(0);
  CHECK(l0.g_lo == 1);
  CHECK(l0.g_hi == 1);
  CHECK(l0.v_lo == 3);
  CHECK(l0.v_hi == 3);
  CHECK(l0.l_lo == 2);
  CHECK(l0.l_hi == 2);
}

TEST_CASE("one step from rest spans one velocity index per jerk level") {
  GridSpec sp = small_spec();
  sp.n_j = 1;
  const Grid g = Grid::build(sp);
  const ReachabilityBounds rb = g.reachable_bounds(StateIndex{0, 0, 0, 0});
  const LayerBounds& l1 = rb.at(1);
  CHECK(l1.v_lo == 0);  // j=-1 would give i_v=-1, which is invalid
  CHECK(l1.v_hi == 1);
}

TEST_CASE("brute-force reachable states stay inside the bounds") {
  std::mt19937_64 rng(23);
  for (int inst = 0; inst < 10; ++inst) {
    GridSpec sp;
    sp.n_t = 3 + static_cast<int>(rng() % 2);
    sp.n_j = 1 + static_cast<int>(rng() % 2);
    sp.n_g = 1 + static_cast<int>(rng() % 2);
    sp.n_v = 4 + static_cast<int>(rng() % 4);
    sp.n_l = 30 + static_cast<int>(rng() % 60);
    sp.thin_k = 1 + static_cast<int>(rng() % 3);
    if (sp.thin_k > sp.n_l) sp.thin_k = 1;
    const Grid g = Grid::build(sp);
    const StateIndex init{0, 0, static_cast<int>(rng() % (sp.n_v + 1)),
                          g.round_to_kept(static_cast<int>(rng() % (sp.n_l + 1)))};
    const ReachabilityBounds rb = g.reachable_bounds(init);
    for (const auto& s : forward_reachable(g, init)) {
      const LayerBounds& b = rb.at(s[0]);
      REQUIRE(!b.empty());
      CHECK(s[1] >= b.g_lo);
      CHECK(s[1] <= b.g_hi);
      CHECK(s[2] >= b.v_lo);
      CHECK(s[2] <= b.v_hi);
      CHECK(s[3] >= b.l_lo);
      CHECK(s[3] <= b.l_hi);
    }
  }
}

TEST_CASE("thinning rounds to kept indices, ties toward the smaller") {
  GridSpec sp = small_spec();
  sp.n_l = 10;
  sp.thin_k = 2;
  const Grid g = Grid::build(sp);
  CHECK(g.kept_position_count() == 6);  // 0,2,4,6,8,10
  CHECK(g.round_to_kept(0) == 0);
  CHECK(g.round_to_kept(1) == 0);  // tie between 0 and 2
  CHECK(g.round_to_kept(2) == 2);
  CHECK(g.round_to_kept(3) == 2);  // tie between 2 and 4
  CHECK(g.round_to_kept(9) == 8);  // tie between 8 and 10

  sp.thin_k = 4;
  const Grid g4 = Grid::build(sp);
  CHECK(g4.kept_position_count() == 3);  // 0,4,8
  CHECK(g4.round_to_kept(10) == 8);      // clamped to the top kept index
  CHECK(g4.round_to_kept(2) == 0);       // tie toward the smaller
  CHECK(g4.round_to_kept(3) == 4);
}

TEST_CASE("per-step thinning error is bounded by half a stride") {
  GridSpec sp = small_spec();
  sp.n_l = 240;  // multiple of every stride below, so no top-edge clamping
  for (const int k : {2, 3, 4, 5}) {
    sp.thin_k = k;
    const Grid g = Grid::build(sp);
    for (int raw = 0; raw <= sp.n_l; ++raw) {
      const int kept = g.round_to_kept(raw);
      CHECK(std::abs(kept - raw) * g.position_unit() <=
            k * g.position_unit() / 2.0 + 1e-15);
    }
  }
}
