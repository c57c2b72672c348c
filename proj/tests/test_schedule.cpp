#include <doctest.h>

#include <cmath>

#include "asyndiff/rng.hpp"
#include "asyndiff/schedule.hpp"

using namespace asyndiff;

namespace {

// Independent closed-form shift for the quadratic family, derived by
// solving f(i0-a) - f(T-a) = t0 with f(i) = T - i^2/T by hand.
ShiftSolution quadratic_shift_oracle(double T, double i0, double t0) {
  const double a = (T + i0) / 2.0 - T * t0 / (2.0 * (T - i0));
  const double b = -(T - (T - a) * (T - a) / T);
  return {a, b};
}

ScheduleFamily quad(double T = 50.0) {
  return {ScheduleKind::Quadratic, T};
}

const ScheduleKind kConcaveKinds[] = {
    ScheduleKind::Quadratic, ScheduleKind::PiecewiseLinear,
    ScheduleKind::Exponential, ScheduleKind::ExtremeClamp};

}  // namespace

TEST_CASE("schedule formula bindings") {
  const double T = 50.0;
  CHECK(ScheduleFamily{ScheduleKind::Linear, T}.eval(0.0) == doctest::Approx(50.0));
  CHECK(quad(T).eval(25.0) == doctest::Approx(37.5));
  CHECK(ScheduleFamily{ScheduleKind::PiecewiseLinear, T}.eval(25.0) ==
        doctest::Approx(37.5));
  CHECK(ScheduleFamily{ScheduleKind::Exponential, T}.eval(25.0) ==
        doctest::Approx(50.0 / (M_E - 1.0) * (M_E - std::exp(0.5))));
  CHECK(ScheduleFamily{ScheduleKind::Exponential, T}.eval(25.0) ==
        doctest::Approx(31.123).epsilon(1e-3));
  CHECK(ScheduleFamily{ScheduleKind::ExtremeClamp, T}.eval(10.0) == 50.0);
  CHECK(ScheduleFamily{ScheduleKind::ExtremeClamp, T}.eval(40.0) == 20.0);
}

TEST_CASE("schedule boundary conditions and shape invariants") {
  const double T = 50.0;
  std::vector<ScheduleFamily> families;
  for (ScheduleKind k : kConcaveKinds) families.push_back({k, T});
  families.push_back({ScheduleKind::Linear, T});
  for (double omega : {0.1, 0.4, 0.9})
    families.push_back(
        {ScheduleKind::Reweighted, T, ScheduleKind::ExtremeClamp, omega});

  for (const auto& f : families) {
    CAPTURE(to_string(f.kind));
    CHECK(std::abs(f.eval(0.0) - T) <= 1e-9);
    CHECK(std::abs(f.eval(T)) <= 1e-9);
    // nonincreasing on a 1000-point grid
    double prev = f.eval(0.0);
    for (int k = 1; k <= 1000; ++k) {
      const double cur = f.eval(k * T / 1000.0);
      CHECK(cur <= prev + 1e-9);
      prev = cur;
    }
    // midpoint concavity on sampled pairs
    CounterRng rng(7);
    for (int s = 0; s < 200; ++s) {
      const double a = rng.next_uniform() * T;
      const double b = rng.next_uniform() * T;
      CHECK(f.eval((a + b) / 2.0) >= (f.eval(a) + f.eval(b)) / 2.0 - 1e-9);
    }
  }
}

TEST_CASE("eval_schedule rejects out-of-domain input") {
  CHECK_THROWS_AS(quad().eval(-1.0), std::domain_error);
  CHECK_THROWS_AS(quad().eval(51.0), std::domain_error);
}

TEST_CASE("solve_shift quadratic examples against the closed form") {
  const double T = 50.0, i0 = 25.0;
  {
    const auto s = solve_shift(quad(T), i0, 37.5);
    CHECK(s.a == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(s.b == doctest::Approx(0.0).epsilon(1e-9));
  }
  {
    const auto s = solve_shift(quad(T), i0, 30.0);
    CHECK(s.a == doctest::Approx(7.5));
    CHECK(s.b == doctest::Approx(-13.875));
    CHECK(quad(T).eval(17.5) + s.b == doctest::Approx(30.0));
  }
  {
    const auto s = solve_shift(quad(T), i0, 25.0);
    CHECK(s.a == doctest::Approx(12.5));
    CHECK(s.b == doctest::Approx(-21.875));
  }
  CHECK_THROWS_AS(solve_shift(quad(T), i0, 40.0), ShiftOutOfRange);
  CHECK_THROWS_AS(solve_shift(quad(T), i0, 20.0), ShiftOutOfRange);
}

TEST_CASE("solve_shift degenerate linear family") {
  ScheduleFamily lin{ScheduleKind::Linear, 50.0};
  CHECK_THROWS_AS(solve_shift(lin, 25.0, 30.0), DegenerateSchedule);
  const auto s = solve_shift(lin, 25.0, 25.0);  // on-schedule point
  CHECK(s.a == 0.0);
  CHECK(s.b == 0.0);
}

TEST_CASE("shift residuals and uniqueness over random inputs") {
  CounterRng rng(42);
  const double T = 50.0;
  for (int trial = 0; trial < 1000; ++trial) {
    ScheduleFamily fam{kConcaveKinds[rng.next_below(4)], T};
    if (trial % 5 == 0)
      fam = {ScheduleKind::Reweighted, T, kConcaveKinds[rng.next_below(4)],
             0.1 + 0.8 * rng.next_uniform()};
    const double i0 = 0.5 + (T - 1.0) * rng.next_uniform();
    const double lo = T - i0, hi = fam.eval(i0);
    const double t0 = lo + (hi - lo) * rng.next_uniform();
    const auto s = solve_shift(fam, i0, t0);
    CAPTURE(to_string(fam.kind));
    CAPTURE(i0);
    CAPTURE(t0);
    CHECK(s.a >= 0.0);
    CHECK(s.a <= i0);
    CHECK(std::abs(fam.eval(i0 - s.a) + s.b - t0) <= 1e-9);
    CHECK(std::abs(fam.eval(T - s.a) + s.b) <= 1e-9);
  }
}

TEST_CASE("bisection matches quadratic closed form on 1000 random inputs") {
  CounterRng rng(99);
  const double T = 50.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double i0 = 0.5 + (T - 1.0) * rng.next_uniform();
    const double lo = T - i0, hi = quad(T).eval(i0);
    const double t0 = lo + (hi - lo) * rng.next_uniform();
    const auto s = solve_shift(quad(T), i0, t0);
    const auto o = quadratic_shift_oracle(T, i0, t0);
    CHECK(std::abs(s.a - o.a) <= 1e-9);
    CHECK(std::abs(s.b - o.b) <= 1e-9);
  }
}

TEST_CASE("advance_concave examples") {
  const double T = 50.0;
  CHECK(advance_concave(quad(T), 0.0, 50.0) == doctest::Approx(49.98));
  CHECK(advance_concave(quad(T), 25.0, 30.0) ==
        doctest::Approx(50.0 - 342.25 / 50.0 - 13.875));
  CounterRng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const double t = 1.0 + 48.0 * rng.next_uniform();
    const double valid_lo = 1.0, valid_hi = quad(T).eval(49.0);
    const double tt = std::clamp(t, valid_lo, valid_hi);
    CHECK(std::abs(advance_concave(quad(T), 49.0, tt)) <= 1e-9);
  }
}

TEST_CASE("advance_linear chord") {
  CHECK(advance_linear(50.0, 10.0, 40.0) == doctest::Approx(39.0));
  CHECK(advance_linear(50.0, 10.0, 45.0) == doctest::Approx(43.875));
  CHECK(advance_linear(50.0, 49.0, 0.73) == doctest::Approx(0.0));
  CHECK_THROWS_AS(advance_linear(50.0, 50.0, 0.0), std::domain_error);
}

TEST_CASE("dominance: concave advance lies above the chord") {
  CounterRng rng(11);
  const double T = 50.0;
  for (int trial = 0; trial < 500; ++trial) {
    ScheduleFamily fam{kConcaveKinds[rng.next_below(4)], T};
    const double i = 1.0 + (T - 2.0) * rng.next_uniform();
    const double lo = T - i, hi = fam.eval(i);
    const double t = lo + (hi - lo) * rng.next_uniform();
    CHECK(advance_concave(fam, i, t) >= advance_linear(T, i, t) - 1e-9);
  }
}

TEST_CASE("always-masked pixels trace f exactly") {
  const double T = 50.0;
  for (ScheduleKind k : kConcaveKinds) {
    ScheduleFamily fam{k, T};
    double t = T;
    for (int i = 0; i < 50; ++i) {
      t = advance_concave(fam, i, t);
      CHECK(std::abs(t - fam.eval(i + 1.0)) <= 1e-9);
    }
    CHECK(std::abs(t) <= 1e-9);
  }
}

TEST_CASE("transition_field per-pixel routing and error atomicity") {
  const double T = 50.0;
  ScheduleFamily fam = quad(T);
  TimestepField field(2, 2, T, 0);
  Grid2 mask(2, 2, 0.0);
  mask.at(0, 0) = 1.0;

  TimestepField next = transition_field(field, mask, fam);
  CHECK(next.step_index == 1);
  CHECK(next.values.at(0, 0) == doctest::Approx(49.98));
  CHECK(next.values.at(1, 1) == doctest::Approx(49.0));

  Grid2 bad_mask(3, 2, 0.0);
  CHECK_THROWS_AS(transition_field(field, bad_mask, fam),
                  std::invalid_argument);

  // all-ones / all-zeros field examples
  TimestepField all_t(2, 2, T, 0);
  Grid2 ones(2, 2, 1.0), zeros(2, 2, 0.0);
  auto adv_con = transition_field(all_t, ones, fam);
  for (double v : adv_con.values.v) CHECK(v == doctest::Approx(49.98));
  auto adv_lin = transition_field(all_t, zeros, fam);
  for (double v : adv_lin.values.v) CHECK(v == doctest::Approx(49.0));
}

TEST_CASE("band invariant under arbitrary per-step masks") {
  CounterRng rng(314);
  const double T = 50.0;
  for (int run = 0; run < 20; ++run) {
    ScheduleFamily fam{kConcaveKinds[rng.next_below(4)], T};
    TimestepField field(3, 3, T, 0);
    for (int i = 0; i < 50; ++i) {
      Grid2 mask(3, 3, 0.0);
      for (auto& m : mask.v) m = rng.next_uniform() < 0.5 ? 1.0 : 0.0;
      field = transition_field(field, mask, fam);
      const double lo = T - field.step_index;
      const double hi = fam.eval(static_cast<double>(field.step_index));
      for (double t : field.values.v) {
        CHECK(t >= lo - 1e-9);
        CHECK(t <= hi + 1e-9);
      }
    }
    for (double t : field.values.v) CHECK(std::abs(t) <= 1e-9);
  }
}

TEST_CASE("strictly decreasing trajectories for strictly concave families") {
  CounterRng rng(2718);
  const double T = 50.0;
  for (ScheduleKind k : {ScheduleKind::Quadratic, ScheduleKind::PiecewiseLinear,
                         ScheduleKind::Exponential}) {
    ScheduleFamily fam{k, T};
    TimestepField field(2, 2, T, 0);
    for (int i = 0; i < 50; ++i) {
      Grid2 mask(2, 2, 0.0);
      for (auto& m : mask.v) m = rng.next_uniform() < 0.5 ? 1.0 : 0.0;
      TimestepField next = transition_field(field, mask, fam);
      for (size_t p = 0; p < field.values.size(); ++p)
        if (field.values.v[p] > 1e-9)
          CHECK(next.values.v[p] < field.values.v[p]);
      field = next;
    }
  }
}

TEST_CASE("max_timestep_gap") {
  ScheduleFamily extreme{ScheduleKind::ExtremeClamp, 50.0};
  CHECK(max_timestep_gap(extreme) == doctest::Approx(25.0).epsilon(1e-12));
  ScheduleFamily lin{ScheduleKind::Linear, 50.0};
  CHECK(max_timestep_gap(lin) == doctest::Approx(0.0));
  ScheduleFamily rw{ScheduleKind::Reweighted, 50.0, ScheduleKind::ExtremeClamp,
                    0.4};
  CHECK(std::abs(max_timestep_gap(rw) - 10.0) <= 1e-9);
}

TEST_CASE("reweighted family keeps endpoints and concavity for all omega") {
  const double T = 50.0;
  for (int k = 1; k <= 9; ++k) {
    ScheduleFamily rw{ScheduleKind::Reweighted, T, ScheduleKind::Quadratic,
                      k / 10.0};
    CHECK(std::abs(rw.eval(0.0) - T) <= 1e-9);
    CHECK(std::abs(rw.eval(T)) <= 1e-9);
    CounterRng rng(k);
    for (int s = 0; s < 100; ++s) {
      const double a = rng.next_uniform() * T;
      const double b = rng.next_uniform() * T;
      CHECK(rw.eval((a + b) / 2.0) >= (rw.eval(a) + rw.eval(b)) / 2.0 - 1e-9);
    }
  }
}

TEST_CASE("rounded transition freezes pixels at zero") {
  ScheduleFamily fam = quad(50.0);
  TimestepField field(1, 1, 0.4, 30);  // rounds to 0 next step
  Grid2 mask(1, 1, 0.0);
  TimestepField next = transition_field(field, mask, fam, true);
  CHECK(next.values.v[0] == 0.0);
  TimestepField again = transition_field(next, mask, fam, true);
  CHECK(again.values.v[0] == 0.0);
}
