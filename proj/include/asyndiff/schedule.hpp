#pragma once

#include <stdexcept>
#include <string>

#include "asyndiff/grid.hpp"

namespace asyndiff {

enum class ScheduleKind {
  Linear,
  Quadratic,
  PiecewiseLinear,
  Exponential,
  ExtremeClamp,
  Reweighted,
};

ScheduleKind schedule_kind_from_string(const std::string& s);
std::string to_string(ScheduleKind k);

// A timestep scheduler t = f(i) on [0, T] with f(0) = T and f(T) = 0.
// All kinds except Linear are concave; Reweighted blends a concave base
// with the linear chord: f' = omega * f_base + (1 - omega) * (T - i).
struct ScheduleFamily {
  ScheduleKind kind = ScheduleKind::Quadratic;
  double horizon = 50.0;
  ScheduleKind base_kind = ScheduleKind::Quadratic;  // Reweighted only
  double omega = 0.5;                                // Reweighted only

  double eval(double i) const;
  bool is_linear() const { return kind == ScheduleKind::Linear; }
};

// Shift of Proposition-style form f(i - a) + b passing through (i0, t0)
// and (T, 0).
struct ShiftSolution {
  double a = 0.0;
  double b = 0.0;
};

// t0 outside [T - i0, f(i0)]: no shifted curve reaches the point.
struct ShiftOutOfRange : std::domain_error {
  using std::domain_error::domain_error;
};

// Linear family off the standard schedule: g(a) is constant, no solution.
struct DegenerateSchedule : std::domain_error {
  using std::domain_error::domain_error;
};

// Per-pixel timestep state at denoising step `step_index`.
struct TimestepField {
  Grid2 values;
  int step_index = 0;

  TimestepField() = default;
  TimestepField(int h, int w, double fill, int step = 0)
      : values(h, w, fill), step_index(step) {}
};

double eval_schedule(const ScheduleFamily& family, double i);

// Solves f(i0 - a) + b = t0, f(T - a) + b = 0 by bisection on
// g(a) = f(i0 - a) - f(T - a), which is nonincreasing on [0, i0].
ShiftSolution solve_shift(const ScheduleFamily& family, double i0, double t0);

// Next timestep along the shifted concave curve through (i, t).
double advance_concave(const ScheduleFamily& family, double i, double t);

// Next timestep along the chord from (i, t) to (T, 0); reproduces the
// standard linear schedule when t = T - i.
double advance_linear(double T, double i, double t);

// One step of the timestep-field transition: masked pixels follow the
// concave scheduler, unmasked ones the linear chord. Binary mask, same
// dimensions as the field. `round_to_integer` snaps results to the
// integer grid (parity mode); a pixel already at 0 stays at 0.
TimestepField transition_field(const TimestepField& field, const Grid2& mask,
                               const ScheduleFamily& family,
                               bool round_to_integer = false);

// max over i of f(i) - (T - i), on a dense uniform grid.
double max_timestep_gap(const ScheduleFamily& family);

}  // namespace asyndiff
