#include "asyndiff/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace asyndiff {

namespace {

constexpr double kDomainSlack = 1e-9;
constexpr double kBisectTol = 1e-12;
constexpr int kBisectMaxIter = 200;

double eval_kind(ScheduleKind kind, double T, double i) {
  switch (kind) {
    case ScheduleKind::Linear:
      return T - i;
    case ScheduleKind::Quadratic:
      return T - i * i / T;
    case ScheduleKind::PiecewiseLinear:
      return std::min(T - 0.5 * i, 1.5 * T - 1.5 * i);
    case ScheduleKind::Exponential:
      return T / (M_E - 1.0) * (M_E - std::exp(i / T));
    case ScheduleKind::ExtremeClamp:
      return std::min(T, 2.0 * T - 2.0 * i);
    case ScheduleKind::Reweighted:
      throw std::logic_error("Reweighted handled by ScheduleFamily::eval");
  }
  throw std::logic_error("unknown schedule kind");
}

}  // namespace

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "linear") return ScheduleKind::Linear;
  if (s == "quadratic") return ScheduleKind::Quadratic;
  if (s == "piecewise") return ScheduleKind::PiecewiseLinear;
  if (s == "exponential") return ScheduleKind::Exponential;
  if (s == "extreme") return ScheduleKind::ExtremeClamp;
  if (s == "reweighted") return ScheduleKind::Reweighted;
  throw std::invalid_argument("unknown schedule family: " + s);
}

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Linear: return "linear";
    case ScheduleKind::Quadratic: return "quadratic";
    case ScheduleKind::PiecewiseLinear: return "piecewise";
    case ScheduleKind::Exponential: return "exponential";
    case ScheduleKind::ExtremeClamp: return "extreme";
    case ScheduleKind::Reweighted: return "reweighted";
  }
  return "?";
}

double ScheduleFamily::eval(double i) const {
  const double T = horizon;
  if (i < -kDomainSlack || i > T + kDomainSlack)
    throw std::domain_error("eval_schedule: step index outside [0, T]");
  i = std::clamp(i, 0.0, T);
  if (kind == ScheduleKind::Reweighted) {
    if (!(omega > 0.0 && omega < 1.0))
      throw std::invalid_argument("reweighted schedule: omega must lie in (0,1)");
    if (base_kind == ScheduleKind::Reweighted)
      throw std::invalid_argument("reweighted schedule: base may not be reweighted");
    return omega * eval_kind(base_kind, T, i) + (1.0 - omega) * (T - i);
  }
  return eval_kind(kind, T, i);
}

double eval_schedule(const ScheduleFamily& family, double i) {
  return family.eval(i);
}

ShiftSolution solve_shift(const ScheduleFamily& family, double i0, double t0) {
  const double T = family.horizon;
  if (!(i0 > 0.0 && i0 < T))
    throw std::domain_error("solve_shift: i0 must lie strictly inside (0, T)");
  const double lo_t = T - i0;
  if (family.is_linear()) {
    if (std::abs(t0 - lo_t) <= kDomainSlack) return {0.0, 0.0};
    throw DegenerateSchedule(
        "solve_shift: linear family admits no shifted solution off the "
        "standard schedule");
  }
  const double hi_t = family.eval(i0);
  if (t0 < lo_t - kDomainSlack || t0 > hi_t + kDomainSlack)
    throw ShiftOutOfRange("solve_shift: t0 outside [T - i0, f(i0)]");
  t0 = std::clamp(t0, lo_t, hi_t);

  auto g = [&](double a) { return family.eval(i0 - a) - family.eval(T - a); };

  // g is continuous and nonincreasing with g(0) = f(i0) >= t0 and
  // g(i0) = T - f(T - i0) <= T - i0 <= t0, so [0, i0] brackets the root.
  double lo = 0.0, hi = i0;
  if (g(lo) <= t0) {
    hi = lo;
  } else {
    for (int iter = 0; iter < kBisectMaxIter && hi - lo > kBisectTol; ++iter) {
      double mid = 0.5 * (lo + hi);
      if (g(mid) >= t0)
        lo = mid;
      else
        hi = mid;
    }
  }
  double a = 0.5 * (lo + hi);
  return {a, -family.eval(T - a)};
}

double advance_concave(const ScheduleFamily& family, double i, double t) {
  // At i = 0 the only admissible state is t = T and the curve is unshifted.
  if (i <= 0.0) {
    if (std::abs(t - family.horizon) > kDomainSlack)
      throw ShiftOutOfRange("advance_concave: at i = 0 the state must be T");
    return family.eval(std::min(i + 1.0, family.horizon));
  }
  const ShiftSolution s = solve_shift(family, i, t);
  double next = family.eval(std::clamp(i + 1.0 - s.a, 0.0, family.horizon)) + s.b;
  return std::max(next, 0.0);
}

double advance_linear(double T, double i, double t) {
  const double remaining = T - i;
  if (!(remaining > 0.0))
    throw std::domain_error("advance_linear: no transition beyond step T");
  return t * (remaining - 1.0) / remaining;
}

TimestepField transition_field(const TimestepField& field, const Grid2& mask,
                               const ScheduleFamily& family,
                               bool round_to_integer) {
  require_same_shape(field.values, mask, "transition_field");
  const double T = family.horizon;
  const double i = static_cast<double>(field.step_index);
  if (i >= T)
    throw std::domain_error("transition_field: field already at the horizon");

  TimestepField out(field.values.h, field.values.w, 0.0, field.step_index + 1);
  for (size_t p = 0; p < field.values.size(); ++p) {
    const double t = field.values.v[p];
    double next;
    if (t <= 0.0) {
      next = 0.0;  // frozen at zero (rounded mode can land here early)
    } else if (mask.v[p] != 0.0) {
      next = family.is_linear() ? advance_linear(T, i, t)
                                : advance_concave(family, i, t);
    } else {
      next = advance_linear(T, i, t);
    }
    if (round_to_integer) next = std::max(0.0, std::round(next));
    out.values.v[p] = next;
  }
  return out;
}

double max_timestep_gap(const ScheduleFamily& family) {
  const double T = family.horizon;
  const int n = 100000;
  double best = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double i = (static_cast<double>(k) * T) / n;
    best = std::max(best, family.eval(i) - (T - i));
  }
  return best;
}

}  // namespace asyndiff
