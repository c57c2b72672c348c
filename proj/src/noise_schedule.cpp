#include "asyndiff/noise_schedule.hpp"

#include <algorithm>
#include <cmath>

namespace asyndiff {

namespace {
constexpr double kAlphaBarLo = 1e-4;
constexpr double kAlphaBarHi = 1.0 - 1e-4;
}  // namespace

NoiseSchedule NoiseSchedule::cosine(double horizon) {
  NoiseSchedule s;
  s.kind_ = NoiseScheduleKind::Cosine;
  s.horizon_ = horizon;
  return s;
}

NoiseSchedule NoiseSchedule::discrete_linear_beta(double horizon,
                                                  double beta_start,
                                                  double beta_end,
                                                  int n_train) {
  if (n_train < 2) throw std::invalid_argument("n_train must be >= 2");
  NoiseSchedule s;
  s.kind_ = NoiseScheduleKind::DiscreteLinearBeta;
  s.horizon_ = horizon;
  s.log_alpha_bar_.resize(n_train + 1);
  s.log_alpha_bar_[0] = 0.0;
  for (int k = 1; k <= n_train; ++k) {
    const double beta =
        beta_start + (beta_end - beta_start) * (k - 1) / (n_train - 1);
    s.log_alpha_bar_[k] = s.log_alpha_bar_[k - 1] + std::log1p(-beta);
  }
  return s;
}

double NoiseSchedule::alpha_bar(double t) const {
  const double tc = std::clamp(t, 0.0, horizon_);
  if (kind_ == NoiseScheduleKind::Cosine) {
    const double c = std::cos(tc / horizon_ * M_PI_2);
    return std::clamp(c * c, kAlphaBarLo, kAlphaBarHi);
  }
  // Map [0, T] onto the training grid, interpolate log alpha_bar linearly.
  const int n = static_cast<int>(log_alpha_bar_.size()) - 1;
  const double u = tc / horizon_ * n;
  const int k = std::min(static_cast<int>(u), n - 1);
  const double frac = u - k;
  const double la =
      log_alpha_bar_[k] * (1.0 - frac) + log_alpha_bar_[k + 1] * frac;
  return std::min(std::exp(la), 1.0 - 1e-7);
}

double NoiseSchedule::sigma(double t_cur, double t_next, double eta) const {
  if (eta == 0.0) return 0.0;
  if (t_next >= t_cur) return 0.0;
  const double ab = alpha_bar(t_cur);
  const double abn = alpha_bar(t_next);
  return eta * std::sqrt((1.0 - abn) / (1.0 - ab)) *
         std::sqrt(std::max(0.0, 1.0 - ab / abn));
}

NoiseSchedule::ConstantsField NoiseSchedule::constants_field(
    const TimestepField& field) const {
  ConstantsField out;
  out.alpha_bar = Grid2(field.values.h, field.values.w);
  out.alpha = Grid2(field.values.h, field.values.w);
  out.beta = Grid2(field.values.h, field.values.w);
  for (size_t p = 0; p < field.values.size(); ++p) {
    const double t = field.values.v[p];
    if (t < -1e-9 || t > horizon_ + 1e-9)
      throw std::domain_error("constants_field: timestep outside [0, T]");
    out.alpha_bar.v[p] = alpha_bar(t);
    out.alpha.v[p] = alpha(t);
    out.beta.v[p] = 1.0 - out.alpha.v[p];
  }
  return out;
}

}  // namespace asyndiff
