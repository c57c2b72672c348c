#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "asyndiff/grid.hpp"
#include "asyndiff/schedule.hpp"

namespace asyndiff {

enum class NoiseScheduleKind { Cosine, DiscreteLinearBeta };

// Forward-process constants over continuous timesteps t in [0, T].
// alpha_bar(t) is the cumulative signal-retention coefficient; alpha(t)
// is the unit-step ratio alpha_bar(t) / alpha_bar(t - 1).
class NoiseSchedule {
 public:
  static NoiseSchedule cosine(double horizon);
  static NoiseSchedule discrete_linear_beta(double horizon, double beta_start,
                                            double beta_end, int n_train);

  double horizon() const { return horizon_; }

  double alpha_bar(double t) const;
  double alpha(double t) const { return alpha_bar(t) / alpha_bar(t - 1.0); }
  double beta(double t) const { return 1.0 - alpha(t); }

  // DDIM noise scale for a (t_cur -> t_next) transition; eta = 0 gives 0
  // exactly, eta = 1 the DDPM posterior scale.
  double sigma(double t_cur, double t_next, double eta) const;

  struct ConstantsField {
    Grid2 alpha_bar;
    Grid2 alpha;
    Grid2 beta;
  };
  ConstantsField constants_field(const TimestepField& field) const;

 private:
  NoiseSchedule() = default;

  NoiseScheduleKind kind_ = NoiseScheduleKind::Cosine;
  double horizon_ = 50.0;
  std::vector<double> log_alpha_bar_;  // DiscreteLinearBeta integer grid
};

}  // namespace asyndiff
