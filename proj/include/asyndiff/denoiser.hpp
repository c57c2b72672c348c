#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "asyndiff/attention.hpp"
#include "asyndiff/grid.hpp"
#include "asyndiff/noise_schedule.hpp"
#include "asyndiff/schedule.hpp"

namespace asyndiff {

struct DenoiserOutput {
  Grid3 eps;
  std::optional<CrossAttentionMaps> maps;
};

// Noise predictor conditioned on per-pixel timesteps and (optionally) a
// token sequence. Implementations must be pure: the same inputs and
// parameters always give the same output.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual DenoiserOutput predict(const Grid3& x, const TimestepField& field,
                                 const std::vector<int>* tokens) const = 0;
};

// Gaussian target N(mu, Sigma) over the flattened h*w pixel grid,
// applied per channel.
struct GaussianDataSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  void validate() const;
};

// Exact E[eps | x] for Gaussian data under the heterogeneous forward
// process x = A x0 + D^{1/2} eps with A = diag(sqrt(alpha_bar(t_p))),
// D = diag(1 - alpha_bar(t_p)).
Grid3 oracle_predict(const GaussianDataSpec& spec, const Grid3& x,
                     const TimestepField& field, const NoiseSchedule& schedule);

class GaussianOracleDenoiser : public Denoiser {
 public:
  GaussianOracleDenoiser(GaussianDataSpec spec, const NoiseSchedule& schedule)
      : spec_(std::move(spec)), schedule_(schedule) {
    spec_.validate();
  }

  DenoiserOutput predict(const Grid3& x, const TimestepField& field,
                         const std::vector<int>* tokens) const override;

 private:
  GaussianDataSpec spec_;
  const NoiseSchedule& schedule_;
};

}  // namespace asyndiff
