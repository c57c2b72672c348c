#pragma once

#include <map>
#include <string>

#include "asyndiff/noise_schedule.hpp"
#include "asyndiff/sampler.hpp"
#include "asyndiff/schedule.hpp"
#include "asyndiff/train.hpp"

namespace asyndiff {

// Flat key=value run configuration. Unknown keys are rejected; the
// defaults reproduce the reference operating point (T=50, eta=1.0,
// guidance 5.0, quadratic family).
struct RunConfig {
  ScheduleKind family = ScheduleKind::Quadratic;
  ScheduleKind base_family = ScheduleKind::ExtremeClamp;  // reweighted base
  double omega = 0.5;
  SamplerKind sampler = SamplerKind::DDIM;
  double eta = 1.0;
  double guidance = 5.0;
  int steps = 50;
  uint64_t seed = 0;
  std::string mask_policy = "dynamic";  // none|fixed|dynamic|random
  double random_mask_density = 0.5;
  std::string timestep_mode = "continuous";  // continuous|rounded
  std::string noise_schedule = "cosine";     // cosine|linear_beta
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int n_train = 1000;
  int dims = 16;
  int channels = 3;
  int count = 1024;   // dataset size
  double lr = 0.02;
  int train_steps = 2000;
  int batch = 8;
  int samples = 64;   // sample / eval batch count
  int eval_samples = 20000;
  int threads = 1;

  void set(const std::string& key, const std::string& value);
  static RunConfig from_file(const std::string& path);
  std::string fingerprint() const;  // canonical key=value dump

  ScheduleFamily schedule_family() const;
  NoiseSchedule make_noise_schedule() const;
  SamplerConfig sampler_config() const;
};

}  // namespace asyndiff
