#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "asyndiff/attention.hpp"
#include "asyndiff/denoiser.hpp"
#include "asyndiff/grid.hpp"
#include "asyndiff/noise_schedule.hpp"
#include "asyndiff/rng.hpp"
#include "asyndiff/schedule.hpp"

namespace asyndiff {

enum class SamplerKind { DDPM, DDIM };

struct SamplerConfig {
  SamplerKind sampler_kind = SamplerKind::DDIM;
  double eta = 1.0;            // ignored for DDPM
  double guidance_scale = 5.0;
  int steps = 50;
  uint64_t rng_seed = 0;
  bool round_timesteps = false;
};

// How the guidance mask evolves during sampling.
//  none    — mask identically 0, every pixel follows the linear branch.
//  fixed   — a caller-supplied mask, constant over steps.
//  dynamic — re-extracted from cross-attention (Eq.-style OR mask) each step.
//  random  — fresh random binary mask each step (stress/verification mode).
struct MaskPolicy {
  enum class Kind { None, Fixed, Dynamic, Random } kind = Kind::None;
  Mask fixed_mask;             // Fixed only
  TokenSelection selection;    // Dynamic only
  double random_density = 0.5; // Random only
};

struct SampleDiagnostics {
  std::vector<TimestepField> field_snapshots;  // per step, including initial
  std::vector<Mask> mask_snapshots;
};

// One asynchronous DDPM step (per-pixel constants, per-pixel sigma from
// the (t, t_next) pair at eta = 1). A normal draw is consumed for every
// pixel and channel regardless of sigma, so the stream position does not
// depend on the mask pattern.
Grid3 ddpm_step(const Grid3& x, const TimestepField& field,
                const TimestepField& next_field, const Grid3& eps,
                const NoiseSchedule& schedule, CounterRng& rng);

// One asynchronous DDIM step; eta = 0 is deterministic (but still
// advances the rng stream, see above).
Grid3 ddim_step(const Grid3& x, const TimestepField& field,
                const TimestepField& next_field, const Grid3& eps, double eta,
                const NoiseSchedule& schedule, CounterRng& rng);

// Classifier-free guidance: uncond + scale * (cond - uncond).
Grid3 cfg_combine(const Grid3& eps_uncond, const Grid3& eps_cond, double scale);

struct SampleResult {
  Grid3 final_state;
  SampleDiagnostics diagnostics;
};

SampleResult sample(const Denoiser& denoiser, const std::vector<int>* tokens,
                    const ScheduleFamily& family, const SamplerConfig& config,
                    const MaskPolicy& mask_policy, const NoiseSchedule& schedule,
                    int channels, int h, int w,
                    bool keep_diagnostics = true);

}  // namespace asyndiff
