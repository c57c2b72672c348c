#include "asyndiff/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace asyndiff {

namespace {

void check_step_inputs(const Grid3& x, const TimestepField& field,
                       const TimestepField& next_field, const Grid3& eps,
                       const char* what) {
  require_same_shape(x, eps, what);
  require_same_shape(field.values, next_field.values, what);
  if (field.values.h != x.h || field.values.w != x.w)
    throw std::invalid_argument(std::string(what) + ": field shape mismatch");
  for (double e : eps.v)
    if (!std::isfinite(e))
      throw std::runtime_error(std::string(what) +
                               ": non-finite model output");
  for (size_t p = 0; p < field.values.size(); ++p)
    if (next_field.values.v[p] > field.values.v[p] + 1e-9)
      throw std::invalid_argument(std::string(what) +
                                  ": noise level may not increase");
}

}  // namespace

Grid3 ddpm_step(const Grid3& x, const TimestepField& field,
                const TimestepField& next_field, const Grid3& eps,
                const NoiseSchedule& schedule, CounterRng& rng) {
  check_step_inputs(x, field, next_field, eps, "ddpm_step");
  const int d = x.h * x.w;
  Grid3 out(x.c, x.h, x.w);
  for (int ch = 0; ch < x.c; ++ch) {
    for (int p = 0; p < d; ++p) {
      const double t = field.values.v[p];
      const double tn = next_field.values.v[p];
      const double ab = schedule.alpha_bar(t);
      const double a = schedule.alpha(t);
      const double b = 1.0 - a;
      const size_t idx = static_cast<size_t>(ch) * d + p;
      const double mu =
          (x.v[idx] - b / std::sqrt(1.0 - ab) * eps.v[idx]) / std::sqrt(a);
      const double z = rng.next_normal();
      const double sigma = tn <= 0.0 ? 0.0 : schedule.sigma(t, tn, 1.0);
      out.v[idx] = mu + sigma * z;
    }
  }
  return out;
}

Grid3 ddim_step(const Grid3& x, const TimestepField& field,
                const TimestepField& next_field, const Grid3& eps, double eta,
                const NoiseSchedule& schedule, CounterRng& rng) {
  check_step_inputs(x, field, next_field, eps, "ddim_step");
  const int d = x.h * x.w;
  Grid3 out(x.c, x.h, x.w);
  for (int ch = 0; ch < x.c; ++ch) {
    for (int p = 0; p < d; ++p) {
      const double t = field.values.v[p];
      const double tn = next_field.values.v[p];
      const double ab = schedule.alpha_bar(t);
      const double abn = schedule.alpha_bar(tn);
      const size_t idx = static_cast<size_t>(ch) * d + p;
      const double x0hat =
          (x.v[idx] - std::sqrt(1.0 - ab) * eps.v[idx]) / std::sqrt(ab);
      const double z = rng.next_normal();
      if (tn <= 0.0) {
        out.v[idx] = x0hat;  // finished pixel: no noise, no eps carry-over
        continue;
      }
      const double sigma = schedule.sigma(t, tn, eta);
      const double rem = 1.0 - abn - sigma * sigma;
      if (rem < -1e-12)
        throw std::runtime_error("ddim_step: sigma^2 exceeds 1 - alpha_bar'");
      out.v[idx] = std::sqrt(abn) * x0hat +
                   std::sqrt(std::max(0.0, rem)) * eps.v[idx] + sigma * z;
    }
  }
  return out;
}

Grid3 cfg_combine(const Grid3& eps_uncond, const Grid3& eps_cond,
                  double scale) {
  require_same_shape(eps_uncond, eps_cond, "cfg_combine");
  Grid3 out(eps_uncond.c, eps_uncond.h, eps_uncond.w);
  for (size_t i = 0; i < out.size(); ++i)
    out.v[i] = eps_uncond.v[i] + scale * (eps_cond.v[i] - eps_uncond.v[i]);
  return out;
}

SampleResult sample(const Denoiser& denoiser, const std::vector<int>* tokens,
                    const ScheduleFamily& family, const SamplerConfig& config,
                    const MaskPolicy& mask_policy,
                    const NoiseSchedule& schedule, int channels, int h, int w,
                    bool keep_diagnostics) {
  const int T = config.steps;
  if (static_cast<double>(T) != family.horizon ||
      family.horizon != schedule.horizon())
    throw std::invalid_argument("sample: steps, family and schedule horizons disagree");

  CounterRng rng(config.rng_seed);
  CounterRng mask_rng(config.rng_seed, 0x6d61736bull);  // separate mask stream

  Grid3 x(channels, h, w);
  for (auto& v : x.v) v = rng.next_normal();
  TimestepField field(h, w, static_cast<double>(T), 0);

  Mask mask(h, w, 0.0);
  switch (mask_policy.kind) {
    case MaskPolicy::Kind::None:
      break;
    case MaskPolicy::Kind::Fixed:
      require_same_shape(mask_policy.fixed_mask, mask, "sample fixed mask");
      mask = mask_policy.fixed_mask;
      break;
    case MaskPolicy::Kind::Dynamic:
      mask = Mask(h, w, 1.0);  // pseudo-code initialization M = 1
      break;
    case MaskPolicy::Kind::Random:
      for (auto& m : mask.v)
        m = mask_rng.next_uniform() < mask_policy.random_density ? 1.0 : 0.0;
      break;
  }

  SampleResult res;
  if (keep_diagnostics) {
    res.diagnostics.field_snapshots.push_back(field);
    res.diagnostics.mask_snapshots.push_back(mask);
  }

  for (int i = 0; i < T; ++i) {
    TimestepField next =
        transition_field(field, mask, family, config.round_timesteps);

    DenoiserOutput cond = denoiser.predict(x, field, tokens);
    Grid3 eps;
    if (config.guidance_scale > 1.0 && tokens != nullptr) {
      DenoiserOutput uncond = denoiser.predict(x, field, nullptr);
      eps = cfg_combine(uncond.eps, cond.eps, config.guidance_scale);
    } else {
      eps = cond.eps;
    }

    if (config.sampler_kind == SamplerKind::DDPM)
      x = ddpm_step(x, field, next, eps, schedule, rng);
    else
      x = ddim_step(x, field, next, eps, config.eta, schedule, rng);

    field = std::move(next);

    switch (mask_policy.kind) {
      case MaskPolicy::Kind::Dynamic: {
        if (cond.maps && !cond.maps->layers.empty()) {
          AttentionLayer agg = aggregate_layers(*cond.maps, h, w,
                                                LayerRule::QuarterResolution);
          mask = extract_mask(agg, mask_policy.selection, h, w);
        } else {
          mask = Mask(h, w, 0.0);  // denoiser emits no attention
        }
        break;
      }
      case MaskPolicy::Kind::Random:
        for (auto& m : mask.v)
          m = mask_rng.next_uniform() < mask_policy.random_density ? 1.0 : 0.0;
        break;
      default:
        break;
    }

    if (keep_diagnostics) {
      res.diagnostics.field_snapshots.push_back(field);
      res.diagnostics.mask_snapshots.push_back(mask);
    }
  }

  res.final_state = std::move(x);
  return res;
}

}  // namespace asyndiff
