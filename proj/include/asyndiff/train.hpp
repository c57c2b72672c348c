#pragma once

#include <functional>

#include "asyndiff/data.hpp"
#include "asyndiff/io.hpp"
#include "asyndiff/noise_schedule.hpp"
#include "asyndiff/tiny_net.hpp"

namespace asyndiff {

struct TrainConfig {
  int steps = 2000;
  int batch = 8;
  double lr = 0.02;
  double momentum = 0.9;
  double clip_norm = 1.0;
  uint64_t seed = 0;
  double cond_dropout = 0.1;   // null-token substitution rate for guidance
  bool per_pixel_timesteps = false;  // ablation mode
  int holdout = 64;            // trailing samples reserved for evaluation
};

// Epsilon-prediction loss (mean squared error over all elements) and its
// gradient for one batch; the independent finite-difference tests drive
// this same entry point.
double loss_and_grad(const TinyCondDenoiser& model, const ShapesDataset& ds,
                     const std::vector<size_t>& indices,
                     const NoiseSchedule& schedule, const TrainConfig& cfg,
                     CounterRng& rng, std::vector<double>* grad);

struct TrainResult {
  TrainingMeta meta;
  double holdout_loss = 0.0;
};

// SGD with momentum and gradient clipping; throws on divergence
// (loss > 10x initial).
TrainResult train(TinyCondDenoiser& model, const ShapesDataset& ds,
                  const NoiseSchedule& schedule, const TrainConfig& cfg,
                  const std::function<void(int, double)>& progress = nullptr);

double holdout_loss(const TinyCondDenoiser& model, const ShapesDataset& ds,
                    const NoiseSchedule& schedule, const TrainConfig& cfg);

}  // namespace asyndiff
