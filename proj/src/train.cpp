#include "asyndiff/train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace asyndiff {

namespace {

// Builds the noisy input x_t = sqrt(ab) x0 + sqrt(1-ab) eps for one
// sample, drawing t and eps from the given stream.
struct NoisedSample {
  Grid3 x;
  TimestepField field;
  Grid3 eps;
  std::vector<int> tokens;
};

NoisedSample make_noised(const ShapesSample& s, const NoiseSchedule& schedule,
                         const TrainConfig& cfg, CounterRng& rng) {
  NoisedSample out;
  const int h = s.image.h, w = s.image.w;
  out.field = TimestepField(h, w, 0.0);
  const double T = schedule.horizon();
  if (cfg.per_pixel_timesteps) {
    for (auto& t : out.field.values.v) t = rng.next_uniform() * T;
  } else {
    const double t = rng.next_uniform() * T;
    for (auto& v : out.field.values.v) v = t;
  }
  out.eps = Grid3(s.image.c, h, w);
  for (auto& e : out.eps.v) e = rng.next_normal();
  out.x = Grid3(s.image.c, h, w);
  const size_t d = static_cast<size_t>(h) * w;
  for (int c = 0; c < s.image.c; ++c)
    for (size_t p = 0; p < d; ++p) {
      const double ab = schedule.alpha_bar(out.field.values.v[p]);
      const size_t i = c * d + p;
      out.x.v[i] =
          std::sqrt(ab) * s.image.v[i] + std::sqrt(1.0 - ab) * out.eps.v[i];
    }
  out.tokens = s.caption;
  if (cfg.cond_dropout > 0.0 && rng.next_uniform() < cfg.cond_dropout)
    out.tokens = {0};  // null conditioning, trains the guidance branch
  return out;
}

}  // namespace

double loss_and_grad(const TinyCondDenoiser& model, const ShapesDataset& ds,
                     const std::vector<size_t>& indices,
                     const NoiseSchedule& schedule, const TrainConfig& cfg,
                     CounterRng& rng, std::vector<double>* grad) {
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
  double loss = 0.0;
  size_t total_elems = 0;
  for (size_t idx : indices)
    total_elems += ds.samples[idx].image.size();

  for (size_t idx : indices) {
    const NoisedSample ns = make_noised(ds.samples[idx], schedule, cfg, rng);
    TinyCondDenoiser::Cache cache;
    DenoiserOutput out = model.forward(ns.x, ns.field, &ns.tokens, cache);
    Grid3 d_eps(out.eps.c, out.eps.h, out.eps.w);
    for (size_t i = 0; i < out.eps.size(); ++i) {
      const double diff = out.eps.v[i] - ns.eps.v[i];
      loss += diff * diff;
      d_eps.v[i] = 2.0 * diff / static_cast<double>(total_elems);
    }
    if (grad) model.backward(cache, d_eps, grad);
  }
  return loss / static_cast<double>(total_elems);
}

double holdout_loss(const TinyCondDenoiser& model, const ShapesDataset& ds,
                    const NoiseSchedule& schedule, const TrainConfig& cfg) {
  const size_t n = ds.samples.size();
  const size_t k = std::min<size_t>(cfg.holdout, n);
  std::vector<size_t> idx(k);
  std::iota(idx.begin(), idx.end(), n - k);
  TrainConfig eval_cfg = cfg;
  eval_cfg.cond_dropout = 0.0;
  CounterRng rng(cfg.seed ^ 0x686f6c646f7574ull);
  return loss_and_grad(model, ds, idx, schedule, eval_cfg, rng, nullptr);
}

TrainResult train(TinyCondDenoiser& model, const ShapesDataset& ds,
                  const NoiseSchedule& schedule, const TrainConfig& cfg,
                  const std::function<void(int, double)>& progress) {
  const size_t n_train =
      ds.samples.size() > static_cast<size_t>(cfg.holdout)
          ? ds.samples.size() - cfg.holdout
          : ds.samples.size();
  if (n_train == 0) throw std::invalid_argument("train: empty dataset");

  CounterRng rng(cfg.seed ^ 0x747261696eull);
  std::vector<double> grad(model.params().size(), 0.0);
  std::vector<double> velocity(model.params().size(), 0.0);

  TrainResult res;
  res.meta.steps = cfg.steps;
  res.meta.seed = cfg.seed;
  double initial_loss = 0.0;

  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<size_t> batch(cfg.batch);
    for (auto& b : batch) b = rng.next_below(n_train);
    const double loss =
        loss_and_grad(model, ds, batch, schedule, cfg, rng, &grad);
    if (step == 0) initial_loss = loss;
    if (!std::isfinite(loss) || (step > 10 && loss > 10.0 * initial_loss))
      throw std::runtime_error("train: diverged at step " +
                               std::to_string(step) +
                               " (loss=" + std::to_string(loss) + ")");
    res.meta.loss_curve.push_back(loss);

    double norm2 = 0.0;
    for (double g : grad) norm2 += g * g;
    const double norm = std::sqrt(norm2);
    const double scale = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;

    auto& p = model.params();
    for (size_t i = 0; i < p.size(); ++i) {
      velocity[i] = cfg.momentum * velocity[i] - cfg.lr * scale * grad[i];
      p[i] += velocity[i];
    }
    if (progress && (step % 100 == 0 || step + 1 == cfg.steps))
      progress(step, loss);
  }
  res.holdout_loss = holdout_loss(model, ds, schedule, cfg);
  return res;
}

}  // namespace asyndiff
