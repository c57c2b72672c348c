#include "asyndiff/eval.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <thread>

#include "asyndiff/data.hpp"
#include "asyndiff/io.hpp"
#include "asyndiff/rng.hpp"

namespace asyndiff {

namespace fs = std::filesystem;
using nlohmann::json;

bool EvalReport::all_pass() const {
  for (const auto& m : metrics)
    if (m.gated && !m.pass) return false;
  return true;
}

std::string EvalReport::to_json() const {
  json j;
  j["config"] = config_fingerprint;
  json ms = json::array();
  for (const auto& m : metrics) {
    ms.push_back({{"name", m.name},
                  {"value", m.value},
                  {"sample_count", m.sample_count},
                  {"tolerance", m.tolerance},
                  {"gated", m.gated},
                  {"pass", m.pass}});
  }
  j["metrics"] = std::move(ms);
  j["all_pass"] = all_pass();
  return j.dump(2);
}

void EvalReport::write(const std::string& path) const {
  write_text_file(path, to_json() + "\n");
}

namespace {

// Runs `body(i)` for i in [0, n) across `threads` workers; each index
// writes only its own output slot, so the result is order-independent.
void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, threads);
  if (threads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += threads) body(i);
    });
  for (auto& t : pool) t.join();
}

MaskPolicy mask_policy_from_config(const RunConfig& cfg, int h, int w,
                                   const TokenSelection* selection) {
  MaskPolicy mp;
  if (cfg.mask_policy == "none") {
    mp.kind = MaskPolicy::Kind::None;
  } else if (cfg.mask_policy == "random") {
    mp.kind = MaskPolicy::Kind::Random;
    mp.random_density = cfg.random_mask_density;
  } else if (cfg.mask_policy == "fixed") {
    mp.kind = MaskPolicy::Kind::Fixed;
    mp.fixed_mask = Mask(h, w, 0.0);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w / 2; ++c) mp.fixed_mask.at(r, c) = 1.0;
  } else {
    mp.kind = MaskPolicy::Kind::Dynamic;
    if (selection) mp.selection = *selection;
  }
  return mp;
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg, const std::string& out_dir) {
  if (cfg.dims % 4 != 0)
    throw std::invalid_argument("gen-data: dims must be divisible by 4");
  ShapesDataset ds = generate_shapes(cfg.count, cfg.dims, cfg.seed);
  write_shapes_dataset(ds, out_dir);
}

void cmd_train(const RunConfig& cfg, const std::string& dataset_dir,
               const std::string& ckpt_out, bool verbose) {
  ShapesDataset ds = read_shapes_dataset(dataset_dir);
  NoiseSchedule schedule = cfg.make_noise_schedule();

  TinyNetArch arch;
  arch.c_in = 3;
  arch.vocab = vocab::kSize;
  arch.horizon = cfg.steps;
  TinyCondDenoiser model(arch);
  model.init_random(cfg.seed ^ 0x696e6974ull);

  TrainConfig tc;
  tc.steps = cfg.train_steps;
  tc.batch = cfg.batch;
  tc.lr = cfg.lr;
  tc.seed = cfg.seed;

  TrainResult res = train(model, ds, schedule, tc,
                          verbose
                              ? [](int step, double loss) {
                                  std::fprintf(stderr, "step %d loss %.5f\n",
                                               step, loss);
                                }
                              : std::function<void(int, double)>());
  res.meta.dataset_fingerprint =
      "shapes:" + std::to_string(ds.samples.size()) + "x" +
      std::to_string(ds.h) + ":seed" + std::to_string(ds.seed);
  save_checkpoint(model, res.meta, ckpt_out);
  if (verbose)
    std::fprintf(stderr, "holdout loss %.5f\n", res.holdout_loss);
}

void cmd_sample(const RunConfig& cfg, const std::string& checkpoint_path,
                const std::string& out_dir) {
  fs::create_directories(out_dir);
  NoiseSchedule schedule = cfg.make_noise_schedule();
  ScheduleFamily family = cfg.schedule_family();
  SamplerConfig sc = cfg.sampler_config();

  std::unique_ptr<Denoiser> denoiser;
  std::optional<TinyCondDenoiser> net;
  RunConfig eff = cfg;
  int channels = cfg.channels;
  GaussianDataSpec spec;
  if (checkpoint_path.empty()) {
    channels = 1;
    spec = make_gaussian_spec(cfg.dims, GaussianStructure::Smooth, 1.0,
                              cfg.seed);
    denoiser = std::make_unique<GaussianOracleDenoiser>(spec, schedule);
    if (cfg.mask_policy == "dynamic") {
      std::fprintf(stderr,
                   "warning: oracle denoiser emits no attention; falling back "
                   "to mask_policy=none\n");
      eff.mask_policy = "none";
    }
  } else {
    net = load_checkpoint(checkpoint_path);
    channels = net->arch().c_in;
  }

  std::ostringstream manifest;
  manifest << eff.fingerprint();
  manifest << "checkpoint=" << (checkpoint_path.empty() ? "<gaussian-oracle>"
                                                        : checkpoint_path)
           << "\n";
  write_text_file((fs::path(out_dir) / "run_manifest.txt").string(),
                  manifest.str());

  CounterRng caption_rng(cfg.seed ^ 0x63617074ull);
  for (int s = 0; s < cfg.samples; ++s) {
    SamplerConfig sc_s = sc;
    sc_s.rng_seed = cfg.seed + static_cast<uint64_t>(s);

    std::vector<int> tokens;
    TokenSelection selection;
    const std::vector<int>* tokens_ptr = nullptr;
    if (net) {
      const int color = vocab::kRed + caption_rng.next_below(4);
      const int shape = vocab::kSquare + caption_rng.next_below(3);
      tokens = {color, shape, vocab::kBackground};
      selection.object_indices = {0, 1};
      tokens_ptr = &tokens;
    }

    MaskPolicy mp =
        mask_policy_from_config(eff, cfg.dims, cfg.dims, &selection);
    const Denoiser& d = net ? static_cast<const Denoiser&>(*net) : *denoiser;
    SampleResult r = sample(d, tokens_ptr, family, sc_s, mp, schedule,
                            channels, cfg.dims, cfg.dims);

    const std::string stem = (fs::path(out_dir) / ("sample_" +
                                                   std::to_string(s)))
                                 .string();
    if (channels == 3)
      write_ppm(r.final_state, stem + ".ppm");
    else {
      Grid2 g(cfg.dims, cfg.dims);
      for (size_t i = 0; i < g.size(); ++i) g.v[i] = r.final_state.v[i];
      write_pgm(g, stem + ".pgm");
    }
    write_trace_csv(r.diagnostics, stem + "_trace.csv");
    if (!r.diagnostics.mask_snapshots.empty())
      write_pgm(r.diagnostics.mask_snapshots.back(), stem + "_mask.pgm", 0.0,
                1.0);

    // same-seed baseline for side-by-side comparison
    if (eff.mask_policy == "dynamic" || eff.mask_policy == "fixed") {
      MaskPolicy none;
      SampleResult rb = sample(d, tokens_ptr, family, sc_s, none, schedule,
                               channels, cfg.dims, cfg.dims, false);
      if (channels == 3)
        write_ppm(rb.final_state, stem + "_baseline.ppm");
      else {
        Grid2 g(cfg.dims, cfg.dims);
        for (size_t i = 0; i < g.size(); ++i) g.v[i] = rb.final_state.v[i];
        write_pgm(g, stem + "_baseline.pgm");
      }
    }
  }
}

namespace {

struct MomentStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

MomentStats gather_moments(const std::vector<Eigen::VectorXd>& xs) {
  const int d = static_cast<int>(xs.front().size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& x : xs) {
    const Eigen::VectorXd c = x - mean;
    cov += c * c.transpose();
  }
  cov /= static_cast<double>(xs.size() - 1);
  return {mean, cov};
}

}  // namespace

EvalReport cmd_eval_gaussian(const RunConfig& cfg) {
  NoiseSchedule schedule = cfg.make_noise_schedule();
  const int dims = cfg.dims;
  const int d = dims * dims;
  GaussianDataSpec spec =
      make_gaussian_spec(dims, GaussianStructure::Smooth, 1.0, cfg.seed);
  GaussianOracleDenoiser oracle(spec, schedule);
  const int n = cfg.eval_samples;

  EvalReport report;
  report.config_fingerprint = cfg.fingerprint();

  for (const bool async : {false, true}) {
    ScheduleFamily family = cfg.schedule_family();
    if (!async) family.kind = ScheduleKind::Linear;

    std::vector<Eigen::VectorXd> finals(n);
    parallel_for(n, cfg.threads, [&](int s) {
      SamplerConfig sc = cfg.sampler_config();
      sc.rng_seed = cfg.seed + static_cast<uint64_t>(s);
      sc.guidance_scale = 1.0;
      MaskPolicy mp;
      if (async) {
        mp.kind = MaskPolicy::Kind::Random;
        mp.random_density = cfg.random_mask_density;
      }
      SampleResult r = sample(oracle, nullptr, family, sc, mp, schedule, 1,
                              dims, dims, false);
      Eigen::VectorXd x(d);
      for (int p = 0; p < d; ++p) x[p] = r.final_state.v[p];
      finals[s] = std::move(x);
    });

    const MomentStats st = gather_moments(finals);
    const double mean_err = (st.mean - spec.mean).cwiseAbs().maxCoeff();
    const double cov_err =
        (st.cov - spec.cov).norm() / spec.cov.norm();

    const std::string tag = async ? "async" : "sync";
    report.metrics.push_back({"mean_abs_err_" + tag, mean_err,
                              static_cast<size_t>(n), 0.05, true,
                              mean_err <= 0.05});
    report.metrics.push_back({"cov_rel_frobenius_err_" + tag, cov_err,
                              static_cast<size_t>(n), 0.10, true,
                              cov_err <= 0.10});
  }
  return report;
}

EvalReport cmd_eval_mask(const RunConfig& cfg,
                         const std::string& checkpoint_path,
                         const std::string& dataset_dir) {
  TinyCondDenoiser model = load_checkpoint(checkpoint_path);
  ShapesDataset ds = read_shapes_dataset(dataset_dir);
  NoiseSchedule schedule = cfg.make_noise_schedule();
  const double T = schedule.horizon();
  const int h = ds.h, w = ds.w;

  const size_t n_eval = std::min<size_t>(
      std::max(64, cfg.samples), ds.samples.size());
  const size_t start = ds.samples.size() - n_eval;

  CounterRng rng(cfg.seed ^ 0x6d61736b6576ull);
  double sum_iou = 0.0, sum_base = 0.0;
  const std::vector<double> eval_ts = {0.25 * T, 0.4 * T, 0.55 * T};

  for (size_t s = start; s < ds.samples.size(); ++s) {
    const ShapesSample& sample = ds.samples[s];

    // union of ground-truth object masks
    Mask gt(h, w, 0.0);
    TokenSelection selection;
    for (const auto& o : sample.objects) {
      for (size_t p = 0; p < gt.size(); ++p)
        if (o.mask.v[p] != 0.0) gt.v[p] = 1.0;
      // anchor each object by its first caption token (the appearance-
      // bearing color word). Softmax competition pushes the secondary
      // descriptor's attention onto the complement of the object, so
      // OR-ing its above-mean mask in would mostly add background.
      selection.object_indices.insert(o.token_indices.front());
    }

    // average attention maps across noise levels
    AttentionLayer avg;
    for (double t : eval_ts) {
      TimestepField field(h, w, t);
      Grid3 x(3, h, w);
      for (size_t i = 0; i < x.size(); ++i) {
        const double ab = schedule.alpha_bar(t);
        x.v[i] = std::sqrt(ab) * sample.image.v[i] +
                 std::sqrt(1.0 - ab) * rng.next_normal();
      }
      DenoiserOutput out = model.predict(x, field, &sample.caption);
      AttentionLayer agg = aggregate_layers(*out.maps, h, w,
                                            LayerRule::QuarterResolution);
      if (avg.maps.empty()) {
        avg = agg;
      } else {
        for (int o = 0; o < agg.n_tokens; ++o)
          for (size_t p = 0; p < agg.maps[o].size(); ++p)
            avg.maps[o].v[p] += agg.maps[o].v[p];
      }
    }
    for (auto& m : avg.maps)
      for (auto& v : m.v) v /= static_cast<double>(eval_ts.size());

    Mask extracted = extract_mask(avg, selection, h, w);
    sum_iou += iou(extracted, gt);

    // area-matched random baseline
    size_t area = 0;
    for (double v : extracted.v) area += (v != 0.0);
    Mask base(h, w, 0.0);
    std::vector<size_t> perm(gt.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (size_t i = 0; i < area && i < perm.size(); ++i) {
      const size_t j = i + rng.next_below(perm.size() - i);
      std::swap(perm[i], perm[j]);
      base.v[perm[i]] = 1.0;
    }
    sum_base += iou(base, gt);
  }

  const double mean_iou = sum_iou / static_cast<double>(n_eval);
  const double mean_base = sum_base / static_cast<double>(n_eval);
  const double ratio = mean_base > 0.0 ? mean_iou / mean_base : 0.0;

  EvalReport report;
  report.config_fingerprint = cfg.fingerprint();
  report.metrics.push_back(
      {"mean_mask_iou", mean_iou, n_eval, 0.0, false, true});
  report.metrics.push_back(
      {"baseline_mask_iou", mean_base, n_eval, 0.0, false, true});
  report.metrics.push_back(
      {"iou_ratio_vs_baseline", ratio, n_eval, 1.5, true, ratio >= 1.5});
  return report;
}

void cmd_schedule_trace(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const double T = cfg.steps;

  {
    std::ofstream f(fs::path(out_dir) / "schedulers.csv");
    f << "i,linear,quadratic,piecewise,exponential,extreme,reweighted\n";
    ScheduleFamily rw{ScheduleKind::Reweighted, T, cfg.base_family, cfg.omega};
    const int n = 200;
    for (int k = 0; k <= n; ++k) {
      const double i = k * T / n;
      f << i;
      for (ScheduleKind kind :
           {ScheduleKind::Linear, ScheduleKind::Quadratic,
            ScheduleKind::PiecewiseLinear, ScheduleKind::Exponential,
            ScheduleKind::ExtremeClamp})
        f << "," << ScheduleFamily{kind, T}.eval(i);
      f << "," << rw.eval(i) << "\n";
    }
  }

  {
    // shifted trajectories: a pixel masked from several (i0, t0) states
    std::ofstream f(fs::path(out_dir) / "shifted_trajectories.csv");
    f << "start_i,start_t,i,t\n";
    ScheduleFamily fam = cfg.schedule_family();
    if (fam.is_linear()) fam.kind = ScheduleKind::Quadratic;
    for (double frac : {0.25, 0.5, 0.75}) {
      const double i0 = frac * T;
      const double t0 = 0.5 * ((T - i0) + fam.eval(i0));
      double t = t0;
      f << i0 << "," << t0 << "," << i0 << "," << t << "\n";
      for (double i = i0; i < T; i += 1.0) {
        t = advance_concave(fam, i, t);
        f << i0 << "," << t0 << "," << (i + 1.0) << "," << t << "\n";
      }
    }
  }

  {
    std::ofstream f(fs::path(out_dir) / "gap_vs_omega.csv");
    f << "omega,max_timestep_gap\n";
    for (int k = 1; k <= 9; ++k) {
      const double omega = k / 10.0;
      ScheduleFamily fam{ScheduleKind::Reweighted, T, ScheduleKind::ExtremeClamp,
                         omega};
      f << omega << "," << max_timestep_gap(fam) << "\n";
    }
  }
}

void omega_noise_sweep(const RunConfig& cfg, const std::string& out_csv) {
  NoiseSchedule schedule = cfg.make_noise_schedule();
  const int dims = cfg.dims;
  const int d = dims * dims;
  GaussianDataSpec spec =
      make_gaussian_spec(dims, GaussianStructure::Smooth, 1.0, cfg.seed);
  GaussianOracleDenoiser oracle(spec, schedule);

  Mask half(dims, dims, 0.0);
  for (int r = 0; r < dims; ++r)
    for (int c = 0; c < dims / 2; ++c) half.at(r, c) = 1.0;

  std::ofstream f(out_csv);
  f << "omega,unmasked_variance_err,masked_variance_err\n";
  const int n = cfg.eval_samples;
  for (int k = 1; k <= 9; ++k) {
    const double omega = k / 10.0;
    ScheduleFamily fam{ScheduleKind::Reweighted, static_cast<double>(cfg.steps),
                       ScheduleKind::ExtremeClamp, omega};
    std::vector<Eigen::VectorXd> finals(n);
    parallel_for(n, cfg.threads, [&](int s) {
      SamplerConfig sc = cfg.sampler_config();
      sc.rng_seed = cfg.seed + static_cast<uint64_t>(s);
      sc.guidance_scale = 1.0;
      MaskPolicy mp;
      mp.kind = MaskPolicy::Kind::Fixed;
      mp.fixed_mask = half;
      SampleResult r =
          sample(oracle, nullptr, fam, sc, mp, schedule, 1, dims, dims, false);
      Eigen::VectorXd x(d);
      for (int p = 0; p < d; ++p) x[p] = r.final_state.v[p];
      finals[s] = std::move(x);
    });
    const MomentStats st = gather_moments(finals);
    double err_un = 0.0, err_ma = 0.0;
    int n_un = 0, n_ma = 0;
    for (int p = 0; p < d; ++p) {
      const double e = std::abs(st.cov(p, p) - spec.cov(p, p));
      if (half.v[p] != 0.0) {
        err_ma += e;
        ++n_ma;
      } else {
        err_un += e;
        ++n_un;
      }
    }
    f << omega << "," << err_un / n_un << "," << err_ma / n_ma << "\n";
  }
}

}  // namespace asyndiff
