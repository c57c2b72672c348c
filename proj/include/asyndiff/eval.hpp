#pragma once

#include <string>
#include <vector>

#include "asyndiff/config.hpp"

namespace asyndiff {

struct EvalMetric {
  std::string name;
  double value = 0.0;
  size_t sample_count = 0;
  double tolerance = 0.0;
  bool gated = false;
  bool pass = true;
};

struct EvalReport {
  std::vector<EvalMetric> metrics;
  std::string config_fingerprint;

  bool all_pass() const;
  std::string to_json() const;
  void write(const std::string& path) const;
};

// Command cores behind the CLI / C API. Each is deterministic given the
// config (seed included). Gated commands return the report; the caller
// maps all_pass() to the process exit code.

void cmd_gen_data(const RunConfig& cfg, const std::string& out_dir);

void cmd_train(const RunConfig& cfg, const std::string& dataset_dir,
               const std::string& ckpt_out, bool verbose = false);

// checkpoint_path empty: Gaussian-oracle denoiser.
void cmd_sample(const RunConfig& cfg, const std::string& checkpoint_path,
                const std::string& out_dir);

EvalReport cmd_eval_gaussian(const RunConfig& cfg);

EvalReport cmd_eval_mask(const RunConfig& cfg,
                         const std::string& checkpoint_path,
                         const std::string& dataset_dir);

void cmd_schedule_trace(const RunConfig& cfg, const std::string& out_dir);

// Residual-noise-vs-omega sweep (reported, not gated): oracle sampling
// with an extreme reweighted scheduler and a fixed half-image mask.
void omega_noise_sweep(const RunConfig& cfg, const std::string& out_csv);

}  // namespace asyndiff
