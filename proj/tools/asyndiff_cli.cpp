// Command-line front end; talks to the engine exclusively through the
// C shared-library API in asyndiff.h.
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asyndiff.h"

namespace {

struct ConfigDeleter {
  void operator()(ad_config* c) const { ad_config_free(c); }
};
using ConfigPtr = std::unique_ptr<ad_config, ConfigDeleter>;

int fail(const char* what) {
  std::fprintf(stderr, "error: %s: %s\n", what, ad_last_error());
  return 1;
}

ConfigPtr build_config(const std::string& config_file,
                       const std::vector<std::string>& overrides, bool* ok) {
  ConfigPtr cfg(ad_config_new());
  *ok = true;
  if (!config_file.empty() &&
      ad_config_load(cfg.get(), config_file.c_str()) != AD_OK) {
    fail("loading config");
    *ok = false;
    return cfg;
  }
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n",
                   kv.c_str());
      *ok = false;
      return cfg;
    }
    if (ad_config_set(cfg.get(), kv.substr(0, eq).c_str(),
                      kv.substr(eq + 1).c_str()) != AD_OK) {
      fail("setting config");
      *ok = false;
      return cfg;
    }
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asynchronous diffusion sampling engine"};
  app.require_subcommand(1);
  app.fallthrough();  // allow --config/--set after the subcommand name
  app.set_version_flag("--version", std::string(ad_version()));

  std::string config_file;
  std::vector<std::string> overrides;
  app.add_option("--config", config_file, "flat key=value config file")
      ->expected(1);
  app.add_option("--set", overrides, "override a config key (key=value)");

  std::string out_dir = "out";
  std::string dataset_dir;
  std::string checkpoint;
  std::string report = "report.json";
  bool verbose = false;
  bool omega_sweep = false;

  auto* gen = app.add_subcommand("gen-data", "generate a captioned-shapes dataset");
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "train the tiny conditional denoiser");
  train->add_option("--dataset", dataset_dir, "dataset directory")->required();
  train->add_option("--out", checkpoint, "checkpoint output path")->required();
  train->add_flag("--verbose", verbose, "log training progress");

  auto* samp = app.add_subcommand("sample", "run the sampling loop");
  samp->add_option("--checkpoint", checkpoint,
                   "checkpoint path (omit for the Gaussian oracle)");
  samp->add_option("--out", out_dir, "output directory")->required();
  samp->add_flag("--omega-sweep", omega_sweep,
                 "also emit the residual-noise-vs-omega report");

  auto* evg = app.add_subcommand("eval-gaussian",
                                 "Monte-Carlo distribution test with the oracle");
  evg->add_option("--report", report, "report output path");

  auto* evm = app.add_subcommand("eval-mask", "mask-extraction IoU evaluation");
  evm->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
  evm->add_option("--dataset", dataset_dir, "dataset directory")->required();
  evm->add_option("--report", report, "report output path");

  auto* tr = app.add_subcommand("schedule-trace",
                                "scheduler curves, shifted trajectories, gap study");
  tr->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  bool ok = false;
  ConfigPtr cfg = build_config(config_file, overrides, &ok);
  if (!ok) return 1;

  int rc = 0;
  if (gen->parsed()) {
    rc = ad_gen_data(cfg.get(), out_dir.c_str());
  } else if (train->parsed()) {
    rc = ad_train(cfg.get(), dataset_dir.c_str(), checkpoint.c_str(),
                  verbose ? 1 : 0);
  } else if (samp->parsed()) {
    rc = ad_sample(cfg.get(), checkpoint.empty() ? nullptr : checkpoint.c_str(),
                   out_dir.c_str());
    if (rc == AD_OK && omega_sweep)
      rc = ad_omega_sweep(cfg.get(), (out_dir + "/omega_sweep.csv").c_str());
  } else if (evg->parsed()) {
    rc = ad_eval_gaussian(cfg.get(), report.c_str());
    if (rc == AD_GATE_FAILED)
      std::fprintf(stderr, "gated metric failed (see %s)\n", report.c_str());
  } else if (evm->parsed()) {
    rc = ad_eval_mask(cfg.get(), checkpoint.c_str(), dataset_dir.c_str(),
                      report.c_str());
    if (rc == AD_GATE_FAILED)
      std::fprintf(stderr, "gated metric failed (see %s)\n", report.c_str());
  } else if (tr->parsed()) {
    rc = ad_schedule_trace(cfg.get(), out_dir.c_str());
  }

  if (rc == AD_ERROR) return fail("command");
  return rc;
}
