#include "asyndiff.h"

#include <string>

#include "asyndiff/config.hpp"
#include "asyndiff/eval.hpp"
#include "asyndiff/schedule.hpp"

namespace {

thread_local std::string g_last_error;

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return AD_ERROR;
  } catch (...) {
    g_last_error = "unknown error";
    return AD_ERROR;
  }
}

}  // namespace

struct ad_config {
  asyndiff::RunConfig cfg;
};

struct ad_schedule {
  asyndiff::ScheduleFamily family;
};

extern "C" {

const char* ad_version(void) { return "asyndiff 1.0.0"; }

const char* ad_last_error(void) { return g_last_error.c_str(); }

ad_config* ad_config_new(void) { return new ad_config(); }

void ad_config_free(ad_config* cfg) { delete cfg; }

int ad_config_set(ad_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) {
    g_last_error = "null argument";
    return AD_ERROR;
  }
  return guarded([&] {
    cfg->cfg.set(key, value);
    return AD_OK;
  });
}

int ad_config_load(ad_config* cfg, const char* path) {
  if (!cfg || !path) {
    g_last_error = "null argument";
    return AD_ERROR;
  }
  return guarded([&] {
    cfg->cfg = asyndiff::RunConfig::from_file(path);
    return AD_OK;
  });
}

int ad_gen_data(const ad_config* cfg, const char* out_dir) {
  if (!cfg || !out_dir) {
    g_last_error = "null argument";
    return AD_ERROR;
  }
  return guarded([&] {
    asyndiff::cmd_gen_data(cfg->cfg, out_dir);
    return AD_OK;
  });
}

int ad_train(const ad_config* cfg, const char* dataset_dir,
             const char* checkpoint_out, int verbose) {
  if (!cfg || !dataset_dir || !checkpoint_out) {
    g_last_error = "null argument";
    return AD_ERROR;
  }
  return guarded([&] {
    asyndiff::cmd_train(cfg->cfg, dataset_dir, checkpoint_out, verbose != 0);
    return AD_OK;
  });
}

int ad_sample(const ad_config* cfg, const char* checkpoint_path,
              const char* out_dir) {
  if (!cfg || !out_dir) {
    g_last_error = "null argument";
    return AD_ERROR;
  }
  return guarded([&] {
    asyndiff::cmd_sample(cfg->cfg, checkpoint_path ? checkpoint_path : "",
                         out_dir);
    return AD_OK;
  });
}

int ad_eval_gaussian(const ad_config* cfg, const char* report_out) {
  if (!cfg) {
    g_last_error = "null argument";
    return AD_ERROR;
  }
  return guarded([&] {
    asyndiff::EvalReport report = asyndiff::cmd_eval_gaussian(cfg->cfg);
    if (report_out) report.write(report_out);
    return report.all_pass() ? AD_OK : AD_GATE_FAILED;
  });
}

int ad_eval_mask(const ad_config* cfg, const char* checkpoint_path,
                 const char* dataset_dir, const char* report_out) {
  if (!cfg || !checkpoint_path || !dataset_dir) {
    g_last_error = "null argument";
    return AD_ERROR;
  }
  return guarded([&] {
    asyndiff::EvalReport report =
        asyndiff::cmd_eval_mask(cfg->cfg, checkpoint_path, dataset_dir);
    if (report_out) report.write(report_out);
    return report.all_pass() ? AD_OK : AD_GATE_FAILED;
  });
}

int ad_schedule_trace(const ad_config* cfg, const char* out_dir) {
  if (!cfg || !out_dir) {
    g_last_error = "null argument";
    return AD_ERROR;
  }
  return guarded([&] {
    asyndiff::cmd_schedule_trace(cfg->cfg, out_dir);
    return AD_OK;
  });
}

int ad_omega_sweep(const ad_config* cfg, const char* out_csv) {
  if (!cfg || !out_csv) {
    g_last_error = "null argument";
    return AD_ERROR;
  }
  return guarded([&] {
    asyndiff::omega_noise_sweep(cfg->cfg, out_csv);
    return AD_OK;
  });
}

ad_schedule* ad_schedule_new(const char* family, double horizon,
                             const char* base, double omega) {
  try {
    auto* s = new ad_schedule();
    s->family.kind = asyndiff::schedule_kind_from_string(family);
    s->family.horizon = horizon;
    if (s->family.kind == asyndiff::ScheduleKind::Reweighted) {
      if (!base) throw std::invalid_argument("reweighted family needs a base");
      s->family.base_kind = asyndiff::schedule_kind_from_string(base);
      s->family.omega = omega;
    }
    return s;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return nullptr;
  }
}

void ad_schedule_free(ad_schedule* s) { delete s; }

int ad_schedule_eval(const ad_schedule* s, double i, double* out) {
  if (!s || !out) {
    g_last_error = "null argument";
    return AD_ERROR;
  }
  return guarded([&] {
    *out = s->family.eval(i);
    return AD_OK;
  });
}

int ad_schedule_solve_shift(const ad_schedule* s, double i0, double t0,
                            double* a, double* b) {
  if (!s || !a || !b) {
    g_last_error = "null argument";
    return AD_ERROR;
  }
  return guarded([&] {
    const asyndiff::ShiftSolution sol = asyndiff::solve_shift(s->family, i0, t0);
    *a = sol.a;
    *b = sol.b;
    return AD_OK;
  });
}

int ad_schedule_advance_concave(const ad_schedule* s, double i, double t,
                                double* out) {
  if (!s || !out) {
    g_last_error = "null argument";
    return AD_ERROR;
  }
  return guarded([&] {
    *out = asyndiff::advance_concave(s->family, i, t);
    return AD_OK;
  });
}

int ad_schedule_advance_linear(double horizon, double i, double t,
                               double* out) {
  if (!out) {
    g_last_error = "null argument";
    return AD_ERROR;
  }
  return guarded([&] {
    *out = asyndiff::advance_linear(horizon, i, t);
    return AD_OK;
  });
}

int ad_schedule_max_gap(const ad_schedule* s, double* out) {
  if (!s || !out) {
    g_last_error = "null argument";
    return AD_ERROR;
  }
  return guarded([&] {
    *out = asyndiff::max_timestep_gap(s->family);
    return AD_OK;
  });
}

}  // extern "C"
