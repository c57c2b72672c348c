/* C interface to the asynchronous diffusion sampling engine.
 *
 * All functions return 0 on success, 1 on error and 2 when a gated
 * evaluation metric fails. On error, ad_last_error() returns a
 * human-readable message (thread-local, valid until the next call).
 */
#ifndef ASYNDIFF_H
#define ASYNDIFF_H

#ifdef __cplusplus
extern "C" {
#endif

#define AD_OK 0
#define AD_ERROR 1
#define AD_GATE_FAILED 2

const char* ad_version(void);
const char* ad_last_error(void);

/* ---- run configuration (opaque handle) ---- */
typedef struct ad_config ad_config;

ad_config* ad_config_new(void);
void ad_config_free(ad_config* cfg);
/* Set one key=value pair; unknown keys are rejected. */
int ad_config_set(ad_config* cfg, const char* key, const char* value);
/* Load a flat key=value file (later ad_config_set calls override it). */
int ad_config_load(ad_config* cfg, const char* path);

/* ---- commands ---- */
int ad_gen_data(const ad_config* cfg, const char* out_dir);
int ad_train(const ad_config* cfg, const char* dataset_dir,
             const char* checkpoint_out, int verbose);
/* checkpoint_path may be NULL: the Gaussian-oracle denoiser is used. */
int ad_sample(const ad_config* cfg, const char* checkpoint_path,
              const char* out_dir);
int ad_eval_gaussian(const ad_config* cfg, const char* report_out);
int ad_eval_mask(const ad_config* cfg, const char* checkpoint_path,
                 const char* dataset_dir, const char* report_out);
int ad_schedule_trace(const ad_config* cfg, const char* out_dir);
int ad_omega_sweep(const ad_config* cfg, const char* out_csv);

/* ---- scheduler surface (opaque handle) ---- */
typedef struct ad_schedule ad_schedule;

/* family: linear|quadratic|piecewise|exponential|extreme|reweighted.
 * base/omega are consulted for the reweighted family only (base may be
 * NULL otherwise). */
ad_schedule* ad_schedule_new(const char* family, double horizon,
                             const char* base, double omega);
void ad_schedule_free(ad_schedule* s);
int ad_schedule_eval(const ad_schedule* s, double i, double* out);
/* Shift solve: f(i0 - a) + b = t0 and f(T - a) + b = 0. */
int ad_schedule_solve_shift(const ad_schedule* s, double i0, double t0,
                            double* a, double* b);
int ad_schedule_advance_concave(const ad_schedule* s, double i, double t,
                                double* out);
int ad_schedule_advance_linear(double horizon, double i, double t,
                               double* out);
int ad_schedule_max_gap(const ad_schedule* s, double* out);

#ifdef __cplusplus
}
#endif

#endif /* ASYNDIFF_H */
