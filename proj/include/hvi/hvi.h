/* C API for the Hamiltonian variational inference benchmark library.
 *
 * All functions return hvi_status; on failure hvi_last_error_message() holds
 * a description for the calling thread. Objects returned through out
 * parameters are owned by the caller and released with the matching _free.
 */
#ifndef HVI_H
#define HVI_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hvi_status {
  HVI_OK = 0,
  HVI_ERROR_INVALID_ARGUMENT = 1,
  HVI_ERROR_DOMAIN = 2,
  HVI_ERROR_NUMERIC = 3,
  HVI_ERROR_IO = 4,
  HVI_ERROR_INTERNAL = 5
} hvi_status;

const char* hvi_status_name(hvi_status status);
const char* hvi_last_error_message(void);

/* ---- datasets ------------------------------------------------------------ */

typedef struct hvi_dataset hvi_dataset;

/* Synthetic benchmark data: one z ~ N(0, I_dim), then n rows from
 * N(z + delta, Sigma) at the true parameters for dim. Deterministic per seed. */
hvi_status hvi_dataset_generate(int32_t dim, int32_t n, uint64_t seed,
                                hvi_dataset** out);
hvi_status hvi_dataset_from_rows(const double* rows /* n*dim, row-major */,
                                 int32_t n, int32_t dim, hvi_dataset** out);
hvi_status hvi_dataset_load_csv(const char* path, hvi_dataset** out);
hvi_status hvi_dataset_save_csv(const hvi_dataset* data, const char* path);
hvi_status hvi_dataset_load_binary(const char* path, hvi_dataset** out);
hvi_status hvi_dataset_save_binary(const hvi_dataset* data, const char* path);
int32_t hvi_dataset_rows(const hvi_dataset* data);
int32_t hvi_dataset_dim(const hvi_dataset* data);
hvi_status hvi_dataset_mean(const hvi_dataset* data, double* out_mean);
void hvi_dataset_free(hvi_dataset* data);

/* ---- Gaussian model oracles ----------------------------------------------- */

/* delta_j = (j-1-(dim-1)/2)/5; standard deviations on the parabola through
 * (1,1), ((dim+1)/2, 0.1), (dim,1). Arrays of length dim. */
hvi_status hvi_gaussian_true_params(int32_t dim, double* out_delta,
                                    double* out_sigma_sq);
hvi_status hvi_gaussian_log_joint(const hvi_dataset* data, const double* delta,
                                  const double* sigma_sq, const double* z,
                                  double* out);
hvi_status hvi_gaussian_grad_u(const hvi_dataset* data, const double* delta,
                               const double* sigma_sq, const double* z,
                               double* out);
hvi_status hvi_gaussian_exact_log_marginal(const hvi_dataset* data,
                                           const double* delta,
                                           const double* sigma_sq, double* out);
hvi_status hvi_gaussian_exact_posterior(const hvi_dataset* data,
                                        const double* delta,
                                        const double* sigma_sq,
                                        double* out_mean, double* out_var);

/* ---- estimators ------------------------------------------------------------ */

typedef enum hvi_tempering {
  HVI_TEMPERING_FIXED = 0,
  HVI_TEMPERING_FREE = 1,
  HVI_TEMPERING_NONE = 2
} hvi_tempering;

typedef enum hvi_estimator {
  HVI_ESTIMATOR_HIS = 0,
  HVI_ESTIMATOR_HIS_RB = 1,
  HVI_ESTIMATOR_VANILLA = 2,
  HVI_ESTIMATOR_PLANAR_NF = 3,
  HVI_ESTIMATOR_IWAE = 4,
  HVI_ESTIMATOR_AIS = 5
} hvi_estimator;

typedef struct hvi_flow_options {
  int32_t steps;
  hvi_tempering tempering;
  double beta0; /* fixed tempering */
  double xi;    /* step-size cap */
  double eps;   /* uniform per-dimension leapfrog step size in (0, xi) */
} hvi_flow_options;
void hvi_flow_options_init(hvi_flow_options* opts);

/* Log-domain sample mean and sd of `draws` estimator replicates on the
 * Gaussian model with the standard-normal variational prior (the mean-field
 * estimator uses mu = 0, var = 1). Streams are derived per replicate, so the
 * result is independent of evaluation order. */
hvi_status hvi_estimate_elbo(const hvi_dataset* data, const double* delta,
                             const double* sigma_sq, hvi_estimator estimator,
                             const hvi_flow_options* flow, int32_t iwae_samples,
                             int32_t ais_steps, int32_t draws, uint64_t seed,
                             double* out_mean, double* out_sd);

/* ---- training --------------------------------------------------------------- */

typedef enum hvi_method {
  HVI_METHOD_HVAE = 0,
  HVI_METHOD_VB = 1,
  HVI_METHOD_NF = 2
} hvi_method;

typedef enum hvi_optimizer {
  HVI_OPTIMIZER_RMSPROP = 0,
  HVI_OPTIMIZER_ADAMAX = 1
} hvi_optimizer;

typedef struct hvi_train_options {
  hvi_method method;
  hvi_tempering tempering;
  int32_t flow_steps;
  double beta0;
  double xi;
  double eps_init;
  int32_t nf_iterations; /* -1: match flow_steps */
  int32_t mc_samples;
  int32_t vb_analytic; /* closed-form VB gradients on the conjugate model */
  hvi_optimizer optimizer;
  double learning_rate;
  int32_t max_epochs;
  int32_t patience; /* -1 disables early stopping */
  int32_t batch_size;
  double validation_fraction;
  double rel_tol;
  uint64_t seed;
} hvi_train_options;
void hvi_train_options_init(hvi_train_options* opts);

typedef struct hvi_train_result hvi_train_result;

hvi_status hvi_train_gaussian(const hvi_dataset* data,
                              const hvi_train_options* opts,
                              hvi_train_result** out);
int32_t hvi_train_result_dim(const hvi_train_result* result);
hvi_status hvi_train_result_theta(const hvi_train_result* result,
                                  double* out_delta, double* out_sigma_sq);
double hvi_train_result_final_elbo(const hvi_train_result* result);
int32_t hvi_train_result_epochs(const hvi_train_result* result);
hvi_status hvi_train_result_write_trace_csv(const hvi_train_result* result,
                                            const char* path);
hvi_status hvi_train_result_save_checkpoint(const hvi_train_result* result,
                                            const char* path);
void hvi_train_result_free(hvi_train_result* result);

/* ---- sweeps, plots, NLL ------------------------------------------------------ */

typedef struct hvi_sweep_options {
  const int32_t* dims;
  int32_t n_dims;
  /* method tokens: hvae, hvae-fixed, hvae-free, hvae-none, vb, vb-analytic, nf */
  const char* const* methods;
  int32_t n_methods;
  int32_t runs;
  int32_t n;
  uint64_t seed;
  hvi_train_options train;
} hvi_sweep_options;
void hvi_sweep_options_init(hvi_sweep_options* opts);

/* Writes results.csv and aggregate.csv under out_dir. The work pool width is
 * capped by the HVI_THREADS environment variable. */
hvi_status hvi_sweep_run(const hvi_sweep_options* opts, const char* out_dir);

hvi_status hvi_emit_plot(const char* aggregate_csv, const char* svg_path);

typedef enum hvi_proposal {
  HVI_PROPOSAL_PRIOR = 0,
  HVI_PROPOSAL_EXACT_POSTERIOR = 1,
  HVI_PROPOSAL_FLOW = 2
} hvi_proposal;

/* Importance-sampled estimate of -log p(D) with `samples` proposal draws. */
hvi_status hvi_eval_nll(const hvi_dataset* data, const double* delta,
                        const double* sigma_sq, hvi_proposal proposal,
                        const hvi_flow_options* flow, int32_t samples,
                        uint64_t seed, double* out_nll);

#ifdef __cplusplus
}
#endif

#endif /* HVI_H */
