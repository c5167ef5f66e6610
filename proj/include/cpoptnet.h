/* C API for the cpoptnet shared library: sparse CP tensor decomposition
 * (nonlinear conjugate gradient and ALS), latent-series predictors and
 * the evaluation pipeline, behind opaque handles and error codes.
 *
 * All functions returning cpn_status set the thread-local message
 * retrievable via cpn_last_error() on failure. Output handles are only
 * written on CPN_OK and must be released with the matching *_free. */
#ifndef CPOPTNET_H
#define CPOPTNET_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  CPN_OK = 0,
  CPN_ERR_ARGUMENT = 2,
  CPN_ERR_NUMERIC = 3,
  CPN_ERR_IO = 4
} cpn_status;

typedef struct cpn_tensor cpn_tensor;   /* sparse COO tensor */
typedef struct cpn_kruskal cpn_kruskal; /* factor matrices A, B, C */
typedef struct cpn_trace cpn_trace;     /* per-iteration solver records */
typedef struct cpn_model cpn_model;     /* trained predictor */

/* Message for the most recent failure on this thread. */
const char* cpn_last_error(void);

/* ---- tensors ---- */
cpn_status cpn_tensor_read(const char* path, cpn_tensor** out);
cpn_status cpn_tensor_write(const cpn_tensor* t, const char* path);
cpn_status cpn_tensor_dims(const cpn_tensor* t, int64_t* i, int64_t* j, int64_t* k,
                           int64_t* nnz);
double cpn_tensor_norm_sq(const cpn_tensor* t);
void cpn_tensor_free(cpn_tensor* t);

/* Synthetic low-rank tensor with seasonal time structure, Gaussian noise
 * and uniform cell dropout; also returns the ground-truth factors. */
cpn_status cpn_synth(int64_t i, int64_t j, int64_t k, int64_t true_rank,
                     double noise_sigma, double sparsity, uint64_t seed,
                     cpn_tensor** tensor_out, cpn_kruskal** truth_out);

/* ---- factors ---- */
cpn_status cpn_kruskal_read(const char* path, cpn_kruskal** out);
cpn_status cpn_kruskal_write(const cpn_kruskal* k, const char* path);
cpn_status cpn_kruskal_dims(const cpn_kruskal* k, int64_t* i, int64_t* j, int64_t* kk,
                            int64_t* rank);
void cpn_kruskal_free(cpn_kruskal* k);

/* 1/2 ||X - [[A,B,C]]||^2 over all cells. */
cpn_status cpn_objective(const cpn_tensor* t, const cpn_kruskal* k, double* out);

/* ---- solvers ---- */
typedef struct {
  int64_t rank;
  int64_t max_iters;
  double grad_tol;
  double f_tol;
  double wolfe_c1;
  double wolfe_c2;
  int64_t max_line_search_steps;
  uint64_t seed;
  double init_scale;
  double restart_threshold;
} cpn_ncg_config;

typedef struct {
  int64_t rank;
  int64_t max_iters;
  double fit_tol;
  uint64_t seed;
  double ridge;
  double init_scale;
} cpn_als_config;

void cpn_ncg_config_defaults(cpn_ncg_config* cfg);
void cpn_als_config_defaults(cpn_als_config* cfg);

cpn_status cpn_cpopt_solve(const cpn_tensor* t, const cpn_ncg_config* cfg,
                           cpn_kruskal** factors_out, cpn_trace** trace_out);
cpn_status cpn_als_solve(const cpn_tensor* t, const cpn_als_config* cfg,
                         cpn_kruskal** factors_out, cpn_trace** trace_out);

/* trace_out, when non-null, receives the partial trace even if the solve
 * fails with CPN_ERR_NUMERIC. */

int64_t cpn_trace_length(const cpn_trace* tr);
double cpn_trace_final_objective(const cpn_trace* tr);
double cpn_trace_wall_seconds(const cpn_trace* tr);
const char* cpn_trace_status(const cpn_trace* tr);
cpn_status cpn_trace_write_csv(const cpn_trace* tr, const char* path);
void cpn_trace_free(cpn_trace* tr);

/* ---- predictors ---- */
typedef struct {
  int64_t epochs;
  int64_t batch_size;
  double learning_rate;
  double adam_beta1;
  double adam_beta2;
  uint64_t seed;
} cpn_train_config;

void cpn_train_config_defaults(cpn_train_config* cfg);

/* kind is one of "tree", "mlp", "cnn", "lstm". Training windows are built
 * over slices [train_begin, train_end). */
cpn_status cpn_train(const cpn_kruskal* factors, const char* kind, int64_t window,
                     int64_t train_begin, int64_t train_end,
                     const cpn_train_config* cfg, cpn_model** out);

cpn_status cpn_model_save(const cpn_model* m, const char* path);
cpn_status cpn_model_load(const char* path, cpn_model** out);
void cpn_model_free(cpn_model* m);

/* Rolling forecast for every (client, transaction) pair over `horizon`
 * slices starting at from_slice; writes the predictions CSV and, when
 * truth_csv_path is non-null, the aligned latent-truth CSV. open_loop
 * nonzero re-reads latent values instead of feeding predictions back. */
cpn_status cpn_predict_rolling_all(const cpn_model* m, const cpn_kruskal* factors,
                                   int64_t from_slice, int64_t horizon, int open_loop,
                                   const char* predictions_csv_path,
                                   const char* truth_csv_path);

/* MAE / Jaccard / cosine / RMSE per transaction plus the ALL row. */
cpn_status cpn_evaluate_files(const char* predictions_csv_path,
                              const char* truth_csv_path,
                              const char* report_csv_path);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CPOPTNET_H */
