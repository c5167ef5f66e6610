#include "cpoptnet.h"

#include <fstream>
#include <memory>
#include <string>

#include "cpoptnet/cpals.hpp"
#include "cpoptnet/cpopt.hpp"
#include "cpoptnet/ingest.hpp"
#include "cpoptnet/pipeline.hpp"
#include "cpoptnet/predictor.hpp"
#include "cpoptnet/tensor.hpp"

using namespace cpoptnet;

struct cpn_tensor {
  SparseTensor3 t;
};
struct cpn_kruskal {
  KruskalTensor k;
};
struct cpn_trace {
  SolveTrace tr;
};
struct cpn_model {
  std::unique_ptr<Predictor> m;
};

namespace {

thread_local std::string g_last_error;

cpn_status fail(cpn_status code, const char* what) {
  g_last_error = what;
  return code;
}

// Maps core exceptions onto the status codes. fn must assign outputs
// itself; nothing is written on failure.
template <typename Fn>
cpn_status guarded(Fn&& fn) {
  try {
    fn();
    return CPN_OK;
  } catch (const ArgumentError& e) {
    return fail(CPN_ERR_ARGUMENT, e.what());
  } catch (const IoError& e) {
    return fail(CPN_ERR_IO, e.what());
  } catch (const NumericalError& e) {
    return fail(CPN_ERR_NUMERIC, e.what());
  } catch (const std::exception& e) {
    return fail(CPN_ERR_NUMERIC, e.what());
  }
}

cpn_status require_args(bool ok) {
  return ok ? CPN_OK : fail(CPN_ERR_ARGUMENT, "null argument");
}

}  // namespace

extern "C" {

const char* cpn_last_error(void) { return g_last_error.c_str(); }

cpn_status cpn_tensor_read(const char* path, cpn_tensor** out) {
  if (auto s = require_args(path && out)) return s;
  return guarded([&] { *out = new cpn_tensor{read_coo_file(path)}; });
}

cpn_status cpn_tensor_write(const cpn_tensor* t, const char* path) {
  if (auto s = require_args(t && path)) return s;
  return guarded([&] { write_coo_file(t->t, path); });
}

cpn_status cpn_tensor_dims(const cpn_tensor* t, int64_t* i, int64_t* j, int64_t* k,
                           int64_t* nnz) {
  if (auto s = require_args(t != nullptr)) return s;
  const auto& sh = t->t.shape();
  if (i) *i = sh.I;
  if (j) *j = sh.J;
  if (k) *k = sh.K;
  if (nnz) *nnz = t->t.nnz();
  return CPN_OK;
}

double cpn_tensor_norm_sq(const cpn_tensor* t) { return t ? t->t.norm_sq() : 0.0; }

void cpn_tensor_free(cpn_tensor* t) { delete t; }

cpn_status cpn_synth(int64_t i, int64_t j, int64_t k, int64_t true_rank,
                     double noise_sigma, double sparsity, uint64_t seed,
                     cpn_tensor** tensor_out, cpn_kruskal** truth_out) {
  if (auto s = require_args(tensor_out != nullptr)) return s;
  return guarded([&] {
    SynthResult r = synth_generate({i, j, k}, true_rank, noise_sigma, sparsity, seed);
    *tensor_out = new cpn_tensor{std::move(r.observed)};
    if (truth_out) *truth_out = new cpn_kruskal{std::move(r.truth)};
  });
}

cpn_status cpn_kruskal_read(const char* path, cpn_kruskal** out) {
  if (auto s = require_args(path && out)) return s;
  return guarded([&] { *out = new cpn_kruskal{read_kruskal_file(path)}; });
}

cpn_status cpn_kruskal_write(const cpn_kruskal* k, const char* path) {
  if (auto s = require_args(k && path)) return s;
  return guarded([&] { write_kruskal_file(k->k, path); });
}

cpn_status cpn_kruskal_dims(const cpn_kruskal* k, int64_t* i, int64_t* j, int64_t* kk,
                            int64_t* rank) {
  if (auto s = require_args(k != nullptr)) return s;
  const auto sh = k->k.shape();
  if (i) *i = sh.I;
  if (j) *j = sh.J;
  if (kk) *kk = sh.K;
  if (rank) *rank = k->k.rank();
  return CPN_OK;
}

void cpn_kruskal_free(cpn_kruskal* k) { delete k; }

cpn_status cpn_objective(const cpn_tensor* t, const cpn_kruskal* k, double* out) {
  if (auto s = require_args(t && k && out)) return s;
  return guarded([&] {
    const CpObjective obj(t->t, k->k.rank());
    *out = obj.value(flatten(k->k));
  });
}

void cpn_ncg_config_defaults(cpn_ncg_config* cfg) {
  if (!cfg) return;
  const NcgConfig d;
  *cfg = {d.rank, d.max_iters, d.grad_tol, d.f_tol, d.wolfe_c1, d.wolfe_c2,
          d.max_line_search_steps, d.seed, d.init_scale, d.restart_threshold};
}

void cpn_als_config_defaults(cpn_als_config* cfg) {
  if (!cfg) return;
  const AlsConfig d;
  *cfg = {d.rank, d.max_iters, d.fit_tol, d.seed, d.ridge, d.init_scale};
}

cpn_status cpn_cpopt_solve(const cpn_tensor* t, const cpn_ncg_config* cfg,
                           cpn_kruskal** factors_out, cpn_trace** trace_out) {
  if (auto s = require_args(t && cfg && factors_out)) return s;
  return guarded([&] {
    NcgConfig c;
    c.rank = cfg->rank;
    c.max_iters = cfg->max_iters;
    c.grad_tol = cfg->grad_tol;
    c.f_tol = cfg->f_tol;
    c.wolfe_c1 = cfg->wolfe_c1;
    c.wolfe_c2 = cfg->wolfe_c2;
    c.max_line_search_steps = cfg->max_line_search_steps;
    c.seed = cfg->seed;
    c.init_scale = cfg->init_scale;
    c.restart_threshold = cfg->restart_threshold;
    try {
      auto [factors, trace] = cpopt_solve(t->t, c);
      *factors_out = new cpn_kruskal{std::move(factors)};
      if (trace_out) *trace_out = new cpn_trace{std::move(trace)};
    } catch (SolveAborted& e) {
      if (trace_out) *trace_out = new cpn_trace{std::move(e.trace)};
      throw NumericalError(e.what());
    }
  });
}

cpn_status cpn_als_solve(const cpn_tensor* t, const cpn_als_config* cfg,
                         cpn_kruskal** factors_out, cpn_trace** trace_out) {
  if (auto s = require_args(t && cfg && factors_out)) return s;
  return guarded([&] {
    AlsConfig c;
    c.rank = cfg->rank;
    c.max_iters = cfg->max_iters;
    c.fit_tol = cfg->fit_tol;
    c.seed = cfg->seed;
    c.ridge = cfg->ridge;
    c.init_scale = cfg->init_scale;
    try {
      auto [factors, trace] = als_solve(t->t, c);
      *factors_out = new cpn_kruskal{std::move(factors)};
      if (trace_out) *trace_out = new cpn_trace{std::move(trace)};
    } catch (SolveAborted& e) {
      if (trace_out) *trace_out = new cpn_trace{std::move(e.trace)};
      throw NumericalError(e.what());
    }
  });
}

int64_t cpn_trace_length(const cpn_trace* tr) {
  return tr ? static_cast<int64_t>(tr->tr.records.size()) : 0;
}

double cpn_trace_final_objective(const cpn_trace* tr) {
  return tr && !tr->tr.records.empty() ? tr->tr.final_objective() : 0.0;
}

double cpn_trace_wall_seconds(const cpn_trace* tr) {
  return tr ? tr->tr.wall_seconds : 0.0;
}

const char* cpn_trace_status(const cpn_trace* tr) {
  return tr ? to_string(tr->tr.status) : "";
}

cpn_status cpn_trace_write_csv(const cpn_trace* tr, const char* path) {
  if (auto s = require_args(tr && path)) return s;
  return guarded([&] { write_trace_csv_file(tr->tr, path); });
}

void cpn_trace_free(cpn_trace* tr) { delete tr; }

void cpn_train_config_defaults(cpn_train_config* cfg) {
  if (!cfg) return;
  const TrainConfig d;
  *cfg = {d.epochs, d.batch_size, d.learning_rate, d.adam_beta1, d.adam_beta2, d.seed};
}

cpn_status cpn_train(const cpn_kruskal* factors, const char* kind, int64_t window,
                     int64_t train_begin, int64_t train_end,
                     const cpn_train_config* cfg, cpn_model** out) {
  if (auto s = require_args(factors && kind && cfg && out)) return s;
  return guarded([&] {
    const ModelKind mk = model_kind_from_string(kind);
    TrainConfig c;
    c.epochs = cfg->epochs;
    c.batch_size = cfg->batch_size;
    c.learning_rate = cfg->learning_rate;
    c.adam_beta1 = cfg->adam_beta1;
    c.adam_beta2 = cfg->adam_beta2;
    c.seed = cfg->seed;
    const SeriesDataset ds = build_dataset(factors->k, window, train_begin, train_end);
    TrainResult r = train(mk, ds, c);
    *out = new cpn_model{std::move(r.model)};
  });
}

cpn_status cpn_model_save(const cpn_model* m, const char* path) {
  if (auto s = require_args(m && path)) return s;
  return guarded([&] { save_predictor_file(*m->m, path); });
}

cpn_status cpn_model_load(const char* path, cpn_model** out) {
  if (auto s = require_args(path && out)) return s;
  return guarded([&] { *out = new cpn_model{load_predictor_file(path)}; });
}

void cpn_model_free(cpn_model* m) { delete m; }

cpn_status cpn_predict_rolling_all(const cpn_model* m, const cpn_kruskal* factors,
                                   int64_t from_slice, int64_t horizon, int open_loop,
                                   const char* predictions_csv_path,
                                   const char* truth_csv_path) {
  if (auto s = require_args(m && factors && predictions_csv_path)) return s;
  return guarded([&] {
    const auto rows =
        predict_all_pairs(*m->m, factors->k, from_slice, horizon, open_loop != 0);
    std::ofstream pred_out(predictions_csv_path);
    if (!pred_out)
      throw IoError(std::string("cannot open ") + predictions_csv_path +
                    " for writing");
    write_predictions_csv(rows, pred_out);
    if (truth_csv_path) {
      std::ofstream truth_out(truth_csv_path);
      if (!truth_out)
        throw IoError(std::string("cannot open ") + truth_csv_path + " for writing");
      write_truth_csv(latent_truth(factors->k, from_slice, horizon), truth_out);
    }
  });
}

cpn_status cpn_evaluate_files(const char* predictions_csv_path,
                              const char* truth_csv_path,
                              const char* report_csv_path) {
  if (auto s = require_args(predictions_csv_path && truth_csv_path && report_csv_path))
    return s;
  return guarded([&] {
    std::ifstream pred_in(predictions_csv_path);
    if (!pred_in)
      throw IoError(std::string("cannot open ") + predictions_csv_path);
    std::ifstream truth_in(truth_csv_path);
    if (!truth_in) throw IoError(std::string("cannot open ") + truth_csv_path);
    const auto report =
        evaluate_predictions(read_predictions_csv(pred_in), read_truth_csv(truth_in));
    std::ofstream out(report_csv_path);
    if (!out)
      throw IoError(std::string("cannot open ") + report_csv_path + " for writing");
    write_report_csv(report, out);
  });
}

}  // extern "C"
