// cpoptnet command line: synth -> decompose -> predict -> evaluate.
// Talks to the core exclusively through the C API in cpoptnet.h.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cpoptnet.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitArgument = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

int exit_code(cpn_status s) { return static_cast<int>(s); }

[[noreturn]] void die(cpn_status s) {
  std::cerr << "error: " << cpn_last_error() << "\n";
  std::exit(exit_code(s));
}

void check(cpn_status s) {
  if (s != CPN_OK) die(s);
}

// One base --seed fans out to the stages by fixed offsets so partial
// reruns stay consistent with full ones.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stage) {
  return base + stage;
}

void write_manifest(const fs::path& out_dir, const json& manifest) {
  std::ofstream out(out_dir / "run_manifest.json");
  if (!out) {
    std::cerr << "error: cannot write manifest in " << out_dir << "\n";
    std::exit(kExitIo);
  }
  out << manifest.dump(2) << "\n";
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory " << out << "\n";
    std::exit(kExitIo);
  }
}

struct SynthArgs {
  std::int64_t clients = 200, labels = 22, slices = 16, rank = 25;
  double noise = 0.1, sparsity = 0.8;
  std::uint64_t seed = 0;
  std::string out = "synth_out";
};

int cmd_synth(const SynthArgs& a) {
  ensure_out_dir(a.out);
  cpn_tensor* t = nullptr;
  cpn_kruskal* truth = nullptr;
  check(cpn_synth(a.clients, a.labels, a.slices, a.rank, a.noise, a.sparsity,
                  derive_seed(a.seed, 0), &t, &truth));
  const fs::path out(a.out);
  check(cpn_tensor_write(t, (out / "tensor.coo").string().c_str()));
  check(cpn_kruskal_write(truth, (out / "truth.kruskal").string().c_str()));
  std::int64_t nnz = 0;
  cpn_tensor_dims(t, nullptr, nullptr, nullptr, &nnz);
  cpn_tensor_free(t);
  cpn_kruskal_free(truth);

  write_manifest(out, json{{"command", "synth"},
                           {"clients", a.clients},
                           {"labels", a.labels},
                           {"slices", a.slices},
                           {"rank", a.rank},
                           {"noise", a.noise},
                           {"sparsity", a.sparsity},
                           {"seed", a.seed},
                           {"outputs", {"tensor.coo", "truth.kruskal"}}});
  std::cout << "wrote " << (out / "tensor.coo").string() << " (" << nnz
            << " nonzeros) and " << (out / "truth.kruskal").string() << "\n";
  return 0;
}

struct DecomposeArgs {
  std::string input;
  std::int64_t rank = 25;
  std::string solver = "cpopt";
  std::uint64_t seed = 0;
  std::int64_t max_iters = 0;  // 0 keeps the solver default
  std::string out = "decompose_out";
};

// Runs one solver, writing factors + trace; the trace is written even
// when the solve aborts numerically.
cpn_status run_solver(const std::string& which, cpn_tensor* t, const DecomposeArgs& a,
                      const fs::path& factors_path, const fs::path& trace_path,
                      double* final_wc) {
  cpn_kruskal* factors = nullptr;
  cpn_trace* trace = nullptr;
  cpn_status s;
  if (which == "cpopt") {
    cpn_ncg_config cfg;
    cpn_ncg_config_defaults(&cfg);
    cfg.rank = a.rank;
    cfg.seed = derive_seed(a.seed, 1);
    if (a.max_iters > 0) cfg.max_iters = a.max_iters;
    s = cpn_cpopt_solve(t, &cfg, &factors, &trace);
  } else {
    cpn_als_config cfg;
    cpn_als_config_defaults(&cfg);
    cfg.rank = a.rank;
    cfg.seed = derive_seed(a.seed, 2);
    if (a.max_iters > 0) cfg.max_iters = a.max_iters;
    s = cpn_als_solve(t, &cfg, &factors, &trace);
  }
  if (trace) {
    cpn_trace_write_csv(trace, trace_path.string().c_str());
    *final_wc = cpn_trace_final_objective(trace);
    std::cout << which << ": W=" << *final_wc << " status=" << cpn_trace_status(trace)
              << " iters=" << cpn_trace_length(trace) - 1
              << " wall=" << cpn_trace_wall_seconds(trace) << "s\n";
  }
  if (s == CPN_OK) check(cpn_kruskal_write(factors, factors_path.string().c_str()));
  cpn_kruskal_free(factors);
  cpn_trace_free(trace);
  return s;
}

int cmd_decompose(const DecomposeArgs& a) {
  ensure_out_dir(a.out);
  cpn_tensor* t = nullptr;
  check(cpn_tensor_read(a.input.c_str(), &t));
  const fs::path out(a.out);

  cpn_status status = CPN_OK;
  if (a.solver == "both") {
    double wc_cpopt = 0, wc_als = 0;
    const cpn_status s1 = run_solver("cpopt", t, a, out / "factors_cpopt.kruskal",
                                     out / "trace_cpopt.csv", &wc_cpopt);
    const cpn_status s2 = run_solver("als", t, a, out / "factors_als.kruskal",
                                     out / "trace_als.csv", &wc_als);
    std::ofstream cmp(out / "comparison.csv");
    cmp << "solver,objective\n";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", wc_cpopt);
    cmp << "cpopt," << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", wc_als);
    cmp << "als," << buf << "\n";
    status = s1 != CPN_OK ? s1 : s2;
  } else {
    double wc = 0;
    status = run_solver(a.solver, t, a, out / "factors.kruskal", out / "trace.csv", &wc);
  }
  cpn_tensor_free(t);

  write_manifest(out, json{{"command", "decompose"},
                           {"input", a.input},
                           {"rank", a.rank},
                           {"solver", a.solver},
                           {"seed", a.seed},
                           {"max_iters", a.max_iters}});
  if (status != CPN_OK) die(status);
  return 0;
}

struct PredictArgs {
  std::string factors;
  std::string model = "lstm";
  std::int64_t window = 3;
  std::int64_t train_slices = 12;
  std::int64_t horizon = 3;
  std::int64_t epochs = 200;
  std::uint64_t seed = 0;
  bool open_loop = false;
  std::string out = "predict_out";
};

int cmd_predict(const PredictArgs& a) {
  ensure_out_dir(a.out);
  cpn_kruskal* factors = nullptr;
  check(cpn_kruskal_read(a.factors.c_str(), &factors));

  cpn_train_config cfg;
  cpn_train_config_defaults(&cfg);
  cfg.seed = derive_seed(a.seed, 3);
  cfg.epochs = a.epochs;

  cpn_model* model = nullptr;
  check(cpn_train(factors, a.model.c_str(), a.window, 0, a.train_slices, &cfg, &model));

  const fs::path out(a.out);
  check(cpn_model_save(model, (out / "model.txt").string().c_str()));
  check(cpn_predict_rolling_all(model, factors, a.train_slices, a.horizon,
                                a.open_loop ? 1 : 0,
                                (out / "predictions.csv").string().c_str(),
                                (out / "truth.csv").string().c_str()));
  cpn_model_free(model);
  cpn_kruskal_free(factors);

  write_manifest(out, json{{"command", "predict"},
                           {"factors", a.factors},
                           {"model", a.model},
                           {"window", a.window},
                           {"train_slices", a.train_slices},
                           {"horizon", a.horizon},
                           {"epochs", a.epochs},
                           {"open_loop", a.open_loop},
                           {"seed", a.seed}});
  std::cout << "wrote " << (out / "predictions.csv").string() << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string predictions, truth;
  std::string out = "evaluate_out";
};

int cmd_evaluate(const EvaluateArgs& a) {
  ensure_out_dir(a.out);
  const fs::path out(a.out);
  check(cpn_evaluate_files(a.predictions.c_str(), a.truth.c_str(),
                           (out / "report.csv").string().c_str()));
  write_manifest(out, json{{"command", "evaluate"},
                           {"predictions", a.predictions},
                           {"truth", a.truth}});
  std::cout << "wrote " << (out / "report.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse CP tensor decomposition with latent-series forecasting"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic activity tensor");
  synth->add_option("--clients", sa.clients);
  synth->add_option("--labels", sa.labels);
  synth->add_option("--slices", sa.slices);
  synth->add_option("--rank", sa.rank, "Ground-truth rank");
  synth->add_option("--noise", sa.noise, "Gaussian noise sigma");
  synth->add_option("--sparsity", sa.sparsity, "Fraction of cells zeroed");
  synth->add_option("--seed", sa.seed);
  synth->add_option("--out", sa.out);

  DecomposeArgs da;
  auto* dec = app.add_subcommand("decompose", "Factorize a COO tensor");
  dec->add_option("--input", da.input)->required();
  dec->add_option("--rank", da.rank);
  dec->add_option("--solver", da.solver)->check(CLI::IsMember({"cpopt", "als", "both"}));
  dec->add_option("--seed", da.seed);
  dec->add_option("--max-iters", da.max_iters);
  dec->add_option("--out", da.out);

  PredictArgs pa;
  auto* pred = app.add_subcommand("predict", "Train a predictor and roll a forecast");
  pred->add_option("--factors", pa.factors)->required();
  pred->add_option("--model", pa.model)
      ->check(CLI::IsMember({"tree", "mlp", "cnn", "lstm"}));
  pred->add_option("--window", pa.window);
  pred->add_option("--train-slices", pa.train_slices);
  pred->add_option("--horizon", pa.horizon);
  pred->add_option("--epochs", pa.epochs);
  pred->add_option("--seed", pa.seed);
  pred->add_flag("--open-loop", pa.open_loop);
  pred->add_option("--out", pa.out);

  EvaluateArgs ea;
  auto* ev = app.add_subcommand("evaluate", "Score predictions against truth");
  ev->add_option("--predictions", ea.predictions)->required();
  ev->add_option("--truth", ea.truth)->required();
  ev->add_option("--out", ea.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitArgument;
  }

  try {
    if (*synth) return cmd_synth(sa);
    if (*dec) return cmd_decompose(da);
    if (*pred) return cmd_predict(pa);
    return cmd_evaluate(ea);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
