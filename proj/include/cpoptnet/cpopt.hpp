#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cpoptnet/tensor.hpp"

namespace cpoptnet {

struct NcgConfig {
  Index rank = 1;
  Index max_iters = 1000;
  double grad_tol = 1e-8;   // relative to the initial gradient norm
  double f_tol = 1e-12;     // relative objective decrease
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.1;
  Index max_line_search_steps = 50;
  std::uint64_t seed = 0;
  double init_scale = 0.1;
  double restart_threshold = 0.1;  // minimum descent angle before a restart

  void validate() const;
};

enum class SolveStatus { converged_by_gradient, converged_by_objective, max_iters };

struct TraceRecord {
  Index iter;
  double objective;
  double grad_norm;
  double alpha;
  Index ls_evals;
};

struct SolveTrace {
  std::vector<TraceRecord> records;
  SolveStatus status = SolveStatus::max_iters;
  double wall_seconds = 0.0;  // reported, never serialized

  double final_objective() const { return records.back().objective; }
};

const char* to_string(SolveStatus s);

// Numeric breakdown mid-solve; carries the trace accumulated so far so
// callers can still persist it.
class SolveAborted : public NumericalError {
public:
  SolveAborted(const std::string& msg, SolveTrace trace)
      : NumericalError(msg), trace(std::move(trace)) {}
  SolveTrace trace;
};

// CSV columns: iter,objective,grad_norm,alpha,ls_evals
void write_trace_csv(const SolveTrace& trace, std::ostream& out);
void write_trace_csv_file(const SolveTrace& trace, const std::string& path);

// The least-squares fit objective over all cells of the tensor,
// W(x) = 1/2 ||X||^2 - <X, K(x)> + 1/2 ||K(x)||^2, with its analytic
// gradient per factor block. The constant first summand is computed once.
class CpObjective {
public:
  CpObjective(const SparseTensor3& t, Index rank);

  Index dim() const { return rank_ * (t_.shape().I + t_.shape().J + t_.shape().K); }
  Index rank() const { return rank_; }
  double half_data_norm_sq() const { return half_norm_sq_; }

  double value(const ParamVector& x) const;
  double value_and_gradient(const ParamVector& x, ParamVector& grad) const;

private:
  const SparseTensor3& t_;
  Index rank_;
  double half_norm_sq_;
};

enum class LineSearchStatus { ok, best_decrease, non_descent };

struct LineSearchResult {
  double alpha = 0.0;
  Index evals = 0;
  LineSearchStatus status = LineSearchStatus::ok;
};

// phi(alpha) evaluates the objective along the ray and, when grad is
// non-null, the directional derivative at the same point.
using RayFn = std::function<double(double alpha, double* deriv)>;

// Bracket-and-zoom strong Wolfe search. phi0/dphi0 are the values at
// alpha = 0. Falls back to the best Armijo point when the curvature
// condition cannot be met within the evaluation budget.
LineSearchResult strong_wolfe_search(const RayFn& phi, double phi0, double dphi0,
                                     double alpha0, const NcgConfig& cfg);

// Nonlinear conjugate gradient with Hestenes-Stiefel direction mixing.
// First step is steepest descent; degenerate beta or a non-descent
// direction restarts with steepest descent for that iteration.
std::pair<KruskalTensor, SolveTrace> cpopt_solve(const SparseTensor3& t,
                                                 const NcgConfig& cfg);

}  // namespace cpoptnet
