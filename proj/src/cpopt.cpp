#include "cpoptnet/cpopt.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>

namespace cpoptnet {

void NcgConfig::validate() const {
  if (rank < 1) throw ArgumentError("NcgConfig: rank must be >= 1");
  if (max_iters < 1) throw ArgumentError("NcgConfig: max_iters must be >= 1");
  if (grad_tol <= 0 || f_tol <= 0) throw ArgumentError("NcgConfig: tolerances must be > 0");
  if (!(0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1))
    throw ArgumentError("NcgConfig: need 0 < c1 < c2 < 1");
  if (max_line_search_steps < 1)
    throw ArgumentError("NcgConfig: max_line_search_steps must be >= 1");
  if (init_scale <= 0) throw ArgumentError("NcgConfig: init_scale must be > 0");
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged_by_gradient: return "converged-by-gradient";
    case SolveStatus::converged_by_objective: return "converged-by-objective";
    default: return "max-iters";
  }
}

void write_trace_csv(const SolveTrace& trace, std::ostream& out) {
  out << "iter,objective,grad_norm,alpha,ls_evals\n";
  for (const auto& r : trace.records)
    out << r.iter << ',' << format_double(r.objective) << ','
        << format_double(r.grad_norm) << ',' << format_double(r.alpha) << ','
        << r.ls_evals << '\n';
}

void write_trace_csv_file(const SolveTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_trace_csv(trace, out);
}

CpObjective::CpObjective(const SparseTensor3& t, Index rank)
    : t_(t), rank_(rank), half_norm_sq_(0.5 * t.norm_sq()) {
  if (rank < 1) throw ArgumentError("CpObjective: rank must be >= 1");
}

double CpObjective::value(const ParamVector& x) const {
  const KruskalTensor k = unflatten(x, t_.shape(), rank_);
  return half_norm_sq_ - inner_product_sparse_kruskal(t_, k) +
         0.5 * kruskal_norm_sq(k);
}

double CpObjective::value_and_gradient(const ParamVector& x, ParamVector& grad) const {
  const KruskalTensor k = unflatten(x, t_.shape(), rank_);
  const Matrix m1 = mttkrp(t_, k, 1);
  const Matrix m2 = mttkrp(t_, k, 2);
  const Matrix m3 = mttkrp(t_, k, 3);
  const Matrix ata = k.A().transpose() * k.A();
  const Matrix btb = k.B().transpose() * k.B();
  const Matrix ctc = k.C().transpose() * k.C();

  const double inner = k.A().cwiseProduct(m1).sum();
  const double norm_sq = ata.cwiseProduct(btb).cwiseProduct(ctc).sum();
  const double f = half_norm_sq_ - inner + 0.5 * norm_sq;

  const Matrix ga = -m1 + k.A() * btb.cwiseProduct(ctc);
  const Matrix gb = -m2 + k.B() * ata.cwiseProduct(ctc);
  const Matrix gc = -m3 + k.C() * ata.cwiseProduct(btb);
  grad = flatten(KruskalTensor(ga, gb, gc));
  return f;
}

namespace {

struct ZoomState {
  double lo, phi_lo, dphi_lo;
  double hi, phi_hi;
};

}  // namespace

LineSearchResult strong_wolfe_search(const RayFn& phi, double phi0, double dphi0,
                                     double alpha0, const NcgConfig& cfg) {
  LineSearchResult res;
  if (dphi0 >= 0) {
    res.status = LineSearchStatus::non_descent;
    return res;
  }
  const double c1 = cfg.wolfe_c1, c2 = cfg.wolfe_c2;
  const Index budget = cfg.max_line_search_steps;
  double best_alpha = 0.0, best_phi = phi0;

  auto eval = [&](double a, double* d) {
    double f = phi(a, d);
    ++res.evals;
    if (std::isfinite(f) && f < best_phi) {
      best_phi = f;
      best_alpha = a;
    }
    return f;
  };
  auto armijo_ok = [&](double a, double f) { return f <= phi0 + c1 * a * dphi0; };

  // Zoom phase: shrink [lo, hi] until the curvature condition holds.
  auto zoom = [&](ZoomState z) -> LineSearchResult {
    while (res.evals < budget) {
      const double a = 0.5 * (z.lo + z.hi);
      double d;
      const double f = eval(a, &d);
      if (!armijo_ok(a, f) || f >= z.phi_lo) {
        z.hi = a;
        z.phi_hi = f;
      } else {
        if (std::abs(d) <= c2 * std::abs(dphi0)) {
          res.alpha = a;
          res.status = LineSearchStatus::ok;
          return res;
        }
        if (d * (z.hi - z.lo) >= 0) {
          z.hi = z.lo;
          z.phi_hi = z.phi_lo;
        }
        z.lo = a;
        z.phi_lo = f;
        z.dphi_lo = d;
      }
      if (std::abs(z.hi - z.lo) <= 1e-16 * std::max(1.0, std::abs(z.lo))) break;
    }
    res.alpha = best_alpha;
    res.status = LineSearchStatus::best_decrease;
    return res;
  };

  double alpha_prev = 0.0, phi_prev = phi0, dphi_prev = dphi0;
  double alpha = alpha0 > 0 ? alpha0 : 1.0;
  bool first = true;
  while (res.evals < budget) {
    double d;
    const double f = eval(alpha, &d);
    if (!std::isfinite(f)) {
      // Overshot into overflow territory; treat as an upper bracket.
      return zoom({alpha_prev, phi_prev, dphi_prev, alpha, f});
    }
    if (!armijo_ok(alpha, f) || (!first && f >= phi_prev))
      return zoom({alpha_prev, phi_prev, dphi_prev, alpha, f});
    if (std::abs(d) <= c2 * std::abs(dphi0)) {
      res.alpha = alpha;
      res.status = LineSearchStatus::ok;
      return res;
    }
    if (d >= 0) return zoom({alpha, f, d, alpha_prev, phi_prev});
    alpha_prev = alpha;
    phi_prev = f;
    dphi_prev = d;
    alpha = std::min(alpha * 2.0, 1e10);
    first = false;
  }
  res.alpha = best_alpha;
  res.status = LineSearchStatus::best_decrease;
  return res;
}

std::pair<KruskalTensor, SolveTrace> cpopt_solve(const SparseTensor3& t,
                                                 const NcgConfig& cfg) {
  cfg.validate();
  if (t.nnz() == 0) throw ArgumentError("cpopt_solve: tensor has no observed entries");
  const auto start = std::chrono::steady_clock::now();

  const CpObjective obj(t, cfg.rank);
  const Shape3 shape = t.shape();

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> dist(-cfg.init_scale, cfg.init_scale);
  ParamVector x(obj.dim());
  for (Index n = 0; n < x.size(); ++n) x[n] = dist(rng);

  SolveTrace trace;
  ParamVector g(x.size()), g_new(x.size());
  double f = obj.value_and_gradient(x, g);
  if (!std::isfinite(f)) throw NumericalError("cpopt_solve: non-finite initial objective");
  const double g0_norm = std::max(g.norm(), 1e-300);
  trace.records.push_back({0, f, g.norm(), 0.0, 0});

  ParamVector d = -g;
  double alpha_next = 1.0;
  trace.status = SolveStatus::max_iters;

  for (Index n = 1; n <= cfg.max_iters; ++n) {
    double gd = g.dot(d);
    // Require the direction to make a minimum descent angle with -g;
    // otherwise fall back to steepest descent for this iteration.
    if (gd >= 0 || -gd < cfg.restart_threshold * g.norm() * d.norm()) {
      d = -g;
      gd = -g.squaredNorm();
      alpha_next = 1.0;
    }

    ParamVector xt(x.size()), gt(x.size());
    const RayFn ray = [&](double a, double* deriv) {
      xt = x + a * d;
      const double fv = obj.value_and_gradient(xt, gt);
      if (deriv) *deriv = gt.dot(d);
      return fv;
    };
    const LineSearchResult ls = strong_wolfe_search(ray, f, gd, alpha_next, cfg);
    if (ls.alpha <= 0.0) {
      // No decrease along steepest descent: numerically stationary.
      trace.status = SolveStatus::converged_by_objective;
      break;
    }

    const ParamVector x_new = x + ls.alpha * d;
    const double f_new = obj.value_and_gradient(x_new, g_new);
    if (!std::isfinite(f_new))
      throw SolveAborted("cpopt_solve: objective became non-finite at iteration " +
                             std::to_string(n),
                         std::move(trace));
    trace.records.push_back({n, f_new, g_new.norm(), ls.alpha, ls.evals});

    if (g_new.norm() <= cfg.grad_tol * g0_norm) {
      x = x_new;
      trace.status = SolveStatus::converged_by_gradient;
      break;
    }
    const bool tiny_decrease = (f - f_new) <= cfg.f_tol * std::max(1.0, std::abs(f));

    const ParamVector y = g_new - g;
    const double denom = d.dot(y);
    if (std::abs(denom) < 1e-14) {
      d = -g_new;
      alpha_next = 1.0;
    } else {
      const double beta = g_new.dot(y) / denom;
      d = -g_new + beta * d;
      const double gd_new = g_new.dot(d);
      alpha_next = gd_new < 0 ? std::clamp(ls.alpha * gd / gd_new, 1e-12, 1e6) : 1.0;
    }
    x = x_new;
    g = g_new;
    f = f_new;
    if (tiny_decrease) {
      trace.status = SolveStatus::converged_by_objective;
      break;
    }
  }

  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {unflatten(x, shape, cfg.rank), std::move(trace)};
}

}  // namespace cpoptnet
