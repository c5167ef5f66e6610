#include "cpoptnet/cpals.hpp"

#include <chrono>
#include <cmath>
#include <random>

namespace cpoptnet {

void AlsConfig::validate() const {
  if (rank < 1) throw ArgumentError("AlsConfig: rank must be >= 1");
  if (max_iters < 1) throw ArgumentError("AlsConfig: max_iters must be >= 1");
  if (fit_tol <= 0) throw ArgumentError("AlsConfig: fit_tol must be > 0");
  if (ridge < 0) throw ArgumentError("AlsConfig: ridge must be >= 0");
}

namespace {

// Solve factor * (gram + ridge I) = rhs for the factor, rowwise.
Matrix gram_solve(const Matrix& rhs, const Matrix& gram, double ridge) {
  Matrix lhs = gram;
  lhs.diagonal().array() += ridge;
  Eigen::LDLT<Matrix> ldlt(lhs);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("als_solve: Gram matrix factorization failed");
  Matrix sol = ldlt.solve(rhs.transpose()).transpose();
  if (!sol.allFinite())
    throw NumericalError("als_solve: singular Gram matrix despite ridge");
  return sol;
}

// Normalize columns of m to unit norm; absorb the norms into next.
void rebalance(Matrix& m, Matrix& next) {
  for (Index r = 0; r < m.cols(); ++r) {
    const double nrm = m.col(r).norm();
    if (nrm > 0) {
      m.col(r) /= nrm;
      next.col(r) *= nrm;
    }
  }
}

}  // namespace

std::pair<KruskalTensor, SolveTrace> als_solve(const SparseTensor3& t,
                                               const AlsConfig& cfg) {
  cfg.validate();
  if (t.nnz() == 0) throw ArgumentError("als_solve: tensor has no observed entries");
  const auto start = std::chrono::steady_clock::now();

  const Shape3 shape = t.shape();
  const Index r = cfg.rank;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> dist(-cfg.init_scale, cfg.init_scale);
  Matrix a(shape.I, r), b(shape.J, r), c(shape.K, r);
  for (Matrix* m : {&a, &b, &c})
    for (Index col = 0; col < r; ++col)
      for (Index row = 0; row < m->rows(); ++row) (*m)(row, col) = dist(rng);

  const CpObjective obj(t, r);
  const double t_norm = std::sqrt(t.norm_sq());
  SolveTrace trace;
  trace.status = SolveStatus::max_iters;
  trace.records.push_back(
      {0, obj.value(flatten(KruskalTensor(a, b, c))), 0.0, 0.0, 0});

  double fit_prev = -1.0;
  for (Index sweep = 1; sweep <= cfg.max_iters; ++sweep) {
    {
      KruskalTensor cur(a, b, c);
      const Matrix btb = b.transpose() * b;
      const Matrix ctc = c.transpose() * c;
      a = gram_solve(mttkrp(t, cur, 1), btb.cwiseProduct(ctc), cfg.ridge);
      rebalance(a, b);
    }
    {
      KruskalTensor cur(a, b, c);
      const Matrix ata = a.transpose() * a;
      const Matrix ctc = c.transpose() * c;
      b = gram_solve(mttkrp(t, cur, 2), ata.cwiseProduct(ctc), cfg.ridge);
      rebalance(b, c);
    }
    {
      KruskalTensor cur(a, b, c);
      const Matrix ata = a.transpose() * a;
      const Matrix btb = b.transpose() * b;
      c = gram_solve(mttkrp(t, cur, 3), ata.cwiseProduct(btb), cfg.ridge);
      rebalance(c, a);
    }

    const double w = obj.value(flatten(KruskalTensor(a, b, c)));
    if (!std::isfinite(w))
      throw SolveAborted("als_solve: objective became non-finite at sweep " +
                             std::to_string(sweep),
                         std::move(trace));
    trace.records.push_back({sweep, w, 0.0, 0.0, 0});

    const double fit = 1.0 - std::sqrt(std::max(2.0 * w, 0.0)) / t_norm;
    if (sweep > 1 && std::abs(fit - fit_prev) < cfg.fit_tol) {
      trace.status = SolveStatus::converged_by_objective;
      break;
    }
    fit_prev = fit;
  }

  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {KruskalTensor(std::move(a), std::move(b), std::move(c)), std::move(trace)};
}

}  // namespace cpoptnet
