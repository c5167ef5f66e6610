// Shared brute-force oracles and generators for the test suites. These
// stay independent of the library's fast paths: everything here is
// straight loops over materialized values.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cpoptnet/tensor.hpp"

namespace testsupport {

using cpoptnet::CooEntry;
using cpoptnet::DenseTensor3;
using cpoptnet::Index;
using cpoptnet::KruskalTensor;
using cpoptnet::Matrix;
using cpoptnet::Shape3;
using cpoptnet::SparseTensor3;
using cpoptnet::Vector;

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

inline KruskalTensor random_kruskal(Shape3 s, Index rank, std::mt19937_64& rng,
                                    double scale = 1.0) {
  return KruskalTensor(random_matrix(s.I, rank, rng, scale),
                       random_matrix(s.J, rank, rng, scale),
                       random_matrix(s.K, rank, rng, scale));
}

// Random sparse tensor with roughly `density` of its cells observed.
inline SparseTensor3 random_sparse(Shape3 s, double density, std::mt19937_64& rng,
                                   double scale = 1.0) {
  std::uniform_real_distribution<double> keep(0.0, 1.0);
  std::uniform_real_distribution<double> val(-scale, scale);
  std::vector<CooEntry> entries;
  for (Index i = 0; i < s.I; ++i)
    for (Index j = 0; j < s.J; ++j)
      for (Index k = 0; k < s.K; ++k)
        if (keep(rng) < density) entries.push_back({i, j, k, val(rng)});
  if (entries.empty()) entries.push_back({0, 0, 0, val(rng)});
  return SparseTensor3(s, std::move(entries));
}

inline SparseTensor3 sparse_from_dense(const DenseTensor3& d) {
  std::vector<CooEntry> entries;
  const auto& s = d.shape();
  for (Index i = 0; i < s.I; ++i)
    for (Index j = 0; j < s.J; ++j)
      for (Index k = 0; k < s.K; ++k)
        if (d(i, j, k) != 0.0) entries.push_back({i, j, k, d(i, j, k)});
  return SparseTensor3(s, std::move(entries));
}

inline DenseTensor3 dense_from_sparse(const SparseTensor3& t) {
  DenseTensor3 d = DenseTensor3::zeros(t.shape());
  for (const auto& e : t.entries()) d.at(e.i, e.j, e.k) = e.value;
  return d;
}

// Triple-loop reconstruction, the oracle for every Kruskal kernel.
inline DenseTensor3 brute_force_dense(const KruskalTensor& k) {
  const auto s = k.shape();
  DenseTensor3 d = DenseTensor3::zeros(s);
  for (Index i = 0; i < s.I; ++i)
    for (Index j = 0; j < s.J; ++j)
      for (Index kk = 0; kk < s.K; ++kk) {
        double acc = 0.0;
        for (Index r = 0; r < k.rank(); ++r)
          acc += k.A()(i, r) * k.B()(j, r) * k.C()(kk, r);
        d.at(i, j, kk) = acc;
      }
  return d;
}

// 1/2 ||X - K||^2 over all cells, fully materialized.
inline double brute_force_objective(const SparseTensor3& t, const KruskalTensor& k) {
  const DenseTensor3 x = dense_from_sparse(t);
  const DenseTensor3 m = brute_force_dense(k);
  double acc = 0.0;
  const auto& s = t.shape();
  for (Index i = 0; i < s.I; ++i)
    for (Index j = 0; j < s.J; ++j)
      for (Index kk = 0; kk < s.K; ++kk) {
        const double d = x(i, j, kk) - m(i, j, kk);
        acc += d * d;
      }
  return 0.5 * acc;
}

// Central finite differences of a scalar function of a flat vector.
template <typename Fn>
Vector finite_difference_gradient(const Fn& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  Vector xp = x;
  for (Index n = 0; n < x.size(); ++n) {
    const double orig = xp[n];
    xp[n] = orig + h;
    const double fp = f(xp);
    xp[n] = orig - h;
    const double fm = f(xp);
    xp[n] = orig;
    g[n] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Componentwise relative error with max(|analytic|, 1) as denominator.
inline double max_relative_error(const Vector& analytic, const Vector& numeric) {
  double worst = 0.0;
  for (Index n = 0; n < analytic.size(); ++n) {
    const double denom = std::max(std::abs(analytic[n]), 1.0);
    worst = std::max(worst, std::abs(analytic[n] - numeric[n]) / denom);
  }
  return worst;
}

}  // namespace testsupport
