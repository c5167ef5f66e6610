#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cpoptnet/errors.hpp"

namespace cpoptnet {

using Index = std::int64_t;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Shape3 {
  Index I = 0, J = 0, K = 0;

  Index cells() const { return I * J * K; }
  bool operator==(const Shape3&) const = default;
};

struct CooEntry {
  Index i, j, k;
  double value;
};

// Third-order tensor stored as COO nonzeros. Immutable after construction.
// Unobserved cells are exact zeros; sparsity is a storage device only.
class SparseTensor3 {
public:
  SparseTensor3(Shape3 shape, std::vector<CooEntry> entries);

  const Shape3& shape() const { return shape_; }
  const std::vector<CooEntry>& entries() const { return entries_; }
  Index nnz() const { return static_cast<Index>(entries_.size()); }

  double norm_sq() const;  // squared Frobenius norm

private:
  Shape3 shape_;
  std::vector<CooEntry> entries_;
};

// Fully materialized tensor, mode-1 fastest: value(i,j,k) at i + I*(j + J*k).
class DenseTensor3 {
public:
  DenseTensor3(Shape3 shape, Vector values);
  static DenseTensor3 zeros(Shape3 shape);

  const Shape3& shape() const { return shape_; }
  const Vector& values() const { return values_; }

  double operator()(Index i, Index j, Index k) const {
    return values_[i + shape_.I * (j + shape_.J * k)];
  }
  double& at(Index i, Index j, Index k) {
    return values_[i + shape_.I * (j + shape_.J * k)];
  }

private:
  Shape3 shape_;
  Vector values_;
};

// Rank-R factored representation: A (I x R), B (J x R), C (K x R).
// No column weights; scale lives in the factors.
class KruskalTensor {
public:
  KruskalTensor(Matrix a, Matrix b, Matrix c);

  Index rank() const { return a_.cols(); }
  Shape3 shape() const { return {a_.rows(), b_.rows(), c_.rows()}; }

  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  const Matrix& C() const { return c_; }

  // Denoised per-(i,j) time series value at slice k.
  double latent(Index i, Index j, Index k) const {
    return a_.row(i).cwiseProduct(b_.row(j)).dot(c_.row(k));
  }

private:
  Matrix a_, b_, c_;
};

// Flat parameter layout: columns of A, then B, then C, each column-major.
// Length R*(I+J+K).
using ParamVector = Vector;

// Column-wise Kronecker product. Row (i*q + j) of the result is
// M1(i,:) scaled entrywise by M2(j,:).
Matrix khatri_rao(const Matrix& m1, const Matrix& m2);

// Mode-n matricization, shape I_n x (product of the other two dims),
// column ordering consistent with khatri_rao: X_(1) = A (C kr B)^T.
Eigen::SparseMatrix<double> unfold(const SparseTensor3& t, int mode);

DenseTensor3 kruskal_to_dense(const KruskalTensor& k);

// <X, [[A,B,C]]> over observed cells only; O(nnz * R).
double inner_product_sparse_kruskal(const SparseTensor3& x, const KruskalTensor& k);

// ||[[A,B,C]]||_F^2 via Gram matrices: sum of (A^T A) .* (B^T B) .* (C^T C).
double kruskal_norm_sq(const KruskalTensor& k);

ParamVector flatten(const KruskalTensor& k);
KruskalTensor unflatten(const ParamVector& x, Shape3 shape, Index rank);

// Matricized tensor times Khatri-Rao product for the given mode; the
// workhorse of both the gradient and the ALS sweeps. For mode 1 returns
// the I x R matrix X_(1) (C kr B) without forming the unfolding.
Matrix mttkrp(const SparseTensor3& t, const KruskalTensor& k, int mode);

// COO text format: "shape I J K" header, one "i j k value" line per nonzero.
SparseTensor3 read_coo(std::istream& in);
SparseTensor3 read_coo_file(const std::string& path);
void write_coo(const SparseTensor3& t, std::ostream& out);
void write_coo_file(const SparseTensor3& t, const std::string& path);

// Kruskal text format: "kruskal I J K R" header, then A, B, C row-major.
KruskalTensor read_kruskal(std::istream& in);
KruskalTensor read_kruskal_file(const std::string& path);
void write_kruskal(const KruskalTensor& k, std::ostream& out);
void write_kruskal_file(const KruskalTensor& k, const std::string& path);

// Shortest decimal that round-trips the double exactly.
std::string format_double(double v);

}  // namespace cpoptnet
