#include "cpoptnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <tuple>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace cpoptnet {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ArgumentError(msg);
}

}  // namespace

SparseTensor3::SparseTensor3(Shape3 shape, std::vector<CooEntry> entries)
    : shape_(shape), entries_(std::move(entries)) {
  require(shape_.I > 0 && shape_.J > 0 && shape_.K > 0,
          "SparseTensor3: dimensions must be positive");
  for (const auto& e : entries_) {
    require(e.i >= 0 && e.i < shape_.I && e.j >= 0 && e.j < shape_.J &&
                e.k >= 0 && e.k < shape_.K,
            "SparseTensor3: index out of bounds");
    require(std::isfinite(e.value), "SparseTensor3: non-finite value");
  }
  // Duplicates are rejected, not summed, so ingestion bugs surface here.
  std::vector<CooEntry> sorted = entries_;
  std::sort(sorted.begin(), sorted.end(), [](const CooEntry& a, const CooEntry& b) {
    return std::tie(a.i, a.j, a.k) < std::tie(b.i, b.j, b.k);
  });
  for (std::size_t n = 1; n < sorted.size(); ++n) {
    require(std::tie(sorted[n - 1].i, sorted[n - 1].j, sorted[n - 1].k) !=
                std::tie(sorted[n].i, sorted[n].j, sorted[n].k),
            "SparseTensor3: duplicate (i,j,k) entry");
  }
}

double SparseTensor3::norm_sq() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.value * e.value;
  return s;
}

DenseTensor3::DenseTensor3(Shape3 shape, Vector values)
    : shape_(shape), values_(std::move(values)) {
  require(values_.size() == shape_.cells(),
          "DenseTensor3: value count does not match shape");
}

DenseTensor3 DenseTensor3::zeros(Shape3 shape) {
  return DenseTensor3(shape, Vector::Zero(shape.cells()));
}

KruskalTensor::KruskalTensor(Matrix a, Matrix b, Matrix c)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  require(a_.cols() == b_.cols() && b_.cols() == c_.cols(),
          "KruskalTensor: factors must share a column count");
  require(a_.cols() >= 1, "KruskalTensor: rank must be >= 1");
  require(a_.allFinite() && b_.allFinite() && c_.allFinite(),
          "KruskalTensor: non-finite factor entry");
}

Matrix khatri_rao(const Matrix& m1, const Matrix& m2) {
  require(m1.cols() == m2.cols(), "khatri_rao: column counts differ");
  const Index p = m1.rows(), q = m2.rows(), r = m1.cols();
  Matrix out(p * q, r);
  for (Index c = 0; c < r; ++c)
    for (Index i = 0; i < p; ++i)
      out.col(c).segment(i * q, q) = m1(i, c) * m2.col(c).segment(0, q);
  return out;
}

Eigen::SparseMatrix<double> unfold(const SparseTensor3& t, int mode) {
  const auto [I, J, K] = t.shape();
  Index rows, cols;
  switch (mode) {
    case 1: rows = I; cols = J * K; break;
    case 2: rows = J; cols = I * K; break;
    case 3: rows = K; cols = I * J; break;
    default: throw ArgumentError("unfold: mode must be 1, 2 or 3");
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(t.entries().size());
  for (const auto& e : t.entries()) {
    // Column index mirrors the khatri_rao row order for the cyclic pair.
    Index row, col;
    switch (mode) {
      case 1: row = e.i; col = e.k * J + e.j; break;
      case 2: row = e.j; col = e.k * I + e.i; break;
      default: row = e.k; col = e.j * I + e.i; break;
    }
    trips.emplace_back(static_cast<int>(row), static_cast<int>(col), e.value);
  }
  Eigen::SparseMatrix<double> m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

DenseTensor3 kruskal_to_dense(const KruskalTensor& k) {
  const auto [I, J, K] = k.shape();
  DenseTensor3 d = DenseTensor3::zeros({I, J, K});
  for (Index kk = 0; kk < K; ++kk)
    for (Index j = 0; j < J; ++j)
      for (Index i = 0; i < I; ++i)
        d.at(i, j, kk) = k.latent(i, j, kk);
  return d;
}

double inner_product_sparse_kruskal(const SparseTensor3& x, const KruskalTensor& k) {
  require(x.shape() == k.shape(), "inner product: shape mismatch");
  double s = 0.0;
  for (const auto& e : x.entries()) s += e.value * k.latent(e.i, e.j, e.k);
  return s;
}

double kruskal_norm_sq(const KruskalTensor& k) {
  const Matrix ata = k.A().transpose() * k.A();
  const Matrix btb = k.B().transpose() * k.B();
  const Matrix ctc = k.C().transpose() * k.C();
  return ata.cwiseProduct(btb).cwiseProduct(ctc).sum();
}

ParamVector flatten(const KruskalTensor& k) {
  const auto [I, J, K] = k.shape();
  const Index r = k.rank();
  ParamVector x(r * (I + J + K));
  x.segment(0, I * r) = Eigen::Map<const Vector>(k.A().data(), I * r);
  x.segment(I * r, J * r) = Eigen::Map<const Vector>(k.B().data(), J * r);
  x.segment((I + J) * r, K * r) = Eigen::Map<const Vector>(k.C().data(), K * r);
  return x;
}

KruskalTensor unflatten(const ParamVector& x, Shape3 shape, Index rank) {
  require(rank >= 1, "unflatten: rank must be >= 1");
  require(x.size() == rank * (shape.I + shape.J + shape.K),
          "unflatten: parameter vector length mismatch");
  Matrix a = Eigen::Map<const Matrix>(x.data(), shape.I, rank);
  Matrix b = Eigen::Map<const Matrix>(x.data() + shape.I * rank, shape.J, rank);
  Matrix c = Eigen::Map<const Matrix>(x.data() + (shape.I + shape.J) * rank,
                                      shape.K, rank);
  return KruskalTensor(std::move(a), std::move(b), std::move(c));
}

Matrix mttkrp(const SparseTensor3& t, const KruskalTensor& k, int mode) {
  require(t.shape() == k.shape(), "mttkrp: shape mismatch");
  const Index r = k.rank();
  Index rows;
  switch (mode) {
    case 1: rows = t.shape().I; break;
    case 2: rows = t.shape().J; break;
    case 3: rows = t.shape().K; break;
    default: throw ArgumentError("mttkrp: mode must be 1, 2 or 3");
  }
  Matrix out = Matrix::Zero(rows, r);
  // Sequential accumulation keeps results bit-stable across runs.
  for (const auto& e : t.entries()) {
    switch (mode) {
      case 1:
        out.row(e.i) += e.value * k.B().row(e.j).cwiseProduct(k.C().row(e.k));
        break;
      case 2:
        out.row(e.j) += e.value * k.A().row(e.i).cwiseProduct(k.C().row(e.k));
        break;
      default:
        out.row(e.k) += e.value * k.A().row(e.i).cwiseProduct(k.B().row(e.j));
        break;
    }
  }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

SparseTensor3 read_coo(std::istream& in) {
  std::string tag;
  Shape3 shape;
  if (!(in >> tag >> shape.I >> shape.J >> shape.K) || tag != "shape")
    throw IoError("COO: expected header 'shape I J K'");
  std::vector<CooEntry> entries;
  CooEntry e;
  while (in >> e.i >> e.j >> e.k >> e.value) entries.push_back(e);
  if (!in.eof() && in.fail()) throw IoError("COO: malformed entry line");
  return SparseTensor3(shape, std::move(entries));
}

SparseTensor3 read_coo_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_coo(in);
}

void write_coo(const SparseTensor3& t, std::ostream& out) {
  const auto& s = t.shape();
  out << "shape " << s.I << ' ' << s.J << ' ' << s.K << '\n';
  for (const auto& e : t.entries())
    out << e.i << ' ' << e.j << ' ' << e.k << ' ' << format_double(e.value) << '\n';
}

void write_coo_file(const SparseTensor3& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_coo(t, out);
}

namespace {

Matrix read_matrix_rows(std::istream& in, Index rows, Index cols, const char* what) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (!(in >> m(i, j)))
        throw IoError(std::string("Kruskal: truncated ") + what + " matrix");
  return m;
}

}  // namespace

KruskalTensor read_kruskal(std::istream& in) {
  std::string tag;
  Index i, j, k, r;
  if (!(in >> tag >> i >> j >> k >> r) || tag != "kruskal")
    throw IoError("Kruskal: expected header 'kruskal I J K R'");
  Matrix a = read_matrix_rows(in, i, r, "A");
  Matrix b = read_matrix_rows(in, j, r, "B");
  Matrix c = read_matrix_rows(in, k, r, "C");
  return KruskalTensor(std::move(a), std::move(b), std::move(c));
}

KruskalTensor read_kruskal_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_kruskal(in);
}

void write_kruskal(const KruskalTensor& k, std::ostream& out) {
  const auto [I, J, K] = k.shape();
  out << "kruskal " << I << ' ' << J << ' ' << K << ' ' << k.rank() << '\n';
  for (const Matrix* m : {&k.A(), &k.B(), &k.C()})
    for (Index i = 0; i < m->rows(); ++i) {
      for (Index j = 0; j < m->cols(); ++j)
        out << (j ? " " : "") << format_double((*m)(i, j));
      out << '\n';
    }
}

void write_kruskal_file(const KruskalTensor& k, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_kruskal(k, out);
}

}  // namespace cpoptnet
