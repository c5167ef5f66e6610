#include "cpoptnet/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace cpoptnet {

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "tree") return ModelKind::tree;
  if (s == "mlp") return ModelKind::mlp;
  if (s == "cnn" || s == "cnn1d") return ModelKind::cnn1d;
  if (s == "lstm") return ModelKind::lstm;
  throw ArgumentError("unknown model kind: " + s);
}

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::tree: return "tree";
    case ModelKind::mlp: return "mlp";
    case ModelKind::cnn1d: return "cnn1d";
    default: return "lstm";
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ArgumentError("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw ArgumentError("TrainConfig: batch_size must be >= 1");
  if (learning_rate <= 0) throw ArgumentError("TrainConfig: learning_rate must be > 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1))
    throw ArgumentError("TrainConfig: betas must lie in [0, 1)");
}

SeriesDataset build_dataset(const KruskalTensor& k, Index window,
                            Index train_begin, Index train_end) {
  const auto [I, J, K] = k.shape();
  if (window < 1) throw ArgumentError("build_dataset: window must be >= 1");
  if (train_begin < 0 || train_end > K || train_begin >= train_end)
    throw ArgumentError("build_dataset: invalid train slice range");
  if (window >= train_end)
    throw ArgumentError("build_dataset: window leaves no trainable slices");

  const Index r = k.rank();
  SeriesDataset ds;
  ds.rank = r;
  ds.window = window;
  for (Index i = 0; i < I; ++i)
    for (Index j = 0; j < J; ++j)
      for (Index t = std::max(window, train_begin); t < train_end; ++t) {
        SeriesSample s;
        s.features.resize(2 * r + window);
        s.features.head(r) = k.A().row(i).transpose();
        s.features.segment(r, r) = k.B().row(j).transpose();
        for (Index u = 0; u < window; ++u)
          s.features[2 * r + u] = k.latent(i, j, t - window + u);
        s.target = k.latent(i, j, t);
        s.i = i;
        s.j = j;
        s.k = t;
        ds.samples.push_back(std::move(s));
      }
  return ds;
}

void adam_step(Vector& params, const Vector& grad, AdamState& state,
               const TrainConfig& cfg) {
  constexpr double eps = 1e-8;
  if (state.m.size() != params.size()) {
    state.m = Vector::Zero(params.size());
    state.v = Vector::Zero(params.size());
    state.step = 0;
  }
  ++state.step;
  state.m = cfg.adam_beta1 * state.m + (1 - cfg.adam_beta1) * grad;
  state.v = cfg.adam_beta2 * state.v.array().matrix() +
            (1 - cfg.adam_beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1 - std::pow(cfg.adam_beta1, double(state.step));
  const double bc2 = 1 - std::pow(cfg.adam_beta2, double(state.step));
  params.array() -= cfg.learning_rate * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + eps);
}

namespace {

void write_train_config(std::ostream& out, const TrainConfig& c) {
  out << "train " << c.epochs << ' ' << c.batch_size << ' '
      << format_double(c.learning_rate) << ' ' << format_double(c.adam_beta1)
      << ' ' << format_double(c.adam_beta2) << ' ' << c.seed << '\n';
}

TrainConfig read_train_config(std::istream& in) {
  std::string tag;
  TrainConfig c;
  if (!(in >> tag >> c.epochs >> c.batch_size >> c.learning_rate >> c.adam_beta1 >>
        c.adam_beta2 >> c.seed) ||
      tag != "train")
    throw IoError("model file: bad train config line");
  return c;
}

void write_params(std::ostream& out, const Vector& p) {
  out << "params " << p.size() << '\n';
  for (Index n = 0; n < p.size(); ++n)
    out << format_double(p[n]) << ((n + 1) % 8 == 0 || n + 1 == p.size() ? '\n' : ' ');
}

Vector read_params(std::istream& in) {
  std::string tag;
  Index n;
  if (!(in >> tag >> n) || tag != "params")
    throw IoError("model file: bad params header");
  Vector p(n);
  for (Index u = 0; u < n; ++u)
    if (!(in >> p[u])) throw IoError("model file: truncated params");
  return p;
}

// ---------------------------------------------------------------------------
// CART regression tree: variance-reduction splits, depth/leaf limits.

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double value = 0.0;
  int left = -1, right = -1;
};

constexpr int kTreeMaxDepth = 8;
constexpr Index kTreeMinLeaf = 5;

class TreeModel final : public Predictor {
public:
  TreeModel(Index rank, Index window) : rank_(rank), window_(window) {}

  void fit(const SeriesDataset& ds) {
    std::vector<Index> idx(ds.samples.size());
    std::iota(idx.begin(), idx.end(), Index{0});
    build(ds, idx, 0);
  }

  ModelKind kind() const override { return ModelKind::tree; }
  Index rank() const override { return rank_; }
  Index window() const override { return window_; }

  double predict(const Vector& f) const override {
    int n = 0;
    while (nodes_[n].feature >= 0)
      n = f[nodes_[n].feature] <= nodes_[n].threshold ? nodes_[n].left
                                                      : nodes_[n].right;
    return nodes_[n].value;
  }

  void save(std::ostream& out) const override {
    out << "cpoptnet-model tree\n";
    out << "shape " << rank_ << ' ' << window_ << '\n';
    write_train_config(out, train_cfg);
    out << "nodes " << nodes_.size() << '\n';
    for (const auto& n : nodes_)
      out << n.feature << ' ' << format_double(n.threshold) << ' '
          << format_double(n.value) << ' ' << n.left << ' ' << n.right << '\n';
  }

  static std::unique_ptr<TreeModel> load(std::istream& in, Index rank, Index window,
                                         TrainConfig cfg) {
    auto m = std::make_unique<TreeModel>(rank, window);
    m->train_cfg = cfg;
    std::string tag;
    std::size_t count;
    if (!(in >> tag >> count) || tag != "nodes")
      throw IoError("model file: bad tree node table");
    m->nodes_.resize(count);
    for (auto& n : m->nodes_)
      if (!(in >> n.feature >> n.threshold >> n.value >> n.left >> n.right))
        throw IoError("model file: truncated tree node table");
    return m;
  }

  TrainConfig train_cfg;

private:
  int build(const SeriesDataset& ds, const std::vector<Index>& idx, int depth) {
    const auto n = static_cast<Index>(idx.size());
    double sum = 0, sum2 = 0;
    for (Index s : idx) {
      sum += ds.samples[s].target;
      sum2 += ds.samples[s].target * ds.samples[s].target;
    }
    const double mean = sum / double(n);
    const double sse = sum2 - sum * sum / double(n);

    const int node = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_[node].value = mean;
    if (depth >= kTreeMaxDepth || n < 2 * kTreeMinLeaf || sse <= 1e-12)
      return node;

    int best_feature = -1;
    double best_score = sse, best_threshold = 0.0;
    const Index dim = ds.feature_dim();
    std::vector<Index> order(idx);
    for (Index f = 0; f < dim; ++f) {
      std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        return ds.samples[a].features[f] < ds.samples[b].features[f];
      });
      double lsum = 0, lsum2 = 0;
      for (Index pos = 0; pos + 1 < n; ++pos) {
        const double y = ds.samples[order[pos]].target;
        lsum += y;
        lsum2 += y * y;
        const Index nl = pos + 1, nr = n - nl;
        if (nl < kTreeMinLeaf || nr < kTreeMinLeaf) continue;
        const double lo = ds.samples[order[pos]].features[f];
        const double hi = ds.samples[order[pos + 1]].features[f];
        if (lo == hi) continue;
        const double rsum = sum - lsum, rsum2 = sum2 - lsum2;
        const double score = (lsum2 - lsum * lsum / double(nl)) +
                             (rsum2 - rsum * rsum / double(nr));
        if (score < best_score - 1e-12) {
          best_score = score;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (lo + hi);
        }
      }
    }
    if (best_feature < 0) return node;

    std::vector<Index> left, right;
    for (Index s : idx)
      (ds.samples[s].features[best_feature] <= best_threshold ? left : right)
          .push_back(s);
    nodes_[node].feature = best_feature;
    nodes_[node].threshold = best_threshold;
    nodes_[node].left = build(ds, left, depth + 1);
    nodes_[node].right = build(ds, right, depth + 1);
    return node;
  }

  Index rank_, window_;
  std::vector<TreeNode> nodes_;
};

// ---------------------------------------------------------------------------
// Gradient models. Parameters live in one flat vector; each class maps
// named views into it.

double mse_scale(std::size_t n) { return 2.0 / double(n); }

void seeded_uniform_fill(Vector& v, Index begin, Index len, double scale,
                         std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Index u = 0; u < len; ++u) v[begin + u] = dist(rng);
}

class MlpModel final : public GradientModel {
public:
  static constexpr Index kHidden = 64;

  MlpModel(Index rank, Index window, std::uint64_t seed)
      : rank_(rank), window_(window), dim_(2 * rank + window) {
    params_.resize(kHidden * dim_ + kHidden + kHidden * kHidden + kHidden +
                   kHidden + 1);
    std::mt19937_64 rng(seed);
    Index off = 0;
    seeded_uniform_fill(params_, off, kHidden * dim_, 1.0 / std::sqrt(double(dim_)), rng);
    off += kHidden * dim_ + kHidden;  // biases stay zero
    params_.segment(off - kHidden, kHidden).setZero();
    seeded_uniform_fill(params_, off, kHidden * kHidden, 1.0 / std::sqrt(double(kHidden)), rng);
    off += kHidden * kHidden + kHidden;
    params_.segment(off - kHidden, kHidden).setZero();
    seeded_uniform_fill(params_, off, kHidden, 1.0 / std::sqrt(double(kHidden)), rng);
    params_[params_.size() - 1] = 0.0;
  }

private:
  template <typename Ptr>
  auto views(Ptr data) const {
    using Mat = std::conditional_t<std::is_const_v<std::remove_pointer_t<Ptr>>,
                                   Eigen::Map<const Matrix>, Eigen::Map<Matrix>>;
    using Vec = std::conditional_t<std::is_const_v<std::remove_pointer_t<Ptr>>,
                                   Eigen::Map<const Vector>, Eigen::Map<Vector>>;
    Index off = 0;
    Mat w1(data + off, kHidden, dim_);
    off += kHidden * dim_;
    Vec b1(data + off, kHidden);
    off += kHidden;
    Mat w2(data + off, kHidden, kHidden);
    off += kHidden * kHidden;
    Vec b2(data + off, kHidden);
    off += kHidden;
    Vec w3(data + off, kHidden);
    off += kHidden;
    Vec b3(data + off, 1);
    return std::make_tuple(w1, b1, w2, b2, w3, b3);
  }

  double forward(const Vector& x, Vector& z1, Vector& z2) const {
    auto [w1, b1, w2, b2, w3, b3] = views(params_.data());
    z1 = w1 * x + b1;
    z2 = w2 * z1.cwiseMax(0.0) + b2;
    return w3.dot(z2.cwiseMax(0.0)) + b3[0];
  }

public:
  ModelKind kind() const override { return ModelKind::mlp; }
  Index rank() const override { return rank_; }
  Index window() const override { return window_; }
  Vector& params() override { return params_; }
  const Vector& params() const override { return params_; }

  double predict(const Vector& x) const override {
    Vector z1, z2;
    return forward(x, z1, z2);
  }

  double loss_and_gradient(const std::vector<const SeriesSample*>& batch,
                           Vector& grad) const override {
    grad = Vector::Zero(params_.size());
    auto [w1, b1, w2, b2, w3, b3] = views(params_.data());
    auto [gw1, gb1, gw2, gb2, gw3, gb3] = views(grad.data());
    double loss = 0.0;
    const double scale = mse_scale(batch.size());
    for (const auto* s : batch) {
      Vector z1, z2;
      const double y = forward(s->features, z1, z2);
      const double err = y - s->target;
      loss += err * err;
      const double dy = scale * err;
      const Vector h1 = z1.cwiseMax(0.0), h2 = z2.cwiseMax(0.0);
      gw3 += dy * h2;
      gb3[0] += dy;
      Vector dz2 = (dy * Eigen::Map<const Vector>(w3.data(), kHidden).array() *
                    (z2.array() > 0).cast<double>())
                       .matrix();
      gw2 += dz2 * h1.transpose();
      gb2 += dz2;
      Vector dz1 =
          ((w2.transpose() * dz2).array() * (z1.array() > 0).cast<double>()).matrix();
      gw1 += dz1 * s->features.transpose();
      gb1 += dz1;
    }
    return loss / double(batch.size());
  }

  void save(std::ostream& out) const override {
    out << "cpoptnet-model mlp\n";
    out << "shape " << rank_ << ' ' << window_ << '\n';
    write_train_config(out, train_cfg);
    write_params(out, params_);
  }

  TrainConfig train_cfg;

private:
  Index rank_, window_, dim_;
  Vector params_;
};

class CnnModel final : public GradientModel {
public:
  static constexpr Index kFilters = 8;
  static constexpr Index kWidth = 3;
  static constexpr Index kDense = 32;

  CnnModel(Index rank, Index window, std::uint64_t seed)
      : rank_(rank), window_(window) {
    if (window < kWidth)
      throw ArgumentError("cnn1d: lag window must be at least the filter width (3)");
    conv_len_ = window - kWidth + 1;
    dense_in_ = kFilters * conv_len_ + 2 * rank;
    params_.resize(kFilters * kWidth + kFilters + kDense * dense_in_ + kDense +
                   kDense + 1);
    params_.setZero();
    std::mt19937_64 rng(seed);
    seeded_uniform_fill(params_, 0, kFilters * kWidth, 1.0 / std::sqrt(double(kWidth)), rng);
    seeded_uniform_fill(params_, kFilters * kWidth + kFilters, kDense * dense_in_,
                        1.0 / std::sqrt(double(dense_in_)), rng);
    seeded_uniform_fill(params_,
                        kFilters * kWidth + kFilters + kDense * dense_in_ + kDense,
                        kDense, 1.0 / std::sqrt(double(kDense)), rng);
  }

private:
  template <typename Ptr>
  auto views(Ptr data) const {
    using Mat = std::conditional_t<std::is_const_v<std::remove_pointer_t<Ptr>>,
                                   Eigen::Map<const Matrix>, Eigen::Map<Matrix>>;
    using Vec = std::conditional_t<std::is_const_v<std::remove_pointer_t<Ptr>>,
                                   Eigen::Map<const Vector>, Eigen::Map<Vector>>;
    Index off = 0;
    Mat fw(data + off, kFilters, kWidth);
    off += kFilters * kWidth;
    Vec fb(data + off, kFilters);
    off += kFilters;
    Mat wd(data + off, kDense, dense_in_);
    off += kDense * dense_in_;
    Vec bd(data + off, kDense);
    off += kDense;
    Vec v(data + off, kDense);
    off += kDense;
    Vec c(data + off, 1);
    return std::make_tuple(fw, fb, wd, bd, v, c);
  }

  Vector dense_input(const Vector& x, const Matrix& zc) const {
    Vector z(dense_in_);
    for (Index f = 0; f < kFilters; ++f)
      for (Index t = 0; t < conv_len_; ++t)
        z[f * conv_len_ + t] = std::max(zc(f, t), 0.0);
    z.tail(2 * rank_) = x.head(2 * rank_);
    return z;
  }

  double forward(const Vector& x, Matrix& zc, Vector& zd) const {
    auto [fw, fb, wd, bd, v, c] = views(params_.data());
    const auto lag = x.tail(window_);
    zc.resize(kFilters, conv_len_);
    for (Index f = 0; f < kFilters; ++f)
      for (Index t = 0; t < conv_len_; ++t) {
        double acc = fb[f];
        for (Index u = 0; u < kWidth; ++u) acc += fw(f, u) * lag[t + u];
        zc(f, t) = acc;
      }
    zd = wd * dense_input(x, zc) + bd;
    return v.dot(zd.cwiseMax(0.0)) + c[0];
  }

public:
  ModelKind kind() const override { return ModelKind::cnn1d; }
  Index rank() const override { return rank_; }
  Index window() const override { return window_; }
  Vector& params() override { return params_; }
  const Vector& params() const override { return params_; }

  double predict(const Vector& x) const override {
    Matrix zc;
    Vector zd;
    return forward(x, zc, zd);
  }

  double loss_and_gradient(const std::vector<const SeriesSample*>& batch,
                           Vector& grad) const override {
    grad = Vector::Zero(params_.size());
    auto [fw, fb, wd, bd, v, c] = views(params_.data());
    auto [gfw, gfb, gwd, gbd, gv, gc] = views(grad.data());
    double loss = 0.0;
    const double scale = mse_scale(batch.size());
    for (const auto* s : batch) {
      Matrix zc;  // kFilters x conv_len_, pre-activation
      Vector zd;
      const double y = forward(s->features, zc, zd);
      const double err = y - s->target;
      loss += err * err;
      const double dy = scale * err;

      const Vector h = zd.cwiseMax(0.0);
      gv += dy * h;
      gc[0] += dy;
      Vector dzd = (dy * Eigen::Map<const Vector>(v.data(), kDense).array() *
                    (zd.array() > 0).cast<double>())
                       .matrix();
      Vector z = dense_input(s->features, zc);
      gwd += dzd * z.transpose();
      gbd += dzd;
      Vector dz = wd.transpose() * dzd;

      const auto lag = s->features.tail(window_);
      for (Index f = 0; f < kFilters; ++f)
        for (Index t = 0; t < conv_len_; ++t) {
          if (zc(f, t) <= 0) continue;
          const double dconv = dz[f * conv_len_ + t];
          for (Index u = 0; u < kWidth; ++u) gfw(f, u) += dconv * lag[t + u];
          gfb[f] += dconv;
        }
    }
    return loss / double(batch.size());
  }

  void save(std::ostream& out) const override {
    out << "cpoptnet-model cnn1d\n";
    out << "shape " << rank_ << ' ' << window_ << '\n';
    write_train_config(out, train_cfg);
    write_params(out, params_);
  }

  TrainConfig train_cfg;

private:
  Index rank_, window_, conv_len_ = 0, dense_in_ = 0;
  Vector params_;
};

class LstmModel final : public GradientModel {
public:
  explicit LstmModel(Index rank, Index window, std::uint64_t seed, Index hidden = 32)
      : rank_(rank), window_(window), hidden_(hidden), in_(1 + 2 * rank) {
    params_.resize(4 * hidden_ * (in_ + hidden_) + 4 * hidden_ + hidden_ + 1);
    params_.setZero();
    std::mt19937_64 rng(seed);
    seeded_uniform_fill(params_, 0, 4 * hidden_ * (in_ + hidden_),
                        1.0 / std::sqrt(double(in_ + hidden_)), rng);
    // Forget-gate bias starts at 1.
    params_.segment(4 * hidden_ * (in_ + hidden_) + hidden_, hidden_).setOnes();
    seeded_uniform_fill(params_, 4 * hidden_ * (in_ + hidden_) + 4 * hidden_, hidden_,
                        1.0 / std::sqrt(double(hidden_)), rng);
  }

private:
  struct Pass {
    std::vector<Vector> z, i, f, g, o, c, h;
  };

  template <typename Ptr>
  auto views(Ptr data) const {
    using Mat = std::conditional_t<std::is_const_v<std::remove_pointer_t<Ptr>>,
                                   Eigen::Map<const Matrix>, Eigen::Map<Matrix>>;
    using Vec = std::conditional_t<std::is_const_v<std::remove_pointer_t<Ptr>>,
                                   Eigen::Map<const Vector>, Eigen::Map<Vector>>;
    Index off = 0;
    Mat w(data + off, 4 * hidden_, in_ + hidden_);  // rows: [i; f; g; o]
    off += 4 * hidden_ * (in_ + hidden_);
    Vec b(data + off, 4 * hidden_);
    off += 4 * hidden_;
    Vec v(data + off, hidden_);
    off += hidden_;
    Vec d(data + off, 1);
    return std::make_tuple(w, b, v, d);
  }

  static Vector sigmoid(const Vector& z) {
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
  }

  // Each step consumes [lag value at step t, latent rows].
  double forward(const Vector& x, Pass& p) const {
    auto [w, b, v, d0] = views(params_.data());
    const Index h = hidden_;
    Vector hs = Vector::Zero(h), cs = Vector::Zero(h);
    for (Index t = 0; t < window_; ++t) {
      Vector z(in_ + h);
      z[0] = x[2 * rank_ + t];
      z.segment(1, 2 * rank_) = x.head(2 * rank_);
      z.tail(h) = hs;
      const Vector pre = w * z + b;
      Vector gi = sigmoid(pre.segment(0, h));
      Vector gf = sigmoid(pre.segment(h, h));
      Vector gg = pre.segment(2 * h, h).array().tanh().matrix();
      Vector go = sigmoid(pre.segment(3 * h, h));
      cs = gf.cwiseProduct(cs) + gi.cwiseProduct(gg);
      hs = go.cwiseProduct(cs.array().tanh().matrix());
      p.z.push_back(std::move(z));
      p.i.push_back(std::move(gi));
      p.f.push_back(std::move(gf));
      p.g.push_back(std::move(gg));
      p.o.push_back(std::move(go));
      p.c.push_back(cs);
      p.h.push_back(hs);
    }
    return v.dot(hs) + d0[0];
  }

public:
  ModelKind kind() const override { return ModelKind::lstm; }
  Index rank() const override { return rank_; }
  Index window() const override { return window_; }
  Index hidden() const { return hidden_; }
  Vector& params() override { return params_; }
  const Vector& params() const override { return params_; }

  double predict(const Vector& x) const override {
    Pass p;
    return forward(x, p);
  }

  double loss_and_gradient(const std::vector<const SeriesSample*>& batch,
                           Vector& grad) const override {
    grad = Vector::Zero(params_.size());
    auto [w, b, v, d0] = views(params_.data());
    auto [gw, gb, gv, gd0] = views(grad.data());
    const Index h = hidden_;
    double loss = 0.0;
    const double scale = mse_scale(batch.size());
    for (const auto* s : batch) {
      Pass p;
      const double y = forward(s->features, p);
      const double err = y - s->target;
      loss += err * err;
      const double dy = scale * err;

      gv += dy * p.h.back();
      gd0[0] += dy;
      Vector dh = dy * Eigen::Map<const Vector>(v.data(), h);
      Vector dc = Vector::Zero(h);
      for (Index t = window_ - 1; t >= 0; --t) {
        const Vector tc = p.c[t].array().tanh().matrix();
        const Vector& gi = p.i[t];
        const Vector& gf = p.f[t];
        const Vector& gg = p.g[t];
        const Vector& go = p.o[t];
        dc += dh.cwiseProduct(go).cwiseProduct(
            (1.0 - tc.array().square()).matrix());
        const Vector c_prev = t > 0 ? p.c[t - 1] : Vector::Zero(h);
        Vector dz4(4 * h);
        dz4.segment(0, h) = dc.cwiseProduct(gg).cwiseProduct(gi).cwiseProduct(
            (1.0 - gi.array()).matrix());
        dz4.segment(h, h) = dc.cwiseProduct(c_prev).cwiseProduct(gf).cwiseProduct(
            (1.0 - gf.array()).matrix());
        dz4.segment(2 * h, h) =
            dc.cwiseProduct(gi).cwiseProduct((1.0 - gg.array().square()).matrix());
        dz4.segment(3 * h, h) = dh.cwiseProduct(tc).cwiseProduct(go).cwiseProduct(
            (1.0 - go.array()).matrix());
        gw += dz4 * p.z[t].transpose();
        gb += dz4;
        const Vector dz = w.transpose() * dz4;
        dh = dz.tail(h);
        dc = dc.cwiseProduct(gf);
      }
    }
    return loss / double(batch.size());
  }

  void save(std::ostream& out) const override {
    out << "cpoptnet-model lstm\n";
    out << "shape " << rank_ << ' ' << window_ << ' ' << hidden_ << '\n';
    write_train_config(out, train_cfg);
    write_params(out, params_);
  }

  TrainConfig train_cfg;

private:
  Index rank_, window_, hidden_, in_;
  Vector params_;
};

}  // namespace

std::unique_ptr<GradientModel> make_gradient_model(ModelKind kind, Index rank,
                                                   Index window, std::uint64_t seed) {
  switch (kind) {
    case ModelKind::mlp: return std::make_unique<MlpModel>(rank, window, seed);
    case ModelKind::cnn1d: return std::make_unique<CnnModel>(rank, window, seed);
    case ModelKind::lstm: return std::make_unique<LstmModel>(rank, window, seed);
    default: throw ArgumentError("make_gradient_model: tree is not gradient-trained");
  }
}

std::unique_ptr<GradientModel> make_lstm_model(Index rank, Index window,
                                               std::uint64_t seed, Index hidden) {
  return std::make_unique<LstmModel>(rank, window, seed, hidden);
}

TrainResult train(ModelKind kind, const SeriesDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.samples.empty()) throw ArgumentError("train: empty dataset");

  TrainResult res;
  if (kind == ModelKind::tree) {
    auto tree = std::make_unique<TreeModel>(ds.rank, ds.window);
    tree->train_cfg = cfg;
    tree->fit(ds);
    res.model = std::move(tree);
    return res;
  }

  auto model = make_gradient_model(kind, ds.rank, ds.window, cfg.seed);
  AdamState adam;
  // Separate stream for the epoch shuffles so init and batching decouple.
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Index> order(ds.samples.size());
  std::iota(order.begin(), order.end(), Index{0});

  Vector grad;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_sq_err = 0.0;
    for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
      std::vector<const SeriesSample*> batch;
      for (std::size_t u = pos; u < std::min(order.size(), pos + cfg.batch_size); ++u)
        batch.push_back(&ds.samples[order[u]]);
      const double loss = model->loss_and_gradient(batch, grad);
      if (!std::isfinite(loss))
        throw NumericalError("train: NaN loss (" + std::string(to_string(kind)) +
                             ", epoch " + std::to_string(epoch) + ")");
      adam_step(model->params(), grad, adam, cfg);
      epoch_sq_err += loss * double(batch.size());
    }
    res.epoch_loss.push_back(epoch_sq_err / double(ds.samples.size()));
  }

  if (kind == ModelKind::mlp)
    static_cast<MlpModel&>(*model).train_cfg = cfg;
  else if (kind == ModelKind::cnn1d)
    static_cast<CnnModel&>(*model).train_cfg = cfg;
  else
    static_cast<LstmModel&>(*model).train_cfg = cfg;
  res.model = std::move(model);
  return res;
}

Vector predict_rolling(const Predictor& m, const KruskalTensor& k,
                       Index i, Index j, Index from_slice, Index horizon,
                       bool open_loop) {
  const auto [I, J, K] = k.shape();
  const Index w = m.window(), r = m.rank();
  if (horizon < 1) throw ArgumentError("predict_rolling: horizon must be >= 1");
  if (i < 0 || i >= I || j < 0 || j >= J)
    throw ArgumentError("predict_rolling: pair index out of range");
  if (r != k.rank())
    throw ArgumentError("predict_rolling: model rank does not match factors");
  if (from_slice < w || from_slice > K)
    throw ArgumentError("predict_rolling: lag window has no history");
  if (open_loop && from_slice + horizon - 1 > K)
    throw ArgumentError("predict_rolling: open loop needs observed slices");

  Vector features(2 * r + w);
  features.head(r) = k.A().row(i).transpose();
  features.segment(r, r) = k.B().row(j).transpose();
  std::vector<double> lag(w);
  for (Index u = 0; u < w; ++u) lag[u] = k.latent(i, j, from_slice - w + u);

  Vector out(horizon);
  for (Index s = 0; s < horizon; ++s) {
    for (Index u = 0; u < w; ++u) features[2 * r + u] = lag[u];
    out[s] = m.predict(features);
    lag.erase(lag.begin());
    lag.push_back(open_loop ? k.latent(i, j, from_slice + s) : out[s]);
  }
  return out;
}

std::unique_ptr<Predictor> load_predictor(std::istream& in) {
  std::string magic, kind_str;
  if (!(in >> magic >> kind_str) || magic != "cpoptnet-model")
    throw IoError("model file: bad magic");
  const ModelKind kind = model_kind_from_string(kind_str);
  std::string tag;
  Index rank, window;
  if (!(in >> tag >> rank >> window) || tag != "shape")
    throw IoError("model file: bad shape line");
  Index hidden = 32;
  if (kind == ModelKind::lstm && !(in >> hidden))
    throw IoError("model file: bad lstm shape line");
  const TrainConfig cfg = read_train_config(in);

  if (kind == ModelKind::tree) return TreeModel::load(in, rank, window, cfg);

  std::unique_ptr<GradientModel> m;
  if (kind == ModelKind::lstm) {
    auto lstm = std::make_unique<LstmModel>(rank, window, cfg.seed, hidden);
    lstm->train_cfg = cfg;
    m = std::move(lstm);
  } else {
    m = make_gradient_model(kind, rank, window, cfg.seed);
    if (kind == ModelKind::mlp)
      static_cast<MlpModel&>(*m).train_cfg = cfg;
    else
      static_cast<CnnModel&>(*m).train_cfg = cfg;
  }
  Vector p = read_params(in);
  if (p.size() != m->params().size())
    throw IoError("model file: parameter count mismatch");
  m->params() = std::move(p);
  return m;
}

std::unique_ptr<Predictor> load_predictor_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return load_predictor(in);
}

void save_predictor_file(const Predictor& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  m.save(out);
}

}  // namespace cpoptnet
