#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cpoptnet/predictor.hpp"
#include "support.hpp"

using namespace cpoptnet;
using namespace testsupport;

namespace {

// Dataset with arbitrary feature/target content for model-level tests.
SeriesDataset synthetic_dataset(Index rank, Index window, Index count,
                                std::uint64_t seed,
                                double (*target_fn)(const Vector&)) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  SeriesDataset ds;
  ds.rank = rank;
  ds.window = window;
  for (Index n = 0; n < count; ++n) {
    SeriesSample s;
    s.features.resize(2 * rank + window);
    for (Index u = 0; u < s.features.size(); ++u) s.features[u] = dist(rng);
    s.target = target_fn(s.features);
    s.i = s.j = 0;
    s.k = n;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

double constant_target(const Vector&) { return 0.75; }
double last_lag_doubled(const Vector& f) { return 2.0 * f[f.size() - 1]; }

// Finite-difference check of loss_and_gradient on a tiny batch.
double model_grad_error(GradientModel& m, const SeriesDataset& ds) {
  std::vector<const SeriesSample*> batch;
  for (const auto& s : ds.samples) batch.push_back(&s);
  Vector analytic;
  m.loss_and_gradient(batch, analytic);
  const Vector x0 = m.params();
  const Vector fd = finite_difference_gradient(
      [&](const Vector& p) {
        m.params() = p;
        Vector scratch;
        const double loss = m.loss_and_gradient(batch, scratch);
        return loss;
      },
      x0, 1e-6);
  m.params() = x0;
  return max_relative_error(analytic, fd);
}

}  // namespace

TEST_CASE("build_dataset with identity factors exposes the time series") {
  Matrix a(1, 1), b(1, 1), c(4, 1);
  a << 1;
  b << 1;
  c << 1, 2, 3, 4;
  const SeriesDataset ds = build_dataset(KruskalTensor(a, b, c), 2, 0, 4);
  REQUIRE(ds.samples.size() == 2);
  CHECK(ds.samples[0].features[0] == 1);  // A row
  CHECK(ds.samples[0].features[1] == 1);  // B row
  CHECK(ds.samples[0].features[2] == 1);  // lags
  CHECK(ds.samples[0].features[3] == 2);
  CHECK(ds.samples[0].target == 3);
  CHECK(ds.samples[1].features[2] == 2);
  CHECK(ds.samples[1].features[3] == 3);
  CHECK(ds.samples[1].target == 4);
}

TEST_CASE("zero factors give zero features and the full sample count") {
  const KruskalTensor k(Matrix::Zero(3, 2), Matrix::Zero(2, 2), Matrix::Zero(6, 2));
  const SeriesDataset ds = build_dataset(k, 2, 0, 6);
  CHECK(ds.samples.size() == 3 * 2 * (6 - 2));
  for (const auto& s : ds.samples) {
    CHECK(s.features.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.target == 0.0);
  }
}

TEST_CASE("dataset targets match the triple-product oracle") {
  std::mt19937_64 rng(3);
  const KruskalTensor k = random_kruskal({3, 2, 6}, 2, rng);
  const SeriesDataset ds = build_dataset(k, 2, 0, 6);
  for (const auto& s : ds.samples) {
    double expected = 0.0;
    for (Index r = 0; r < 2; ++r)
      expected += k.A()(s.i, r) * k.B()(s.j, r) * k.C()(s.k, r);
    CHECK(s.target == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("build_dataset rejects an oversized window") {
  std::mt19937_64 rng(4);
  const KruskalTensor k = random_kruskal({2, 2, 4}, 1, rng);
  CHECK_THROWS_AS(build_dataset(k, 4, 0, 4), ArgumentError);
}

TEST_CASE("dataset construction is deterministic") {
  std::mt19937_64 rng(5);
  const KruskalTensor k = random_kruskal({3, 2, 8}, 2, rng);
  const SeriesDataset a = build_dataset(k, 3, 0, 8);
  const SeriesDataset b = build_dataset(k, 3, 0, 8);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t n = 0; n < a.samples.size(); ++n) {
    CHECK((a.samples[n].features - b.samples[n].features).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.samples[n].target == b.samples[n].target);
  }
}

TEST_CASE("one Adam step matches the hand-computed update") {
  // Quadratic f(p) = p^2/2 at p = 3: gradient 3.
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  Vector p(1), g(1);
  p << 3.0;
  g << 3.0;
  AdamState st;
  adam_step(p, g, st, cfg);
  // m = 0.5*3, v = 0.001*9; bias corrections 0.5 and 0.001.
  const double mhat = (0.5 * 3.0) / 0.5;
  const double vhat = (0.001 * 9.0) / 0.001;
  const double expected = 3.0 - 1e-3 * mhat / (std::sqrt(vhat) + 1e-8);
  CHECK(p[0] == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("gradient checks: MLP, CNN1D and LSTM match finite differences") {
  const SeriesDataset ds = synthetic_dataset(2, 3, 4, 11, last_lag_doubled);
  SUBCASE("mlp") {
    auto m = make_gradient_model(ModelKind::mlp, 2, 3, 7);
    CHECK(model_grad_error(*m, ds) < 1e-4);
  }
  SUBCASE("cnn1d") {
    auto m = make_gradient_model(ModelKind::cnn1d, 2, 3, 7);
    CHECK(model_grad_error(*m, ds) < 1e-4);
  }
  SUBCASE("lstm with 3 hidden units on 2-step sequences") {
    const SeriesDataset ds2 = synthetic_dataset(2, 2, 4, 13, last_lag_doubled);
    auto m = make_lstm_model(2, 2, 7, 3);
    CHECK(model_grad_error(*m, ds2) < 1e-4);
  }
}

TEST_CASE("all four kinds fit a constant target") {
  const SeriesDataset ds = synthetic_dataset(1, 3, 64, 17, constant_target);
  TrainConfig cfg;
  cfg.epochs = 10000;
  cfg.learning_rate = 5e-4;
  cfg.batch_size = 64;  // full batch, no shuffle noise at the optimum
  cfg.seed = 1;
  for (ModelKind kind : {ModelKind::tree, ModelKind::mlp, ModelKind::cnn1d,
                         ModelKind::lstm}) {
    CAPTURE(to_string(kind));
    TrainResult r = train(kind, ds, cfg);
    double mse = 0.0;
    for (const auto& s : ds.samples) {
      const double e = r.model->predict(s.features) - s.target;
      mse += e * e;
    }
    mse /= double(ds.samples.size());
    CHECK(mse < 1e-6);
  }
}

TEST_CASE("MLP learns a linear function of the last lag") {
  const SeriesDataset ds = synthetic_dataset(1, 3, 256, 19, last_lag_doubled);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 2;
  TrainResult r = train(ModelKind::mlp, ds, cfg);
  CHECK(r.epoch_loss.back() < 1e-3);
}

TEST_CASE("training loss does not end above where it started") {
  const SeriesDataset ds = synthetic_dataset(2, 3, 128, 23, last_lag_doubled);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 3;
  for (ModelKind kind : {ModelKind::mlp, ModelKind::cnn1d, ModelKind::lstm}) {
    CAPTURE(to_string(kind));
    TrainResult r = train(kind, ds, cfg);
    REQUIRE(!r.epoch_loss.empty());
    CHECK(r.epoch_loss.back() <= r.epoch_loss.front());
  }
}

TEST_CASE("training rejects an empty dataset") {
  SeriesDataset ds;
  ds.rank = 1;
  ds.window = 3;
  CHECK_THROWS_AS(train(ModelKind::mlp, ds, TrainConfig{}), ArgumentError);
}

TEST_CASE("cnn1d needs a window at least as wide as its filters") {
  CHECK_THROWS_AS(make_gradient_model(ModelKind::cnn1d, 1, 2, 0), ArgumentError);
}

namespace {

// Predicts the last lag value, for rolling-forecast contract tests.
class EchoModel final : public Predictor {
public:
  EchoModel(Index rank, Index window) : rank_(rank), window_(window) {}
  ModelKind kind() const override { return ModelKind::tree; }
  Index rank() const override { return rank_; }
  Index window() const override { return window_; }
  double predict(const Vector& f) const override { return f[f.size() - 1]; }
  void save(std::ostream&) const override {}

private:
  Index rank_, window_;
};

}  // namespace

TEST_CASE("rolling forecast of a constant series is constant") {
  Matrix a(1, 1), b(1, 1), c(8, 1);
  a << 2;
  b << 3;
  c = Matrix::Constant(8, 1, 0.5);
  const KruskalTensor k(a, b, c);
  const EchoModel m(1, 3);
  const Vector fc = predict_rolling(m, k, 0, 0, 6, 4);
  for (Index s = 0; s < 4; ++s) CHECK(fc[s] == doctest::Approx(3.0));
}

TEST_CASE("three-step forecast after twelve training slices") {
  std::mt19937_64 rng(29);
  const KruskalTensor k = random_kruskal({4, 3, 16}, 2, rng);
  const SeriesDataset ds = build_dataset(k, 3, 0, 12);
  TrainConfig cfg;
  cfg.epochs = 5;
  TrainResult r = train(ModelKind::tree, ds, cfg);
  const Vector fc = predict_rolling(*r.model, k, 1, 2, 12, 3);
  REQUIRE(fc.size() == 3);
  for (Index s = 0; s < 3; ++s) CHECK(std::isfinite(fc[s]));
}

TEST_CASE("a trained MLP continues a linear trend") {
  // Latent series is linear in k; first-step forecast should stay close.
  Matrix a(1, 1), b(1, 1), c(16, 1);
  a << 1;
  b << 1;
  for (Index kk = 0; kk < 16; ++kk) c(kk, 0) = 1.0 + 0.1 * double(kk);
  const KruskalTensor k(a, b, c);
  const SeriesDataset ds = build_dataset(k, 3, 0, 12);
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.seed = 7;
  TrainResult r = train(ModelKind::mlp, ds, cfg);
  const Vector fc = predict_rolling(*r.model, k, 0, 0, 12, 1);
  const double expected = k.latent(0, 0, 12);
  CHECK(std::abs(fc[0] - expected) / std::abs(expected) < 0.2);
}

TEST_CASE("rolling forecast argument validation") {
  std::mt19937_64 rng(31);
  const KruskalTensor k = random_kruskal({2, 2, 8}, 2, rng);
  const EchoModel m(2, 3);
  CHECK_THROWS_AS(predict_rolling(m, k, 0, 0, 6, 0), ArgumentError);
  CHECK_THROWS_AS(predict_rolling(m, k, 5, 0, 6, 1), ArgumentError);
  CHECK_THROWS_AS(predict_rolling(m, k, 0, 0, 2, 1), ArgumentError);
  const EchoModel wrong_rank(3, 3);
  CHECK_THROWS_AS(predict_rolling(wrong_rank, k, 0, 0, 6, 1), ArgumentError);
  // Open loop past the observed slices.
  CHECK_THROWS_AS(predict_rolling(m, k, 0, 0, 7, 3, true), ArgumentError);
}

TEST_CASE("open-loop forecasts re-read the latent series") {
  Matrix a(1, 1), b(1, 1), c(10, 1);
  a << 1;
  b << 1;
  for (Index kk = 0; kk < 10; ++kk) c(kk, 0) = double(kk);
  const KruskalTensor k(a, b, c);
  const EchoModel m(1, 2);
  // Echo of the last observed value: open loop tracks the series.
  const Vector fc = predict_rolling(m, k, 0, 0, 5, 3, true);
  CHECK(fc[0] == 4.0);
  CHECK(fc[1] == 5.0);
  CHECK(fc[2] == 6.0);
}

TEST_CASE("save/load round trip reproduces predictions bit-exactly") {
  const SeriesDataset ds = synthetic_dataset(2, 3, 64, 37, last_lag_doubled);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.seed = 5;
  for (ModelKind kind : {ModelKind::tree, ModelKind::mlp, ModelKind::cnn1d,
                         ModelKind::lstm}) {
    CAPTURE(to_string(kind));
    TrainResult r = train(kind, ds, cfg);
    std::stringstream ss;
    r.model->save(ss);
    const auto loaded = load_predictor(ss);
    REQUIRE(loaded->kind() == kind);
    for (const auto& s : ds.samples)
      CHECK(loaded->predict(s.features) == r.model->predict(s.features));
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const SeriesDataset ds = synthetic_dataset(1, 3, 64, 41, last_lag_doubled);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 9;
  TrainResult r1 = train(ModelKind::lstm, ds, cfg);
  TrainResult r2 = train(ModelKind::lstm, ds, cfg);
  for (const auto& s : ds.samples)
    CHECK(r1.model->predict(s.features) == r2.model->predict(s.features));
}
