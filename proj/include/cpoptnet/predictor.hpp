#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "cpoptnet/tensor.hpp"

namespace cpoptnet {

enum class ModelKind { tree, mlp, cnn1d, lstm };

ModelKind model_kind_from_string(const std::string& s);
const char* to_string(ModelKind k);

struct TrainConfig {
  Index epochs = 200;
  Index batch_size = 32;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  std::uint64_t seed = 0;

  void validate() const;
};

// Supervised windows over the latent series v_ij(k). Feature layout:
// [A.row(i) (R), B.row(j) (R), v_ij(k-w..k-1) (w)], target v_ij(k).
struct SeriesSample {
  Vector features;
  double target;
  Index i, j, k;
};

struct SeriesDataset {
  Index rank = 0;
  Index window = 0;
  std::vector<SeriesSample> samples;

  Index feature_dim() const { return 2 * rank + window; }
};

// One sample per (i, j, k) with k in [train_begin, train_end) and k >= window,
// ordered i-major, then j, then k.
SeriesDataset build_dataset(const KruskalTensor& k, Index window,
                            Index train_begin, Index train_end);

class Predictor {
public:
  virtual ~Predictor() = default;
  virtual ModelKind kind() const = 0;
  virtual Index rank() const = 0;
  virtual Index window() const = 0;
  virtual double predict(const Vector& features) const = 0;
  virtual void save(std::ostream& out) const = 0;
};

// Gradient-trained models expose their parameters as one flat vector so
// the Adam loop and the finite-difference checks share a single view.
class GradientModel : public Predictor {
public:
  virtual Vector& params() = 0;
  virtual const Vector& params() const = 0;
  // Mean squared error over the batch and its gradient w.r.t. params().
  virtual double loss_and_gradient(const std::vector<const SeriesSample*>& batch,
                                   Vector& grad) const = 0;
};

std::unique_ptr<GradientModel> make_gradient_model(ModelKind kind, Index rank,
                                                   Index window, std::uint64_t seed);

// LSTM with a non-default hidden width (the trained default is 32).
std::unique_ptr<GradientModel> make_lstm_model(Index rank, Index window,
                                               std::uint64_t seed, Index hidden);

struct AdamState {
  Vector m, v;
  Index step = 0;
};

// One Adam update in place; eps = 1e-8, bias-corrected moments.
void adam_step(Vector& params, const Vector& grad, AdamState& state,
               const TrainConfig& cfg);

struct TrainResult {
  std::unique_ptr<Predictor> model;
  std::vector<double> epoch_loss;  // empty for the tree
};

TrainResult train(ModelKind kind, const SeriesDataset& ds, const TrainConfig& cfg);

// Rolling multi-step forecast for one (i, j) pair. The lag buffer starts
// from the latent values at slices [from_slice - w, from_slice); closed
// loop feeds predictions back, open loop re-reads latent values (which
// must then exist through from_slice + horizon - 1).
Vector predict_rolling(const Predictor& m, const KruskalTensor& k,
                       Index i, Index j, Index from_slice, Index horizon,
                       bool open_loop = false);

std::unique_ptr<Predictor> load_predictor(std::istream& in);
std::unique_ptr<Predictor> load_predictor_file(const std::string& path);
void save_predictor_file(const Predictor& m, const std::string& path);

}  // namespace cpoptnet
