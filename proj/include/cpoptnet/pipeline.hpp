#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cpoptnet/metrics.hpp"
#include "cpoptnet/predictor.hpp"
#include "cpoptnet/tensor.hpp"

namespace cpoptnet {

struct PredictionRow {
  Index client, transaction, slice;
  double predicted, actual;
};

// Rolling forecast for every (client, transaction) pair, starting at
// from_slice. The actual column carries the latent value at the same
// slice, so from_slice + horizon must not exceed the time dimension.
std::vector<PredictionRow> predict_all_pairs(const Predictor& m,
                                             const KruskalTensor& k,
                                             Index from_slice, Index horizon,
                                             bool open_loop);

// CSV: client,transaction,slice,predicted,actual
void write_predictions_csv(const std::vector<PredictionRow>& rows, std::ostream& out);
std::vector<PredictionRow> read_predictions_csv(std::istream& in);

// CSV: client,transaction,slice,value
struct TruthRow {
  Index client, transaction, slice;
  double value;
};
void write_truth_csv(const std::vector<TruthRow>& rows, std::ostream& out);
std::vector<TruthRow> read_truth_csv(std::istream& in);
std::vector<TruthRow> latent_truth(const KruskalTensor& k, Index from_slice,
                                   Index horizon);

// Per-transaction reports plus the pooled "ALL" row. Every prediction key
// must have a matching truth key; offenders are listed in the error.
std::vector<std::pair<std::string, MetricReport>> evaluate_predictions(
    const std::vector<PredictionRow>& predictions, const std::vector<TruthRow>& truth);

// CSV: scope,metric,value,n
void write_report_csv(const std::vector<std::pair<std::string, MetricReport>>& rows,
                      std::ostream& out);

}  // namespace cpoptnet
