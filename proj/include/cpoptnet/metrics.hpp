#pragma once

#include <vector>

#include "cpoptnet/tensor.hpp"

namespace cpoptnet {

struct MetricReport {
  double mae = 0.0;
  double rmse = 0.0;
  double cosine_sim = 0.0;
  double jaccard_dist = 0.0;
  Index n = 0;
};

// MAE, RMSE, cosine similarity and generalized (Ruzicka) Jaccard distance
// between a predicted and an actual series. Jaccard is computed on values
// clipped to be nonnegative. Zero-vector conventions: cosine is 1 when
// both vectors are zero and 0 when exactly one is; Jaccard distance is 0
// when both clipped sums vanish.
MetricReport evaluate(const Vector& pred, const Vector& actual);

// Sample-weighted pooling: MAE/RMSE recomputed from pooled error moments,
// cosine and Jaccard as weighted means of the per-report values.
MetricReport aggregate(const std::vector<MetricReport>& reports);

}  // namespace cpoptnet
