#include "cpoptnet/metrics.hpp"

#include <cmath>

namespace cpoptnet {

MetricReport evaluate(const Vector& pred, const Vector& actual) {
  if (pred.size() == 0 || pred.size() != actual.size())
    throw ArgumentError("evaluate: vectors must be non-empty and equal length");
  if (!pred.allFinite() || !actual.allFinite())
    throw ArgumentError("evaluate: non-finite input");

  MetricReport r;
  r.n = pred.size();
  const Vector err = pred - actual;
  r.mae = err.cwiseAbs().mean();
  r.rmse = std::sqrt(err.squaredNorm() / double(r.n));

  const double np = pred.norm(), na = actual.norm();
  if (np == 0.0 && na == 0.0)
    r.cosine_sim = 1.0;
  else if (np == 0.0 || na == 0.0)
    r.cosine_sim = 0.0;
  else
    r.cosine_sim = pred.dot(actual) / (np * na);

  const Vector p = pred.cwiseMax(0.0), a = actual.cwiseMax(0.0);
  const double s_min = p.cwiseMin(a).sum();
  const double s_max = p.cwiseMax(a).sum();
  r.jaccard_dist = s_max == 0.0 ? 0.0 : 1.0 - s_min / s_max;
  return r;
}

MetricReport aggregate(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw ArgumentError("aggregate: empty report list");
  MetricReport out;
  double abs_sum = 0, sq_sum = 0, cos_sum = 0, jac_sum = 0;
  for (const auto& r : reports) {
    const double w = double(r.n);
    abs_sum += w * r.mae;
    sq_sum += w * r.rmse * r.rmse;
    cos_sum += w * r.cosine_sim;
    jac_sum += w * r.jaccard_dist;
    out.n += r.n;
  }
  const double n = double(out.n);
  out.mae = abs_sum / n;
  out.rmse = std::sqrt(sq_sum / n);
  out.cosine_sim = cos_sum / n;
  out.jaccard_dist = jac_sum / n;
  return out;
}

}  // namespace cpoptnet
