#include "cpoptnet/pipeline.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace cpoptnet {

std::vector<PredictionRow> predict_all_pairs(const Predictor& m,
                                             const KruskalTensor& k,
                                             Index from_slice, Index horizon,
                                             bool open_loop) {
  const auto [I, J, K] = k.shape();
  if (from_slice + horizon > K)
    throw ArgumentError("predict_all_pairs: horizon runs past the factor time span");
  std::vector<PredictionRow> rows;
  rows.reserve(I * J * horizon);
  for (Index i = 0; i < I; ++i)
    for (Index j = 0; j < J; ++j) {
      const Vector fc = predict_rolling(m, k, i, j, from_slice, horizon, open_loop);
      for (Index s = 0; s < horizon; ++s)
        rows.push_back({i, j, from_slice + s, fc[s], k.latent(i, j, from_slice + s)});
    }
  return rows;
}

void write_predictions_csv(const std::vector<PredictionRow>& rows, std::ostream& out) {
  out << "client,transaction,slice,predicted,actual\n";
  for (const auto& r : rows)
    out << r.client << ',' << r.transaction << ',' << r.slice << ','
        << format_double(r.predicted) << ',' << format_double(r.actual) << '\n';
}

std::vector<PredictionRow> read_predictions_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "client,transaction,slice,predicted,actual")
    throw IoError("predictions CSV: bad header");
  std::vector<PredictionRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    PredictionRow r;
    char comma;
    std::istringstream ss(line);
    if (!(ss >> r.client >> comma >> r.transaction >> comma >> r.slice >> comma >>
          r.predicted >> comma >> r.actual))
      throw IoError("predictions CSV: malformed row: " + line);
    rows.push_back(r);
  }
  return rows;
}

void write_truth_csv(const std::vector<TruthRow>& rows, std::ostream& out) {
  out << "client,transaction,slice,value\n";
  for (const auto& r : rows)
    out << r.client << ',' << r.transaction << ',' << r.slice << ','
        << format_double(r.value) << '\n';
}

std::vector<TruthRow> read_truth_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "client,transaction,slice,value")
    throw IoError("truth CSV: bad header");
  std::vector<TruthRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TruthRow r;
    char comma;
    std::istringstream ss(line);
    if (!(ss >> r.client >> comma >> r.transaction >> comma >> r.slice >> comma >>
          r.value))
      throw IoError("truth CSV: malformed row: " + line);
    rows.push_back(r);
  }
  return rows;
}

std::vector<TruthRow> latent_truth(const KruskalTensor& k, Index from_slice,
                                   Index horizon) {
  const auto [I, J, K] = k.shape();
  if (from_slice < 0 || from_slice + horizon > K)
    throw ArgumentError("latent_truth: slice range out of bounds");
  std::vector<TruthRow> rows;
  for (Index i = 0; i < I; ++i)
    for (Index j = 0; j < J; ++j)
      for (Index s = 0; s < horizon; ++s)
        rows.push_back({i, j, from_slice + s, k.latent(i, j, from_slice + s)});
  return rows;
}

std::vector<std::pair<std::string, MetricReport>> evaluate_predictions(
    const std::vector<PredictionRow>& predictions,
    const std::vector<TruthRow>& truth) {
  if (predictions.empty()) throw ArgumentError("evaluate: no predictions");

  std::map<std::tuple<Index, Index, Index>, double> truth_map;
  for (const auto& t : truth) truth_map[{t.client, t.transaction, t.slice}] = t.value;

  std::string offenders;
  Index n_offenders = 0;
  for (const auto& p : predictions)
    if (!truth_map.count({p.client, p.transaction, p.slice})) {
      ++n_offenders;
      if (n_offenders <= 10)
        offenders += " (" + std::to_string(p.client) + "," +
                     std::to_string(p.transaction) + "," + std::to_string(p.slice) + ")";
    }
  if (n_offenders == static_cast<Index>(predictions.size()))
    throw ArgumentError("evaluate: prediction and truth keys do not intersect");
  if (n_offenders > 0)
    throw ArgumentError("evaluate: " + std::to_string(n_offenders) +
                        " prediction keys missing from truth:" + offenders);

  // Per (client, transaction) series, ordered by slice.
  std::map<std::pair<Index, Index>, std::vector<PredictionRow>> series;
  for (const auto& p : predictions) series[{p.client, p.transaction}].push_back(p);

  std::map<Index, std::vector<MetricReport>> by_transaction;
  std::vector<MetricReport> all;
  for (auto& [key, rows] : series) {
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.slice < b.slice; });
    Vector pred(rows.size()), actual(rows.size());
    for (std::size_t u = 0; u < rows.size(); ++u) {
      pred[u] = rows[u].predicted;
      actual[u] = truth_map.at({rows[u].client, rows[u].transaction, rows[u].slice});
    }
    const MetricReport r = evaluate(pred, actual);
    by_transaction[key.second].push_back(r);
    all.push_back(r);
  }

  std::vector<std::pair<std::string, MetricReport>> out;
  for (const auto& [label, reports] : by_transaction)
    out.emplace_back(std::to_string(label), aggregate(reports));
  out.emplace_back("ALL", aggregate(all));
  return out;
}

void write_report_csv(const std::vector<std::pair<std::string, MetricReport>>& rows,
                      std::ostream& out) {
  out << "scope,metric,value,n\n";
  for (const auto& [scope, r] : rows) {
    out << scope << ",mae," << format_double(r.mae) << ',' << r.n << '\n';
    out << scope << ",jaccard_dist," << format_double(r.jaccard_dist) << ',' << r.n
        << '\n';
    out << scope << ",cosine_sim," << format_double(r.cosine_sim) << ',' << r.n << '\n';
    out << scope << ",rmse," << format_double(r.rmse) << ',' << r.n << '\n';
  }
}

}  // namespace cpoptnet
