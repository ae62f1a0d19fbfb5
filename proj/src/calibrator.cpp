#include "slogan/calibrator.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "slogan/error.hpp"

namespace slogan {

PredictionRecord make_record(std::int64_t id, std::size_t index, std::vector<real> probs) {
  if (probs.empty()) throw Error("make_record: empty probability vector");
  PredictionRecord r;
  r.id = id;
  r.index = index;
  r.predicted = 0;
  for (std::size_t c = 1; c < probs.size(); ++c) {
    if (probs[c] > probs[static_cast<std::size_t>(r.predicted)]) r.predicted = static_cast<int>(c);
  }
  r.confidence = probs[static_cast<std::size_t>(r.predicted)];
  r.probs = std::move(probs);
  return r;
}

std::vector<PredictionRecord> score_target(const Dataset& ds, const SloganModel& model, std::size_t batch_size) {
  if (ds.empty()) throw DataError("score_target: empty dataset");
  NoGradGuard no_grad;
  std::vector<PredictionRecord> records;
  records.reserve(ds.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t end = std::min(ds.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const GraphBatch batch = make_batch(ds, idx);
    const Tensor probs = softmax_rows(model.forward(batch).logits);
    const std::size_t c = probs.cols();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::vector<real> p(probs.values().begin() + i * c, probs.values().begin() + (i + 1) * c);
      records.push_back(make_record(ds.graphs[idx[i]].id, idx[i], std::move(p)));
    }
  }
  return records;
}

ThresholdTable build_thresholds(std::span<const PredictionRecord> records, int num_classes, real tau) {
  if (records.empty()) throw Error("build_thresholds: no records");
  if (!(tau > 0 && tau <= 1)) throw ConfigError("tau: must lie in (0, 1], got " + std::to_string(tau));
  ThresholdTable t;
  t.tau = tau;
  const auto c = static_cast<std::size_t>(num_classes);
  t.max_confidence.assign(c, 0);
  t.observed.assign(c, false);
  for (const auto& r : records) {
    const auto k = static_cast<std::size_t>(r.predicted);
    if (k >= c) throw Error("build_thresholds: predicted class " + std::to_string(r.predicted) + " out of range");
    if (!t.observed[k] || r.confidence > t.max_confidence[k]) t.max_confidence[k] = r.confidence;
    t.observed[k] = true;
  }
  t.thresholds.resize(c);
  for (std::size_t k = 0; k < c; ++k) t.thresholds[k] = t.observed[k] ? t.max_confidence[k] * tau : tau;
  return t;
}

ConfidentSet select_confident(std::span<const PredictionRecord> records, const ThresholdTable& table) {
  ConfidentSet set;
  for (const auto& r : records) {
    const auto k = static_cast<std::size_t>(r.predicted);
    if (k < table.thresholds.size() && r.confidence > table.thresholds[k])
      set.members.push_back({r.id, r.index, r.predicted, r.confidence});
  }
  return set;
}

Tensor source_loss(const Tensor& logits, std::span<const int> labels) {
  return mean_all(nll_log_softmax(logits, labels));
}

Tensor nll_from_probs(const Tensor& probs, std::span<const int> labels) {
  return scale(mean_all(log(pick_cols(clamp(probs, real(1e-12), real(1)), labels))), real(-1));
}

Tensor target_loss(const Tensor& logits, std::span<const int> pseudo_labels) {
  if (pseudo_labels.empty()) return Tensor::scalar(0);
  return mean_all(nll_log_softmax(logits, pseudo_labels));
}

Tensor sup_loss(const Tensor& source, const Tensor& target) { return add(source, target); }

void write_confident_csv(const std::filesystem::path& file, std::span<const PredictionRecord> records,
                         const ThresholdTable& table) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << "id,predicted,confidence,admitted\n";
  char buf[64];
  for (const auto& r : records) {
    const bool admitted = r.confidence > table.thresholds[static_cast<std::size_t>(r.predicted)];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(r.confidence));
    out << r.id << ',' << r.predicted << ',' << buf << ',' << (admitted ? 1 : 0) << '\n';
  }
}

}  // namespace slogan
