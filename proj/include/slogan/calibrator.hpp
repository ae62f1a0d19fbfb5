#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "slogan/graph.hpp"
#include "slogan/model.hpp"

namespace slogan {

struct PredictionRecord {
  std::int64_t id = 0;
  std::size_t index = 0;  // position in the scored dataset
  std::vector<real> probs;
  real confidence = 0;  // max_c probs[c]
  int predicted = 0;    // argmax, lowest index on ties
};

PredictionRecord make_record(std::int64_t id, std::size_t index, std::vector<real> probs);

/// Class-adaptive thresholds tau_c = M_c * tau, where M_c is the highest
/// confidence among records predicted as c. Unpredicted classes fall back to tau.
struct ThresholdTable {
  real tau = 0.95;
  std::vector<real> max_confidence;  // M_c (0 where unobserved)
  std::vector<bool> observed;
  std::vector<real> thresholds;      // tau_c
};

struct ConfidentMember {
  std::int64_t id = 0;
  std::size_t index = 0;
  int pseudo_label = 0;
  real confidence = 0;
};

struct ConfidentSet {
  std::vector<ConfidentMember> members;

  std::size_t size() const { return members.size(); }
  bool empty() const { return members.empty(); }
};

// Scores every graph from causal features only, without recording a graph.
std::vector<PredictionRecord> score_target(const Dataset& ds, const SloganModel& model,
                                           std::size_t batch_size = 256);

ThresholdTable build_thresholds(std::span<const PredictionRecord> records, int num_classes, real tau);

// Members are exactly the records with confidence > tau_{predicted}.
ConfidentSet select_confident(std::span<const PredictionRecord> records, const ThresholdTable& table);

// Mean -log p[y] from logits (log-softmax path).
Tensor source_loss(const Tensor& logits, std::span<const int> labels);
// Same quantity from probabilities, clamped to [1e-12, 1] before the log.
Tensor nll_from_probs(const Tensor& probs, std::span<const int> labels);
// Mean -log p[pseudo-label] over confident rows; an empty set gives 0.
Tensor target_loss(const Tensor& logits, std::span<const int> pseudo_labels);
Tensor sup_loss(const Tensor& source, const Tensor& target);

// id, predicted class, confidence, admitted flag.
void write_confident_csv(const std::filesystem::path& file, std::span<const PredictionRecord> records,
                         const ThresholdTable& table);

}  // namespace slogan
