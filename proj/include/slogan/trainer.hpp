#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slogan/calibrator.hpp"
#include "slogan/graph.hpp"
#include "slogan/model.hpp"

namespace slogan {

struct AblationFlags {
  bool no_dis = false;
  bool no_inv = false;
  bool no_sup_target = false;

  bool any() const { return no_dis || no_inv || no_sup_target; }
};

struct TrainConfig {
  real gamma = 0.003;
  real eta = 0.1;
  real tau = 0.95;
  real beta = 0.5;
  real lr = 0.001;
  std::size_t batch_size = 128;
  int warmup_epochs = 100;
  int adapt_epochs = 30;
  std::uint64_t seed = 0;
  AblationFlags ablation;
  bool symmetric_swap = false;
  bool stop_gradient_target = false;

  void validate() const;
  DisentangleConfig disentangle() const;
};

// Independent random streams derived from the run seed. Each phase draws only
// from its own stream, so disabling a term never shifts the data order.
enum class Stream : std::uint64_t { init = 1, warmup_order, adapt_order, target_order, critic, dis, swap, audit };
Rng stream(const TrainConfig& cfg, Stream s);

/// Loss terms of one step (or their mean over an epoch). Inactive terms are 0
/// and flagged so they can be reported as absent.
struct LossBreakdown {
  double source = 0;       // L_so
  double target = 0;       // L_ta
  double sup = 0;          // L_sup
  double causal_mi = 0;    // L^c_MI
  double spurious_mi = 0;  // L^s_MI
  double dis = 0;          // L_dis
  double ge = 0;           // L_ge (= L_re inside L_inv)
  double inv = 0;          // L_inv
  double total = 0;        // L
  bool target_active = false;
  bool dis_active = false;
  bool inv_active = false;

  double recompute_total(const TrainConfig& cfg) const;
};

struct EpochLog {
  int epoch = 0;
  LossBreakdown loss;  // mean over the epoch's batches
  std::size_t confident = 0;
  double source_acc = 0;
  std::optional<double> target_acc;
};

struct WarmupEpoch {
  int epoch = 0;
  double source_loss = 0;
  double ge = 0;
};

struct WarmupResult {
  SloganModel model;
  double source_accuracy = 0;
  std::vector<WarmupEpoch> epochs;
};

struct Accuracy {
  double accuracy = 0;
  std::vector<double> per_class;  // NaN for classes absent from the data
  std::size_t count = 0;
};

/// Per-epoch callback: model after the epoch, the epoch's confident-set
/// inputs, and its log entry.
struct AdaptHooks {
  std::function<void(const SloganModel&, const std::vector<PredictionRecord>&, const ThresholdTable&,
                     const EpochLog&)>
      on_epoch;
  std::function<void(const LossBreakdown&)> on_step;
};

struct AdaptResult {
  std::vector<EpochLog> epochs;
};

SloganModel init_model(const Dataset& source, const TrainConfig& cfg);

// One pass of L_so over `source` in an order drawn from `order`; the
// generator is fitted on detached features alongside when `fit_generator`.
WarmupEpoch supervised_epoch(SloganModel& model, const Dataset& source, const TrainConfig& cfg, Rng& order,
                             bool fit_generator);

WarmupResult warmup(const Dataset& source, const TrainConfig& cfg);

AdaptResult adapt(SloganModel& model, const Dataset& source, const Dataset& target, const TrainConfig& cfg,
                  const AdaptHooks& hooks = {});

Accuracy evaluate(const Dataset& ds, const SloganModel& model);

struct AblationRow {
  std::uint64_t seed = 0;
  double source_only = 0;
  double full = 0;
  double no_sup_target = 0;
  double no_inv = 0;
  double no_dis = 0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  AblationRow mean() const;
};

// Warm-up once per seed, then the four adaptation variants from that snapshot.
AblationTable ablate(const Dataset& source, const Dataset& target, const TrainConfig& cfg,
                     const std::vector<std::uint64_t>& seeds);

struct BoundAudit {
  double source_error = 0;            // empirical source error
  double spurious_label_mi = 0;       // variational I(z^s; y) estimate on source
  double reconstruction_residual = 0; // mean ||z - G(z^c, z^s)||^2 over both domains
  std::optional<double> target_error;
};

BoundAudit bound_audit(const SloganModel& model, const Dataset& source, const Dataset& target,
                       const TrainConfig& cfg);

struct ScalingConfig {
  std::vector<std::size_t> sizes{100, 200, 400, 800, 1600, 3200};
  int repeats = 5;
  std::size_t feature_dim = 16;
  double avg_degree = 4.0;
  std::uint64_t seed = 0;
};

struct ScalingPoint {
  std::size_t nodes = 0;
  double median_seconds = 0;
  std::vector<double> samples;
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
};

ScalingReport bench_scaling(const ScalingConfig& cfg);

// id, domain, label, zc_0.., zs_0.. for every graph of both datasets.
void write_features_csv(const std::filesystem::path& file, const SloganModel& model, const Dataset& source,
                        const Dataset& target);

void write_metrics_csv(const std::filesystem::path& file, const std::vector<EpochLog>& epochs);

}  // namespace slogan
