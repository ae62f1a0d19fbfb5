#include "slogan/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "slogan/error.hpp"
#include "slogan/synthetic.hpp"

namespace slogan {

void TrainConfig::validate() const {
  if (!(gamma >= 0)) throw ConfigError("gamma: must be >= 0");
  if (!(eta >= 0)) throw ConfigError("eta: must be >= 0");
  if (!(beta >= 0)) throw ConfigError("beta: must be >= 0");
  if (!(tau > 0 && tau <= 1)) throw ConfigError("tau: must lie in (0, 1]");
  if (!(lr >= 0)) throw ConfigError("lr: must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
  if (warmup_epochs < 0) throw ConfigError("warmup_epochs: must be >= 0");
  if (adapt_epochs < 0) throw ConfigError("adapt_epochs: must be >= 0");
}

DisentangleConfig TrainConfig::disentangle() const {
  DisentangleConfig d;
  d.beta = beta;
  return d;
}

Rng stream(const TrainConfig& cfg, Stream s) { return Rng(cfg.seed).fork(static_cast<std::uint64_t>(s)); }

double LossBreakdown::recompute_total(const TrainConfig& cfg) const {
  double t = source;
  if (target_active) t += target;
  if (dis_active) t += cfg.gamma * dis;
  if (inv_active) t += cfg.eta * inv;
  return t;
}

namespace {

std::vector<std::size_t> slice(const std::vector<std::size_t>& order, std::size_t begin, std::size_t end) {
  return {order.begin() + static_cast<std::ptrdiff_t>(begin), order.begin() + static_cast<std::ptrdiff_t>(end)};
}

// Cycles through a dataset in reshuffled passes.
class CyclingSampler {
 public:
  CyclingSampler(std::size_t n, Rng rng) : n_(n), rng_(std::move(rng)) {}

  std::vector<std::size_t> take(std::size_t count) {
    std::vector<std::size_t> out;
    count = std::min(count, n_);
    while (out.size() < count) {
      if (pos_ == order_.size()) {
        order_ = rng_.permutation(n_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::size_t n_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

void accumulate(LossBreakdown& acc, const LossBreakdown& step) {
  acc.source += step.source;
  acc.target += step.target;
  acc.sup += step.sup;
  acc.causal_mi += step.causal_mi;
  acc.spurious_mi += step.spurious_mi;
  acc.dis += step.dis;
  acc.ge += step.ge;
  acc.inv += step.inv;
  acc.total += step.total;
  acc.target_active = acc.target_active || step.target_active;
  acc.dis_active = acc.dis_active || step.dis_active;
  acc.inv_active = acc.inv_active || step.inv_active;
}

void divide(LossBreakdown& acc, double n) {
  for (double* v : {&acc.source, &acc.target, &acc.sup, &acc.causal_mi, &acc.spurious_mi, &acc.dis, &acc.ge,
                    &acc.inv, &acc.total})
    *v /= n;
}

void check_compatible(const Dataset& source, const Dataset& target) {
  if (source.feature_dim != target.feature_dim)
    throw DataError("source feature dim " + std::to_string(source.feature_dim) + " differs from target dim " +
                    std::to_string(target.feature_dim));
}

}  // namespace

SloganModel init_model(const Dataset& source, const TrainConfig& cfg) {
  if (source.num_classes < 2) throw DataError("source dataset needs at least 2 classes");
  Rng rng = stream(cfg, Stream::init);
  return SloganModel::init(source.feature_dim, source.num_classes, cfg.disentangle(), rng);
}

WarmupEpoch supervised_epoch(SloganModel& model, const Dataset& source, const TrainConfig& cfg, Rng& order,
                             bool fit_generator) {
  const auto perm = order.permutation(source.size());
  WarmupEpoch log;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < perm.size(); start += cfg.batch_size) {
    const auto idx = slice(perm, start, std::min(perm.size(), start + cfg.batch_size));
    const GraphBatch batch = make_batch(source, idx);
    const auto labels = batch.require_labels();
    const auto out = model.forward(batch);
    const Tensor l_so = source_loss(out.logits, labels);
    log.source_loss += l_so.item();
    if (fit_generator) {
      const Tensor l_ge = reconstruction_loss(out.feats.detached(), model.generator);
      log.ge += l_ge.item();
      add(l_so, l_ge).backward();
      model.generator_store.adam_step(cfg.lr);
    } else {
      l_so.backward();
    }
    model.backbone.adam_step(cfg.lr);
    ++batches;
  }
  if (batches) {
    log.source_loss /= static_cast<double>(batches);
    log.ge /= static_cast<double>(batches);
  }
  return log;
}

WarmupResult warmup(const Dataset& source, const TrainConfig& cfg) {
  cfg.validate();
  if (source.empty()) throw DataError("warmup: empty source dataset");
  if (!source.labeled()) throw DataError("warmup: source dataset must be labeled");
  WarmupResult result{init_model(source, cfg), 0.0, {}};
  Rng order = stream(cfg, Stream::warmup_order);
  for (int e = 0; e < cfg.warmup_epochs; ++e) {
    WarmupEpoch log = supervised_epoch(result.model, source, cfg, order, true);
    log.epoch = e + 1;
    result.epochs.push_back(log);
  }
  result.source_accuracy = evaluate(source, result.model).accuracy;
  return result;
}

AdaptResult adapt(SloganModel& model, const Dataset& source, const Dataset& target, const TrainConfig& cfg,
                  const AdaptHooks& hooks) {
  cfg.validate();
  if (source.empty()) throw DataError("adapt: empty source dataset");
  if (target.empty()) throw DataError("adapt: empty target dataset");
  if (!source.labeled()) throw DataError("adapt: source dataset must be labeled");
  check_compatible(source, target);

  Rng order = stream(cfg, Stream::adapt_order);
  CyclingSampler target_sampler(target.size(), stream(cfg, Stream::target_order));
  Rng critic_rng = stream(cfg, Stream::critic);
  Rng dis_rng = stream(cfg, Stream::dis);
  Rng swap_rng = stream(cfg, Stream::swap);
  const DisentangleConfig dis_cfg = cfg.disentangle();
  const InterventionOptions inv_opts{cfg.symmetric_swap, cfg.stop_gradient_target};

  const bool use_target = !cfg.ablation.no_sup_target;
  const bool use_dis = !cfg.ablation.no_dis;
  const bool use_inv = !cfg.ablation.no_inv;

  AdaptResult result;
  for (int e = 0; e < cfg.adapt_epochs; ++e) {
    const auto records = score_target(target, model);
    const ThresholdTable table = build_thresholds(records, model.num_classes, cfg.tau);
    const ConfidentSet confident = select_confident(records, table);
    std::vector<int> pseudo(target.size(), -1);
    for (const auto& m : confident.members) pseudo[m.index] = m.pseudo_label;

    const auto perm = order.permutation(source.size());
    LossBreakdown epoch_sum;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < perm.size(); start += cfg.batch_size) {
      const auto src_idx = slice(perm, start, std::min(perm.size(), start + cfg.batch_size));
      const auto tgt_idx = target_sampler.take(cfg.batch_size);
      const GraphBatch src_batch = make_batch(source, src_idx);
      const GraphBatch tgt_batch = make_batch(target, tgt_idx);
      const auto y_src = src_batch.require_labels();
      const auto out_s = model.forward(src_batch);
      const auto out_t = model.forward(tgt_batch);

      std::vector<std::size_t> conf_rows;
      std::vector<int> conf_labels;
      for (std::size_t i = 0; i < tgt_idx.size(); ++i) {
        if (pseudo[tgt_idx[i]] >= 0) {
          conf_rows.push_back(i);
          conf_labels.push_back(pseudo[tgt_idx[i]]);
        }
      }

      LossBreakdown step;
      const Tensor l_so = source_loss(out_s.logits, y_src);
      step.source = l_so.item();
      Tensor total = l_so;

      if (use_target && !conf_rows.empty()) {
        const Tensor l_ta = target_loss(gather_rows(out_t.logits, conf_rows), conf_labels);
        step.target = l_ta.item();
        step.target_active = true;
        total = add(total, l_ta);
      }
      step.sup = step.source + step.target;

      if (use_dis) {
        // Labels come from source ground truth and target pseudo-labels only.
        DisentangledFeatures feats = out_s.feats;
        std::vector<int> labels = y_src;
        if (!conf_rows.empty()) {
          feats = feats.concat(out_t.feats.rows(conf_rows));
          labels.insert(labels.end(), conf_labels.begin(), conf_labels.end());
        }
        if (feats.size() >= 2) {
          if (cfg.gamma > 0) critic_fit_step(feats, labels, model.critic, model.critic_store, cfg.lr, critic_rng);
          std::optional<NoGradGuard> frozen;
          if (cfg.gamma == 0) frozen.emplace();
          const DisLoss d = dis_loss(feats, labels, model.critic.detached(), dis_cfg, dis_rng);
          step.causal_mi = d.causal.item();
          step.spurious_mi = d.spurious.item();
          step.dis = d.total.item();
          step.dis_active = true;
          if (cfg.gamma > 0) total = add(total, scale(d.total, cfg.gamma));
        }
      }

      if (use_inv) {
        const SwapPlan plan = build_swap_plan(src_idx.size(), tgt_idx.size(), swap_rng, cfg.symmetric_swap);
        std::optional<NoGradGuard> frozen;
        if (cfg.eta == 0) frozen.emplace();
        const InvarianceLoss inv = invariance_loss(out_s.feats, out_t.feats, plan, model.generator, inv_opts);
        step.ge = inv.reconstruction.item();
        step.inv = inv.total.item();
        step.inv_active = true;
        if (cfg.eta > 0) total = add(total, scale(inv.total, cfg.eta));
      }
      step.total = total.item();

      total.backward();
      model.backbone.adam_step(cfg.lr);
      if (model.spurious.all_have_grad()) {
        model.spurious.adam_step(cfg.lr);
      } else {
        model.spurious.zero_grad();
      }
      if (use_inv && cfg.eta > 0) {
        model.generator_store.adam_step(cfg.lr);
      } else {
        model.generator_store.zero_grad();
      }

      if (hooks.on_step) hooks.on_step(step);
      accumulate(epoch_sum, step);
      ++batches;
    }
    divide(epoch_sum, static_cast<double>(std::max<std::size_t>(batches, 1)));

    EpochLog log;
    log.epoch = e + 1;
    log.loss = epoch_sum;
    log.confident = confident.size();
    log.source_acc = evaluate(source, model).accuracy;
    if (target.labeled()) log.target_acc = evaluate(target, model).accuracy;
    if (hooks.on_epoch) hooks.on_epoch(model, records, table, log);
    result.epochs.push_back(log);
  }
  return result;
}

Accuracy evaluate(const Dataset& ds, const SloganModel& model) {
  if (ds.empty()) throw DataError("evaluate: empty dataset");
  if (!ds.labeled()) throw DataError("evaluate: dataset has unlabeled graphs");
  const auto records = score_target(ds, model);
  const auto c = static_cast<std::size_t>(std::max(ds.num_classes, model.num_classes));
  std::vector<std::size_t> correct(c, 0), seen(c, 0);
  std::size_t hits = 0;
  for (const auto& r : records) {
    const int y = *ds.graphs[r.index].label;
    ++seen[static_cast<std::size_t>(y)];
    if (r.predicted == y) {
      ++hits;
      ++correct[static_cast<std::size_t>(y)];
    }
  }
  Accuracy acc;
  acc.count = records.size();
  acc.accuracy = static_cast<double>(hits) / static_cast<double>(records.size());
  for (std::size_t k = 0; k < c; ++k)
    acc.per_class.push_back(seen[k] ? static_cast<double>(correct[k]) / static_cast<double>(seen[k])
                                    : std::numeric_limits<double>::quiet_NaN());
  return acc;
}

AblationRow AblationTable::mean() const {
  AblationRow m;
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.source_only += r.source_only;
    m.full += r.full;
    m.no_sup_target += r.no_sup_target;
    m.no_inv += r.no_inv;
    m.no_dis += r.no_dis;
  }
  const double n = static_cast<double>(rows.size());
  for (double* v : {&m.source_only, &m.full, &m.no_sup_target, &m.no_inv, &m.no_dis}) *v /= n;
  return m;
}

AblationTable ablate(const Dataset& source, const Dataset& target, const TrainConfig& cfg,
                     const std::vector<std::uint64_t>& seeds) {
  if (!target.labeled()) throw DataError("ablate: target labels are needed for evaluation");
  AblationTable table;
  for (auto seed : seeds) {
    TrainConfig run = cfg;
    run.seed = seed;
    run.ablation = {};
    const WarmupResult warm = warmup(source, run);
    AblationRow row;
    row.seed = seed;
    row.source_only = evaluate(target, warm.model).accuracy;
    auto variant = [&](AblationFlags flags) {
      TrainConfig v = run;
      v.ablation = flags;
      SloganModel m = warm.model.clone();
      adapt(m, source, target, v);
      return evaluate(target, m).accuracy;
    };
    row.full = variant({});
    row.no_sup_target = variant({false, false, true});
    row.no_inv = variant({false, true, false});
    row.no_dis = variant({true, false, false});
    table.rows.push_back(row);
  }
  return table;
}

BoundAudit bound_audit(const SloganModel& model, const Dataset& source, const Dataset& target,
                       const TrainConfig& cfg) {
  NoGradGuard no_grad;
  BoundAudit audit;
  audit.source_error = 1.0 - evaluate(source, model).accuracy;
  if (target.labeled() && !target.empty()) audit.target_error = 1.0 - evaluate(target, model).accuracy;

  Rng rng = stream(cfg, Stream::audit);
  std::vector<std::size_t> all(source.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const GraphBatch src = make_batch(source, all);
  const auto out_s = model.forward(src);
  if (source.size() >= 2) {
    const auto labels = src.require_labels();
    audit.spurious_label_mi =
        vib_spurious_terms(out_s.feats, labels, model.critic, model.dis_cfg, rng).label_mi.item();
  }
  double residual = reconstruction_loss(out_s.feats, model.generator).item() * static_cast<double>(source.size());
  std::size_t count = source.size();
  if (!target.empty()) {
    std::vector<std::size_t> tall(target.size());
    std::iota(tall.begin(), tall.end(), std::size_t{0});
    const auto out_t = model.forward(make_batch(target, tall));
    residual += reconstruction_loss(out_t.feats, model.generator).item() * static_cast<double>(target.size());
    count += target.size();
  }
  audit.reconstruction_residual = residual / static_cast<double>(count);
  return audit;
}

ScalingReport bench_scaling(const ScalingConfig& cfg) {
  using Clock = std::chrono::steady_clock;
  ScalingReport report;
  Rng rng(cfg.seed);
  Rng init = rng.fork(1);
  SloganModel model = SloganModel::init(cfg.feature_dim, 2, DisentangleConfig{}, init);
  std::vector<GraphBatch> batches;
  for (std::size_t nodes : cfg.sizes) {
    const std::vector<Graph> one{gen_scaling_graph(nodes, cfg.avg_degree, cfg.feature_dim, rng)};
    batches.push_back(make_batch(one));
    report.points.push_back({nodes, 0.0, {}});
  }
  const std::vector<int> labels{0};
  auto pass = [&](const GraphBatch& batch) {
    source_loss(model.forward(batch).logits, labels).backward();
  };
  // One untimed pass per size so first-touch allocation is not measured.
  for (const auto& b : batches) pass(b);
  model.backbone.zero_grad();
  // Sizes are interleaved within each repeat so slow periods on a shared
  // machine hit every size rather than one.
  for (int r = 0; r < std::max(cfg.repeats, 1); ++r) {
    for (std::size_t k = 0; k < batches.size(); ++k) {
      const auto t0 = Clock::now();
      pass(batches[k]);
      const auto t1 = Clock::now();
      model.backbone.zero_grad();
      report.points[k].samples.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
  }
  for (auto& point : report.points) {
    auto sorted = point.samples;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    point.median_seconds = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  }
  // Least-squares line through (nodes, median time).
  const double n = static_cast<double>(report.points.size());
  double sx = 0, sy = 0;
  for (const auto& p : report.points) {
    sx += static_cast<double>(p.nodes);
    sy += p.median_seconds;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : report.points) {
    const double dx = static_cast<double>(p.nodes) - mx, dy = p.median_seconds - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  report.slope = sxx > 0 ? sxy / sxx : 0;
  report.intercept = my - report.slope * mx;
  double ss_res = 0;
  for (const auto& p : report.points) {
    const double e = p.median_seconds - (report.intercept + report.slope * static_cast<double>(p.nodes));
    ss_res += e * e;
  }
  report.r_squared = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return report;
}

void write_features_csv(const std::filesystem::path& file, const SloganModel& model, const Dataset& source,
                        const Dataset& target) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  const std::size_t nc = model.dis_cfg.causal_dim, ns = model.dis_cfg.spurious_dim;
  out << "id,domain,label";
  for (std::size_t j = 0; j < nc; ++j) out << ",zc_" << j;
  for (std::size_t j = 0; j < ns; ++j) out << ",zs_" << j;
  out << '\n';
  NoGradGuard no_grad;
  char buf[48];
  for (const auto& [ds, domain] : {std::pair{&source, Domain::source}, std::pair{&target, Domain::target}}) {
    for (std::size_t start = 0; start < ds->size(); start += 256) {
      std::vector<std::size_t> idx(std::min<std::size_t>(256, ds->size() - start));
      std::iota(idx.begin(), idx.end(), start);
      const auto feats = model.forward(make_batch(*ds, idx)).feats;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const Graph& g = ds->graphs[idx[i]];
        out << g.id << ',' << domain_name(domain) << ',';
        if (g.label) out << *g.label;
        for (std::size_t j = 0; j < nc; ++j) {
          std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(feats.z_c.at(i, j)));
          out << buf;
        }
        for (std::size_t j = 0; j < ns; ++j) {
          std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(feats.z_s.at(i, j)));
          out << buf;
        }
        out << '\n';
      }
    }
  }
}

void write_metrics_csv(const std::filesystem::path& file, const std::vector<EpochLog>& epochs) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << "epoch,L_so,L_ta,L_c_MI,L_s_MI,L_ge,L_inv,total,confident,source_acc,target_acc\n";
  char buf[48];
  auto num = [&](double v, bool active) {
    if (!active) return std::string();
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  for (const auto& e : epochs) {
    const auto& l = e.loss;
    out << e.epoch << ',' << num(l.source, true) << ',' << num(l.target, l.target_active) << ','
        << num(l.causal_mi, l.dis_active) << ',' << num(l.spurious_mi, l.dis_active) << ','
        << num(l.ge, l.inv_active) << ',' << num(l.inv, l.inv_active) << ',' << num(l.total, true) << ','
        << e.confident << ',' << num(e.source_acc, true) << ',' << num(e.target_acc.value_or(0), e.target_acc.has_value())
        << '\n';
  }
}

}  // namespace slogan
