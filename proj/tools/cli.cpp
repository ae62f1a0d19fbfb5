#include "cli.hpp"

#include <unistd.h>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "slogan/error.hpp"
#include "slogan/tudataset.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace slogan::cli {

namespace {

struct FlagSpec {
  const char* name;
  bool boolean;
  const char* help;
};

const FlagSpec kFlags[] = {
    {"dataset-root", false, "directory holding TUDataset text files"},
    {"dataset-name", false, "TUDataset name; several comma-separated names give one domain each"},
    {"synthetic", true, "use the generated two-domain task instead of files"},
    {"rho-s", false, "spurious correlation of the synthetic task, in [0.5, 1]"},
    {"n-per-domain", false, "synthetic graphs per domain"},
    {"parts", false, "density-split chunks of a single dataset"},
    {"source-idx", false, "index of the source domain"},
    {"target-idx", false, "index of the target domain"},
    {"gamma", false, "weight of the disentanglement term"},
    {"eta", false, "weight of the invariance term"},
    {"tau", false, "confidence threshold scale, in (0, 1]"},
    {"beta", false, "weight of I(z^s; z) in the spurious term"},
    {"lr", false, "Adam learning rate"},
    {"batch-size", false, "graphs per batch"},
    {"warmup-epochs", false, "source-only epochs"},
    {"adapt-epochs", false, "adaptation epochs"},
    {"seed", false, "run seed"},
    {"ablate", false, "comma list of no_dis, no_inv, no_sup_target"},
    {"symmetric-swap", true, "also recombine target-causal with source-spurious parts"},
    {"out", false, "output directory (fallback: $SLOGAN_OUT)"},
};

constexpr std::uint64_t kDataStream = 100;

void build_app(CLI::App& app, std::string& command, std::string& config, std::map<std::string, std::string>& values,
               std::map<std::string, CLI::Option*>& options) {
  app.add_option("command", command, "one of: gen-synth split train-source adapt eval ablate audit-bound "
                                      "bench-scaling dump-features")
      ->required();
  app.add_option("--config", config, "flat JSON object keyed by flag names; flags take precedence");
  for (const auto& f : kFlags) {
    const std::string flag = std::string("--") + f.name;
    options[f.name] = f.boolean ? app.add_flag(flag, f.help) : app.add_option(flag, values[f.name], f.help);
  }
}

std::string file_value(const std::string& key, const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) return v.dump();
  throw ConfigError(key + ": unsupported value " + v.dump());
}

std::map<std::string, std::string> read_config_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config: cannot read " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + file.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: " + file.string() + " must hold a flat JSON object");
  std::map<std::string, std::string> out;
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (const auto& f : kFlags) known = known || key == f.name;
    if (!known) throw ConfigError("config: unknown key '" + key + "'");
    out[key] = file_value(key, value);
  }
  return out;
}

class Values {
 public:
  explicit Values(std::map<std::string, std::string> v) : v_(std::move(v)) {}

  bool has(const std::string& key) const { return v_.count(key) > 0; }
  const std::string& str(const std::string& key) const { return v_.at(key); }

  double real_or(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = str(key);
    char* end = nullptr;
    const double x = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || !std::isfinite(x))
      throw ConfigError(key + ": expected a number, got '" + s + "'");
    return x;
  }

  std::uint64_t uint_or(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = str(key);
    std::uint64_t x = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
    return x;
  }

  int int_or(const std::string& key, int fallback) const {
    const std::uint64_t x = uint_or(key, static_cast<std::uint64_t>(fallback));
    if (x > static_cast<std::uint64_t>(std::numeric_limits<int>::max()))
      throw ConfigError(key + ": value " + str(key) + " is too large");
    return static_cast<int>(x);
  }

  bool flag(const std::string& key) const {
    if (!has(key)) return false;
    const std::string& s = str(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + s + "'");
  }

 private:
  std::map<std::string, std::string> v_;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

AblationFlags parse_ablation(const std::string& s) {
  AblationFlags flags;
  for (const auto& name : split_list(s)) {
    if (name == "no_dis") {
      flags.no_dis = true;
    } else if (name == "no_inv") {
      flags.no_inv = true;
    } else if (name == "no_sup_target") {
      flags.no_sup_target = true;
    } else {
      throw ConfigError("ablate: unknown ablation '" + name + "' (expected no_dis, no_inv or no_sup_target)");
    }
  }
  return flags;
}

std::string ablation_string(const AblationFlags& a) {
  std::vector<std::string> parts;
  if (a.no_dis) parts.push_back("no_dis");
  if (a.no_inv) parts.push_back("no_inv");
  if (a.no_sup_target) parts.push_back("no_sup_target");
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : ",") + p;
  return out;
}

void require_writable(const fs::path& out) {
  fs::path probe = fs::absolute(out);
  while (!fs::exists(probe) && probe.has_parent_path() && probe != probe.parent_path()) probe = probe.parent_path();
  if (fs::exists(probe) && !fs::is_directory(probe))
    throw ConfigError("out: " + probe.string() + " exists and is not a directory");
  if (::access(probe.c_str(), W_OK) != 0) throw ConfigError("out: " + probe.string() + " is not writable");
}

// Tracks everything a command writes so a failed run leaves nothing behind.
class OutputGuard {
 public:
  explicit OutputGuard(fs::path dir) : dir_(std::move(dir)) {
    fs::path top = fs::absolute(dir_);
    while (!fs::exists(top)) {
      created_root_ = top;
      if (!top.has_parent_path() || top == top.parent_path()) break;
      top = top.parent_path();
    }
    fs::create_directories(dir_);
  }
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;

  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : written_) fs::remove_all(p, ec);
    if (!created_root_.empty()) fs::remove_all(created_root_, ec);
  }

  fs::path file(const std::string& name) {
    written_.push_back(dir_ / name);
    return written_.back();
  }
  fs::path subdir(const std::string& name) {
    const fs::path p = dir_ / name;
    if (!fs::exists(p)) written_.push_back(p);
    fs::create_directories(p);
    return p;
  }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  fs::path created_root_;
  std::vector<fs::path> written_;
  bool committed_ = false;
};

void write_json(const fs::path& file, const json& doc) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << doc.dump(2) << '\n';
}

void pad_features(Dataset& ds, std::size_t dim) {
  if (ds.feature_dim == dim) return;
  for (auto& g : ds.graphs) {
    std::vector<real> f(g.node_count * dim, real(0));
    for (std::size_t v = 0; v < g.node_count; ++v)
      std::copy_n(g.features.data() + v * g.feature_dim, g.feature_dim, f.data() + v * dim);
    g.features = std::move(f);
    g.feature_dim = dim;
  }
  ds.feature_dim = dim;
}

json accuracy_json(const Accuracy& a) {
  json per = json::array();
  for (double x : a.per_class) per.push_back(std::isnan(x) ? json(nullptr) : json(x));
  return {{"accuracy", a.accuracy}, {"per_class", per}, {"count", a.count}};
}

void write_warmup_csv(const fs::path& file, const std::vector<WarmupEpoch>& epochs) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << "epoch,L_so,L_ge\n";
  char buf[64];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g\n", e.epoch, e.source_loss, e.ge);
    out << buf;
  }
}

fs::path model_path(const RunConfig& cfg) {
  const fs::path p = cfg.out / "model.json";
  if (!fs::exists(p))
    throw DataError(cfg.command + ": no model.json in " + cfg.out.string() + "; run train-source or adapt first");
  return p;
}

std::string fixed(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

void run_command(const RunConfig& cfg, OutputGuard& guard, std::ostream& out) {
  const TrainConfig& tc = cfg.train;
  const std::string& cmd = cfg.command;
  write_json(guard.file("config_echo.json"), cfg.echo());

  if (cmd == "gen-synth") {
    if (!cfg.synthetic) throw ConfigError("gen-synth: needs --synthetic");
    const auto pool = load_pool(cfg);
    for (const auto& [name, ds] : pool) write_tudataset(ds, guard.subdir(name), name);
    out << "gen-synth: wrote " << pool[0].second.size() << " source and " << pool[1].second.size()
        << " target graphs to " << cfg.out.string() << '\n';
    return;
  }

  if (cmd == "split") {
    Dataset base;
    if (cfg.synthetic) {
      base = load_pool(cfg)[0].second;
    } else if (cfg.tudataset->names.size() == 1) {
      base = parse_tudataset(cfg.tudataset->root, cfg.tudataset->names[0]);
    } else {
      throw ConfigError("split: needs a single --dataset-name or --synthetic");
    }
    const auto chunks = density_split(base, cfg.parts);
    std::string sizes;
    for (std::size_t k = 0; k < chunks.size(); ++k) {
      const std::string name = "N" + std::to_string(k);
      write_tudataset(chunks[k], guard.subdir(name), name);
      sizes += (k ? "," : "") + std::to_string(chunks[k].size());
    }
    out << "split: " << chunks.size() << " parts of sizes " << sizes << " in " << cfg.out.string() << '\n';
    return;
  }

  if (cmd == "bench-scaling") {
    ScalingConfig sc;
    sc.seed = tc.seed;
    const ScalingReport rep = bench_scaling(sc);
    std::ofstream csv(guard.file("scaling.csv"));
    csv << "nodes,median_seconds\n";
    json points = json::array();
    for (const auto& p : rep.points) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%zu,%.9g\n", p.nodes, p.median_seconds);
      csv << buf;
      points.push_back({{"nodes", p.nodes}, {"median_seconds", p.median_seconds}, {"samples", p.samples}});
    }
    write_json(guard.file("scaling.json"), {{"points", points},
                                            {"slope", rep.slope},
                                            {"intercept", rep.intercept},
                                            {"r_squared", rep.r_squared}});
    out << "bench-scaling: " << rep.points.size() << " sizes, R^2 = " << fixed(rep.r_squared) << '\n';
    return;
  }

  const Domains d = load_domains(cfg);
  json result{{"command", cmd}, {"source", d.source_name}, {"target", d.target_name}, {"config", cfg.echo()}};

  if (cmd == "train-source" || cmd == "adapt") {
    WarmupResult warm = warmup(d.source, tc);
    write_warmup_csv(guard.file("warmup_metrics.csv"), warm.epochs);
    result["warmup_source_accuracy"] = warm.source_accuracy;
    if (d.target.labeled()) result["warmup_target_accuracy"] = evaluate(d.target, warm.model).accuracy;
    SloganModel model = std::move(warm.model);
    int epochs = 0;
    if (cmd == "adapt") {
      AdaptHooks hooks;
      hooks.on_epoch = [&](const SloganModel&, const std::vector<PredictionRecord>& records,
                           const ThresholdTable& table, const EpochLog& log) {
        write_confident_csv(guard.file("confident_" + std::to_string(log.epoch) + ".csv"), records, table);
      };
      const AdaptResult res = adapt(model, d.source, d.target, tc, hooks);
      write_metrics_csv(guard.file("metrics.csv"), res.epochs);
      epochs = tc.adapt_epochs;
      result["confident_final"] = res.epochs.empty() ? 0 : res.epochs.back().confident;
    }
    result["source_accuracy"] = evaluate(d.source, model).accuracy;
    if (d.target.labeled()) result["target_accuracy"] = evaluate(d.target, model).accuracy;
    save_model(guard.file("model.json"), model, epochs);
    write_json(guard.file("result.json"), result);
    out << cmd << ": source_acc=" << fixed(result["source_accuracy"].get<double>());
    if (result.contains("target_accuracy")) out << " target_acc=" << fixed(result["target_accuracy"].get<double>());
    out << " out=" << cfg.out.string() << '\n';
    return;
  }

  if (cmd == "eval") {
    const SloganModel model = load_model(model_path(cfg));
    const Accuracy src = evaluate(d.source, model);
    result["source_accuracy"] = src.accuracy;
    result["source"] = accuracy_json(src);
    result["source"]["name"] = d.source_name;
    if (d.target.labeled()) {
      const Accuracy tgt = evaluate(d.target, model);
      result["target_accuracy"] = tgt.accuracy;
      result["target"] = accuracy_json(tgt);
      result["target"]["name"] = d.target_name;
    }
    write_json(guard.file("eval.json"), result);
    out << "eval: source_acc=" << fixed(src.accuracy);
    if (result.contains("target_accuracy")) out << " target_acc=" << fixed(result["target_accuracy"].get<double>());
    out << '\n';
    return;
  }

  if (cmd == "ablate") {
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t k = 0; k < 5; ++k) seeds.push_back(tc.seed + k);
    const AblationTable table = ablate(d.source, d.target, tc, seeds);
    std::ofstream csv(guard.file("ablation.csv"));
    csv << "seed,source_only,full,no_sup_target,no_inv,no_dis\n";
    auto row = [&](const std::string& label, const AblationRow& r) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", label.c_str(), r.source_only, r.full,
                    r.no_sup_target, r.no_inv, r.no_dis);
      csv << buf;
    };
    for (const auto& r : table.rows) row(std::to_string(r.seed), r);
    const AblationRow m = table.mean();
    row("mean", m);
    out << "ablate: mean target acc full=" << fixed(m.full) << " no_sup_target=" << fixed(m.no_sup_target)
        << " no_inv=" << fixed(m.no_inv) << " no_dis=" << fixed(m.no_dis) << " source_only=" << fixed(m.source_only)
        << '\n';
    return;
  }

  if (cmd == "audit-bound") {
    const SloganModel model = load_model(model_path(cfg));
    const BoundAudit a = bound_audit(model, d.source, d.target, tc);
    json doc{{"source_error", a.source_error},
             {"spurious_label_mi", a.spurious_label_mi},
             {"reconstruction_residual", a.reconstruction_residual},
             {"unestimated_constants", {"C", "L", "delta", "n_S"}}};
    if (a.target_error) doc["target_error"] = *a.target_error;
    write_json(guard.file("audit.json"), doc);
    out << "audit-bound: source_error=" << fixed(a.source_error) << " spurious_label_mi="
        << fixed(a.spurious_label_mi) << " residual=" << fixed(a.reconstruction_residual);
    if (a.target_error) out << " target_error=" << fixed(*a.target_error);
    out << '\n';
    return;
  }

  if (cmd == "dump-features") {
    int epoch = 0;
    const SloganModel model = load_model(model_path(cfg), &epoch);
    const std::string name = "features_" + std::to_string(epoch) + ".csv";
    write_features_csv(guard.file(name), model, d.source, d.target);
    out << "dump-features: " << d.source.size() + d.target.size() << " rows in " << (cfg.out / name).string()
        << '\n';
    return;
  }

  throw ConfigError("command: unknown command '" + cmd + "'");
}

}  // namespace

json RunConfig::echo() const {
  const TrainConfig& t = train;
  json j{{"parts", parts},
         {"source-idx", source_idx},
         {"target-idx", target_idx},
         {"gamma", t.gamma},
         {"eta", t.eta},
         {"tau", t.tau},
         {"beta", t.beta},
         {"lr", t.lr},
         {"batch-size", t.batch_size},
         {"warmup-epochs", t.warmup_epochs},
         {"adapt-epochs", t.adapt_epochs},
         {"seed", t.seed},
         {"ablate", ablation_string(t.ablation)},
         {"symmetric-swap", t.symmetric_swap},
         {"out", out.string()}};
  if (synthetic) {
    j["synthetic"] = true;
    j["rho-s"] = synthetic->rho_s;
    j["n-per-domain"] = synthetic->n_per_domain;
  }
  if (tudataset) {
    std::string names;
    for (const auto& n : tudataset->names) names += (names.empty() ? "" : ",") + n;
    j["dataset-root"] = tudataset->root.string();
    j["dataset-name"] = names;
  }
  return j;
}

std::string usage() {
  CLI::App app{"Graph domain adaptation with causal/spurious disentanglement", "slogan"};
  std::string command, config;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  build_app(app, command, config, values, options);
  return app.help();
}

RunConfig parse_args_and_config(const std::vector<std::string>& args,
                                const std::optional<std::filesystem::path>& config_file) {
  CLI::App app{"Graph domain adaptation with causal/spurious disentanglement", "slogan"};
  std::string command, config;
  std::map<std::string, std::string> cli_values;
  std::map<std::string, CLI::Option*> options;
  build_app(app, command, config, cli_values, options);
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }

  std::map<std::string, std::string> merged;
  std::optional<fs::path> file = config_file;
  if (!config.empty()) file = config;
  if (file) merged = read_config_file(*file);
  for (const auto& f : kFlags) {
    if (options[f.name]->count() == 0) continue;
    merged[f.name] = f.boolean ? "true" : cli_values[f.name];
  }
  const Values v(std::move(merged));

  RunConfig cfg;
  cfg.command = command;
  bool known = false;
  for (const auto& c : kCommands) known = known || c == command;
  if (!known) throw ConfigError("command: unknown command '" + command + "'");

  const bool synthetic = v.flag("synthetic");
  const bool tu = v.has("dataset-root") || v.has("dataset-name");
  if (synthetic && tu) throw ConfigError("synthetic: conflicts with --dataset-root/--dataset-name");
  if (!synthetic) {
    for (const char* key : {"rho-s", "n-per-domain"}) {
      if (v.has(key)) throw ConfigError(std::string(key) + ": only valid with --synthetic");
    }
  }
  if (synthetic) {
    SynthConfig sc;
    sc.rho_s = v.real_or("rho-s", sc.rho_s);
    sc.n_per_domain = v.uint_or("n-per-domain", sc.n_per_domain);
    if (!(sc.rho_s >= 0.5 && sc.rho_s <= 1.0)) throw ConfigError("rho-s: must lie in [0.5, 1], got " + v.str("rho-s"));
    if (sc.n_per_domain < 2) throw ConfigError("n-per-domain: must be >= 2");
    cfg.synthetic = sc;
  } else if (tu) {
    if (!v.has("dataset-root")) throw ConfigError("dataset-root: required with --dataset-name");
    if (!v.has("dataset-name")) throw ConfigError("dataset-name: required with --dataset-root");
    TuSpec spec{v.str("dataset-root"), split_list(v.str("dataset-name"))};
    if (spec.names.empty()) throw ConfigError("dataset-name: empty");
    cfg.tudataset = spec;
  } else if (command != "bench-scaling") {
    throw ConfigError("dataset: give --synthetic or --dataset-root with --dataset-name");
  }

  cfg.parts = v.int_or("parts", cfg.parts);
  if (cfg.parts < 2) throw ConfigError("parts: must be >= 2, got " + std::to_string(cfg.parts));
  cfg.source_idx = v.uint_or("source-idx", cfg.source_idx);
  cfg.target_idx = v.uint_or("target-idx", cfg.target_idx);
  if (cfg.source_idx == cfg.target_idx)
    throw ConfigError("target-idx: must differ from source-idx (both " + std::to_string(cfg.source_idx) + ")");
  std::size_t domains = static_cast<std::size_t>(cfg.parts);
  if (cfg.synthetic) domains = 2;
  if (cfg.tudataset && cfg.tudataset->names.size() > 1) domains = cfg.tudataset->names.size();
  for (const char* key : {"source-idx", "target-idx"}) {
    const std::size_t idx = std::string(key) == "source-idx" ? cfg.source_idx : cfg.target_idx;
    if ((cfg.synthetic || cfg.tudataset) && idx >= domains)
      throw ConfigError(std::string(key) + ": " + std::to_string(idx) + " is outside the " +
                        std::to_string(domains) + " available domains");
  }

  TrainConfig& t = cfg.train;
  t.gamma = v.real_or("gamma", t.gamma);
  t.eta = v.real_or("eta", t.eta);
  t.tau = v.real_or("tau", t.tau);
  t.beta = v.real_or("beta", t.beta);
  t.lr = v.real_or("lr", t.lr);
  t.batch_size = v.uint_or("batch-size", t.batch_size);
  t.warmup_epochs = v.int_or("warmup-epochs", t.warmup_epochs);
  t.adapt_epochs = v.int_or("adapt-epochs", t.adapt_epochs);
  t.seed = v.uint_or("seed", t.seed);
  if (v.has("ablate")) t.ablation = parse_ablation(v.str("ablate"));
  t.symmetric_swap = v.flag("symmetric-swap");
  t.validate();

  if (v.has("out")) {
    cfg.out = v.str("out");
  } else if (const char* env = std::getenv("SLOGAN_OUT"); env && *env) {
    cfg.out = env;
  } else {
    throw ConfigError("out: no output directory; pass --out or set SLOGAN_OUT");
  }
  require_writable(cfg.out);
  return cfg;
}

std::vector<std::pair<std::string, Dataset>> load_pool(const RunConfig& cfg) {
  std::vector<std::pair<std::string, Dataset>> pool;
  if (cfg.synthetic) {
    Rng rng = Rng(cfg.train.seed).fork(kDataStream);
    auto [source, target] = gen_synthetic_biased(*cfg.synthetic, rng);
    pool.emplace_back("source", std::move(source));
    pool.emplace_back("target", std::move(target));
    return pool;
  }
  if (!cfg.tudataset) throw ConfigError("dataset: no dataset configured");
  const auto& spec = *cfg.tudataset;
  if (spec.names.size() == 1) {
    const auto chunks = density_split(parse_tudataset(spec.root, spec.names[0]), cfg.parts);
    for (std::size_t k = 0; k < chunks.size(); ++k) pool.emplace_back("N" + std::to_string(k), chunks[k]);
    return pool;
  }
  std::size_t dim = 0;
  int classes = 0;
  for (const auto& name : spec.names) {
    pool.emplace_back(name, parse_tudataset(spec.root, name));
    dim = std::max(dim, pool.back().second.feature_dim);
    classes = std::max(classes, pool.back().second.num_classes);
  }
  // Node-label vocabularies differ between datasets; one-hot blocks are
  // zero-padded to a common width.
  for (auto& [name, ds] : pool) {
    pad_features(ds, dim);
    ds.num_classes = classes;
  }
  return pool;
}

Domains load_domains(const RunConfig& cfg) {
  auto pool = load_pool(cfg);
  auto pick = [&](std::size_t idx, const char* key) -> std::pair<std::string, Dataset>& {
    if (idx >= pool.size())
      throw ConfigError(std::string(key) + ": " + std::to_string(idx) + " is outside the " +
                        std::to_string(pool.size()) + " available domains");
    return pool[idx];
  };
  auto& s = pick(cfg.source_idx, "source-idx");
  auto& t = pick(cfg.target_idx, "target-idx");
  Domains d;
  d.source = s.second.with_domain(Domain::source);
  d.target = t.second.with_domain(Domain::target);
  d.source_name = s.first;
  d.target_name = t.first;
  d.target.num_classes = d.source.num_classes = std::max(d.source.num_classes, d.target.num_classes);
  return d;
}

void save_model(const fs::path& file, const SloganModel& model, int epoch) {
  json params = json::object();
  for (const ParamStore* store : {&model.backbone, &model.spurious, &model.generator_store, &model.critic_store}) {
    for (const auto& name : store->names()) {
      const Tensor t = store->get(name);
      params[name] = {{"shape", t.shape()}, {"values", std::vector<double>(t.values().begin(), t.values().end())}};
    }
  }
  write_json(file, {{"feature_dim", model.encoder.feature_dim()},
                    {"num_classes", model.num_classes},
                    {"beta", model.dis_cfg.beta},
                    {"causal_dim", model.dis_cfg.causal_dim},
                    {"spurious_dim", model.dis_cfg.spurious_dim},
                    {"epoch", epoch},
                    {"params", params}});
}

SloganModel load_model(const fs::path& file, int* epoch) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot read " + file.string());
  json doc;
  try {
    doc = json::parse(in);
    DisentangleConfig dc;
    dc.beta = doc.at("beta").get<double>();
    dc.causal_dim = doc.at("causal_dim").get<std::size_t>();
    dc.spurious_dim = doc.at("spurious_dim").get<std::size_t>();
    Rng rng(0);
    SloganModel model =
        SloganModel::init(doc.at("feature_dim").get<std::size_t>(), doc.at("num_classes").get<int>(), dc, rng);
    const json& params = doc.at("params");
    for (ParamStore* store : {&model.backbone, &model.spurious, &model.generator_store, &model.critic_store}) {
      for (const auto& name : store->names()) {
        if (!params.contains(name)) throw DataError(file.string() + ": parameter '" + name + "' missing");
        Tensor t = store->get(name);
        const auto shape = params[name].at("shape").get<Shape>();
        const auto values = params[name].at("values").get<std::vector<double>>();
        if (shape != t.shape() || values.size() != t.numel())
          throw DataError(file.string() + ": parameter '" + name + "' has shape " + shape_str(shape) +
                          ", expected " + shape_str(t.shape()));
        std::copy(values.begin(), values.end(), t.mutable_values().begin());
      }
    }
    if (epoch) *epoch = doc.value("epoch", 0);
    return model;
  } catch (const json::exception& e) {
    throw DataError(file.string() + ": malformed model file: " + e.what());
  }
}

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    OutputGuard guard(cfg.out);
    run_command(cfg, guard, out);
    guard.commit();
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace slogan::cli
