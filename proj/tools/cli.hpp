#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "slogan/synthetic.hpp"
#include "slogan/trainer.hpp"

namespace slogan::cli {

inline const std::vector<std::string> kCommands{"gen-synth", "split", "train-source", "adapt", "eval",
                                                 "ablate", "audit-bound", "bench-scaling", "dump-features"};

struct TuSpec {
  std::filesystem::path root;
  // One name: domains are density-split chunks of it. Several names: one
  // domain per dataset (cross-dataset transfer).
  std::vector<std::string> names;
};

struct RunConfig {
  std::string command;
  std::optional<TuSpec> tudataset;
  std::optional<SynthConfig> synthetic;
  int parts = 4;
  std::size_t source_idx = 0;
  std::size_t target_idx = 1;
  TrainConfig train;
  std::filesystem::path out;

  // Flat object keyed by flag names; feeding it back through --config
  // reproduces this configuration.
  nlohmann::json echo() const;
};

// Thrown for --help; carries the usage text.
struct HelpRequested {
  std::string text;
};

std::string usage();

// `args` excludes the program name. Values come from flags first, then from
// the flat JSON object in `config_file` (or --config), then defaults.
RunConfig parse_args_and_config(const std::vector<std::string>& args,
                                const std::optional<std::filesystem::path>& config_file = std::nullopt);

struct Domains {
  Dataset source;
  Dataset target;
  std::string source_name;
  std::string target_name;
};

// Candidate domains for the configured dataset spec, in index order.
std::vector<std::pair<std::string, Dataset>> load_pool(const RunConfig& cfg);
Domains load_domains(const RunConfig& cfg);

// Parameter values (not optimizer state) plus the shape metadata needed to
// rebuild the model. `epoch` is the number of adaptation epochs behind it.
void save_model(const std::filesystem::path& file, const SloganModel& model, int epoch);
SloganModel load_model(const std::filesystem::path& file, int* epoch = nullptr);

// Runs the command; prints a one-line summary to `out` and errors to `err`.
// Returns the process exit status. Files written by a failed run are removed.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace slogan::cli
