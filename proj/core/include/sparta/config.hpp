#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sparta/model.hpp"
#include "sparta/synth.hpp"
#include "sparta/train.hpp"

namespace sparta {

struct DataConfig {
  std::string train, val, test;
  std::string format = "auto";  // auto | jsonl | csv

  bool operator==(const DataConfig&) const = default;
};

struct SynthConfig {
  std::string grammar;  // empty: built-in grammar
  GeneratorConfig generator;
};

/// Everything a command needs, resolved from defaults, preset, file and
/// command-line overrides in that order.
struct RunConfig {
  SpartaConfig model;
  TrainConfig train;
  DataConfig data;
  SynthConfig synth;
  std::size_t folds = 3;
};

struct ConfigKey {
  std::string name;
  std::string description;
};

/// All recognised keys in canonical order.
const std::vector<ConfigKey>& config_keys();

RunConfig default_run_config();
/// "paper" or "toy".
void apply_preset(RunConfig& config, const std::string& preset);
/// Sets one key from its text form. Unknown keys and malformed values throw ConfigError.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
std::string get_setting(const RunConfig& config, const std::string& key);
/// Applies a "key=value" override.
void apply_override(RunConfig& config, const std::string& assignment);

/// Lines "key = value"; '#' comments and blank lines are ignored.
void read_run_config(std::istream& in, RunConfig& config);
void load_run_config(const std::filesystem::path& path, RunConfig& config);
/// Writes every key, so the file alone reproduces the run.
void write_run_config(std::ostream& out, const RunConfig& config);
/// Checks the parts that do not depend on the command.
void validate(const RunConfig& config);

/// Model keys only (checkpoint header).
void write_model_config(std::ostream& out, const SpartaConfig& config);
SpartaConfig read_model_config(std::istream& in);

/// Directory holding model.cfg, vocab.tsv and params.txt.
void save_checkpoint(const std::filesystem::path& dir, const SpartaModel& model);
SpartaModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace sparta
