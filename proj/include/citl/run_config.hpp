#pragma once

// Flat JSON run configuration shared by every CLI subcommand.

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "citl/dataset.hpp"
#include "citl/trainer.hpp"

namespace citl {

struct RunConfig {
  std::filesystem::path data_dir = "data/suite";
  std::filesystem::path out_dir = "runs/default";
  std::filesystem::path checkpoint;  // eval input; defaults to out_dir/checkpoint.json
  std::filesystem::path lexicon_path;  // empty: bundled lexicon

  GeneratorConfig gen;
  PrepareConfig prep;
  TrainConfig train;
  int dim = 32;
  int max_tokens = 64;

  int eval_every = 100;  // training steps between evaluations, 0 disables

  int ablation_seeds = 5;
  int threads = 0;  // 0: hardware concurrency

  /// Rejects unknown keys and out-of-range values with ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  /// Every field, defaults included.
  nlohmann::json to_json() const;
  void validate() const;
};

/// FNV-1a 64 of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

/// Writes resolved_config.json into dir and returns its hash.
std::string persist_resolved_config(const std::filesystem::path& dir, const RunConfig& cfg);

}  // namespace citl
