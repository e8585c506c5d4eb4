#pragma once

// Subcommand implementations behind the citl tool and the Python module.

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "citl/dataset.hpp"
#include "citl/run_config.hpp"
#include "citl/trainer.hpp"

namespace citl {

/// Both splits loaded from cfg.data_dir and prepared against vocab.
/// Prepared episodes point into the splits, so a Workspace never moves.
struct Workspace {
  Split seen;
  Split unseen;
  Vocabulary vocab;
  AugmenterConfig aug;
  ModelShape shape;
  std::vector<PreparedEpisode> seen_prepared;
  std::vector<PreparedEpisode> unseen_prepared;

  Workspace() = default;
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  const std::vector<PreparedEpisode>& prepared(const std::string& split) const;
};

/// vocab == nullptr builds the vocabulary from the seen split.
std::unique_ptr<Workspace> load_workspace(const RunConfig& cfg, const Vocabulary* vocab = nullptr);

AugmenterConfig make_augmenter(const RunConfig& cfg);

struct GenResult {
  std::filesystem::path dir;
  std::size_t graphs = 0;
  std::size_t episodes = 0;
};

/// Writes <dir>/seen and <dir>/unseen (graph JSON + episodes.jsonl), the
/// bundled lexicon and the resolved config. dir defaults to cfg.data_dir.
GenResult cmd_gen(const RunConfig& cfg, const std::filesystem::path& dir = {});

struct TrainResult {
  EvalResult seen;
  EvalResult unseen;
  std::filesystem::path checkpoint;
  std::string config_hash;
};

/// Writes checkpoint.json, train_log.csv, eval_log.csv, eval_seen.csv,
/// eval_unseen.csv and resolved_config.json into cfg.out_dir.
TrainResult cmd_train(const RunConfig& cfg, std::ostream* progress = nullptr);

/// Greedy evaluation of cfg.checkpoint (or out_dir/checkpoint.json) on a split.
EvalResult cmd_eval(const RunConfig& cfg, const std::string& split);

struct AblationRow {
  std::string table;  // "table5" or "table6"
  std::string name;
  std::string description;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
  ContrastLoss loss = ContrastLoss::circle;
  bool use_bank = true;
  bool use_mining = true;

  /// cfg with the row's loss weights and switches applied.
  TrainConfig apply(TrainConfig cfg) const;
  /// Rows with equal keys train identically.
  std::string key() const;
};

struct AblationMatrix {
  std::vector<AblationRow> rows;
};

/// Loss/mining rows (circle vs InfoNCE, bank, mining on the trajectory
/// loss) followed by coarse/fine rows (baseline, each loss alone, all).
AblationMatrix default_ablation_matrix(double lambda1 = 0.1, double lambda2 = 0.01, double lambda3 = 0.01);

struct SeedOutcome {
  std::uint64_t seed = 0;
  MetricReport seen;
  MetricReport unseen;
};

struct RowSummary {
  AblationRow row;
  std::vector<SeedOutcome> runs;
  double sr_mean = 0.0, sr_std = 0.0;
  double spl_mean = 0.0, spl_std = 0.0;
  /// Standard error of the unseen SR mean.
  double sr_se() const;
};

struct AblationReport {
  std::vector<RowSummary> rows;
  std::string config_hash;
  double seconds = 0.0;

  const RowSummary& row(const std::string& name) const;
};

/// Trains every distinct row for cfg.ablation_seeds seeds (train seed,
/// train seed + 1, ...) and evaluates greedily on the unseen split. Writes
/// ablation.csv, ablation_runs.csv, ablation.txt and resolved_config.json
/// into cfg.out_dir.
AblationReport cmd_ablate(const RunConfig& cfg, const AblationMatrix& matrix, std::ostream* progress = nullptr);

void write_ablation_text(std::ostream& out, const AblationReport& report);

struct CheckItem {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Oracle suite: gradient checks, pair-mining and circle-loss oracles,
/// FIFO bank simulation, partition/enumeration oracles, metric identities.
std::vector<CheckItem> cmd_check(std::uint64_t seed);

}  // namespace citl
