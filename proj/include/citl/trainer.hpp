#pragma once

// The full training objective (imitation + actor-critic + weighted
// contrastive terms), the SGD step, evaluation and the training loop.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "citl/agent.hpp"
#include "citl/contrast.hpp"
#include "citl/dataset.hpp"
#include "citl/encoder.hpp"
#include "citl/metrics.hpp"

namespace citl {

struct TrainConfig {
  // Weights of the trajectory, instruction and sub-instruction contrastive
  // losses. The total loss names the first one L_C^P; it is read as the
  // trajectory loss L_C^T'.
  double lambda1_traj = 0.1;
  double lambda2_instr = 0.01;
  double lambda3_subinstr = 0.01;

  MarginConfig margin{};  // m = 0.25, gamma = 32
  std::size_t bank_capacity = MemoryBank::kDefaultCapacity;
  double alpha_p = 1.2;
  double alpha_n = 1.4;
  ContrastLoss contrast_loss = ContrastLoss::circle;
  bool use_bank = true;
  bool use_mining = true;
  double temperature = 0.1;

  double learning_rate = 0.5;
  std::size_t batch_size = 8;
  std::size_t train_steps = 10000;
  /// Scale of the actor-critic term against imitation.
  double rl_weight = 0.05;
  double rl_discount = 0.9;
  double value_coef = 0.5;
  double grad_clip = 5.0;
  RolloutOptions rollout{};
  std::uint64_t seed = 1;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  ContrastOptions contrast_options() const;
};

struct Banks {
  MemoryBank traj;
  MemoryBank instr;
  MemoryBank sub_instr;

  explicit Banks(std::size_t capacity = MemoryBank::kDefaultCapacity)
      : traj(capacity), instr(capacity), sub_instr(capacity) {}
};

struct LossBreakdown {
  double il = 0.0;
  double rl = 0.0;
  double ct = 0.0;  // trajectory contrastive, unweighted
  double ci = 0.0;  // instruction contrastive, unweighted
  double fi = 0.0;  // sub-instruction contrastive, unweighted
  double total = 0.0;
  MiningStats mining;

  /// il + rl_weight * rl + the weighted contrastive terms.
  double weighted_sum(const TrainConfig& cfg) const;
};

struct Objective {
  ad::Var total;
  ad::Var il, rl, ct, ci, fi;
  MiningStats mining;
  LossBreakdown breakdown() const;
};

/// Builds the batch objective on p's tape. Contrastive terms whose weight is
/// zero are skipped entirely and the banks they own are left untouched.
Objective build_objective(const ParamVars& p, std::span<const PreparedEpisode* const> batch, Banks& banks,
                          const TrainConfig& cfg, std::uint64_t step_seed, FrozenAdvantages* frozen = nullptr);

/// Imitation + actor-critic only, with no knowledge of the contrastive
/// machinery.
Objective build_il_rl_objective(const ParamVars& p, std::span<const PreparedEpisode* const> batch,
                                const TrainConfig& cfg, std::uint64_t step_seed, FrozenAdvantages* frozen = nullptr);

struct StepResult {
  LossBreakdown losses;
  double grad_norm = 0.0;
};

/// One SGD step with gradient-norm clipping. Throws NonFiniteError, leaving
/// params untouched, when the loss or gradient is not finite.
StepResult train_step(std::span<const PreparedEpisode* const> batch, EncoderParams& params, Banks& banks,
                      const TrainConfig& cfg, std::uint64_t step_seed);
StepResult train_step_il_rl(std::span<const PreparedEpisode* const> batch, EncoderParams& params,
                            const TrainConfig& cfg, std::uint64_t step_seed);

struct EvalResult {
  MetricReport mean;
  std::vector<MetricReport> episodes;
};

EvalResult evaluate(const EncoderParams& params, std::span<const PreparedEpisode> episodes, const TrainConfig& cfg,
                    RolloutMode mode = RolloutMode::greedy);
void write_eval_csv(std::ostream& out, const EvalResult& r);

void write_train_log_header(std::ostream& out);
void write_train_log_row(std::ostream& out, std::size_t step, const LossBreakdown& l);

struct TrainRun {
  EncoderParams params;
  std::vector<LossBreakdown> log;
};

using StepCallback = std::function<void(std::size_t step, const LossBreakdown&, const EncoderParams&)>;

/// Runs cfg.train_steps SGD steps on batches drawn with cfg.seed.
/// il_rl_only selects the contrast-free step.
TrainRun train(const ModelShape& shape, std::span<const PreparedEpisode> train_set, const TrainConfig& cfg,
               bool il_rl_only = false, const StepCallback& on_step = {});

}  // namespace citl
