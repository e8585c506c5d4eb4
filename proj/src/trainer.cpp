#include "citl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "citl/errors.hpp"
#include "citl/rng.hpp"

namespace citl {

void TrainConfig::validate() const {
  if (lambda1_traj < 0 || lambda2_instr < 0 || lambda3_subinstr < 0) throw ConfigError("loss weights must be >= 0");
  if (rl_weight < 0) throw ConfigError("rl_weight must be >= 0");
  if (!(rl_discount > 0.0 && rl_discount <= 1.0)) throw ConfigError("rl_discount must lie in (0, 1]");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
  if (rollout.max_steps <= 0) throw ConfigError("max_steps must be positive");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (bank_capacity == 0) throw ConfigError("bank_capacity must be positive");
  margin.validate();
  validate_partition_alphas(alpha_p, alpha_n);
}

ContrastOptions TrainConfig::contrast_options() const {
  return ContrastOptions{margin, contrast_loss, use_bank, use_mining, temperature};
}

double LossBreakdown::weighted_sum(const TrainConfig& cfg) const {
  return il + cfg.rl_weight * rl + cfg.lambda1_traj * ct + cfg.lambda2_instr * ci + cfg.lambda3_subinstr * fi;
}

LossBreakdown Objective::breakdown() const {
  return LossBreakdown{il.scalar(), rl.scalar(), ct.scalar(), ci.scalar(), fi.scalar(), total.scalar(), mining};
}

namespace {

struct ImitationRl {
  ad::Var il;
  ad::Var rl;
};

ImitationRl imitation_and_rl(const ParamVars& p, std::span<const PreparedEpisode* const> batch, const TrainConfig& cfg,
                             std::uint64_t step_seed, FrozenAdvantages* frozen) {
  ad::Tape& tape = *p[Block::token_table].tape;
  std::vector<ad::Var> il_terms, rl_terms;
  for (const PreparedEpisode* ep : batch) {
    const auto forced = rollout(p, *ep->graph, *ep->spec, ep->instr_ids, RolloutMode::teacher_forced, cfg.rollout);
    il_terms.push_back(il_loss(tape, forced));
    Rng rng(derive_seed(step_seed, {ep->spec->id, 1}));
    const auto sampled = rollout(p, *ep->graph, *ep->spec, ep->instr_ids, RolloutMode::sampled, cfg.rollout, &rng);
    rl_terms.push_back(a2c_loss(tape, sampled, cfg.rl_discount, cfg.value_coef, frozen));
  }
  return {ad::mean(ad::concat(il_terms)), ad::mean(ad::concat(rl_terms))};
}

ad::Var mean_or_zero(ad::Tape& tape, const std::vector<ad::Var>& terms) {
  return terms.empty() ? tape.scalar_constant(0.0) : ad::mean(ad::concat(terms));
}

}  // namespace

Objective build_il_rl_objective(const ParamVars& p, std::span<const PreparedEpisode* const> batch,
                                const TrainConfig& cfg, std::uint64_t step_seed, FrozenAdvantages* frozen) {
  ad::Tape& tape = *p[Block::token_table].tape;
  const auto [il, rl] = imitation_and_rl(p, batch, cfg, step_seed, frozen);
  const ad::Var zero = tape.scalar_constant(0.0);
  return Objective{il + cfg.rl_weight * rl, il, rl, zero, zero, zero, {}};
}

Objective build_objective(const ParamVars& p, std::span<const PreparedEpisode* const> batch, Banks& banks,
                          const TrainConfig& cfg, std::uint64_t step_seed, FrozenAdvantages* frozen) {
  ad::Tape& tape = *p[Block::token_table].tape;
  const auto [il, rl] = imitation_and_rl(p, batch, cfg, step_seed, frozen);
  const ad::Var zero = tape.scalar_constant(0.0);
  Objective obj{il + cfg.rl_weight * rl, il, rl, zero, zero, zero, {}};
  const auto opts = cfg.contrast_options();

  if (cfg.lambda1_traj > 0.0) {
    std::vector<ad::Var> terms;
    for (const PreparedEpisode* ep : batch) {
      ad::Var q = encode_trajectory(p, *ep->graph, ep->spec->path, Role::anchor_q);
      std::vector<ad::Var> pos, neg;
      for (const auto& t : ep->positive_traj) pos.push_back(encode_trajectory(p, *ep->graph, t, Role::positive_p));
      for (const auto& t : ep->negative_traj) neg.push_back(encode_trajectory(p, *ep->graph, t, Role::negative_n));
      auto a = assemble_loss(tape, LossKind::traj, q, pos, neg, banks.traj, ep->spec->id, opts);
      terms.push_back(a.loss);
      obj.mining += a.stats;
    }
    obj.ct = mean_or_zero(tape, terms);
    obj.total = obj.total + cfg.lambda1_traj * obj.ct;
  }

  if (cfg.lambda2_instr > 0.0) {
    std::vector<ad::Var> terms;
    for (const PreparedEpisode* ep : batch) {
      ad::Var q = encode_tokens(p, ep->instr_ids, Role::anchor_q);
      std::vector<ad::Var> pos, neg;
      for (const auto& ids : ep->positive_instr_ids) pos.push_back(encode_tokens(p, ids, Role::positive_p));
      for (const auto& ids : ep->negative_instr_ids) neg.push_back(encode_tokens(p, ids, Role::negative_n));
      auto a = assemble_loss(tape, LossKind::instr, q, pos, neg, banks.instr, ep->spec->id, opts);
      terms.push_back(a.loss);
      obj.mining += a.stats;
    }
    obj.ci = mean_or_zero(tape, terms);
    obj.total = obj.total + cfg.lambda2_instr * obj.ci;
  }

  if (cfg.lambda3_subinstr > 0.0) {
    std::vector<ad::Var> terms;
    for (const PreparedEpisode* ep : batch) {
      const int k = static_cast<int>(ep->span_ids.size());
      if (k < 2) continue;
      Rng rng(derive_seed(step_seed, {ep->spec->id, 3}));
      const int query = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(k)));
      const auto sets = sub_instruction_sets(ep->spec->instruction, query);
      ad::Var q = encode_tokens(p, ep->span_ids[static_cast<std::size_t>(query)], Role::anchor_q);
      std::vector<ad::Var> pos, neg;
      for (int i : sets.positives) pos.push_back(encode_tokens(p, ep->span_ids[static_cast<std::size_t>(i)], Role::positive_p));
      for (int i : sets.intra_negatives)
        neg.push_back(encode_tokens(p, ep->span_ids[static_cast<std::size_t>(i)], Role::negative_n));
      auto a = assemble_loss(tape, LossKind::sub_instr, q, pos, neg, banks.sub_instr, ep->spec->id, opts);
      terms.push_back(a.loss);
      obj.mining += a.stats;
    }
    obj.fi = mean_or_zero(tape, terms);
    obj.total = obj.total + cfg.lambda3_subinstr * obj.fi;
  }
  return obj;
}

namespace {

StepResult apply_step(ad::Tape& tape, const ParamVars& pv, const Objective& obj, EncoderParams& params,
                      const TrainConfig& cfg) {
  StepResult r;
  r.losses = obj.breakdown();
  if (!std::isfinite(r.losses.total)) throw NonFiniteError("training loss is not finite");
  tape.backward(obj.total);
  const auto g = collect_grad(pv, params);
  double sq = 0.0;
  for (double x : g) sq += x * x;
  r.grad_norm = std::sqrt(sq);
  if (!std::isfinite(r.grad_norm)) throw NonFiniteError("training gradient is not finite");
  const double scale = r.grad_norm > cfg.grad_clip ? cfg.grad_clip / r.grad_norm : 1.0;
  auto& w = params.flat();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * scale * g[i];
  return r;
}

}  // namespace

StepResult train_step(std::span<const PreparedEpisode* const> batch, EncoderParams& params, Banks& banks,
                      const TrainConfig& cfg, std::uint64_t step_seed) {
  const Banks before = banks;
  try {
    ad::Tape tape;
    const auto pv = bind(tape, params, true);
    const auto obj = build_objective(pv, batch, banks, cfg, step_seed);
    return apply_step(tape, pv, obj, params, cfg);
  } catch (const NonFiniteError&) {
    banks = before;
    throw;
  }
}

StepResult train_step_il_rl(std::span<const PreparedEpisode* const> batch, EncoderParams& params,
                            const TrainConfig& cfg, std::uint64_t step_seed) {
  ad::Tape tape;
  const auto pv = bind(tape, params, true);
  const auto obj = build_il_rl_objective(pv, batch, cfg, step_seed);
  return apply_step(tape, pv, obj, params, cfg);
}

EvalResult evaluate(const EncoderParams& params, std::span<const PreparedEpisode> episodes, const TrainConfig& cfg,
                    RolloutMode mode) {
  EvalResult r;
  r.episodes.reserve(episodes.size());
  for (const auto& ep : episodes) {
    ad::Tape tape;
    const auto pv = bind(tape, params, false);
    Rng rng(derive_seed(cfg.seed, {ep.spec->id, 9}));
    const auto trace = rollout(pv, *ep.graph, *ep.spec, ep.instr_ids, mode, cfg.rollout, &rng);
    r.episodes.push_back(
        evaluate_episode(*ep.graph, trace_trajectory(*ep.graph, trace), ep.spec->path, cfg.rollout.success_radius_m));
  }
  r.mean = aggregate(r.episodes);
  return r;
}

void write_eval_csv(std::ostream& out, const EvalResult& r) {
  write_metric_csv_header(out);
  for (const auto& m : r.episodes) write_metric_csv_row(out, m);
}

void write_train_log_header(std::ostream& out) {
  out << "step,L_IL,L_RL,L_CT,L_CI,L_FI,total,kept_pos,kept_neg,false_neg,easy_neg,easy_pos,skipped\n";
}

void write_train_log_row(std::ostream& out, std::size_t step, const LossBreakdown& l) {
  out << step << ',' << l.il << ',' << l.rl << ',' << l.ct << ',' << l.ci << ',' << l.fi << ',' << l.total << ','
      << l.mining.kept_positives << ',' << l.mining.kept_negatives << ',' << l.mining.false_negatives << ','
      << l.mining.easy_negatives << ',' << l.mining.easy_positives << ',' << l.mining.skipped_anchors << '\n';
}

TrainRun train(const ModelShape& shape, std::span<const PreparedEpisode> train_set, const TrainConfig& cfg,
               bool il_rl_only, const StepCallback& on_step) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  TrainRun run{EncoderParams::init(shape, derive_seed(cfg.seed, {0xA11CE})), {}};
  Banks banks(cfg.bank_capacity);
  Rng batch_rng(derive_seed(cfg.seed, {0xBA7C4}));

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::vector<const PreparedEpisode*> batch;
  for (std::size_t step = 0; step < cfg.train_steps; ++step) {
    batch.clear();
    while (batch.size() < cfg.batch_size) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), batch_rng);
        cursor = 0;
      }
      batch.push_back(&train_set[order[cursor++]]);
    }
    const std::uint64_t step_seed = derive_seed(cfg.seed, {0x57E9, step});
    const auto r = il_rl_only ? train_step_il_rl(batch, run.params, cfg, step_seed)
                              : train_step(batch, run.params, banks, cfg, step_seed);
    run.log.push_back(r.losses);
    if (on_step) on_step(step, r.losses, run.params);
  }
  return run;
}

}  // namespace citl
