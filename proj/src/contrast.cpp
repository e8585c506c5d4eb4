#include "citl/contrast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "citl/errors.hpp"

namespace citl {

void MarginConfig::validate() const {
  if (!(m > 0.0 && m < 1.0)) throw ConfigError("margin m must lie in (0, 1)");
  if (!(gamma > 0.0)) throw ConfigError("scale factor gamma must be positive");
}

double cosine_sim(const EmbeddingRecord& a, const EmbeddingRecord& b) {
  if (a.vec.size() != b.vec.size()) throw std::invalid_argument("cosine_sim: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.vec.size(); ++i) s += a.vec[i] * b.vec[i];
  return std::clamp(s, -1.0, 1.0);
}

double positive_logit(double sim, const MarginConfig& cfg) {
  return -cfg.gamma * std::max(cfg.o_p() - sim, 0.0) * (sim - cfg.delta_p());
}

double negative_logit(double sim, const MarginConfig& cfg) {
  return cfg.gamma * std::max(sim - cfg.o_n(), 0.0) * (sim - cfg.delta_n());
}

namespace {

void check_finite(std::span<const ad::Var> sims) {
  for (ad::Var s : sims)
    if (!std::isfinite(s.scalar())) throw NonFiniteError("contrastive loss: non-finite similarity");
}

std::vector<ad::Var> sims_to(ad::Tape& tape, const EmbeddingRecord& q, std::span<const EmbeddingRecord> xs) {
  std::vector<ad::Var> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(tape.scalar_constant(cosine_sim(q, x)));
  return out;
}

}  // namespace

ad::Var circle_loss(ad::Tape& tape, std::span<const ad::Var> sim_p, std::span<const ad::Var> sim_n,
                    const MarginConfig& cfg) {
  check_finite(sim_p);
  check_finite(sim_n);
  if (sim_p.empty() || sim_n.empty()) return tape.scalar_constant(0.0);
  std::vector<ad::Var> lp, ln;
  lp.reserve(sim_p.size());
  ln.reserve(sim_n.size());
  for (ad::Var s : sim_p) lp.push_back((-cfg.gamma) * (ad::relu((-s) + cfg.o_p()) * (s + (-cfg.delta_p()))));
  for (ad::Var s : sim_n) ln.push_back(cfg.gamma * (ad::relu(s + (-cfg.o_n())) * (s + (-cfg.delta_n()))));
  return ad::softplus(ad::logsumexp(ad::concat(ln)) + ad::logsumexp(ad::concat(lp)));
}

double circle_loss(const EmbeddingRecord& q, std::span<const EmbeddingRecord> positives,
                   std::span<const EmbeddingRecord> negatives, const MarginConfig& cfg) {
  ad::Tape tape;
  const auto sp = sims_to(tape, q, positives);
  const auto sn = sims_to(tape, q, negatives);
  return circle_loss(tape, sp, sn, cfg).scalar();
}

ad::Var info_nce_multi(ad::Tape& tape, std::span<const ad::Var> sim_p, std::span<const ad::Var> sim_n,
                       double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("InfoNCE temperature must be positive");
  check_finite(sim_p);
  check_finite(sim_n);
  if (sim_p.empty() || sim_n.empty()) return tape.scalar_constant(0.0);
  const double inv_t = 1.0 / temperature;
  std::vector<ad::Var> terms;
  terms.reserve(sim_p.size());
  for (ad::Var p : sim_p) {
    std::vector<ad::Var> logits{inv_t * p};
    for (ad::Var n : sim_n) logits.push_back(inv_t * n);
    terms.push_back(-ad::pick(ad::log_softmax(ad::concat(logits)), 0));
  }
  return ad::mean(ad::concat(terms));
}

double info_nce_multi(const EmbeddingRecord& q, std::span<const EmbeddingRecord> positives,
                      std::span<const EmbeddingRecord> negatives, double temperature) {
  if (positives.empty() || negatives.empty())
    throw std::invalid_argument("info_nce_multi: needs at least one positive and one negative");
  ad::Tape tape;
  const auto sp = sims_to(tape, q, positives);
  const auto sn = sims_to(tape, q, negatives);
  return info_nce_multi(tape, sp, sn, temperature).scalar();
}

MinedPairs pair_mining(std::span<const double> sim_p, std::span<const double> sim_n, double m) {
  if (sim_p.empty()) throw std::invalid_argument("pair_mining: needs at least one positive");
  MinedPairs out;
  const double hardest_p = *std::min_element(sim_p.begin(), sim_p.end());
  const double upper = 1.0 - m;
  const double lower = hardest_p - m;
  double hardest_n = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < sim_n.size(); ++j) {
    const double s = sim_n[j];
    if (s >= upper) {
      out.discarded_false_negatives.push_back(j);
    } else if (s > lower) {
      out.kept_negatives.push_back(j);
      hardest_n = std::max(hardest_n, s);
    } else {
      out.discarded_easy_negatives.push_back(j);
    }
  }
  if (out.kept_negatives.empty()) {
    out.anchor_skipped = true;
    return out;
  }
  for (std::size_t i = 0; i < sim_p.size(); ++i) {
    if (sim_p[i] < hardest_n + m)
      out.kept_positives.push_back(i);
    else
      out.discarded_easy_positives.push_back(i);
  }
  return out;
}

MemoryBank::MemoryBank(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("memory bank capacity must be positive");
}

void MemoryBank::push(std::span<const EmbeddingRecord> entries) {
  for (const auto& e : entries) {
    EmbeddingRecord r = e;
    r.detached = true;
    queue_.push_back(std::move(r));
    if (queue_.size() > capacity_) queue_.pop_front();
  }
}

MiningStats& MiningStats::operator+=(const MiningStats& o) {
  positives += o.positives;
  negatives += o.negatives;
  kept_positives += o.kept_positives;
  kept_negatives += o.kept_negatives;
  false_negatives += o.false_negatives;
  easy_negatives += o.easy_negatives;
  easy_positives += o.easy_positives;
  skipped_anchors += o.skipped_anchors;
  return *this;
}

AssembledLoss assemble_loss(ad::Tape& tape, LossKind kind, ad::Var q, std::span<const ad::Var> positives,
                            std::span<const ad::Var> intra_negatives, MemoryBank& bank, std::uint64_t source_id,
                            const ContrastOptions& opts) {
  (void)kind;  // all three losses share the recipe; kind selects the bank at the call site
  opts.margin.validate();
  AssembledLoss out{tape.scalar_constant(0.0), {}};
  if (positives.empty()) return out;

  std::vector<ad::Var> sim_p, sim_n;
  for (ad::Var p : positives) sim_p.push_back(ad::dot(q, p));
  for (ad::Var n : intra_negatives) sim_n.push_back(ad::dot(q, n));
  if (opts.use_bank) {
    for (const auto& e : bank.entries()) {
      if (e.source_id == source_id) continue;
      const int d = static_cast<int>(e.vec.size());
      sim_n.push_back(ad::dot(q, tape.constant(e.vec, d, 1)));
    }
  }
  out.stats.positives = sim_p.size();
  out.stats.negatives = sim_n.size();

  std::vector<ad::Var> use_p = sim_p, use_n = sim_n;
  if (opts.use_mining) {
    std::vector<double> vp, vn;
    for (ad::Var s : sim_p) vp.push_back(s.scalar());
    for (ad::Var s : sim_n) vn.push_back(s.scalar());
    const auto mined = pair_mining(vp, vn, opts.margin.m);
    use_p.clear();
    use_n.clear();
    for (auto i : mined.kept_positives) use_p.push_back(sim_p[i]);
    for (auto j : mined.kept_negatives) use_n.push_back(sim_n[j]);
    out.stats.false_negatives = mined.discarded_false_negatives.size();
    out.stats.easy_negatives = mined.discarded_easy_negatives.size();
    out.stats.easy_positives = mined.discarded_easy_positives.size();
    out.stats.skipped_anchors = mined.anchor_skipped ? 1 : 0;
  }
  out.stats.kept_positives = use_p.size();
  out.stats.kept_negatives = use_n.size();

  out.loss = opts.loss == ContrastLoss::circle ? circle_loss(tape, use_p, use_n, opts.margin)
                                               : info_nce_multi(tape, use_p, use_n, opts.temperature);

  std::vector<EmbeddingRecord> pushed;
  pushed.reserve(positives.size());
  for (ad::Var p : positives) pushed.push_back({p.value(), Role::positive_p, source_id, true});
  bank.push(pushed);
  return out;
}

}  // namespace citl
