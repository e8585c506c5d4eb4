#pragma once

// Contrastive losses over unit-norm embeddings: circle loss with
// self-paced logits, multi-pair InfoNCE, similarity-based pair mining, FIFO
// memory banks of inter-negatives, and assembly of the per-anchor losses.

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "citl/autodiff.hpp"
#include "citl/encoder.hpp"

namespace citl {

struct MarginConfig {
  double m = 0.25;
  double gamma = 32.0;

  double o_n() const { return -m; }
  double delta_n() const { return m; }
  double o_p() const { return 1.0 + m; }
  double delta_p() const { return 1.0 - m; }
  /// Throws ConfigError unless 0 < m < 1 and gamma > 0.
  void validate() const;
};

double cosine_sim(const EmbeddingRecord& a, const EmbeddingRecord& b);

/// Self-paced logits applied to similarity values.
double positive_logit(double sim, const MarginConfig& cfg);
double negative_logit(double sim, const MarginConfig& cfg);

/// log(1 + sum_j exp(l_n^j) * sum_i exp(l_p^i)) on similarity scalars.
/// Zero (a constant) when either set is empty.
ad::Var circle_loss(ad::Tape& tape, std::span<const ad::Var> sim_p, std::span<const ad::Var> sim_n,
                    const MarginConfig& cfg);
double circle_loss(const EmbeddingRecord& q, std::span<const EmbeddingRecord> positives,
                   std::span<const EmbeddingRecord> negatives, const MarginConfig& cfg);

/// Mean over positives of -log(e^{s_p/t} / (e^{s_p/t} + sum_n e^{s_n/t})).
/// Zero when either set is empty.
ad::Var info_nce_multi(ad::Tape& tape, std::span<const ad::Var> sim_p, std::span<const ad::Var> sim_n,
                       double temperature);
double info_nce_multi(const EmbeddingRecord& q, std::span<const EmbeddingRecord> positives,
                      std::span<const EmbeddingRecord> negatives, double temperature);

/// Index sets into the positive / negative inputs.
struct MinedPairs {
  std::vector<std::size_t> kept_positives;
  std::vector<std::size_t> kept_negatives;
  std::vector<std::size_t> discarded_false_negatives;
  std::vector<std::size_t> discarded_easy_negatives;
  std::vector<std::size_t> discarded_easy_positives;
  bool anchor_skipped = false;
};

/// Negatives kept when 1 - m > s_n > min(s_p) - m (s_n >= 1 - m are false
/// negatives); positives kept when s_p < max(kept s_n) + m. No kept
/// negatives means the anchor is skipped and no positive is kept.
MinedPairs pair_mining(std::span<const double> sim_p, std::span<const double> sim_n, double m);

class MemoryBank {
 public:
  static constexpr std::size_t kDefaultCapacity = 240;

  explicit MemoryBank(std::size_t capacity = kDefaultCapacity);

  /// Detaches and enqueues in order, evicting the oldest entries past capacity.
  void push(std::span<const EmbeddingRecord> entries);
  std::size_t size() const { return queue_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return queue_.empty(); }
  const std::deque<EmbeddingRecord>& entries() const { return queue_; }
  /// Immutable copy for concurrent readers.
  std::vector<EmbeddingRecord> snapshot() const { return {queue_.begin(), queue_.end()}; }
  void clear() { queue_.clear(); }

 private:
  std::size_t capacity_;
  std::deque<EmbeddingRecord> queue_;
};

enum class LossKind { traj, instr, sub_instr };
enum class ContrastLoss { circle, info_nce };

struct ContrastOptions {
  MarginConfig margin;
  ContrastLoss loss = ContrastLoss::circle;
  bool use_bank = true;
  bool use_mining = true;
  double temperature = 0.1;
};

struct MiningStats {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t kept_positives = 0;
  std::size_t kept_negatives = 0;
  std::size_t false_negatives = 0;
  std::size_t easy_negatives = 0;
  std::size_t easy_positives = 0;
  std::size_t skipped_anchors = 0;

  MiningStats& operator+=(const MiningStats& o);
};

struct AssembledLoss {
  ad::Var loss;
  MiningStats stats;
};

/// Full negatives = intra-negatives + bank snapshot (minus entries sharing
/// the anchor's source id); optional pair mining; circle or InfoNCE loss.
/// Afterwards the detached positives are pushed into the bank. An empty
/// positive set gives a zero loss and leaves the bank untouched.
AssembledLoss assemble_loss(ad::Tape& tape, LossKind kind, ad::Var q, std::span<const ad::Var> positives,
                            std::span<const ad::Var> intra_negatives, MemoryBank& bank, std::uint64_t source_id,
                            const ContrastOptions& opts);

}  // namespace citl
