#pragma once

// Toy language/trajectory encoders E, the projection head U, the predictor
// G, and the cross-modal attention + policy/value head. Everything is built
// on the autodiff tape so gradients are exact.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "citl/autodiff.hpp"
#include "citl/instruction.hpp"
#include "citl/nav_graph.hpp"

namespace citl {

class Vocabulary {
 public:
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr int kUnkId = 0;

  Vocabulary();
  /// Sorted unique words after <unk>.
  static Vocabulary build(std::span<const std::string> words);
  explicit Vocabulary(std::vector<std::string> words_with_unk_first);

  int id(const std::string& word) const;
  std::vector<int> ids(std::span<const std::string> words) const;
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

/// Number of movement directions in step features: +x -x +y -y +z -z other.
inline constexpr int kDirectionCount = 7;

struct ModelShape {
  int dim = 32;
  int vocab_size = 1;
  int landmark_count = 1;
  int max_tokens = 64;

  int feature_dim() const { return landmark_count + kDirectionCount + 1; }
  bool operator==(const ModelShape&) const = default;
};

enum class Block : int {
  token_table,  // vocab x d
  pos_table,    // max_tokens x d, agent attention only
  step_table,   // feature_dim x d
  proj_w1,      // U: d x d
  proj_b1,
  proj_w2,
  proj_b2,
  pred_w,  // G: d x d
  pred_b,
  attn_ctx_w,    // d x d
  attn_query_w,  // d x d
  attn_b,
  stop_vec,
  value_w,
  value_b,
  count_
};

inline constexpr int kBlockCount = static_cast<int>(Block::count_);

std::string_view block_name(Block b);

struct BlockLayout {
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// Flat parameter vector plus its block layout.
class EncoderParams {
 public:
  EncoderParams() = default;
  explicit EncoderParams(const ModelShape& shape);

  /// Uniform(-0.1, 0.1) with a seeded generator.
  static EncoderParams init(const ModelShape& shape, std::uint64_t seed, double scale = 0.1);

  const ModelShape& shape() const { return shape_; }
  const BlockLayout& layout(Block b) const { return layout_[static_cast<std::size_t>(b)]; }
  std::span<double> block(Block b);
  std::span<const double> block(Block b) const;
  std::vector<double>& flat() { return values_; }
  const std::vector<double>& flat() const { return values_; }
  std::size_t size() const { return values_.size(); }
  bool all_finite() const;

 private:
  ModelShape shape_;
  std::array<BlockLayout, kBlockCount> layout_{};
  std::vector<double> values_;
};

/// Parameter blocks bound onto a tape.
struct ParamVars {
  std::array<ad::Var, kBlockCount> blocks;
  ModelShape shape;
  ad::Var operator[](Block b) const { return blocks[static_cast<std::size_t>(b)]; }
};

/// differentiable = false binds constants (frozen snapshot evaluation).
ParamVars bind(ad::Tape& tape, const EncoderParams& params, bool differentiable = true);
/// Gathers leaf gradients back into the flat layout.
std::vector<double> collect_grad(const ParamVars& vars, const EncoderParams& params);

enum class Role { anchor_q, positive_p, negative_n };

struct EmbeddingRecord {
  std::vector<double> vec;  // unit L2 norm
  Role role = Role::positive_p;
  std::uint64_t source_id = 0;
  bool detached = true;
};

ad::Var project(const ParamVars& p, ad::Var x);  // U
ad::Var predict(const ParamVars& p, ad::Var x);  // G

/// Mean-pooled token embeddings -> U -> (G for anchors) -> L2 normalize.
ad::Var encode_tokens(const ParamVars& p, std::span<const int> token_ids, Role role);

/// Per-step features: landmark one-hot, movement direction one-hot,
/// step index / hop.
std::vector<double> step_feature(const NavGraph& graph, std::span<const NodeId> nodes, std::size_t k,
                                 int landmark_count, double index_scale);
/// Mean of the per-step features of a trajectory.
std::vector<double> mean_step_feature(const NavGraph& graph, const Trajectory& traj, int landmark_count);
/// Direction class of the move a -> b, in [0, kDirectionCount).
int direction_class(const NavGraph& graph, NodeId a, NodeId b);

ad::Var encode_trajectory(const ParamVars& p, const NavGraph& graph, const Trajectory& traj, Role role);

EmbeddingRecord encode_instruction(const InstructionDoc& doc, const Vocabulary& vocab, const EncoderParams& params,
                                   Role role, std::uint64_t source_id = 0);
EmbeddingRecord encode_trajectory(const Trajectory& traj, const NavGraph& graph, const EncoderParams& params,
                                  Role role, std::uint64_t source_id = 0);

struct ActOutput {
  ad::Var logits;  // one per candidate
  ad::Var state;   // s_t
  ad::Var value;   // scalar
};

/// Scaled dot-product attention of (prev_state + obs) over the token
/// embeddings gives a context c; s_t = tanh(Wc c + Wq (prev_state + obs) + b),
/// logits_i = s_t . candidate_i and value = w_v . s_t + b_v.
ActOutput attend_and_act(const ParamVars& p, ad::Var tokens, ad::Var obs, ad::Var prev_state,
                         std::span<const ad::Var> candidates);

/// Token embeddings plus learned positions, as seen by the agent.
ad::Var agent_tokens(const ParamVars& p, std::span<const int> token_ids);

using LossClosure = std::function<ad::Var(ad::Tape&, const ParamVars&)>;

struct GradientResult {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Analytic gradient of a scalar loss built from params. Throws
/// NonFiniteError if the loss or any gradient entry is not finite.
GradientResult gradient(const EncoderParams& params, const LossClosure& loss);

/// Central differences, step h, over the listed coordinates (all if empty).
std::vector<double> finite_difference_gradient(const EncoderParams& params, const LossClosure& loss, double h = 1e-5,
                                               std::span<const std::size_t> coords = {});

struct Checkpoint {
  Vocabulary vocab;
  EncoderParams params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace citl
