#include "citl/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "citl/errors.hpp"
#include "citl/rng.hpp"

namespace citl {

// ---------------------------------------------------------------- vocabulary

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{std::string(kUnk)}) {}

Vocabulary::Vocabulary(std::vector<std::string> words_with_unk_first) : words_(std::move(words_with_unk_first)) {
  if (words_.empty() || words_.front() != kUnk) throw std::invalid_argument("vocabulary must start with <unk>");
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<int>(i)).second)
      throw std::invalid_argument("vocabulary: duplicate word " + words_[i]);
  }
}

Vocabulary Vocabulary::build(std::span<const std::string> words) {
  std::set<std::string> uniq(words.begin(), words.end());
  uniq.erase(std::string(kUnk));
  std::vector<std::string> out{std::string(kUnk)};
  out.insert(out.end(), uniq.begin(), uniq.end());
  return Vocabulary(std::move(out));
}

int Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnkId : it->second;
}

std::vector<int> Vocabulary::ids(std::span<const std::string> words) const {
  std::vector<int> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

// ---------------------------------------------------------------- parameters

std::string_view block_name(Block b) {
  switch (b) {
    case Block::token_table: return "token_table";
    case Block::pos_table: return "pos_table";
    case Block::step_table: return "step_table";
    case Block::proj_w1: return "proj_w1";
    case Block::proj_b1: return "proj_b1";
    case Block::proj_w2: return "proj_w2";
    case Block::proj_b2: return "proj_b2";
    case Block::pred_w: return "pred_w";
    case Block::pred_b: return "pred_b";
    case Block::attn_ctx_w: return "attn_ctx_w";
    case Block::attn_query_w: return "attn_query_w";
    case Block::attn_b: return "attn_b";
    case Block::stop_vec: return "stop_vec";
    case Block::value_w: return "value_w";
    case Block::value_b: return "value_b";
    case Block::count_: break;
  }
  return "?";
}

EncoderParams::EncoderParams(const ModelShape& shape) : shape_(shape) {
  if (shape.dim <= 0 || shape.vocab_size <= 0 || shape.landmark_count <= 0 || shape.max_tokens <= 0)
    throw std::invalid_argument("ModelShape: all sizes must be positive");
  const int d = shape.dim;
  auto set = [&](Block b, int r, int c) { layout_[static_cast<std::size_t>(b)] = {r, c, 0}; };
  set(Block::token_table, shape.vocab_size, d);
  set(Block::pos_table, shape.max_tokens, d);
  set(Block::step_table, shape.feature_dim(), d);
  set(Block::proj_w1, d, d);
  set(Block::proj_b1, d, 1);
  set(Block::proj_w2, d, d);
  set(Block::proj_b2, d, 1);
  set(Block::pred_w, d, d);
  set(Block::pred_b, d, 1);
  set(Block::attn_ctx_w, d, d);
  set(Block::attn_query_w, d, d);
  set(Block::attn_b, d, 1);
  set(Block::stop_vec, d, 1);
  set(Block::value_w, d, 1);
  set(Block::value_b, 1, 1);
  std::size_t off = 0;
  for (auto& l : layout_) {
    l.offset = off;
    off += l.size();
  }
  values_.assign(off, 0.0);
}

EncoderParams EncoderParams::init(const ModelShape& shape, std::uint64_t seed, double scale) {
  EncoderParams p(shape);
  Rng rng(seed);
  for (auto& v : p.values_) v = (2.0 * uniform01(rng) - 1.0) * scale;
  return p;
}

std::span<double> EncoderParams::block(Block b) {
  const auto& l = layout(b);
  return {values_.data() + l.offset, l.size()};
}

std::span<const double> EncoderParams::block(Block b) const {
  const auto& l = layout(b);
  return {values_.data() + l.offset, l.size()};
}

bool EncoderParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ParamVars bind(ad::Tape& tape, const EncoderParams& params, bool differentiable) {
  ParamVars pv;
  pv.shape = params.shape();
  for (int i = 0; i < kBlockCount; ++i) {
    const auto b = static_cast<Block>(i);
    const auto& l = params.layout(b);
    pv.blocks[static_cast<std::size_t>(i)] = differentiable ? tape.leaf(params.block(b), l.rows, l.cols)
                                                            : tape.constant(params.block(b), l.rows, l.cols);
  }
  return pv;
}

std::vector<double> collect_grad(const ParamVars& vars, const EncoderParams& params) {
  std::vector<double> g(params.size(), 0.0);
  for (int i = 0; i < kBlockCount; ++i) {
    const auto& l = params.layout(static_cast<Block>(i));
    const auto& src = vars.blocks[static_cast<std::size_t>(i)].grad();
    std::copy(src.begin(), src.end(), g.begin() + static_cast<std::ptrdiff_t>(l.offset));
  }
  return g;
}

// ---------------------------------------------------------------- encoders

ad::Var project(const ParamVars& p, ad::Var x) {
  ad::Var h = ad::tanh(ad::matvec(p[Block::proj_w1], x) + p[Block::proj_b1]);
  return ad::matvec(p[Block::proj_w2], h) + p[Block::proj_b2];
}

ad::Var predict(const ParamVars& p, ad::Var x) { return ad::matvec(p[Block::pred_w], x) + p[Block::pred_b]; }

namespace {

ad::Var head(const ParamVars& p, ad::Var pooled, Role role) {
  ad::Var z = project(p, pooled);
  if (role == Role::anchor_q) z = predict(p, z);
  return ad::normalize(z);
}

EmbeddingRecord to_record(ad::Var v, Role role, std::uint64_t source_id) {
  return EmbeddingRecord{v.value(), role, source_id, true};
}

}  // namespace

ad::Var encode_tokens(const ParamVars& p, std::span<const int> token_ids, Role role) {
  if (token_ids.empty()) throw std::invalid_argument("encode: empty token sequence");
  ad::Var pooled = ad::mean_rows(ad::gather_rows(p[Block::token_table], token_ids));
  return head(p, pooled, role);
}

int direction_class(const NavGraph& graph, NodeId a, NodeId b) {
  const auto& pa = graph.node(a).pos;
  const auto& pb = graph.node(b).pos;
  const double d[3] = {pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]};
  const double len = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  const double tol = 1e-6 * std::max(len, 1.0);
  int axis = -1;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) <= tol) continue;
    if (axis >= 0) return kDirectionCount - 1;  // off-axis
    axis = k;
  }
  if (axis < 0) return kDirectionCount - 1;
  return 2 * axis + (d[axis] > 0 ? 0 : 1);
}

std::vector<double> step_feature(const NavGraph& graph, std::span<const NodeId> nodes, std::size_t k,
                                 int landmark_count, double index_scale) {
  std::vector<double> f(static_cast<std::size_t>(landmark_count + kDirectionCount + 1), 0.0);
  const int lm = graph.node(nodes[k]).landmark;
  if (lm < 0 || lm >= landmark_count) throw std::out_of_range("step_feature: landmark id outside model shape");
  f[static_cast<std::size_t>(lm)] = 1.0;
  if (k > 0) f[static_cast<std::size_t>(landmark_count + direction_class(graph, nodes[k - 1], nodes[k]))] = 1.0;
  f.back() = static_cast<double>(k) * index_scale;
  return f;
}

std::vector<double> mean_step_feature(const NavGraph& graph, const Trajectory& traj, int landmark_count) {
  const std::size_t n = traj.nodes.size();
  const double scale = traj.hop() > 0 ? 1.0 / traj.hop() : 0.0;
  std::vector<double> acc(static_cast<std::size_t>(landmark_count + kDirectionCount + 1), 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto f = step_feature(graph, traj.nodes, k, landmark_count, scale);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f[i];
  }
  for (auto& v : acc) v /= static_cast<double>(n);
  return acc;
}

ad::Var encode_trajectory(const ParamVars& p, const NavGraph& graph, const Trajectory& traj, Role role) {
  // Mean pooling commutes with the linear step table, so pool features first.
  auto f = mean_step_feature(graph, traj, p.shape.landmark_count);
  ad::Tape& tape = *p[Block::step_table].tape;
  const int n = static_cast<int>(f.size());
  ad::Var pooled = ad::matvec_t(p[Block::step_table], tape.constant(std::move(f), n, 1));
  return head(p, pooled, role);
}

EmbeddingRecord encode_instruction(const InstructionDoc& doc, const Vocabulary& vocab, const EncoderParams& params,
                                   Role role, std::uint64_t source_id) {
  ad::Tape tape;
  const auto pv = bind(tape, params, false);
  const auto ids = vocab.ids(doc.tokens);
  return to_record(encode_tokens(pv, ids, role), role, source_id);
}

EmbeddingRecord encode_trajectory(const Trajectory& traj, const NavGraph& graph, const EncoderParams& params,
                                  Role role, std::uint64_t source_id) {
  ad::Tape tape;
  const auto pv = bind(tape, params, false);
  return to_record(encode_trajectory(pv, graph, traj, role), role, source_id);
}

// ---------------------------------------------------------------- agent head

ad::Var agent_tokens(const ParamVars& p, std::span<const int> token_ids) {
  if (token_ids.empty()) throw std::invalid_argument("agent_tokens: empty instruction");
  std::vector<int> pos(token_ids.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = std::min<int>(static_cast<int>(i), p.shape.max_tokens - 1);
  return ad::gather_rows(p[Block::token_table], token_ids) + ad::gather_rows(p[Block::pos_table], pos);
}

ActOutput attend_and_act(const ParamVars& p, ad::Var tokens, ad::Var obs, ad::Var prev_state,
                         std::span<const ad::Var> candidates) {
  if (candidates.empty()) throw std::invalid_argument("attend_and_act: no candidates");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(tokens.cols()));
  ad::Var query = prev_state + obs;
  ad::Var weights = ad::exp(ad::log_softmax(inv_sqrt_d * ad::matvec(tokens, query)));
  ad::Var context = ad::matvec_t(tokens, weights);
  ad::Var state =
      ad::tanh(ad::matvec(p[Block::attn_ctx_w], context) + ad::matvec(p[Block::attn_query_w], query) + p[Block::attn_b]);
  std::vector<ad::Var> logits;
  logits.reserve(candidates.size());
  for (ad::Var c : candidates) logits.push_back(ad::dot(state, c));
  ad::Var value = ad::dot(p[Block::value_w], state) + p[Block::value_b];
  return {ad::concat(logits), state, value};
}

// ---------------------------------------------------------------- gradients

GradientResult gradient(const EncoderParams& params, const LossClosure& loss) {
  ad::Tape tape;
  const auto pv = bind(tape, params, true);
  ad::Var l = loss(tape, pv);
  GradientResult out;
  out.loss = l.scalar();
  if (!std::isfinite(out.loss)) throw NonFiniteError("loss is not finite");
  tape.backward(l);
  out.grad = collect_grad(pv, params);
  if (!std::all_of(out.grad.begin(), out.grad.end(), [](double g) { return std::isfinite(g); }))
    throw NonFiniteError("gradient is not finite");
  return out;
}

std::vector<double> finite_difference_gradient(const EncoderParams& params, const LossClosure& loss, double h,
                                               std::span<const std::size_t> coords) {
  EncoderParams probe = params;
  auto eval = [&]() {
    ad::Tape tape;
    const auto pv = bind(tape, probe, false);
    return loss(tape, pv).scalar();
  };
  std::vector<double> g(params.size(), 0.0);
  auto one = [&](std::size_t i) {
    const double orig = probe.flat()[i];
    probe.flat()[i] = orig + h;
    const double up = eval();
    probe.flat()[i] = orig - h;
    const double down = eval();
    probe.flat()[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  };
  if (coords.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) one(i);
  } else {
    for (std::size_t i : coords) one(i);
  }
  return g;
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto& s = ckpt.params.shape();
  nlohmann::json j;
  j["format"] = "citl-checkpoint";
  j["version"] = kCheckpointVersion;
  j["vocab"] = ckpt.vocab.words();
  j["shape"] = {{"dim", s.dim}, {"vocab_size", s.vocab_size}, {"landmark_count", s.landmark_count},
                {"max_tokens", s.max_tokens}};
  j["blocks"] = nlohmann::json::array();
  for (int i = 0; i < kBlockCount; ++i) {
    const auto b = static_cast<Block>(i);
    const auto& l = ckpt.params.layout(b);
    j["blocks"].push_back({{"name", block_name(b)}, {"rows", l.rows}, {"cols", l.cols}, {"offset", l.offset}});
  }
  j["params"] = ckpt.params.flat();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const auto j = nlohmann::json::parse(in);
  if (j.at("format") != "citl-checkpoint" || j.at("version").get<int>() != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint format");
  ModelShape s;
  const auto& js = j.at("shape");
  s.dim = js.at("dim").get<int>();
  s.vocab_size = js.at("vocab_size").get<int>();
  s.landmark_count = js.at("landmark_count").get<int>();
  s.max_tokens = js.at("max_tokens").get<int>();
  Checkpoint ck{Vocabulary(j.at("vocab").get<std::vector<std::string>>()), EncoderParams(s)};
  if (ck.vocab.size() != s.vocab_size) throw std::runtime_error("checkpoint: vocabulary size mismatch");
  for (const auto& jb : j.at("blocks")) {
    bool matched = false;
    for (int i = 0; i < kBlockCount; ++i) {
      const auto b = static_cast<Block>(i);
      if (jb.at("name").get<std::string>() != block_name(b)) continue;
      const auto& l = ck.params.layout(b);
      if (jb.at("rows").get<int>() != l.rows || jb.at("cols").get<int>() != l.cols ||
          jb.at("offset").get<std::size_t>() != l.offset)
        throw std::runtime_error("checkpoint: block layout mismatch");
      matched = true;
    }
    if (!matched) throw std::runtime_error("checkpoint: unknown block");
  }
  auto flat = j.at("params").get<std::vector<double>>();
  if (flat.size() != ck.params.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
  ck.params.flat() = std::move(flat);
  return ck;
}

}  // namespace citl
