#include "citl/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "citl/errors.hpp"

namespace citl {

namespace {

class KeyReader {
 public:
  explicit KeyReader(const nlohmann::json& j) : j_(j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
  }

  template <class T>
  void read(const char* key, T& dst) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      dst = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  }

  void read_path(const char* key, std::filesystem::path& dst) {
    std::string s = dst.string();
    read(key, s);
    dst = s;
  }

  void reject_unknown() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }

 private:
  const nlohmann::json& j_;
  std::set<std::string> seen_;
};

std::string loss_name(ContrastLoss l) { return l == ContrastLoss::circle ? "circle" : "info_nce"; }

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  KeyReader r(j);
  r.read_path("data_dir", c.data_dir);
  r.read_path("out_dir", c.out_dir);
  r.read_path("checkpoint", c.checkpoint);
  r.read_path("lexicon_path", c.lexicon_path);

  r.read("seed", c.gen.seed);
  r.read("n_maps_seen", c.gen.n_maps_seen);
  r.read("n_maps_unseen", c.gen.n_maps_unseen);
  r.read("grid_seen", c.gen.grid_seen);
  r.read("grid_unseen", c.gen.grid_unseen);
  r.read("landmark_vocab_size", c.gen.landmark_vocab_size);
  r.read("held_out_landmarks", c.gen.held_out_landmarks);
  r.read("episodes_per_map", c.gen.episodes_per_map);
  r.read("spacing_m", c.gen.spacing_m);
  r.read("edge_drop_prob", c.gen.edge_drop_prob);
  r.read("diagonal_prob", c.gen.diagonal_prob);
  r.read("min_hops", c.gen.min_hops);
  r.read("max_hops", c.gen.max_hops);
  r.read("unseen_paraphrase_prob", c.gen.unseen_paraphrase_prob);

  r.read("alpha_p", c.prep.alpha_p);
  r.read("alpha_n", c.prep.alpha_n);
  r.read("enum_max_count", c.prep.enum_max_count);
  r.read("max_positive_traj", c.prep.max_positive_traj);
  r.read("max_negative_traj", c.prep.max_negative_traj);
  r.read("intra_negative_instructions", c.prep.intra_negative_instructions);
  c.train.alpha_p = c.prep.alpha_p;
  c.train.alpha_n = c.prep.alpha_n;

  r.read("lambda1_traj", c.train.lambda1_traj);
  r.read("lambda2_instr", c.train.lambda2_instr);
  r.read("lambda3_subinstr", c.train.lambda3_subinstr);
  r.read("margin", c.train.margin.m);
  r.read("gamma", c.train.margin.gamma);
  r.read("bank_capacity", c.train.bank_capacity);
  std::string loss = loss_name(c.train.contrast_loss);
  r.read("contrast_loss", loss);
  if (loss == "circle")
    c.train.contrast_loss = ContrastLoss::circle;
  else if (loss == "info_nce")
    c.train.contrast_loss = ContrastLoss::info_nce;
  else
    throw ConfigError("contrast_loss must be circle or info_nce");
  r.read("use_bank", c.train.use_bank);
  r.read("use_mining", c.train.use_mining);
  r.read("temperature", c.train.temperature);
  r.read("learning_rate", c.train.learning_rate);
  r.read("batch_size", c.train.batch_size);
  r.read("train_steps", c.train.train_steps);
  r.read("rl_weight", c.train.rl_weight);
  r.read("rl_discount", c.train.rl_discount);
  r.read("value_coef", c.train.value_coef);
  r.read("grad_clip", c.train.grad_clip);
  r.read("max_steps", c.train.rollout.max_steps);
  r.read("success_radius_m", c.train.rollout.success_radius_m);
  r.read("train_seed", c.train.seed);

  r.read("dim", c.dim);
  r.read("max_tokens", c.max_tokens);
  r.read("eval_every", c.eval_every);
  r.read("ablation_seeds", c.ablation_seeds);
  r.read("threads", c.threads);
  r.reject_unknown();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void RunConfig::validate() const {
  train.validate();
  if (dim <= 0 || max_tokens <= 0) throw ConfigError("dim and max_tokens must be positive");
  if (ablation_seeds <= 0) throw ConfigError("ablation_seeds must be positive");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
  if (gen.n_maps_seen <= 0 || gen.n_maps_unseen <= 0 || gen.episodes_per_map <= 0)
    throw ConfigError("map and episode counts must be positive");
  if (gen.edge_drop_prob < 0 || gen.edge_drop_prob >= 1 || gen.diagonal_prob < 0 || gen.diagonal_prob > 1)
    throw ConfigError("generator probabilities out of range");
  if (gen.unseen_paraphrase_prob < 0 || gen.unseen_paraphrase_prob > 1)
    throw ConfigError("unseen_paraphrase_prob must lie in [0, 1]");
  if (!(gen.spacing_m > 0)) throw ConfigError("spacing_m must be positive");
}

nlohmann::json RunConfig::to_json() const {
  return {
      {"data_dir", data_dir.string()},
      {"out_dir", out_dir.string()},
      {"checkpoint", checkpoint.string()},
      {"lexicon_path", lexicon_path.string()},
      {"seed", gen.seed},
      {"n_maps_seen", gen.n_maps_seen},
      {"n_maps_unseen", gen.n_maps_unseen},
      {"grid_seen", gen.grid_seen},
      {"grid_unseen", gen.grid_unseen},
      {"landmark_vocab_size", gen.landmark_vocab_size},
      {"held_out_landmarks", gen.held_out_landmarks},
      {"episodes_per_map", gen.episodes_per_map},
      {"spacing_m", gen.spacing_m},
      {"edge_drop_prob", gen.edge_drop_prob},
      {"diagonal_prob", gen.diagonal_prob},
      {"min_hops", gen.min_hops},
      {"max_hops", gen.max_hops},
      {"unseen_paraphrase_prob", gen.unseen_paraphrase_prob},
      {"alpha_p", prep.alpha_p},
      {"alpha_n", prep.alpha_n},
      {"enum_max_count", prep.enum_max_count},
      {"max_positive_traj", prep.max_positive_traj},
      {"max_negative_traj", prep.max_negative_traj},
      {"intra_negative_instructions", prep.intra_negative_instructions},
      {"lambda1_traj", train.lambda1_traj},
      {"lambda2_instr", train.lambda2_instr},
      {"lambda3_subinstr", train.lambda3_subinstr},
      {"margin", train.margin.m},
      {"gamma", train.margin.gamma},
      {"bank_capacity", train.bank_capacity},
      {"contrast_loss", loss_name(train.contrast_loss)},
      {"use_bank", train.use_bank},
      {"use_mining", train.use_mining},
      {"temperature", train.temperature},
      {"learning_rate", train.learning_rate},
      {"batch_size", train.batch_size},
      {"train_steps", train.train_steps},
      {"rl_weight", train.rl_weight},
      {"rl_discount", train.rl_discount},
      {"value_coef", train.value_coef},
      {"grad_clip", train.grad_clip},
      {"max_steps", train.rollout.max_steps},
      {"success_radius_m", train.rollout.success_radius_m},
      {"train_seed", train.seed},
      {"dim", dim},
      {"max_tokens", max_tokens},
      {"eval_every", eval_every},
      {"ablation_seeds", ablation_seeds},
      {"threads", threads},
  };
}

std::string config_hash(const nlohmann::json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string persist_resolved_config(const std::filesystem::path& dir, const RunConfig& cfg) {
  std::filesystem::create_directories(dir);
  const auto j = cfg.to_json();
  std::ofstream out(dir / "resolved_config.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "resolved_config.json").string());
  out << j.dump(2) << '\n';
  return config_hash(j);
}

}  // namespace citl
