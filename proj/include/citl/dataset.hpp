#pragma once

// Synthetic navigation suites: graph files, episode records and the
// per-episode augmentations the contrastive losses consume.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "citl/augment.hpp"
#include "citl/encoder.hpp"
#include "citl/instruction.hpp"
#include "citl/nav_graph.hpp"

namespace citl {

struct EpisodeSpec {
  std::uint64_t id = 0;
  int graph_id = 0;
  NodeId start = 0;
  NodeId goal = 0;
  Trajectory path;
  InstructionDoc instruction;
};

/// One line of episodes.jsonl.
nlohmann::json episode_to_json(const EpisodeSpec& ep);
EpisodeSpec episode_from_json(const nlohmann::json& j, const std::vector<NavGraph>& graphs);

struct Split {
  std::string name;
  std::vector<NavGraph> graphs;
  std::vector<EpisodeSpec> episodes;
};

struct GeneratorConfig {
  std::uint64_t seed = 7;
  int n_maps_seen = 40;
  int n_maps_unseen = 10;
  int grid_seen = 5;
  int grid_unseen = 6;
  int landmark_vocab_size = 12;
  int held_out_landmarks = 3;
  int episodes_per_map = 10;
  double spacing_m = 2.0;
  double edge_drop_prob = 0.2;
  double diagonal_prob = 0.1;
  int min_hops = 2;
  int max_hops = 5;
  /// Unseen instructions swap each lexicon word for a synonym with this
  /// probability.
  double unseen_paraphrase_prob = 0.3;
};

/// Bundled landmark words; the first landmark_vocab_size are used.
const std::vector<std::string>& landmark_words();

NavGraph generate_map(int grid, const std::vector<int>& landmark_pool, const GeneratorConfig& cfg, std::uint64_t seed);

/// Clause k (1-based) names the landmark at path node k: "walk to the X ,"
/// then "then turn and go to the X ,", the last clause closing with ".".
/// Returns the instruction with the clause spans recorded.
InstructionDoc template_instruction(const NavGraph& graph, const Trajectory& path,
                                    const std::vector<std::string>& landmark_names);

/// Seen maps draw landmarks outside the held-out subset and use the seen
/// grid size; unseen maps use the whole landmark set and the larger grid.
Split generate_split(const std::string& name, const GeneratorConfig& cfg);

void write_split(const std::filesystem::path& dir, const Split& split);
Split read_split(const std::filesystem::path& dir, const std::string& name);

struct PrepareConfig {
  double alpha_p = 1.2;
  double alpha_n = 1.4;
  std::size_t enum_max_count = 64;
  std::size_t max_positive_traj = 4;
  std::size_t max_negative_traj = 4;
  int intra_negative_instructions = 2;
};

/// An episode with its augmentations materialised as token ids / trajectories.
struct PreparedEpisode {
  const EpisodeSpec* spec = nullptr;
  const NavGraph* graph = nullptr;
  std::vector<int> instr_ids;
  std::vector<std::vector<int>> positive_instr_ids;
  std::vector<std::vector<int>> negative_instr_ids;
  std::vector<std::vector<int>> span_ids;
  std::vector<Trajectory> positive_traj;
  std::vector<Trajectory> negative_traj;
};

PreparedEpisode prepare_episode(const EpisodeSpec& ep, const NavGraph& graph, const Vocabulary& vocab,
                                const AugmenterConfig& aug, const PrepareConfig& cfg);
std::vector<PreparedEpisode> prepare_split(const Split& split, const Vocabulary& vocab, const AugmenterConfig& aug,
                                           const PrepareConfig& cfg);

/// Words of every instruction in the split plus lexicon and table words.
Vocabulary build_vocabulary(const Split& split, const AugmenterConfig& aug);

/// Lexicon and round-trip table shipped with the generator's templates.
Lexicon default_lexicon();
NormalizationTable default_normalization_table();

}  // namespace citl
