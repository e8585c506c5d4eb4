#include "citl/dataset.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "citl/errors.hpp"
#include "citl/rng.hpp"

namespace citl {

nlohmann::json episode_to_json(const EpisodeSpec& ep) {
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& s : ep.instruction.sub_spans) spans.push_back({s.start, s.end});
  return {{"id", ep.id},         {"instr_tokens", ep.instruction.tokens}, {"sub_spans", spans},
          {"graph_id", ep.graph_id}, {"start", ep.start}, {"goal", ep.goal}, {"path", ep.path.nodes}};
}

EpisodeSpec episode_from_json(const nlohmann::json& j, const std::vector<NavGraph>& graphs) {
  EpisodeSpec ep;
  ep.id = j.at("id").get<std::uint64_t>();
  ep.graph_id = j.at("graph_id").get<int>();
  if (ep.graph_id < 0 || ep.graph_id >= static_cast<int>(graphs.size()))
    throw std::invalid_argument("episode references unknown graph");
  const auto& g = graphs[static_cast<std::size_t>(ep.graph_id)];
  ep.start = j.at("start").get<int>();
  ep.goal = j.at("goal").get<int>();
  ep.path = make_trajectory(g, j.at("path").get<std::vector<int>>());
  if (ep.path.start() != ep.start || ep.path.end() != ep.goal)
    throw std::invalid_argument("episode path endpoints disagree with start/goal");
  ep.instruction.tokens = j.at("instr_tokens").get<std::vector<std::string>>();
  for (const auto& s : j.at("sub_spans")) ep.instruction.sub_spans.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
  validate(ep.instruction);
  return ep;
}

const std::vector<std::string>& landmark_words() {
  static const std::vector<std::string> words = {
      "sofa",  "table", "lamp",   "bed",   "sink",  "stairs", "door", "window",
      "plant", "fridge", "piano", "mirror", "chair", "shelf", "rug",  "fireplace",
  };
  return words;
}

namespace {

bool connected_without(int n, const std::vector<std::pair<int, int>>& edges, std::size_t skip) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (i == skip) continue;
    adj[static_cast<std::size_t>(edges[i].first)].push_back(edges[i].second);
    adj[static_cast<std::size_t>(edges[i].second)].push_back(edges[i].first);
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::deque<int> q{0};
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop_front();
    for (int v : adj[static_cast<std::size_t>(u)])
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++count;
        q.push_back(v);
      }
  }
  return count == n;
}

}  // namespace

NavGraph generate_map(int grid, const std::vector<int>& landmark_pool, const GeneratorConfig& cfg, std::uint64_t seed) {
  if (grid < 2) throw ConfigError("grid size must be at least 2");
  if (landmark_pool.empty()) throw ConfigError("empty landmark pool");
  Rng rng(seed);
  const int n = grid * grid;
  auto id = [grid](int r, int c) { return r * grid + c; };

  std::vector<NavNode> nodes;
  for (int r = 0; r < grid; ++r)
    for (int c = 0; c < grid; ++c) {
      const int lm = landmark_pool[uniform_index(rng, landmark_pool.size())];
      nodes.push_back({id(r, c), {c * cfg.spacing_m, r * cfg.spacing_m, 0.0}, lm});
    }

  std::vector<std::pair<int, int>> edges;
  for (int r = 0; r < grid; ++r)
    for (int c = 0; c < grid; ++c) {
      if (c + 1 < grid) edges.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < grid) edges.emplace_back(id(r, c), id(r + 1, c));
    }
  // Drop lattice edges while the map stays connected.
  for (std::size_t i = 0; i < edges.size();) {
    if (uniform01(rng) < cfg.edge_drop_prob && connected_without(n, edges, i)) {
      edges.erase(edges.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  for (int r = 0; r + 1 < grid; ++r)
    for (int c = 0; c + 1 < grid; ++c)
      if (uniform01(rng) < cfg.diagonal_prob) edges.emplace_back(id(r, c), id(r + 1, c + 1));
  return NavGraph(std::move(nodes), std::move(edges));
}

InstructionDoc template_instruction(const NavGraph& graph, const Trajectory& path,
                                    const std::vector<std::string>& landmark_names) {
  if (path.hop() < 1) throw std::invalid_argument("template_instruction: path needs at least one hop");
  InstructionDoc doc;
  for (std::size_t k = 1; k < path.nodes.size(); ++k) {
    const auto& name = landmark_names.at(static_cast<std::size_t>(graph.node(path.nodes[k]).landmark));
    std::vector<std::string> clause;
    if (k == 1)
      clause = {"walk", "to", "the", name};
    else
      clause = {"then", "turn", "and", "go", "to", "the", name};
    clause.push_back(k + 1 == path.nodes.size() ? "." : ",");
    const int start = static_cast<int>(doc.tokens.size());
    doc.tokens.insert(doc.tokens.end(), clause.begin(), clause.end());
    doc.sub_spans.push_back({start, static_cast<int>(doc.tokens.size())});
  }
  return doc;
}

Split generate_split(const std::string& name, const GeneratorConfig& cfg) {
  if (cfg.landmark_vocab_size < 2 || cfg.landmark_vocab_size > static_cast<int>(landmark_words().size()))
    throw ConfigError("landmark_vocab_size out of range");
  if (cfg.held_out_landmarks < 0 || cfg.held_out_landmarks >= cfg.landmark_vocab_size)
    throw ConfigError("held_out_landmarks out of range");
  if (cfg.min_hops < 1 || cfg.max_hops < cfg.min_hops) throw ConfigError("bad hop range");
  const bool seen = name == "seen";
  if (!seen && name != "unseen") throw ConfigError("split must be seen or unseen");

  std::vector<int> pool(static_cast<std::size_t>(seen ? cfg.landmark_vocab_size - cfg.held_out_landmarks
                                                      : cfg.landmark_vocab_size));
  std::iota(pool.begin(), pool.end(), 0);
  const int grid = seen ? cfg.grid_seen : cfg.grid_unseen;
  const int maps = seen ? cfg.n_maps_seen : cfg.n_maps_unseen;
  const std::vector<std::string> names(landmark_words().begin(),
                                       landmark_words().begin() + cfg.landmark_vocab_size);

  const Lexicon lexicon = default_lexicon();

  Split split;
  split.name = name;
  const std::uint64_t split_tag = seen ? 1 : 2;
  for (int m = 0; m < maps; ++m) {
    split.graphs.push_back(generate_map(grid, pool, cfg, derive_seed(cfg.seed, {split_tag, 100, static_cast<std::uint64_t>(m)})));
    const auto& g = split.graphs.back();
    Rng rng(derive_seed(cfg.seed, {split_tag, 200, static_cast<std::uint64_t>(m)}));
    for (int e = 0; e < cfg.episodes_per_map; ++e) {
      NodeId start = 0, goal = 0;
      for (int attempt = 0;; ++attempt) {
        start = static_cast<NodeId>(uniform_index(rng, static_cast<std::size_t>(g.size())));
        goal = static_cast<NodeId>(uniform_index(rng, static_cast<std::size_t>(g.size())));
        const int h = g.hop_distance(start, goal);
        if (h >= cfg.min_hops && h <= cfg.max_hops) break;
        if (attempt > 10000) throw ConfigError("cannot sample an episode within the hop range");
      }
      EpisodeSpec ep;
      ep.id = (split_tag << 32) | static_cast<std::uint64_t>(m * cfg.episodes_per_map + e);
      ep.graph_id = m;
      ep.start = start;
      ep.goal = goal;
      ep.path = shortest_path(g, start, goal);
      ep.instruction = template_instruction(g, ep.path, names);
      if (!seen && cfg.unseen_paraphrase_prob > 0.0) {
        Rng para(derive_seed(cfg.seed, {split_tag, 300, ep.id}));
        for (auto& tok : ep.instruction.tokens) {
          const auto it = lexicon.find(tok);
          if (it != lexicon.end() && uniform01(para) < cfg.unseen_paraphrase_prob)
            tok = it->second[uniform_index(para, it->second.size())];
        }
      }
      split.episodes.push_back(std::move(ep));
    }
  }
  return split;
}

void write_split(const std::filesystem::path& dir, const Split& split) {
  std::filesystem::create_directories(dir / "graphs");
  for (std::size_t i = 0; i < split.graphs.size(); ++i) {
    std::ostringstream name;
    name << "graph_" << std::setw(3) << std::setfill('0') << i << ".json";
    split.graphs[i].save(dir / "graphs" / name.str());
  }
  std::ofstream out(dir / "episodes.jsonl");
  if (!out) throw std::runtime_error("cannot write " + (dir / "episodes.jsonl").string());
  for (const auto& ep : split.episodes) out << episode_to_json(ep).dump() << '\n';
}

Split read_split(const std::filesystem::path& dir, const std::string& name) {
  Split split;
  split.name = name;
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::exists(dir / "graphs")) throw std::runtime_error("missing graphs directory in " + dir.string());
  for (const auto& e : std::filesystem::directory_iterator(dir / "graphs"))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) split.graphs.push_back(NavGraph::load(f));
  std::ifstream in(dir / "episodes.jsonl");
  if (!in) throw std::runtime_error("cannot open " + (dir / "episodes.jsonl").string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    split.episodes.push_back(episode_from_json(nlohmann::json::parse(line), split.graphs));
  }
  return split;
}

namespace {

template <class T>
std::vector<T> take_subset(std::vector<T> items, std::size_t k, Rng& rng) {
  if (items.size() <= k) return items;
  std::vector<std::size_t> idx(items.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<T> out;
  for (auto i : idx) out.push_back(std::move(items[i]));
  return out;
}

}  // namespace

PreparedEpisode prepare_episode(const EpisodeSpec& ep, const NavGraph& graph, const Vocabulary& vocab,
                                const AugmenterConfig& aug, const PrepareConfig& cfg) {
  PreparedEpisode pe;
  pe.spec = &ep;
  pe.graph = &graph;
  pe.instr_ids = vocab.ids(ep.instruction.tokens);

  AugmenterConfig local = aug;
  local.rng_seed = derive_seed(aug.rng_seed, {ep.id, 1});
  for (auto method : {AugmentMethod::synonym, AugmentMethod::contextual, AugmentMethod::backtranslation}) {
    local.rng_seed = derive_seed(aug.rng_seed, {ep.id, 1, static_cast<std::uint64_t>(method)});
    const auto doc = augment_positive(ep.instruction, local, method);
    if (doc.provenance == Provenance::original_copy) continue;
    pe.positive_instr_ids.push_back(vocab.ids(doc.tokens));
  }
  for (int k = 0; k < cfg.intra_negative_instructions; ++k) {
    const auto neg = make_intra_negative(ep.instruction, derive_seed(aug.rng_seed, {ep.id, 2, static_cast<std::uint64_t>(k)}));
    pe.negative_instr_ids.push_back(vocab.ids(neg.tokens));
  }
  for (std::size_t s = 0; s < ep.instruction.span_count(); ++s)
    pe.span_ids.push_back(vocab.ids(ep.instruction.span_tokens(s)));

  const int h_gt = ep.path.hop();
  const auto alts = enumerate_alternatives(graph, ep.start, ep.goal, default_hop_cap(h_gt, cfg.alpha_n),
                                           cfg.enum_max_count, derive_seed(aug.rng_seed, {ep.id, 3}));
  auto part = partition_trajectories(alts, h_gt, cfg.alpha_p, cfg.alpha_n);
  Rng rng(derive_seed(aug.rng_seed, {ep.id, 4}));
  pe.positive_traj = take_subset(std::move(part.positives), cfg.max_positive_traj, rng);
  pe.negative_traj = take_subset(std::move(part.intra_negatives), cfg.max_negative_traj, rng);
  return pe;
}

std::vector<PreparedEpisode> prepare_split(const Split& split, const Vocabulary& vocab, const AugmenterConfig& aug,
                                           const PrepareConfig& cfg) {
  std::vector<PreparedEpisode> out;
  out.reserve(split.episodes.size());
  for (const auto& ep : split.episodes)
    out.push_back(prepare_episode(ep, split.graphs.at(static_cast<std::size_t>(ep.graph_id)), vocab, aug, cfg));
  return out;
}

Vocabulary build_vocabulary(const Split& split, const AugmenterConfig& aug) {
  std::vector<std::string> words;
  for (const auto& ep : split.episodes) words.insert(words.end(), ep.instruction.tokens.begin(), ep.instruction.tokens.end());
  for (const auto& [w, alts] : aug.synonym_lexicon) {
    words.push_back(w);
    words.insert(words.end(), alts.begin(), alts.end());
  }
  for (const auto& [from, to] : aug.normalization_table) {
    words.push_back(from);
    words.push_back(to);
  }
  return Vocabulary::build(words);
}

Lexicon default_lexicon() {
  return {
      {"walk", {"go", "move", "head"}},   {"go", {"walk", "head", "proceed"}}, {"turn", {"rotate", "veer"}},
      {"to", {"towards", "toward"}},      {"then", {"next", "afterwards"}},    {"sofa", {"couch"}},
      {"lamp", {"light"}},                {"bed", {"cot"}},                    {"sink", {"basin"}},
      {"stairs", {"staircase", "steps"}}, {"door", {"doorway"}},               {"plant", {"fern"}},
      {"fridge", {"refrigerator"}},       {"rug", {"carpet"}},                 {"fireplace", {"hearth"}},
      {"chair", {"seat"}},                {"shelf", {"bookcase"}},
  };
}

NormalizationTable default_normalization_table() {
  return {
      {"go", "walk"},   {"walk", "head"},  {"then", "next"},          {"sofa", "couch"}, {"lamp", "light"},
      {"rug", "carpet"}, {"fridge", "refrigerator"}, {"stairs", "staircase"}, {"turn", "rotate"},
  };
}

}  // namespace citl
