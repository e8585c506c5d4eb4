#include "citl/nav_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "citl/errors.hpp"
#include "citl/rng.hpp"

namespace citl {

namespace {

constexpr double kTieTolerance = 1e-9;

double euclid(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

NavGraph::NavGraph(std::vector<NavNode> nodes, std::vector<std::pair<NodeId, NodeId>> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  const auto n = nodes_.size();
  if (n == 0) throw std::invalid_argument("NavGraph: no nodes");
  std::sort(nodes_.begin(), nodes_.end(), [](const NavNode& a, const NavNode& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < n; ++i) {
    if (nodes_[i].id != static_cast<NodeId>(i))
      throw std::invalid_argument("NavGraph: node ids must be unique and dense in [0, N)");
  }

  adjacency_.assign(n, {});
  for (auto& [a, b] : edges_) {
    if (!valid_node(a) || !valid_node(b)) throw std::invalid_argument("NavGraph: edge endpoint out of range");
    if (a == b) throw std::invalid_argument("NavGraph: self-loop");
    if (a > b) std::swap(a, b);
    if (euclid(nodes_[static_cast<std::size_t>(a)].pos, nodes_[static_cast<std::size_t>(b)].pos) <= 0.0)
      throw std::invalid_argument("NavGraph: zero-length edge");
    adjacency_[static_cast<std::size_t>(a)].push_back(b);
    adjacency_[static_cast<std::size_t>(b)].push_back(a);
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
    throw std::invalid_argument("NavGraph: duplicate edge");
  for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());

  // All-pairs hop counts (BFS) and geodesics (Floyd-Warshall); maps are small.
  hops_.assign(n * n, -1);
  for (std::size_t s = 0; s < n; ++s) {
    std::deque<NodeId> queue{static_cast<NodeId>(s)};
    hops_[s * n + s] = 0;
    while (!queue.empty()) {
      const NodeId u = queue.front();
      queue.pop_front();
      for (NodeId v : adjacency_[static_cast<std::size_t>(u)]) {
        auto& h = hops_[s * n + static_cast<std::size_t>(v)];
        if (h < 0) {
          h = hops_[s * n + static_cast<std::size_t>(u)] + 1;
          queue.push_back(v);
        }
      }
    }
  }
  if (std::find(hops_.begin(), hops_.end(), -1) != hops_.end())
    throw std::invalid_argument("NavGraph: graph is not connected");

  const double inf = std::numeric_limits<double>::infinity();
  geodesic_.assign(n * n, inf);
  for (std::size_t i = 0; i < n; ++i) geodesic_[i * n + i] = 0.0;
  for (const auto& [a, b] : edges_) {
    const double len = edge_length(a, b);
    geodesic_[index(a, b)] = len;
    geodesic_[index(b, a)] = len;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      const double ik = geodesic_[i * n + k];
      if (ik == inf) continue;
      for (std::size_t j = 0; j < n; ++j) {
        const double cand = ik + geodesic_[k * n + j];
        if (cand < geodesic_[i * n + j]) geodesic_[i * n + j] = cand;
      }
    }
}

bool NavGraph::adjacent(NodeId a, NodeId b) const {
  if (!valid_node(a) || !valid_node(b)) return false;
  const auto adj = neighbors(a);
  return std::binary_search(adj.begin(), adj.end(), b);
}

double NavGraph::edge_length(NodeId a, NodeId b) const {
  return euclid(node(a).pos, node(b).pos);
}

nlohmann::json NavGraph::to_json() const {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const auto& nd : nodes_)
    j["nodes"].push_back({{"id", nd.id}, {"pos", {nd.pos[0], nd.pos[1], nd.pos[2]}}, {"landmark", nd.landmark}});
  j["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : edges_) j["edges"].push_back({a, b});
  return j;
}

NavGraph NavGraph::from_json(const nlohmann::json& j) {
  std::vector<NavNode> nodes;
  for (const auto& jn : j.at("nodes")) {
    NavNode nd;
    nd.id = jn.at("id").get<int>();
    const auto& p = jn.at("pos");
    if (p.size() != 3) throw std::invalid_argument("NavGraph: pos must have 3 components");
    nd.pos = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
    nd.landmark = jn.at("landmark").get<int>();
    nodes.push_back(nd);
  }
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (const auto& je : j.at("edges")) {
    if (je.size() != 2) throw std::invalid_argument("NavGraph: edge must be a pair");
    edges.emplace_back(je[0].get<int>(), je[1].get<int>());
  }
  return NavGraph(std::move(nodes), std::move(edges));
}

NavGraph NavGraph::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file " + path.string());
  return from_json(nlohmann::json::parse(in));
}

void NavGraph::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write graph file " + path.string());
  out << to_json().dump() << '\n';
}

Trajectory make_trajectory(const NavGraph& graph, std::vector<NodeId> nodes) {
  if (nodes.empty()) throw std::invalid_argument("trajectory: empty node sequence");
  Trajectory t;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!graph.valid_node(nodes[i])) throw std::invalid_argument("trajectory: node out of range");
    if (i > 0) {
      if (!graph.adjacent(nodes[i - 1], nodes[i])) throw std::invalid_argument("trajectory: non-adjacent step");
      t.length_m += graph.edge_length(nodes[i - 1], nodes[i]);
    }
  }
  t.nodes = std::move(nodes);
  return t;
}

Trajectory shortest_path(const NavGraph& graph, NodeId start, NodeId goal) {
  if (!graph.valid_node(start) || !graph.valid_node(goal)) throw std::invalid_argument("shortest_path: bad node id");
  const int h = graph.hop_distance(start, goal);
  if (h < 0) throw std::runtime_error("disconnected");

  // Minimum metric length to the goal restricted to hop-optimal successors.
  const int n = graph.size();
  std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<NodeId> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](NodeId a, NodeId b) { return graph.hop_distance(a, goal) < graph.hop_distance(b, goal); });
  for (NodeId v : order) {
    const int hv = graph.hop_distance(v, goal);
    if (hv == 0) {
      best[static_cast<std::size_t>(v)] = 0.0;
      continue;
    }
    for (NodeId w : graph.neighbors(v))
      if (graph.hop_distance(w, goal) == hv - 1)
        best[static_cast<std::size_t>(v)] =
            std::min(best[static_cast<std::size_t>(v)], graph.edge_length(v, w) + best[static_cast<std::size_t>(w)]);
  }

  std::vector<NodeId> seq{start};
  NodeId cur = start;
  while (cur != goal) {
    const int hc = graph.hop_distance(cur, goal);
    NodeId next = -1;
    for (NodeId w : graph.neighbors(cur)) {  // ascending, so first match is lexicographically smallest
      if (graph.hop_distance(w, goal) != hc - 1) continue;
      const double via = graph.edge_length(cur, w) + best[static_cast<std::size_t>(w)];
      if (via <= best[static_cast<std::size_t>(cur)] + kTieTolerance) {
        next = w;
        break;
      }
    }
    if (next < 0) throw std::runtime_error("disconnected");
    seq.push_back(next);
    cur = next;
  }
  return make_trajectory(graph, std::move(seq));
}

std::vector<Trajectory> enumerate_alternatives(const NavGraph& graph, NodeId start, NodeId goal, int hop_cap,
                                               std::size_t max_count, std::uint64_t seed) {
  if (!graph.valid_node(start) || !graph.valid_node(goal)) throw std::invalid_argument("enumerate: bad node id");
  const Trajectory optimal = shortest_path(graph, start, goal);

  // Reservoir sampling over the depth-first stream keeps memory bounded and
  // yields an exhaustive result when the stream is short.
  Rng rng(seed);
  std::vector<std::pair<std::size_t, std::vector<NodeId>>> reservoir;
  std::size_t seen = 0;

  std::vector<NodeId> path{start};
  std::vector<char> on_path(static_cast<std::size_t>(graph.size()), 0);
  on_path[static_cast<std::size_t>(start)] = 1;

  auto emit = [&]() {
    if (path == optimal.nodes) return;
    if (reservoir.size() < max_count) {
      reservoir.emplace_back(seen, path);
    } else if (max_count > 0) {
      const std::size_t j = uniform_index(rng, seen + 1);
      if (j < max_count) reservoir[j] = {seen, path};
    }
    ++seen;
  };

  auto dfs = [&](auto&& self, NodeId u) -> void {
    if (u == goal) {
      emit();
      return;
    }
    const int depth = static_cast<int>(path.size()) - 1;
    for (NodeId v : graph.neighbors(u)) {
      if (on_path[static_cast<std::size_t>(v)]) continue;
      if (depth + 1 + graph.hop_distance(v, goal) > hop_cap) continue;
      on_path[static_cast<std::size_t>(v)] = 1;
      path.push_back(v);
      self(self, v);
      path.pop_back();
      on_path[static_cast<std::size_t>(v)] = 0;
    }
  };
  if (graph.hop_distance(start, goal) <= hop_cap) dfs(dfs, start);

  std::sort(reservoir.begin(), reservoir.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Trajectory> out;
  out.reserve(reservoir.size());
  for (auto& [_, nodes] : reservoir) out.push_back(make_trajectory(graph, std::move(nodes)));
  return out;
}

int default_hop_cap(int h_gt, double alpha_n) {
  return static_cast<int>(std::ceil(alpha_n * h_gt - 1e-9)) + 2;
}

void validate_partition_alphas(double alpha_p, double alpha_n) {
  if (!(2.0 > alpha_n && alpha_n > alpha_p && alpha_p > 1.0))
    throw ConfigError("trajectory partition requires 2 > alpha_n > alpha_p > 1");
}

TrajectoryPartition partition_trajectories(std::span<const Trajectory> candidates, int h_gt, double alpha_p,
                                           double alpha_n) {
  validate_partition_alphas(alpha_p, alpha_n);
  constexpr double tol = 1e-9;
  const double pos_bound = alpha_p * h_gt;
  const double neg_bound = alpha_n * h_gt;
  TrajectoryPartition out;
  for (const auto& t : candidates) {
    const double hop = t.hop();
    if (hop <= pos_bound + tol)
      out.positives.push_back(t);
    else if (hop >= neg_bound - tol)
      out.intra_negatives.push_back(t);
    else
      out.discarded.push_back(t);
  }
  return out;
}

}  // namespace citl
