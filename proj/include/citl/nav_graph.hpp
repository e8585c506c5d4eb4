#pragma once

// Navigation environments: viewpoint graphs, trajectories on them, and the
// machinery that enumerates and partitions sub-optimal routes.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace citl {

using NodeId = int;
using Vec3 = std::array<double, 3>;

struct NavNode {
  NodeId id = 0;
  Vec3 pos{};
  int landmark = 0;
};

/// Immutable, connected, undirected viewpoint graph. Edge lengths are the
/// Euclidean distances between endpoint positions (meters).
class NavGraph {
 public:
  NavGraph(std::vector<NavNode> nodes, std::vector<std::pair<NodeId, NodeId>> edges);

  int size() const { return static_cast<int>(nodes_.size()); }
  const NavNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<NavNode>& nodes() const { return nodes_; }
  /// Sorted ascending.
  std::span<const NodeId> neighbors(NodeId id) const { return adjacency_.at(static_cast<std::size_t>(id)); }
  bool adjacent(NodeId a, NodeId b) const;
  double edge_length(NodeId a, NodeId b) const;
  /// Shortest metric distance along edges.
  double geodesic(NodeId a, NodeId b) const { return geodesic_[index(a, b)]; }
  /// Minimum number of edges between two nodes.
  int hop_distance(NodeId a, NodeId b) const { return hops_[index(a, b)]; }
  const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }
  bool valid_node(NodeId id) const { return id >= 0 && id < size(); }

  nlohmann::json to_json() const;
  static NavGraph from_json(const nlohmann::json& j);
  static NavGraph load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t index(NodeId a, NodeId b) const {
    return static_cast<std::size_t>(a) * nodes_.size() + static_cast<std::size_t>(b);
  }

  std::vector<NavNode> nodes_;
  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::vector<std::vector<NodeId>> adjacency_;
  std::vector<double> geodesic_;
  std::vector<int> hops_;
};

struct Trajectory {
  std::vector<NodeId> nodes;
  double length_m = 0.0;

  int hop() const { return static_cast<int>(nodes.size()) - 1; }
  NodeId start() const { return nodes.front(); }
  NodeId end() const { return nodes.back(); }
  bool operator==(const Trajectory& o) const { return nodes == o.nodes; }
};

/// Builds a trajectory, checking adjacency of consecutive nodes.
Trajectory make_trajectory(const NavGraph& graph, std::vector<NodeId> nodes);

/// Minimum-hop path; ties go to the shorter metric length, then to the
/// lexicographically smallest node sequence.
Trajectory shortest_path(const NavGraph& graph, NodeId start, NodeId goal);

/// Simple paths from start to goal with hop <= hop_cap, excluding the
/// shortest path. Exhaustive when at most max_count exist, otherwise a
/// uniform subsample drawn with seed. Output is in depth-first order with
/// neighbors visited ascending.
std::vector<Trajectory> enumerate_alternatives(const NavGraph& graph, NodeId start, NodeId goal, int hop_cap,
                                               std::size_t max_count, std::uint64_t seed);

/// ceil(alpha_n * h_gt) + 2: long enough that intra-negatives get sampled.
int default_hop_cap(int h_gt, double alpha_n);

struct TrajectoryPartition {
  std::vector<Trajectory> positives;
  std::vector<Trajectory> intra_negatives;
  std::vector<Trajectory> discarded;
};

/// Positives have hop <= alpha_p * h_gt, intra-negatives hop >= alpha_n * h_gt,
/// everything strictly between is discarded. Requires 2 > alpha_n > alpha_p > 1.
TrajectoryPartition partition_trajectories(std::span<const Trajectory> candidates, int h_gt, double alpha_p,
                                           double alpha_n);

void validate_partition_alphas(double alpha_p, double alpha_n);

}  // namespace citl
