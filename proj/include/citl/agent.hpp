#pragma once

// Episode rollout of the toy instruction-following agent and the imitation
// and actor-critic losses over the recorded traces.

#include <optional>
#include <span>
#include <vector>

#include "citl/autodiff.hpp"
#include "citl/dataset.hpp"
#include "citl/encoder.hpp"
#include "citl/metrics.hpp"
#include "citl/nav_graph.hpp"
#include "citl/rng.hpp"

namespace citl {

/// Candidate id used for the STOP action.
inline constexpr NodeId kStop = -1;

enum class RolloutMode { teacher_forced, sampled, greedy };

struct RolloutOptions {
  int max_steps = 10;
  double success_radius_m = kDefaultSuccessRadius;
  double success_reward = 2.0;
  double failure_reward = -2.0;
};

struct StepRecord {
  NodeId node = 0;
  std::vector<NodeId> candidates;  // neighbours ascending, then kStop
  int action = 0;                  // index into candidates
  int teacher = 0;                 // index into candidates
  ad::Var logits;
  ad::Var value;
  double reward = 0.0;
};

struct EpisodeTrace {
  std::vector<StepRecord> steps;
  bool terminated = false;  // ended with STOP
  std::vector<NodeId> visited;
};

/// Next node on the shortest path to goal, or kStop at the goal.
NodeId teacher_action(const NavGraph& graph, NodeId current, NodeId goal);

/// Runs one episode on the tape that owns p. Sampled mode draws actions
/// from softmax(logits) with rng.
EpisodeTrace rollout(const ParamVars& p, const NavGraph& graph, const EpisodeSpec& episode,
                     std::span<const int> instr_ids, RolloutMode mode, const RolloutOptions& opts,
                     Rng* rng = nullptr);

/// Mean over steps of the cross-entropy of the teacher action.
ad::Var il_loss(ad::Tape& tape, const EpisodeTrace& trace);

/// Discounted returns-to-go G_t = r_t + discount * G_{t+1}.
std::vector<double> discounted_returns(std::span<const double> rewards, double discount);

/// Advantages recorded by one loss build and replayed by later builds, so a
/// finite-difference probe holds them constant exactly as the analytic
/// gradient does.
struct FrozenAdvantages {
  std::vector<double> values;
  bool replay = false;
  std::size_t cursor = 0;
};

/// -sum_t log pi(a_t) A_t + value_coef * sum_t (V(s_t) - G_t)^2 with
/// A_t = G_t - V(s_t) held constant.
ad::Var a2c_loss(ad::Tape& tape, const EpisodeTrace& trace, double discount, double value_coef = 0.5,
                 FrozenAdvantages* frozen = nullptr);

Trajectory trace_trajectory(const NavGraph& graph, const EpisodeTrace& trace);

}  // namespace citl
