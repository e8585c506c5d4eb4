#include "citl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace citl {

NodeId teacher_action(const NavGraph& graph, NodeId current, NodeId goal) {
  if (current == goal) return kStop;
  return shortest_path(graph, current, goal).nodes[1];
}

namespace {

ad::Var feature_embedding(const ParamVars& p, std::vector<double> feature) {
  ad::Tape& tape = *p[Block::step_table].tape;
  const int n = static_cast<int>(feature.size());
  return ad::matvec_t(p[Block::step_table], tape.constant(std::move(feature), n, 1));
}

int sample_index(std::span<const double> logits, Rng& rng) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> w(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += (w[i] = std::exp(logits[i] - mx));
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(w.size()) - 1;
}

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

EpisodeTrace rollout(const ParamVars& p, const NavGraph& graph, const EpisodeSpec& episode,
                     std::span<const int> instr_ids, RolloutMode mode, const RolloutOptions& opts, Rng* rng) {
  if (mode == RolloutMode::sampled && rng == nullptr) throw std::invalid_argument("rollout: sampled mode needs an rng");
  if (!graph.valid_node(episode.start) || !graph.valid_node(episode.goal))
    throw std::invalid_argument("rollout: episode references invalid nodes");
  ad::Tape& tape = *p[Block::token_table].tape;
  const int lm = p.shape.landmark_count;
  const double index_scale = 1.0 / std::max(opts.max_steps, 1);

  ad::Var tokens = agent_tokens(p, instr_ids);
  ad::Var state = tape.constant(std::vector<double>(static_cast<std::size_t>(p.shape.dim), 0.0), p.shape.dim, 1);

  EpisodeTrace trace;
  std::vector<NodeId> visited{episode.start};
  NodeId cur = episode.start;
  for (int t = 0; t < opts.max_steps; ++t) {
    StepRecord step;
    step.node = cur;
    const auto nbrs = graph.neighbors(cur);
    step.candidates.assign(nbrs.begin(), nbrs.end());
    step.candidates.push_back(kStop);

    // The observation is the feature of the latest step of the visited path.
    ad::Var obs = feature_embedding(p, step_feature(graph, visited, visited.size() - 1, lm, index_scale));
    std::vector<ad::Var> cands;
    cands.reserve(step.candidates.size());
    for (NodeId c : nbrs) {
      visited.push_back(c);
      cands.push_back(feature_embedding(p, step_feature(graph, visited, visited.size() - 1, lm, index_scale)));
      visited.pop_back();
    }
    cands.push_back(p[Block::stop_vec]);

    auto out = attend_and_act(p, tokens, obs, state, cands);
    state = out.state;
    step.logits = out.logits;
    step.value = out.value;

    const NodeId teacher = teacher_action(graph, cur, episode.goal);
    step.teacher = static_cast<int>(std::find(step.candidates.begin(), step.candidates.end(), teacher) -
                                    step.candidates.begin());
    switch (mode) {
      case RolloutMode::teacher_forced: step.action = step.teacher; break;
      case RolloutMode::sampled: step.action = sample_index(out.logits.value(), *rng); break;
      case RolloutMode::greedy: step.action = argmax(out.logits.value()); break;
    }

    const NodeId chosen = step.candidates[static_cast<std::size_t>(step.action)];
    if (chosen == kStop) {
      const bool success = graph.geodesic(cur, episode.goal) <= opts.success_radius_m;
      step.reward = success ? opts.success_reward : opts.failure_reward;
      trace.steps.push_back(std::move(step));
      trace.terminated = true;
      break;
    }
    step.reward = graph.geodesic(cur, episode.goal) - graph.geodesic(chosen, episode.goal);
    trace.steps.push_back(std::move(step));
    cur = chosen;
    visited.push_back(cur);
  }
  trace.visited = std::move(visited);
  return trace;
}

ad::Var il_loss(ad::Tape& tape, const EpisodeTrace& trace) {
  if (trace.steps.empty()) return tape.scalar_constant(0.0);
  std::vector<ad::Var> terms;
  terms.reserve(trace.steps.size());
  for (const auto& s : trace.steps)
    terms.push_back(-ad::pick(ad::log_softmax(s.logits), static_cast<std::size_t>(s.teacher)));
  return ad::mean(ad::concat(terms));
}

std::vector<double> discounted_returns(std::span<const double> rewards, double discount) {
  std::vector<double> g(rewards.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + discount * acc;
    g[i] = acc;
  }
  return g;
}

ad::Var a2c_loss(ad::Tape& tape, const EpisodeTrace& trace, double discount, double value_coef,
                 FrozenAdvantages* frozen) {
  if (trace.steps.empty()) return tape.scalar_constant(0.0);
  std::vector<double> rewards;
  for (const auto& s : trace.steps) rewards.push_back(s.reward);
  const auto returns = discounted_returns(rewards, discount);

  std::vector<ad::Var> policy, value;
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const auto& s = trace.steps[t];
    double advantage = returns[t] - s.value.scalar();
    if (frozen && frozen->replay) {
      if (frozen->cursor >= frozen->values.size()) throw std::logic_error("frozen advantages exhausted");
      advantage = frozen->values[frozen->cursor++];
    } else if (frozen) {
      frozen->values.push_back(advantage);
    }
    ad::Var logp = ad::pick(ad::log_softmax(s.logits), static_cast<std::size_t>(s.action));
    policy.push_back((-advantage) * logp);
    ad::Var err = s.value + (-returns[t]);
    value.push_back(err * err);
  }
  return ad::sum(ad::concat(policy)) + value_coef * ad::sum(ad::concat(value));
}

Trajectory trace_trajectory(const NavGraph& graph, const EpisodeTrace& trace) {
  return make_trajectory(graph, trace.visited);
}

}  // namespace citl
