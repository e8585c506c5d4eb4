// Self-verification suite run by `citl check`. Every check compares the
// library against a direct, independently written computation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "citl/agent.hpp"
#include "citl/contrast.hpp"
#include "citl/harness.hpp"
#include "citl/metrics.hpp"
#include "citl/rng.hpp"

namespace citl {

namespace {

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

std::vector<double> uniform_vec(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, lo, hi);
  return v;
}

double direct_circle(const std::vector<double>& sp, const std::vector<double>& sn, double m, double gamma) {
  if (sp.empty() || sn.empty()) return 0.0;
  double sum_n = 0.0, sum_p = 0.0;
  for (double s : sn) sum_n += std::exp(gamma * std::max(s + m, 0.0) * (s - m));
  for (double s : sp) sum_p += std::exp(-gamma * std::max(1.0 + m - s, 0.0) * (s - (1.0 - m)));
  return std::log(1.0 + sum_n * sum_p);
}

std::vector<ad::Var> leaves(ad::Tape& t, const std::vector<double>& xs) {
  std::vector<ad::Var> out;
  for (double x : xs) out.push_back(t.leaf(std::vector<double>{x}, 1));
  return out;
}

// Random connected graph with random integer-ish positions.
NavGraph random_graph(Rng& rng, int n, double extra_edge_prob) {
  std::vector<NavNode> nodes;
  std::set<std::array<int, 3>> used;
  while (static_cast<int>(nodes.size()) < n) {
    std::array<int, 3> c{static_cast<int>(uniform_index(rng, 6)), static_cast<int>(uniform_index(rng, 6)),
                         static_cast<int>(uniform_index(rng, 2))};
    if (!used.insert(c).second) continue;
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({id, {2.0 * c[0], 2.0 * c[1], 1.5 * c[2]}, static_cast<int>(uniform_index(rng, 4))});
  }
  std::set<std::pair<int, int>> edges;
  for (int v = 1; v < n; ++v) {
    const int u = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(v)));
    edges.insert({u, v});
  }
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (uniform01(rng) < extra_edge_prob) edges.insert({a, b});
  return NavGraph(std::move(nodes), {edges.begin(), edges.end()});
}

std::vector<std::vector<NodeId>> all_simple_paths(const NavGraph& g, NodeId s, NodeId t, int hop_cap) {
  std::vector<std::vector<NodeId>> out;
  std::vector<NodeId> path{s};
  std::vector<bool> on(static_cast<std::size_t>(g.size()), false);
  on[static_cast<std::size_t>(s)] = true;
  std::function<void(NodeId)> dfs = [&](NodeId u) {
    if (u == t) {
      out.push_back(path);
      return;
    }
    if (static_cast<int>(path.size()) - 1 >= hop_cap) return;
    for (NodeId v : g.neighbors(u)) {
      if (on[static_cast<std::size_t>(v)]) continue;
      on[static_cast<std::size_t>(v)] = true;
      path.push_back(v);
      dfs(v);
      path.pop_back();
      on[static_cast<std::size_t>(v)] = false;
    }
  };
  dfs(s);
  return out;
}

double path_length(const NavGraph& g, const std::vector<NodeId>& p) {
  double len = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) len += g.edge_length(p[i - 1], p[i]);
  return len;
}

CheckItem check_circle_hand() {
  ad::Tape t;
  const auto p = leaves(t, {0.6});
  const auto n = leaves(t, {0.4});
  const double v = circle_loss(t, p, n, MarginConfig{0.25, 1.0}).scalar();
  std::ostringstream d;
  d << "loss " << v;
  return {"circle_loss hand case", std::abs(v - 0.7955) < 5e-4, d.str()};
}

CheckItem check_circle_scalar(Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < 300; ++i) {
    const double m = uniform(rng, 0.05, 0.45), gamma = uniform(rng, 1.0, 32.0);
    const auto sp = uniform_vec(rng, 1 + uniform_index(rng, 4), -1.0, 1.0);
    const auto sn = uniform_vec(rng, 1 + uniform_index(rng, 6), -1.0, 1.0);
    ad::Tape t;
    const double got = circle_loss(t, leaves(t, sp), leaves(t, sn), MarginConfig{m, gamma}).scalar();
    const double want = direct_circle(sp, sn, m, gamma);
    worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
  }
  std::ostringstream d;
  d << "max rel err " << worst;
  return {"circle_loss scalar oracle", worst < 1e-9, d.str()};
}

CheckItem check_mining(Rng& rng) {
  int mismatches = 0;
  for (int i = 0; i < 500; ++i) {
    const double m = 0.25;
    const std::vector<double> grid{-0.5, 0.0, 0.25, 0.5, 0.75, 1.0};
    auto draw = [&](std::size_t n) {
      std::vector<double> v(n);
      for (auto& x : v) x = uniform01(rng) < 0.3 ? grid[uniform_index(rng, grid.size())] : uniform(rng, -1.0, 1.0);
      return v;
    };
    const auto sp = draw(1 + uniform_index(rng, 4));
    const auto sn = draw(1 + uniform_index(rng, 6));
    const auto mined = pair_mining(sp, sn, m);
    const double min_p = *std::min_element(sp.begin(), sp.end());
    std::vector<std::size_t> keep_n, keep_p;
    double max_n = -INFINITY;
    for (std::size_t j = 0; j < sn.size(); ++j)
      if (sn[j] < 1.0 - m && sn[j] > min_p - m) {
        keep_n.push_back(j);
        max_n = std::max(max_n, sn[j]);
      }
    if (!keep_n.empty())
      for (std::size_t j = 0; j < sp.size(); ++j)
        if (sp[j] < max_n + m) keep_p.push_back(j);
    if (mined.kept_negatives != keep_n || mined.kept_positives != keep_p || mined.anchor_skipped != keep_n.empty())
      ++mismatches;
  }
  return {"pair mining brute-force filter", mismatches == 0, std::to_string(mismatches) + " mismatches"};
}

CheckItem check_bank(Rng& rng) {
  int mismatches = 0;
  for (int seq = 0; seq < 300; ++seq) {
    const std::size_t cap = 1 + uniform_index(rng, 30);
    MemoryBank bank(cap);
    std::vector<std::uint64_t> sim;
    std::uint64_t next = 0;
    for (int step = 0; step < 20; ++step) {
      std::vector<EmbeddingRecord> batch(uniform_index(rng, 8));
      for (auto& r : batch) {
        r.vec = {1.0};
        r.source_id = next;
        sim.push_back(next++);
      }
      bank.push(batch);
      if (sim.size() > cap) sim.erase(sim.begin(), sim.end() - static_cast<std::ptrdiff_t>(cap));
      std::vector<std::uint64_t> got;
      for (const auto& e : bank.entries()) got.push_back(e.source_id);
      if (got != sim) ++mismatches;
    }
  }
  return {"memory bank FIFO simulation", mismatches == 0, std::to_string(mismatches) + " mismatches"};
}

CheckItem check_paths(Rng& rng) {
  int sp_bad = 0, enum_bad = 0, part_bad = 0;
  for (int i = 0; i < 60; ++i) {
    const auto g = random_graph(rng, 4 + static_cast<int>(uniform_index(rng, 7)), 0.25);
    const NodeId s = static_cast<NodeId>(uniform_index(rng, static_cast<std::size_t>(g.size())));
    NodeId t = static_cast<NodeId>(uniform_index(rng, static_cast<std::size_t>(g.size())));
    if (t == s) t = (s + 1) % g.size();
    const int h = g.hop_distance(s, t);
    const int cap = default_hop_cap(h, 1.4);
    auto paths = all_simple_paths(g, s, t, cap);
    // Best: fewest hops, then shortest length, then lexicographic.
    const auto best = *std::min_element(paths.begin(), paths.end(), [&](const auto& a, const auto& b) {
      if (a.size() != b.size()) return a.size() < b.size();
      const double la = path_length(g, a), lb = path_length(g, b);
      if (std::abs(la - lb) > 1e-9) return la < lb;
      return a < b;
    });
    const auto sp = shortest_path(g, s, t);
    if (sp.nodes != best) ++sp_bad;
    std::set<std::vector<NodeId>> want(paths.begin(), paths.end());
    want.erase(best);
    const auto alts = enumerate_alternatives(g, s, t, cap, 1u << 20, 1);
    std::set<std::vector<NodeId>> got;
    for (const auto& a : alts) got.insert(a.nodes);
    if (got != want) ++enum_bad;
    const auto part = partition_trajectories(alts, h, 1.2, 1.4);
    for (const auto& tr : part.positives)
      if (!(tr.hop() <= 1.2 * h + 1e-9)) ++part_bad;
    for (const auto& tr : part.intra_negatives)
      if (!(tr.hop() >= 1.4 * h - 1e-9)) ++part_bad;
    for (const auto& tr : part.discarded)
      if (!(tr.hop() > 1.2 * h + 1e-9 && tr.hop() < 1.4 * h - 1e-9)) ++part_bad;
    if (part.positives.size() + part.intra_negatives.size() + part.discarded.size() != alts.size()) ++part_bad;
  }
  std::ostringstream d;
  d << sp_bad << " shortest-path, " << enum_bad << " enumeration, " << part_bad << " partition mismatches";
  return {"trajectory enumeration and partition", sp_bad + enum_bad + part_bad == 0, d.str()};
}

CheckItem check_metrics(Rng& rng) {
  int bad = 0;
  double dtw_worst = 0.0;
  for (int i = 0; i < 60; ++i) {
    const auto g = random_graph(rng, 5 + static_cast<int>(uniform_index(rng, 6)), 0.3);
    auto walk = [&](std::size_t len) {
      std::vector<NodeId> p{static_cast<NodeId>(uniform_index(rng, static_cast<std::size_t>(g.size())))};
      for (std::size_t k = 1; k < len; ++k) {
        const auto nb = g.neighbors(p.back());
        p.push_back(nb[uniform_index(rng, nb.size())]);
      }
      return make_trajectory(g, p);
    };
    const auto ref = walk(2 + uniform_index(rng, 5));
    const auto pred = walk(1 + uniform_index(rng, 7));
    const auto self = evaluate_episode(g, ref, ref);
    if (std::abs(self.spl - self.sr) > 1e-12 || std::abs(self.ndtw - 1.0) > 1e-12) ++bad;
    const auto r = evaluate_episode(g, pred, ref);
    if (r.spl > r.sr + 1e-12) ++bad;
    const std::size_t n = ref.nodes.size(), m = pred.nodes.size();
    std::vector<std::vector<double>> d(n + 1, std::vector<double>(m + 1, INFINITY));
    d[0][0] = 0.0;
    for (std::size_t a = 1; a <= n; ++a)
      for (std::size_t b = 1; b <= m; ++b)
        d[a][b] = g.geodesic(ref.nodes[a - 1], pred.nodes[b - 1]) +
                  std::min({d[a - 1][b], d[a][b - 1], d[a - 1][b - 1]});
    dtw_worst = std::max(dtw_worst, std::abs(dtw_distance(g, ref.nodes, pred.nodes) - d[n][m]));
  }
  std::ostringstream d;
  d << bad << " identity violations, DTW max abs err " << dtw_worst;
  return {"metric identities and DTW oracle", bad == 0 && dtw_worst < 1e-9, d.str()};
}

double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); }

CheckItem check_loss_gradients(Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < 40; ++i) {
    const bool circle = i % 2 == 0;
    const auto sp = uniform_vec(rng, 1 + uniform_index(rng, 3), -0.9, 0.9);
    const auto sn = uniform_vec(rng, 1 + uniform_index(rng, 4), -0.9, 0.9);
    const MarginConfig mc{0.25, uniform(rng, 1.0, 8.0)};
    const auto f = [&](const std::vector<double>& p, const std::vector<double>& n) {
      ad::Tape t;
      return circle ? circle_loss(t, leaves(t, p), leaves(t, n), mc).scalar()
                    : info_nce_multi(t, leaves(t, p), leaves(t, n), 0.5).scalar();
    };
    ad::Tape t;
    const auto lp = leaves(t, sp), ln = leaves(t, sn);
    const auto loss = circle ? circle_loss(t, lp, ln, mc) : info_nce_multi(t, lp, ln, 0.5);
    t.backward(loss);
    const double h = 1e-5;
    for (std::size_t k = 0; k < sp.size() + sn.size(); ++k) {
      auto p1 = sp, p2 = sp, n1 = sn, n2 = sn;
      double analytic;
      if (k < sp.size()) {
        // Skip points next to the [.]_+ kink.
        if (circle && std::abs(1.0 + mc.m - sp[k]) < 1e-3) continue;
        p1[k] += h;
        p2[k] -= h;
        analytic = lp[k].grad()[0];
      } else {
        const std::size_t j = k - sp.size();
        if (circle && std::abs(sn[j] + mc.m) < 1e-3) continue;
        n1[j] += h;
        n2[j] -= h;
        analytic = ln[j].grad()[0];
      }
      // Central differences carry roundoff of order eps * |L| / h.
      const double fd = (f(p1, n1) - f(p2, n2)) / (2 * h);
      worst = std::max(worst, std::abs(analytic - fd) /
                                  std::max({std::abs(analytic), std::abs(fd), 1e-6 * std::max(1.0, loss.scalar())}));
    }
  }
  std::ostringstream d;
  d << "max rel err " << worst;
  return {"contrastive loss gradients vs finite differences", worst < 1e-4, d.str()};
}

CheckItem check_composite_gradient(std::uint64_t seed) {
  GeneratorConfig gc;
  gc.seed = seed;
  gc.n_maps_seen = 1;
  gc.n_maps_unseen = 1;
  gc.grid_seen = 4;
  gc.episodes_per_map = 3;
  gc.min_hops = 2;
  gc.max_hops = 3;
  const Split split = generate_split("seen", gc);
  AugmenterConfig aug;
  aug.synonym_lexicon = default_lexicon();
  aug.normalization_table = default_normalization_table();
  aug.rng_seed = seed;
  const Vocabulary vocab = build_vocabulary(split, aug);
  const auto prepared = prepare_split(split, vocab, aug, PrepareConfig{});
  const ModelShape shape{6, vocab.size(), gc.landmark_vocab_size, 16};
  const auto params = EncoderParams::init(shape, seed, 0.5);

  TrainConfig cfg;
  cfg.margin.gamma = 4.0;
  cfg.lambda1_traj = 0.7;
  cfg.lambda2_instr = 0.5;
  cfg.lambda3_subinstr = 0.5;
  cfg.use_mining = false;
  cfg.use_bank = false;
  cfg.rollout.max_steps = 4;
  std::vector<const PreparedEpisode*> batch;
  for (const auto& p : prepared) batch.push_back(&p);
  FrozenAdvantages frozen;
  const LossClosure loss = [&](ad::Tape&, const ParamVars& pv) {
    Banks banks(cfg.bank_capacity);
    frozen.cursor = 0;
    return build_objective(pv, batch, banks, cfg, seed, &frozen).total;
  };
  const auto g = gradient(params, loss);
  frozen.replay = true;
  Rng rng(derive_seed(seed, {0xC0DE}));
  std::vector<std::size_t> coords;
  for (int i = 0; i < 40; ++i) coords.push_back(uniform_index(rng, params.size()));
  const auto fd = finite_difference_gradient(params, loss, 1e-5, coords);
  double worst = 0.0;
  for (std::size_t i = 0; i < coords.size(); ++i) worst = std::max(worst, rel_err(g.grad[coords[i]], fd[coords[i]]));
  std::ostringstream d;
  d << "max rel err " << worst << " over " << coords.size() << " coordinates";
  return {"composite objective gradient vs finite differences", worst < 1e-4, d.str()};
}

}  // namespace

std::vector<CheckItem> cmd_check(std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0xC4EC}));
  std::vector<CheckItem> out;
  out.push_back(check_circle_hand());
  out.push_back(check_circle_scalar(rng));
  out.push_back(check_mining(rng));
  out.push_back(check_bank(rng));
  out.push_back(check_paths(rng));
  out.push_back(check_metrics(rng));
  out.push_back(check_loss_gradients(rng));
  out.push_back(check_composite_gradient(seed));
  return out;
}

}  // namespace citl
