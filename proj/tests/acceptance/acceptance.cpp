// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "citl/agent.hpp"
#include "citl/contrast.hpp"
#include "citl/dataset.hpp"
#include "citl/encoder.hpp"
#include "citl/harness.hpp"
#include "citl/metrics.hpp"
#include "citl/nav_graph.hpp"
#include "citl/run_config.hpp"
#include "citl/trainer.hpp"
#include "oracles.hpp"

using namespace citl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); }

std::vector<double> uniform_sims(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Small suite shared by the gradient and reduction checks.
struct Toy {
  Split split;
  Vocabulary vocab;
  AugmenterConfig aug;
  std::vector<PreparedEpisode> prepared;
  ModelShape shape;
};

const Toy& toy() {
  static const std::unique_ptr<Toy> t = [] {
    auto t = std::make_unique<Toy>();
    GeneratorConfig g;
    g.seed = 77;
    g.n_maps_seen = 4;
    g.grid_seen = 4;
    g.episodes_per_map = 4;
    g.min_hops = 2;
    g.max_hops = 4;
    t->split = generate_split("seen", g);
    t->aug.synonym_lexicon = default_lexicon();
    t->aug.normalization_table = default_normalization_table();
    t->aug.rng_seed = 77;
    t->vocab = build_vocabulary(t->split, t->aug);
    t->prepared = prepare_split(t->split, t->vocab, t->aug, PrepareConfig{});
    t->shape = {6, t->vocab.size(), g.landmark_vocab_size, 16};
    return t;
  }();
  return *t;
}

// ------------------------------------------------------------------ 1
Outcome circle_oracle() {
  std::mt19937_64 rng(101);
  const MarginConfig hand{0.25, 1.0};
  ad::Tape t;
  std::vector<ad::Var> p{t.scalar_constant(0.6)}, n{t.scalar_constant(0.4)};
  const double hand_value = circle_loss(t, p, n, hand).scalar();
  const bool hand_ok = std::abs(hand_value - 0.7955) < 5e-4 &&
                       std::abs(hand_value - oracle::circle({0.6}, {0.4}, 0.25, 1.0)) < 1e-12;

  std::uniform_real_distribution<double> mu(0.05, 0.95), gu(0.1, 64.0);
  std::uniform_int_distribution<int> dims(2, 8);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int d = dims(rng);
    auto unit = [&] {
      std::normal_distribution<double> nd;
      std::vector<double> v(static_cast<std::size_t>(d));
      double s = 0;
      for (auto& x : v) s += (x = nd(rng)) * x;
      for (auto& x : v) x /= std::sqrt(s);
      return EmbeddingRecord{v, Role::positive_p, 0, true};
    };
    const EmbeddingRecord q = unit();
    std::vector<EmbeddingRecord> P(1 + rng() % 5), N(rng() % 6);
    for (auto& e : P) e = unit();
    for (auto& e : N) e = unit();
    const MarginConfig mc{mu(rng), gu(rng)};
    std::vector<double> sp, sn;
    auto dot = [](const EmbeddingRecord& a, const EmbeddingRecord& b) {
      double s = 0;
      for (std::size_t k = 0; k < a.vec.size(); ++k) s += a.vec[k] * b.vec[k];
      return s;
    };
    for (const auto& e : P) sp.push_back(dot(q, e));
    for (const auto& e : N) sn.push_back(dot(q, e));
    worst = std::max(worst, std::abs(circle_loss(q, P, N, mc) - oracle::circle(sp, sn, mc.m, mc.gamma)));
  }
  std::ostringstream d;
  d << "hand case " << std::setprecision(6) << hand_value << ", max |diff| " << worst << " over 1000 instances";
  return {hand_ok && worst < 1e-9, d.str()};
}

// ------------------------------------------------------------------ 2
Outcome mining_oracle() {
  std::mt19937_64 rng(202);
  const std::vector<double> boundary{-0.25, 0.0, 0.25, 0.5, 0.75, 1.0, 0.6, 0.35};
  int mismatches = 0, boundary_instances = 0;
  for (int i = 0; i < 1000; ++i) {
    auto draw = [&](std::size_t n, bool& hit) {
      auto v = uniform_sims(rng, n);
      for (auto& x : v)
        if (rng() % 3 == 0) {
          x = boundary[rng() % boundary.size()];
          hit = true;
        }
      return v;
    };
    bool hit = false;
    const auto sp = draw(1 + rng() % 5, hit);
    auto sn = draw(1 + rng() % 7, hit);
    // Negatives exactly on the data-dependent bounds.
    if (i % 4 == 0) {
      sn.push_back(*std::min_element(sp.begin(), sp.end()) - 0.25);
      hit = true;
    }
    boundary_instances += hit;
    const auto got = pair_mining(sp, sn, 0.25);
    const auto want = oracle::mine(sp, sn, 0.25);
    const bool same = got.anchor_skipped == want.skipped &&
                      std::set<std::size_t>(got.kept_positives.begin(), got.kept_positives.end()) ==
                          std::set<std::size_t>(want.pos.begin(), want.pos.end()) &&
                      std::set<std::size_t>(got.kept_negatives.begin(), got.kept_negatives.end()) ==
                          std::set<std::size_t>(want.neg.begin(), want.neg.end()) &&
                      std::set<std::size_t>(got.discarded_false_negatives.begin(),
                                            got.discarded_false_negatives.end()) ==
                          std::set<std::size_t>(want.false_neg.begin(), want.false_neg.end());
    mismatches += !same;
  }
  std::ostringstream d;
  d << mismatches << " mismatches over 1000 instances (" << boundary_instances << " with boundary values)";
  return {mismatches == 0, d.str()};
}

// ------------------------------------------------------------------ 3
struct GradInstance {
  std::string term;
  double worst = 0.0;
};

double fd_worst(const EncoderParams& params, const LossClosure& loss, const std::function<void()>& before_fd,
                std::mt19937_64& rng) {
  const auto g = gradient(params, loss);
  before_fd();
  std::vector<std::size_t> coords;
  std::vector<std::size_t> nonzero;
  for (std::size_t i = 0; i < g.grad.size(); ++i)
    if (g.grad[i] != 0.0) nonzero.push_back(i);
  for (int k = 0; k < 6 && !nonzero.empty(); ++k) coords.push_back(nonzero[rng() % nonzero.size()]);
  for (int k = 0; k < 2; ++k) coords.push_back(rng() % params.size());
  const auto fd = finite_difference_gradient(params, loss, 1e-5, coords);
  double worst = 0.0;
  for (std::size_t c : coords) worst = std::max(worst, rel_err(g.grad[c], fd[c]));
  return worst;
}

Outcome gradient_checks() {
  const Toy& T = toy();
  std::mt19937_64 rng(303);
  std::vector<GradInstance> results;
  for (int i = 0; i < 120; ++i) {
    const auto params = EncoderParams::init(T.shape, 1000 + static_cast<std::uint64_t>(i), 0.5);
    const PreparedEpisode& ep = T.prepared[rng() % T.prepared.size()];
    const std::uint64_t seed = rng();
    GradInstance inst;
    switch (i % 4) {
      case 0: {
        inst.term = "circle";
        const MarginConfig mc{0.25, 1.0 + 7.0 * std::uniform_real_distribution<double>()(rng)};
        const LossClosure loss = [&](ad::Tape&, const ParamVars& p) {
          ad::Var q = encode_tokens(p, ep.instr_ids, Role::anchor_q);
          std::vector<ad::Var> sp, sn;
          for (const auto& ids : ep.positive_instr_ids) sp.push_back(ad::dot(q, encode_tokens(p, ids, Role::positive_p)));
          for (const auto& ids : ep.negative_instr_ids) sn.push_back(ad::dot(q, encode_tokens(p, ids, Role::negative_n)));
          for (const auto& tr : ep.negative_traj)
            sn.push_back(ad::dot(q, encode_trajectory(p, *ep.graph, tr, Role::negative_n)));
          return circle_loss(*q.tape, sp, sn, mc);
        };
        inst.worst = fd_worst(params, loss, [] {}, rng);
        break;
      }
      case 1: {
        inst.term = "imitation";
        RolloutOptions ro;
        ro.max_steps = 6;
        const LossClosure loss = [&](ad::Tape& t, const ParamVars& p) {
          return il_loss(t, rollout(p, *ep.graph, *ep.spec, ep.instr_ids, RolloutMode::teacher_forced, ro));
        };
        inst.worst = fd_worst(params, loss, [] {}, rng);
        break;
      }
      case 2: {
        inst.term = "actor-critic";
        RolloutOptions ro;
        ro.max_steps = 6;
        FrozenAdvantages frozen;
        const LossClosure loss = [&](ad::Tape& t, const ParamVars& p) {
          Rng r(seed);
          frozen.cursor = 0;
          return a2c_loss(t, rollout(p, *ep.graph, *ep.spec, ep.instr_ids, RolloutMode::sampled, ro, &r), 0.9, 0.5,
                          &frozen);
        };
        inst.worst = fd_worst(params, loss, [&] { frozen.replay = true; }, rng);
        break;
      }
      default: {
        inst.term = "composite";
        TrainConfig cfg;
        cfg.margin.gamma = 4.0;
        cfg.lambda1_traj = 0.7;
        cfg.lambda2_instr = 0.5;
        cfg.lambda3_subinstr = 0.5;
        cfg.rollout.max_steps = 5;
        // Alternate between a two-episode batch without bank and a single
        // episode against a pre-filled stale bank, with mining on.
        const bool with_bank = (i / 4) % 2 == 1;
        cfg.use_bank = with_bank;
        std::vector<const PreparedEpisode*> batch{&ep};
        if (!with_bank) batch.push_back(&T.prepared[rng() % T.prepared.size()]);
        Banks stale(cfg.bank_capacity);
        if (with_bank) {
          const auto old = EncoderParams::init(T.shape, seed, 0.5);
          for (std::size_t k = 0; k < 6; ++k) {
            const PreparedEpisode& o = T.prepared[(k * 5 + 1) % T.prepared.size()];
            const std::uint64_t src = 10000 + k;
            stale.traj.push(std::vector<EmbeddingRecord>{encode_trajectory(o.positive_traj.empty()
                                                                               ? o.spec->path
                                                                               : o.positive_traj[0],
                                                                           *o.graph, old, Role::positive_p, src)});
            InstructionDoc d;
            for (int id : o.instr_ids) d.tokens.push_back(T.vocab.words()[static_cast<std::size_t>(id)]);
            d.sub_spans = {{0, static_cast<int>(d.tokens.size())}};
            const auto rec = encode_instruction(d, T.vocab, old, Role::positive_p, src);
            stale.instr.push(std::vector<EmbeddingRecord>{rec});
            stale.sub_instr.push(std::vector<EmbeddingRecord>{rec});
          }
        }
        FrozenAdvantages frozen;
        const LossClosure loss = [&](ad::Tape&, const ParamVars& p) {
          Banks banks = stale;
          frozen.cursor = 0;
          return build_objective(p, batch, banks, cfg, seed, &frozen).total;
        };
        inst.worst = fd_worst(params, loss, [&] { frozen.replay = true; }, rng);
        break;
      }
    }
    results.push_back(inst);
  }
  std::map<std::string, double> per_term;
  double worst = 0.0;
  for (const auto& r : results) {
    per_term[r.term] = std::max(per_term[r.term], r.worst);
    worst = std::max(worst, r.worst);
  }
  std::ostringstream d;
  d << results.size() << " instances, max rel err";
  for (const auto& [k, v] : per_term) d << ' ' << k << '=' << std::setprecision(2) << v;
  return {worst < 1e-4 && results.size() >= 100, d.str()};
}

// ------------------------------------------------------------------ 4
Outcome trajectory_machinery() {
  std::mt19937_64 rng(404);
  int partition_bad = 0, path_bad = 0, candidates = 0;
  for (int i = 0; i < 200; ++i) {
    const int n = std::uniform_int_distribution<int>(3, 12)(rng);
    const NavGraph g = oracle::random_graph(rng, n, 0.3);
    const NodeId s = static_cast<NodeId>(rng() % static_cast<std::uint64_t>(n));
    NodeId t = static_cast<NodeId>(rng() % static_cast<std::uint64_t>(n));
    if (t == s) t = (s + 1) % n;
    const int h = oracle::bfs_hops(g, s, t);
    const Trajectory sp = shortest_path(g, s, t);
    if (sp.hop() != h || sp.nodes != oracle::best_path(g, s, t)) ++path_bad;

    const int cap = default_hop_cap(h, 1.4);
    const auto alts = enumerate_alternatives(g, s, t, cap, 1u << 20, 5);
    const auto part = partition_trajectories(alts, h, 1.2, 1.4);
    std::set<std::vector<NodeId>> want_pos, want_neg, want_gap, got_pos, got_neg, got_gap;
    for (const auto& p : oracle::simple_paths(g, s, t, cap)) {
      if (p == sp.nodes) continue;
      const int hop = static_cast<int>(p.size()) - 1;
      if (hop <= 1.2 * h + 1e-9)
        want_pos.insert(p);
      else if (hop >= 1.4 * h - 1e-9)
        want_neg.insert(p);
      else
        want_gap.insert(p);
    }
    for (const auto& x : part.positives) got_pos.insert(x.nodes);
    for (const auto& x : part.intra_negatives) got_neg.insert(x.nodes);
    for (const auto& x : part.discarded) got_gap.insert(x.nodes);
    candidates += static_cast<int>(alts.size());
    if (got_pos != want_pos || got_neg != want_neg || got_gap != want_gap) ++partition_bad;
  }
  std::ostringstream d;
  d << "200 graphs, " << candidates << " candidates: " << partition_bad << " partition mismatches, " << path_bad
    << " shortest-path mismatches";
  return {partition_bad == 0 && path_bad == 0, d.str()};
}

// ------------------------------------------------------------------ 5
Outcome memory_bank() {
  std::mt19937_64 rng(505);
  int mismatches = 0;
  double id = 0.0;
  for (int seq = 0; seq < 10000; ++seq) {
    MemoryBank bank(240);
    std::deque<double> sim;
    const int pushes = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < pushes; ++k) {
      std::vector<EmbeddingRecord> batch(rng() % 130);
      for (auto& e : batch) {
        e.vec = {id};
        e.detached = false;
        sim.push_back(id);
        id += 1.0;
      }
      bank.push(batch);
      while (sim.size() > 240) sim.pop_front();
    }
    bool ok = bank.size() == sim.size() && bank.size() <= 240;
    for (std::size_t i = 0; ok && i < sim.size(); ++i)
      ok = bank.entries()[i].vec[0] == sim[i] && bank.entries()[i].detached;
    mismatches += !ok;
  }

  // Bank entries encoded on the loss's own tape from a separate copy of the
  // parameters: the analytic gradient into that copy must vanish while a
  // finite-difference probe shows the entries do move the loss.
  const Toy& T = toy();
  const auto params = EncoderParams::init(T.shape, 55, 0.5);
  const PreparedEpisode& ep = T.prepared[0];
  ContrastOptions opts;
  opts.margin = {0.25, 4.0};
  opts.use_mining = false;
  auto build = [&](ad::Tape& tape, const ParamVars& live, const ParamVars& copy) {
    MemoryBank bank(240);
    for (std::size_t k = 1; k < 5; ++k) {
      const PreparedEpisode& o = T.prepared[k];
      ad::Var e = encode_trajectory(copy, *o.graph, o.spec->path, Role::positive_p);
      bank.push(std::vector<EmbeddingRecord>{EmbeddingRecord{e.value(), Role::positive_p, 100 + k, false}});
    }
    ad::Var q = encode_tokens(live, ep.instr_ids, Role::anchor_q);
    std::vector<ad::Var> pos{encode_trajectory(live, *ep.graph, ep.spec->path, Role::positive_p)};
    return assemble_loss(tape, LossKind::traj, q, pos, {}, bank, 1, opts).loss;
  };
  ad::Tape tape;
  const auto live = bind(tape, params, true);
  const auto copy = bind(tape, params, true);
  ad::Var loss = build(tape, live, copy);
  tape.backward(loss);
  const auto g_copy = collect_grad(copy, params);
  double analytic = 0.0;
  for (double v : g_copy) analytic = std::max(analytic, std::abs(v));
  const LossClosure via_copy = [&](ad::Tape& t, const ParamVars& c) {
    const auto l = bind(t, params, false);
    return build(t, l, c);
  };
  const auto fd = finite_difference_gradient(params, via_copy, 1e-5);
  double sensitivity = 0.0;
  for (double v : fd) sensitivity = std::max(sensitivity, std::abs(v));

  std::ostringstream d;
  d << mismatches << " FIFO mismatches over 10000 sequences; bank-path gradient max " << analytic
    << " (finite-difference sensitivity of the loss to bank contents " << std::setprecision(3) << sensitivity << ")";
  return {mismatches == 0 && analytic <= 1e-10 && sensitivity > 1e-8, d.str()};
}

// ------------------------------------------------------------------ 6
Outcome baseline_reduction() {
  const Toy& T = toy();
  TrainConfig cfg;
  cfg.lambda1_traj = cfg.lambda2_instr = cfg.lambda3_subinstr = 0.0;
  cfg.train_steps = 300;
  cfg.seed = 11;
  const auto a = train(T.shape, T.prepared, cfg, false);
  const auto b = train(T.shape, T.prepared, cfg, true);
  bool logs_equal = a.log.size() == b.log.size();
  for (std::size_t i = 0; logs_equal && i < a.log.size(); ++i) logs_equal = a.log[i].total == b.log[i].total;
  const bool same = a.params.flat() == b.params.flat();
  std::ostringstream d;
  d << cfg.train_steps << " steps: parameters " << (same ? "bit-identical" : "differ") << ", loss log "
    << (logs_equal ? "identical" : "differs");
  return {same && logs_equal, d.str()};
}

// ------------------------------------------------------------------ 7, 9
struct AblationOutcome {
  Outcome directional;
  Outcome report;
};

AblationOutcome ablation(const fs::path& data, const fs::path& work) {
  RunConfig cfg;
  cfg.data_dir = data;
  cfg.out_dir = work / "ablation";
  AblationOutcome out;
  const auto seen_n = read_split(data / "seen", "seen").graphs.size();
  const auto unseen_n = read_split(data / "unseen", "unseen").graphs.size();
  const auto matrix = default_ablation_matrix(cfg.train.lambda1_traj, cfg.train.lambda2_instr,
                                              cfg.train.lambda3_subinstr);
  AblationReport report;
  try {
    report = cmd_ablate(cfg, matrix, &std::cerr);
  } catch (const std::exception& e) {
    out.directional = {false, std::string("ablation failed: ") + e.what()};
    out.report = out.directional;
    return out;
  }

  const auto& full = report.row("full");
  const auto& base = report.row("baseline");
  std::ostringstream d;
  d << std::fixed << std::setprecision(3) << seen_n << "/" << unseen_n << " maps, " << cfg.ablation_seeds
    << " seeds, unseen SR full " << full.sr_mean << " vs baseline " << base.sr_mean;
  bool ok = full.sr_mean >= base.sr_mean;
  for (const char* single : {"traj_only", "instr_only", "subinstr_only"}) {
    const auto& r = report.row(single);
    const bool row_ok = full.sr_mean >= r.sr_mean - r.sr_se();
    d << "; " << single << " " << r.sr_mean << " (SE " << r.sr_se() << ")" << (row_ok ? "" : " !");
    ok = ok && row_ok;
  }
  d << "; " << std::setprecision(0) << report.seconds << " s";
  const bool fast = report.seconds < 1800.0;
  out.directional = {ok && fast && seen_n == 40 && unseen_n == 10, d.str()};

  std::ostringstream text;
  write_ablation_text(text, report);
  bool structure = report.rows.size() == matrix.rows.size();
  std::size_t t5 = 0, t6 = 0;
  for (const auto& r : report.rows) {
    structure = structure && r.runs.size() == static_cast<std::size_t>(cfg.ablation_seeds) &&
                text.str().find(r.row.name) != std::string::npos && std::isfinite(r.sr_std) &&
                std::isfinite(r.spl_std);
    (r.row.table == "table5" ? t5 : t6) += 1;
  }
  structure = structure && fs::exists(cfg.out_dir / "ablation.csv") && fs::exists(cfg.out_dir / "ablation.txt");
  std::ostringstream r;
  r << t5 << " loss/mining rows + " << t6 << " coarse/fine rows, mean +- stdev over " << cfg.ablation_seeds
    << " seeds, written to " << (cfg.out_dir / "ablation.txt").string();
  out.report = {structure, r.str()};
  std::cout << text.str();
  return out;
}

// ------------------------------------------------------------------ 8
Outcome metric_identities(const fs::path& data) {
  std::mt19937_64 rng(808);
  int identity_bad = 0, spl_bad = 0, episodes = 0;
  double dtw_worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int n = std::uniform_int_distribution<int>(2, 12)(rng);
    const NavGraph g = oracle::random_graph(rng, n, 0.25);
    auto walk = [&](int steps) {
      std::vector<NodeId> v{static_cast<NodeId>(rng() % static_cast<std::uint64_t>(n))};
      for (int k = 0; k < steps; ++k) {
        const auto nb = g.neighbors(v.back());
        v.push_back(nb[rng() % nb.size()]);
      }
      return make_trajectory(g, v);
    };
    const Trajectory a = walk(static_cast<int>(rng() % 8)), b = walk(static_cast<int>(rng() % 8));
    dtw_worst = std::max(dtw_worst, std::abs(dtw_distance(g, a.nodes, b.nodes) - oracle::dtw(g, a.nodes, b.nodes)));
    const auto same = evaluate_episode(g, a, a);
    if (same.spl != same.sr || same.sr != 1.0 || std::abs(same.ndtw - 1.0) > 1e-15) ++identity_bad;
    const auto m = evaluate_episode(g, b, a);
    spl_bad += m.spl > m.sr;
    ++episodes;
  }
  // Every greedy episode of an untrained agent on the unseen split.
  RunConfig cfg;
  cfg.data_dir = data;
  const auto ws = load_workspace(cfg);
  const auto params = EncoderParams::init(ws->shape, 3);
  for (const auto& m : evaluate(params, ws->unseen_prepared, cfg.train).episodes) {
    spl_bad += m.spl > m.sr;
    ++episodes;
  }
  std::ostringstream d;
  d << identity_bad << " identity failures, " << spl_bad << " SPL>SR over " << episodes << " episodes, DTW max |diff| "
    << dtw_worst << " on 100 pairs";
  return {identity_bad == 0 && spl_bad == 0 && dtw_worst < 1e-9, d.str()};
}

template <typename F>
auto timed(F&& f, double& seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = f();
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  fs::path work = fs::temp_directory_path() / "citl_acceptance";
  fs::path data;
  std::vector<int> only;
  app.add_option("--work", work, "scratch directory");
  app.add_option("--data", data, "bundled suite; generated into the scratch directory when absent");
  app.add_option("--only", only, "criterion numbers to run");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);
  if (data.empty() || !fs::exists(data / "seen")) {
    data = work / "suite";
    cmd_gen(RunConfig{}, data);
  }
  auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };

  bool all = true;
  auto report = [&](int k, const Outcome& o, double seconds, double limit) {
    const bool pass = o.pass && (limit <= 0 || seconds < limit);
    all = all && pass;
    std::cout << "CRITERION " << k << ": " << (pass ? "PASS" : "FAIL") << "  " << o.detail << "  [" << std::fixed
              << std::setprecision(2) << seconds << " s]" << std::endl;
  };
  double s = 0.0;
  if (wanted(1)) report(1, timed(circle_oracle, s), s, 5.0);
  if (wanted(2)) report(2, timed(mining_oracle, s), s, 5.0);
  if (wanted(3)) report(3, timed(gradient_checks, s), s, 60.0);
  if (wanted(4)) report(4, timed(trajectory_machinery, s), s, 30.0);
  if (wanted(5)) report(5, timed(memory_bank, s), s, 0.0);
  if (wanted(6)) report(6, timed(baseline_reduction, s), s, 0.0);
  if (wanted(8)) report(8, timed([&] { return metric_identities(data); }, s), s, 0.0);
  if (wanted(7) || wanted(9)) {
    const auto ab = timed([&] { return ablation(data, work); }, s);
    if (wanted(7)) report(7, ab.directional, s, 1800.0);
    if (wanted(9)) report(9, ab.report, s, 0.0);
  }
  return all ? 0 : 1;
}
