#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "citl/agent.hpp"
#include "citl/dataset.hpp"
#include "citl/errors.hpp"
#include "citl/trainer.hpp"

using namespace citl;

namespace {

struct Toy {
  Split split;
  Vocabulary vocab;
  ModelShape shape;
  std::vector<PreparedEpisode> prepared;
};

// A few small maps with all augmentations materialised.
const Toy& toy() {
  static const std::unique_ptr<Toy> t = [] {
    auto t = std::make_unique<Toy>();
    GeneratorConfig g;
    g.n_maps_seen = 3;
    g.episodes_per_map = 4;
    g.grid_seen = 4;
    t->split = generate_split("seen", g);
    AugmenterConfig aug;
    aug.synonym_lexicon = default_lexicon();
    aug.normalization_table = default_normalization_table();
    t->vocab = build_vocabulary(t->split, aug);
    t->shape = {12, t->vocab.size(), g.landmark_vocab_size, 64};
    t->prepared = prepare_split(t->split, t->vocab, aug, PrepareConfig{});
    return t;
  }();
  return *t;
}

std::vector<const PreparedEpisode*> batch_of(std::size_t n) {
  std::vector<const PreparedEpisode*> b;
  for (std::size_t i = 0; i < n; ++i) b.push_back(&toy().prepared[i]);
  return b;
}

StepRecord fake_step(ad::Tape& t, std::vector<double> logits, double value, int action, double reward) {
  StepRecord s;
  const int k = static_cast<int>(logits.size());
  s.logits = t.constant(std::move(logits), k);
  s.value = t.scalar_constant(value);
  s.action = action;
  s.teacher = action;
  s.reward = reward;
  return s;
}

double log_softmax_at(const std::vector<double>& z, int i) {
  double s = 0.0;
  for (double x : z) s += std::exp(x);
  return z[static_cast<std::size_t>(i)] - std::log(s);
}

}  // namespace

TEST(Rollout, TeacherForcedFollowsShortestPath) {
  const auto& ep = toy().prepared[0];
  const auto params = EncoderParams::init(toy().shape, 1);
  ad::Tape t;
  const auto pv = bind(t, params, false);
  const auto trace = rollout(pv, *ep.graph, *ep.spec, ep.instr_ids, RolloutMode::teacher_forced, RolloutOptions{});
  const Trajectory ref = shortest_path(*ep.graph, ep.spec->start, ep.spec->goal);
  EXPECT_EQ(trace.visited, ref.nodes);
  EXPECT_TRUE(trace.terminated);
  EXPECT_EQ(trace.steps.size(), ref.nodes.size());
  EXPECT_EQ(trace.steps.back().reward, RolloutOptions{}.success_reward);

  EpisodeSpec at_goal = *ep.spec;
  at_goal.start = at_goal.goal;
  const auto one = rollout(pv, *ep.graph, at_goal, ep.instr_ids, RolloutMode::teacher_forced, RolloutOptions{});
  ASSERT_EQ(one.steps.size(), 1u);
  EXPECT_EQ(one.steps[0].candidates[static_cast<std::size_t>(one.steps[0].action)], kStop);
  EXPECT_THROW(rollout(pv, *ep.graph, *ep.spec, ep.instr_ids, RolloutMode::sampled, RolloutOptions{}),
               std::invalid_argument);
}

TEST(Losses, UniformLogitsGiveLogK) {
  ad::Tape t;
  EpisodeTrace trace;
  trace.steps.push_back(fake_step(t, {0.3, 0.3, 0.3, 0.3}, 0.0, 2, 0.0));
  EXPECT_NEAR(il_loss(t, trace).scalar(), std::log(4.0), 1e-14);
  EXPECT_EQ(il_loss(t, EpisodeTrace{}).scalar(), 0.0);
}

TEST(Losses, DiscountedReturns) {
  const std::vector<double> r{1.0, 0.0, 2.0};
  const auto g = discounted_returns(r, 0.9);
  EXPECT_NEAR(g[2], 2.0, 1e-15);
  EXPECT_NEAR(g[1], 0.0 + 0.9 * 2.0, 1e-15);
  EXPECT_NEAR(g[0], 1.0 + 0.9 * 1.8, 1e-15);
}

TEST(Losses, A2cHandCases) {
  {
    ad::Tape t;
    EpisodeTrace trace;
    trace.steps.push_back(fake_step(t, {0.1, -0.2}, 0.0, 1, 0.0));
    trace.steps.push_back(fake_step(t, {0.5, 0.0}, 0.0, 0, 0.0));
    EXPECT_EQ(a2c_loss(t, trace, 0.9).scalar(), 0.0);
  }
  {
    ad::Tape t;
    EpisodeTrace trace;
    const std::vector<double> z{0.4, -0.1, 0.2};
    trace.steps.push_back(fake_step(t, z, 0.0, 2, 1.0));
    EXPECT_NEAR(a2c_loss(t, trace, 0.3).scalar(), -log_softmax_at(z, 2) + 0.5 * 1.0, 1e-14);
  }
  {
    // Three steps: returns by hand, advantages G - V.
    ad::Tape t;
    EpisodeTrace trace;
    const std::vector<std::vector<double>> z{{0.2, 0.1}, {-0.3, 0.4, 0.0}, {0.0, 1.0}};
    const std::vector<double> v{0.5, -0.2, 1.0}, r{0.5, -1.0, 2.0};
    const std::vector<int> a{0, 1, 1};
    for (int i = 0; i < 3; ++i) trace.steps.push_back(fake_step(t, z[i], v[i], a[i], r[i]));
    const double g2 = 2.0, g1 = -1.0 + 0.8 * g2, g0 = 0.5 + 0.8 * g1;
    const double G[3] = {g0, g1, g2};
    double policy = 0.0, value = 0.0;
    for (int i = 0; i < 3; ++i) {
      policy -= log_softmax_at(z[i], a[i]) * (G[i] - v[i]);
      value += (v[i] - G[i]) * (v[i] - G[i]);
    }
    EXPECT_NEAR(a2c_loss(t, trace, 0.8, 0.5).scalar(), policy + 0.5 * value, 1e-13);
  }
}

TEST(Losses, AdvantageIsHeldConstant) {
  // d/dV of the loss comes from the value term only: 2 * coef * (V - G).
  ad::Tape t;
  EpisodeTrace trace;
  StepRecord s = fake_step(t, {0.1, 0.2}, 0.0, 0, 1.0);
  s.value = t.leaf(std::vector<double>{0.3}, 1);
  ad::Var v = s.value;
  trace.steps.push_back(s);
  t.backward(a2c_loss(t, trace, 0.9, 0.5));
  EXPECT_NEAR(v.grad()[0], 2 * 0.5 * (0.3 - 1.0), 1e-14);
}

TEST(TrainStep, BreakdownSumsToTotal) {
  TrainConfig cfg;
  EXPECT_EQ(cfg.lambda1_traj, 0.1);
  EXPECT_EQ(cfg.lambda2_instr, 0.01);
  EXPECT_EQ(cfg.lambda3_subinstr, 0.01);
  auto params = EncoderParams::init(toy().shape, 2);
  Banks banks(cfg.bank_capacity);
  const auto batch = batch_of(4);
  for (std::uint64_t step = 0; step < 5; ++step) {
    const auto r = train_step(batch, params, banks, cfg, step);
    EXPECT_NEAR(r.losses.total, r.losses.weighted_sum(cfg), 1e-12);
    EXPECT_GE(r.losses.ct, 0.0);
    EXPECT_TRUE(std::isfinite(r.grad_norm));
  }
  EXPECT_GT(banks.traj.size(), 0u);
  EXPECT_GT(banks.instr.size(), 0u);
  EXPECT_GT(banks.sub_instr.size(), 0u);
}

TEST(TrainStep, ZeroWeightsReduceToBaselineBitExactly) {
  TrainConfig cfg;
  cfg.lambda1_traj = cfg.lambda2_instr = cfg.lambda3_subinstr = 0.0;
  auto a = EncoderParams::init(toy().shape, 3);
  auto b = a;
  Banks banks(cfg.bank_capacity);
  const auto batch = batch_of(6);
  for (std::uint64_t step = 0; step < 10; ++step) {
    const auto ra = train_step(batch, a, banks, cfg, step);
    const auto rb = train_step_il_rl(batch, b, cfg, step);
    EXPECT_EQ(ra.losses.ct, 0.0);
    EXPECT_EQ(ra.losses.ci, 0.0);
    EXPECT_EQ(ra.losses.fi, 0.0);
    EXPECT_EQ(ra.losses.total, rb.losses.total);
  }
  EXPECT_EQ(a.flat(), b.flat());
  EXPECT_TRUE(banks.traj.empty());
}

TEST(TrainStep, DeterministicForFixedSeed) {
  TrainConfig cfg;
  auto a = EncoderParams::init(toy().shape, 4), b = a;
  Banks ba(cfg.bank_capacity), bb(cfg.bank_capacity);
  const auto batch = batch_of(4);
  for (std::uint64_t step = 0; step < 3; ++step) {
    train_step(batch, a, ba, cfg, step);
    train_step(batch, b, bb, cfg, step);
  }
  EXPECT_EQ(a.flat(), b.flat());
}

TEST(TrainStep, ImitationLossDecreasesOnFixedBatch) {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  auto params = EncoderParams::init(toy().shape, 5);
  Banks banks(cfg.bank_capacity);
  const auto batch = batch_of(4);
  double prev = std::numeric_limits<double>::infinity();
  for (std::uint64_t step = 0; step < 50; ++step) {
    const auto r = train_step(batch, params, banks, cfg, 0);
    EXPECT_LT(r.losses.il, prev) << "step " << step;
    prev = r.losses.il;
  }
}

TEST(TrainStep, NonFiniteLossLeavesParamsUntouched) {
  TrainConfig cfg;
  auto params = EncoderParams::init(toy().shape, 6);
  params.flat()[params.layout(Block::stop_vec).offset] = std::numeric_limits<double>::quiet_NaN();
  const auto before = params.flat();
  Banks banks(cfg.bank_capacity);
  EXPECT_THROW(train_step(batch_of(2), params, banks, cfg, 0), NonFiniteError);
  for (std::size_t i = 0; i < before.size(); ++i)
    if (!std::isnan(before[i])) EXPECT_EQ(params.flat()[i], before[i]);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.alpha_p = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.lambda2_instr = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Evaluate, TeacherPolicyIsPerfectAndRandomIsReproducible) {
  TrainConfig cfg;
  const auto params = EncoderParams::init(toy().shape, 7);
  const auto teacher = evaluate(params, toy().prepared, cfg, RolloutMode::teacher_forced);
  EXPECT_EQ(teacher.mean.sr, 1.0);
  EXPECT_DOUBLE_EQ(teacher.mean.spl, 1.0);
  EXPECT_EQ(teacher.episodes.size(), toy().prepared.size());
  const auto g1 = evaluate(params, toy().prepared, cfg);
  const auto g2 = evaluate(params, toy().prepared, cfg);
  EXPECT_EQ(g1.mean.sr, g2.mean.sr);
  EXPECT_EQ(g1.mean.ndtw, g2.mean.ndtw);
  for (const auto& m : g1.episodes) EXPECT_LE(m.spl, m.sr);
  std::ostringstream csv;
  write_eval_csv(csv, g1);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "TL,NE,SR,SPL,nDTW,CLS,SDTW");
}

TEST(Train, LogAndCallback) {
  TrainConfig cfg;
  cfg.train_steps = 5;
  cfg.batch_size = 3;
  std::size_t calls = 0;
  const auto run = train(toy().shape, toy().prepared, cfg, false,
                         [&](std::size_t, const LossBreakdown&, const EncoderParams&) { ++calls; });
  EXPECT_EQ(run.log.size(), 5u);
  EXPECT_EQ(calls, 5u);
  EXPECT_TRUE(run.params.all_finite());
  std::ostringstream log;
  write_train_log_header(log);
  EXPECT_NE(log.str().find("total"), std::string::npos);
  EXPECT_THROW(train(toy().shape, {}, cfg), ConfigError);
}
