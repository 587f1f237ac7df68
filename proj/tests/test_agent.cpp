#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "support.hpp"

using namespace sdnroute;

namespace {

Flow make_flow(const Topology& t, const char* s, const char* d, double demand = 1.0) {
  Flow f;
  f.src = t.require_node(s);
  f.dst = t.require_node(d);
  f.demand_mbps = demand;
  return f;
}

// Linear net whose output ignores the state: q = bias.
ModelWeights constant_q(const Topology& t, std::vector<double> q) {
  ModelWeights w = init_weights(Architecture::mlp({state_size(t), t.link_count()}), 1);
  w.layers[0].weight.setZero();
  for (std::size_t i = 0; i < q.size(); ++i) w.layers[0].bias(static_cast<Eigen::Index>(i)) = q[i];
  return w;
}

}  // namespace

TEST(EncodeState, FeaturesAtBoundsAreOne) {
  const Topology t = inject_uniform_loss(parse_topology(test::chain_text()), 0.2);
  NormBounds nb;
  nb.delay_ms = 1.0;
  nb.loss = 0.2;
  nb.throughput_mbps = 1.0;
  const Vector s = encode_state(t, LinkState(t), t.require_node("A"), t.require_node("C"), nb);
  for (Eigen::Index i = 0; i < 3 * 2; ++i) EXPECT_DOUBLE_EQ(s(i), 1.0);
}

TEST(EncodeState, DirectScalingAndOneHots) {
  const Topology t = parse_topology(
      "sdnroute-topology 1\n[nodes]\nx role=switch domain=0\ny role=switch domain=0\n[links]\n"
      "x -> y delay_ms=5 loss_prob=0 bandwidth_mbps=4\n");
  NormBounds nb;
  nb.delay_ms = 10.0;
  nb.throughput_mbps = 8.0;
  const Vector s = encode_state(t, LinkState(t), t.require_node("y"), t.require_node("y"), nb);
  ASSERT_EQ(s.size(), 3 + 4);
  EXPECT_DOUBLE_EQ(s(0), 0.5);
  EXPECT_DOUBLE_EQ(s(1), 0.0);
  EXPECT_DOUBLE_EQ(s(2), 0.5);
  EXPECT_EQ(s(3), 0.0);
  EXPECT_EQ(s(4), 1.0);
  EXPECT_EQ(s(5), 0.0);
  EXPECT_EQ(s(6), 1.0);
  EXPECT_THROW(encode_state(t, LinkState(t), node_id(5), t.require_node("y"), nb), ValidationError);
}

TEST(EncodeState, RandomStatesKeepInvariants) {
  const Topology t = inject_uniform_loss(builtin_topology("abilene"), 0.1);
  Rng rng(3);
  LinkState s(t);
  for (int k = 0; k < 200; ++k) {
    const LinkId l = link_id(rng.uniform_index(t.link_count()));
    s.add_flow(static_cast<std::uint64_t>(k), {l}, rng.uniform(0.0, 30.0));
    observe_all(t, s);
    const NodeId a = node_id(rng.uniform_index(t.node_count())), b = node_id(rng.uniform_index(t.node_count()));
    const Vector v = encode_state(t, s, a, b, NormBounds{});
    ASSERT_EQ(static_cast<std::size_t>(v.size()), state_size(t));
    EXPECT_GE(v.minCoeff(), 0.0);
    EXPECT_LE(v.maxCoeff(), 1.0);
    const auto E = static_cast<Eigen::Index>(3 * t.link_count()), V = static_cast<Eigen::Index>(t.node_count());
    EXPECT_EQ(v.segment(E, V).sum(), 1.0);
    EXPECT_EQ(v.segment(E + V, V).sum(), 1.0);
    EXPECT_EQ(v(E + static_cast<Eigen::Index>(idx(a))), 1.0);
    EXPECT_EQ(v(E + V + static_cast<Eigen::Index>(idx(b))), 1.0);
  }
}

TEST(Utility, DirectEvaluation) {
  EXPECT_DOUBLE_EQ(utility(NormalizedMetrics{10, 2, 1, 3}, UtilityWeights{1, 1, 1, 1}), 4.0);
  EXPECT_DOUBLE_EQ(utility(NormalizedMetrics{0, 5, 0, 0}, UtilityWeights{0, 1, 0, 0}), -5.0);
  for (double h = 0.0; h < 1.0; h += 0.1)
    EXPECT_LT(utility(NormalizedMetrics{1, 0.2, 0.1, h + 0.1}, UtilityWeights{}),
              utility(NormalizedMetrics{1, 0.2, 0.1, h}, UtilityWeights{}));
}

TEST(Utility, NormalizesHopsByNodeCount) {
  PathMetrics m{50.0, 2.0, 0.25, 3};
  NormBounds nb;
  nb.throughput_mbps = 4.0;
  const double expect = 0.5 - 0.5 - 0.25 - 3.0 / 6.0;
  EXPECT_DOUBLE_EQ(utility(m, UtilityWeights{}, nb, 7), expect);
}

TEST(Reward, Classes) {
  RewardConfig rc;
  rc.penalty = -2.5;
  EXPECT_EQ(reward({StepKind::invalid_link, {}}, rc), -2.5);
  EXPECT_EQ(reward({StepKind::loop, {}}, rc), -2.5);
  EXPECT_EQ(reward({StepKind::timeout, {}}, rc), -2.5);
  EXPECT_EQ(reward({StepKind::intermediate, {}}, rc), 0.0);
  EXPECT_EQ(reward({StepKind::success, {10, 2, 1, 3}}, rc), 4.0);
  rc.penalty = 0.0;
  EXPECT_THROW(rc.validate(), ValidationError);
}

TEST(SelectAction, ArgmaxAndTieBreak) {
  Rng rng(1);
  const std::array<double, 3> q1{1, 5, 3}, q2{7, 7, 1};
  EXPECT_EQ(select_action(q1, {}, 0.0, rng), 1u);
  EXPECT_EQ(select_action(q2, {}, 0.0, rng), 0u);
  const std::array<bool, 3> mask{true, false, true};
  EXPECT_EQ(select_action(q1, mask, 0.0, rng), 2u);
  const std::array<bool, 3> none{false, false, false};
  EXPECT_THROW(select_action(q1, none, 0.0, rng), ValidationError);
  EXPECT_THROW(select_action(q1, std::span<const bool>(mask.data(), 2), 0.0, rng), DimensionError);
}

TEST(SelectAction, UniformExplorationPassesChiSquare) {
  Rng rng(2024);
  const std::array<double, 6> q{0, 9, 0, 0, 0, 0};
  const std::array<bool, 6> mask{true, true, false, true, true, false};
  std::vector<std::size_t> counts(6, 0);
  for (int i = 0; i < 10000; ++i) ++counts[select_action(q, mask, 1.0, rng)];
  EXPECT_EQ(counts[2], 0u);
  EXPECT_EQ(counts[5], 0u);
  const std::vector<std::size_t> valid{counts[0], counts[1], counts[3], counts[4]};
  for (auto c : valid) EXPECT_NEAR(static_cast<double>(c), 2500.0, 3.0 * std::sqrt(10000 * 0.25 * 0.75));
  EXPECT_LT(test::chi_square_uniform(valid), 3.0 + 3.0 * std::sqrt(6.0));
}

TEST(SelectAction, MaskedNeverPicksInvalid) {
  Rng rng(9);
  for (int trial = 0; trial < 2000; ++trial) {
    std::array<double, 8> q{};
    std::array<bool, 8> mask{};
    for (auto& v : q) v = rng.uniform(-1.0, 1.0);
    for (auto& m : mask) m = rng.uniform01() < 0.4;
    mask[rng.uniform_index(8)] = true;
    const auto a = select_action(q, mask, rng.uniform01(), rng);
    EXPECT_TRUE(mask[a]);
  }
}

TEST(Episode, ChainHandTrace) {
  const Topology t = parse_topology(test::chain_text());
  const Flow f = make_flow(t, "A", "C");
  Rng rng(1);
  const auto [out, exps] =
      run_episode(t, LinkState(t), f, init_weights(routing_architecture(t, {8}), 1), AgentConfig{}, RewardConfig{}, 0.0, rng);
  ASSERT_TRUE(out.success);
  EXPECT_EQ(out.path.hops(), 2u);
  // delay 5/100, loss 0.1, throughput ratio 1, hops 2/2
  const double u = 1.0 - 0.05 - 0.1 - 1.0;
  ASSERT_EQ(out.rewards.size(), 2u);
  EXPECT_EQ(out.rewards[0], 0.0);
  EXPECT_NEAR(out.rewards[1], u, 1e-15);
  ASSERT_EQ(exps.size(), 2u);
  EXPECT_FALSE(exps[0].done);
  EXPECT_TRUE(exps[1].done);
  EXPECT_EQ(exps[0].next_valid, (std::vector<std::uint32_t>{1}));
}

TEST(Episode, InvalidFirstActionTerminates) {
  const Topology t = parse_topology(test::chain_text());
  AgentConfig cfg;
  cfg.training_mask = TrainingMask::none;
  RewardConfig rc;
  rc.penalty = -3.0;
  Rng rng(1);
  const auto [out, exps] = run_episode(t, LinkState(t), make_flow(t, "A", "C"), constant_q(t, {0, 1}), cfg, rc, 0.0, rng);
  EXPECT_FALSE(out.success);
  EXPECT_EQ(out.rewards, (std::vector<double>{-3.0}));
  EXPECT_EQ(out.steps, (std::vector<StepKind>{StepKind::invalid_link}));
  ASSERT_EQ(exps.size(), 1u);
  EXPECT_TRUE(exps[0].done);
  EXPECT_EQ(out.terminal_value, -3.0);
}

TEST(Episode, MaskedWalkIntoDeadEndIsTerminalPenalty) {
  // B -> A: the only link out of B leads to C, which has no way out.
  const Topology t = parse_topology(test::chain_text());
  AgentConfig cfg;
  RewardConfig rc;
  rc.penalty = -2.0;
  Rng rng(1);
  const auto [out, exps] = run_episode(t, LinkState(t), make_flow(t, "B", "A"), constant_q(t, {0, 1}), cfg, rc, 0.0, rng);
  EXPECT_FALSE(out.success);
  EXPECT_EQ(out.rewards, (std::vector<double>{-2.0}));
  EXPECT_EQ(out.steps, (std::vector<StepKind>{StepKind::invalid_link}));
  ASSERT_EQ(exps.size(), 1u);
  EXPECT_TRUE(exps[0].done);
  EXPECT_EQ(exps[0].reward, -2.0);
  EXPECT_TRUE(exps[0].next_valid.empty());
}

TEST(Episode, InvalidActionCanContinue) {
  const Topology t = parse_topology(test::chain_text());
  AgentConfig cfg;
  cfg.training_mask = TrainingMask::none;
  cfg.mode = EpisodeMode::penalize_and_continue;
  Rng rng(1);
  const auto [out, exps] =
      run_episode(t, LinkState(t), make_flow(t, "A", "C"), constant_q(t, {0, 1}), cfg, RewardConfig{}, 0.0, rng);
  EXPECT_FALSE(out.success);
  ASSERT_EQ(exps.size(), cfg.step_limit(t));
  for (std::size_t k = 0; k < exps.size(); ++k) {
    EXPECT_EQ(exps[k].reward, -1.0);
    EXPECT_EQ(exps[k].done, k + 1 == exps.size());
  }
}

TEST(Episode, DegenerateFlowSucceedsImmediately) {
  const Topology t = parse_topology(test::chain_text());
  Rng rng(1);
  const auto [out, exps] = run_episode(t, LinkState(t), make_flow(t, "B", "B"),
                                       init_weights(routing_architecture(t, {4}), 1), AgentConfig{}, RewardConfig{}, 0.5, rng);
  EXPECT_TRUE(out.success);
  EXPECT_EQ(out.path.hops(), 0u);
  EXPECT_TRUE(exps.empty());
}

TEST(Episode, LoopIsPenalized) {
  const Topology t = parse_topology(
      "sdnroute-topology 1\n[nodes]\na role=switch domain=0\nb role=switch domain=0\nc role=switch domain=0\n[links]\n"
      "a <-> b delay_ms=1 loss_prob=0 bandwidth_mbps=10\nb -> c delay_ms=1 loss_prob=0 bandwidth_mbps=10\n");
  Rng rng(1);
  // Prefer a->b, then b->a (a loop), never b->c.
  const auto [out, exps] =
      run_episode(t, LinkState(t), make_flow(t, "a", "c"), constant_q(t, {2, 1, 0}), AgentConfig{}, RewardConfig{}, 0.0, rng);
  EXPECT_EQ(out.steps, (std::vector<StepKind>{StepKind::intermediate, StepKind::loop}));
  EXPECT_EQ(out.rewards.back(), -1.0);
  EXPECT_FALSE(out.success);
}

TEST(Episode, RewardsConformToDefinition) { EXPECT_EQ(test::reward_conformance_violations(60), 0u); }

TEST(Episode, GreedyIsDeterministic) {
  const Topology t = inject_uniform_loss(builtin_topology("abilene"), 0.1);
  const ModelWeights w = init_weights(routing_architecture(t, {16}), 4);
  AgentConfig cfg;
  cfg.training_mask = TrainingMask::none;
  const Flow f = make_flow(t, "ATLA", "SNVA");
  Rng r1(1), r2(99);
  const auto a = run_episode(t, LinkState(t), f, w, cfg, RewardConfig{}, 0.0, r1);
  const auto b = run_episode(t, LinkState(t), f, w, cfg, RewardConfig{}, 0.0, r2);
  EXPECT_EQ(a.first.rewards, b.first.rewards);
  EXPECT_EQ(a.first.path, b.first.path);
  ASSERT_EQ(a.second.size(), b.second.size());
  for (std::size_t k = 0; k < a.second.size(); ++k) EXPECT_EQ(a.second[k].action, b.second[k].action);
}

TEST(Utility, ArgmaxInvariantUnderWeightScaling) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const Topology t = test::random_lossy_graph(seed);
    const LinkState ls(t);
    Rng rng(seed);
    UtilityWeights w{rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2)};
    const double c = rng.uniform(0.1, 10.0);
    UtilityWeights wc{w.throughput * c, w.delay * c, w.loss * c, w.hops * c};
    NormBounds nb;
    nb.delay_ms = 30.0;
    Flow f;
    f.src = node_id(0);
    f.dst = node_id(t.node_count() - 1);
    f.demand_mbps = 2.0;
    auto argmax = [&](const UtilityWeights& uw) {
      std::optional<Path> best;
      double bu = 0.0;
      for (const auto& p : enumerate_paths(t, f.src, f.dst, t.node_count())) {
        const double u = utility(path_metrics(t, ls, p, f), uw, nb, t.node_count());
        if (!best || u > bu) {
          best = p;
          bu = u;
        }
      }
      return best;
    };
    EXPECT_EQ(argmax(w), argmax(wc)) << "seed " << seed;
  }
}

TEST(TrainOnBatch, TerminalTargetIsReward) {
  Vector s(2);
  s << 1.0, 0.0;
  const Experience e{s, 1, 0.75, s, true, {}};
  ModelWeights w = init_weights(Architecture::mlp({2, 2}), 3);
  const ModelWeights target = init_weights(Architecture::mlp({2, 2}), 4);
  const double q = forward(w, s)(1);
  AgentConfig cfg;
  SgdOptimizer opt(0.1);
  const double loss = train_on_batch(w, target, std::vector<Experience>{e}, cfg, opt);
  EXPECT_NEAR(loss, (q - 0.75) * (q - 0.75), 1e-15);
  EXPECT_LT(std::abs(forward(w, s)(1) - 0.75), std::abs(q - 0.75));
}

TEST(TrainOnBatch, ZeroDiscountIgnoresNextState) {
  Vector s(2), n(2);
  s << 1.0, 0.0;
  n << 0.0, 1.0;
  const std::vector<Experience> batch{{s, 0, 0.5, n, false, {0, 1}}, {n, 1, -0.25, s, false, {0}}};
  ModelWeights w = init_weights(Architecture::mlp({2, 2}), 3);
  const ModelWeights target = init_weights(Architecture::mlp({2, 2}), 8);
  const double e0 = forward(w, s)(0) - 0.5, e1 = forward(w, n)(1) + 0.25;
  AgentConfig cfg;
  cfg.gamma = 0.0;
  SgdOptimizer opt(0.1);
  EXPECT_NEAR(train_on_batch(w, target, batch, cfg, opt), (e0 * e0 + e1 * e1) / 2.0, 1e-15);
}

TEST(TrainOnBatch, BootstrapUsesMaxOverValidActions) {
  Vector s(2), n(2);
  s << 1.0, 0.0;
  n << 0.0, 1.0;
  ModelWeights w = init_weights(Architecture::mlp({2, 3}), 3);
  ModelWeights target = w;
  target.layers[0].weight.setZero();
  target.layers[0].bias << 5.0, 1.0, 2.0;
  AgentConfig cfg;
  cfg.gamma = 0.5;
  SgdOptimizer opt(0.1);
  const double q = forward(w, s)(0);
  const Experience masked{s, 0, 0.0, n, false, {1, 2}};
  ModelWeights w1 = w;
  EXPECT_NEAR(train_on_batch(w1, target, std::vector<Experience>{masked}, cfg, opt), (q - 1.0) * (q - 1.0), 1e-14);
  const Experience open{s, 0, 0.0, n, false, {}};
  ModelWeights w2 = w;
  EXPECT_NEAR(train_on_batch(w2, target, std::vector<Experience>{open}, cfg, opt), (q - 2.5) * (q - 2.5), 1e-14);
}

TEST(TrainOnBatch, ShapeErrors) {
  ModelWeights w = init_weights(Architecture::mlp({2, 2}), 3);
  SgdOptimizer opt(0.1);
  AgentConfig cfg;
  EXPECT_THROW(train_on_batch(w, w, std::vector<Experience>{}, cfg, opt), ValidationError);
  const Experience bad{Vector::Zero(3), 0, 0.0, Vector::Zero(3), true, {}};
  EXPECT_THROW(train_on_batch(w, w, std::vector<Experience>{bad}, cfg, opt), DimensionError);
  const Experience far{Vector::Zero(2), 7, 0.0, Vector::Zero(2), true, {}};
  EXPECT_THROW(train_on_batch(w, w, std::vector<Experience>{far}, cfg, opt), DimensionError);
}

TEST(TrainOnBatch, TwoStateFixedPoint) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) EXPECT_LT(test::two_state_mdp_error(seed), 1e-2);
}

TEST(Replay, RingOverwritesOldest) {
  ReplayBuffer buf(3);
  for (std::uint32_t a = 0; a < 5; ++a) buf.push({Vector::Zero(1), a, 0.0, Vector::Zero(1), true, {}});
  EXPECT_EQ(buf.size(), 3u);
  Rng rng(1);
  for (const Experience* e : buf.sample(50, rng)) EXPECT_GE(e->action, 2u);
  EXPECT_THROW(ReplayBuffer(0), ValidationError);
  ReplayBuffer empty(2);
  EXPECT_THROW(empty.sample(1, rng), ValidationError);
}

TEST(Learner, RejectsMismatchedWeights) {
  const Topology t = builtin_topology("abilene");
  EXPECT_THROW(DqnLearner(t, init_weights(Architecture::mlp({3, 2}), 1), AgentConfig{}, RewardConfig{}, EpisodeContext{}, 1),
               DimensionError);
}

TEST(Learner, GreedyPathsAreValid) {
  const Topology t = inject_uniform_loss(builtin_topology("abilene"), 0.1);
  const ModelWeights w = init_weights(routing_architecture(t, {16}), 5);
  const auto flows = generate_traffic(t, TrafficPattern{}, 3, 200);
  for (const auto& f : flows) {
    const auto p = greedy_path(t, LinkState(t), f, w, NormBounds{});
    if (!p) continue;
    EXPECT_TRUE(is_valid_path(t, *p));
    EXPECT_EQ(p->nodes.front(), f.src);
    EXPECT_EQ(p->nodes.back(), f.dst);
  }
}

TEST(Learner, ConvergesOnTestbed) {
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) hits += test::convergence_trial(seed, 2000).converged();
  EXPECT_GE(hits, 4);
}
