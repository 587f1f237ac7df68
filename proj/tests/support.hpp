// Fixtures and oracles shared by the unit tests and the acceptance runner.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdnroute/sdnroute.hpp"

namespace sdnroute::test {

inline std::filesystem::path source_dir() { return SDNROUTE_SOURCE_DIR; }

/// Random directed graph on 2..max_nodes nodes. Integer delays keep path sums
/// exact so cost comparisons need no tolerance.
inline Topology random_graph(std::uint64_t seed, std::size_t max_nodes = 8, double density = 0.35) {
  Rng rng(seed);
  const std::size_t n = 2 + rng.uniform_index(max_nodes - 1);
  std::vector<Node> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes.push_back({"n" + std::to_string(i), NodeRole::switch_, 0});
  std::vector<Link> links;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b && rng.uniform01() < density)
        links.push_back({node_id(a), node_id(b), static_cast<double>(1 + rng.uniform_index(10)), 0.0, 100.0});
  return Topology("random" + std::to_string(seed), std::move(nodes), std::move(links));
}

/// Brute-force reference: minimum (cost, node sequence) over every loop-free path.
inline std::optional<Path> brute_force_shortest(const Topology& t, NodeId s, NodeId d, PathMetric metric) {
  std::optional<Path> best;
  double best_cost = 0.0;
  for (const Path& p : enumerate_paths(t, s, d, t.node_count())) {
    const double c = path_cost(t, p, metric);
    if (!best || c < best_cost || (c == best_cost && p.nodes < best->nodes)) {
      best = p;
      best_cost = c;
    }
  }
  return best;
}

/// Checks shortest_path against the brute force for every ordered pair of
/// `graphs` random graphs. Returns the number of mismatches.
inline std::size_t shortest_path_mismatches(std::size_t graphs, std::uint64_t first_seed = 1) {
  std::size_t bad = 0;
  for (std::size_t g = 0; g < graphs; ++g) {
    const Topology t = random_graph(first_seed + g);
    for (auto metric : {PathMetric::hops, PathMetric::delay})
      for (std::size_t a = 0; a < t.node_count(); ++a)
        for (std::size_t b = 0; b < t.node_count(); ++b)
          if (shortest_path(t, node_id(a), node_id(b), metric) != brute_force_shortest(t, node_id(a), node_id(b), metric))
            ++bad;
  }
  return bad;
}

inline std::string chain_text() {
  return "sdnroute-topology 1\nname chain\n[nodes]\nA role=switch domain=0\nB role=switch domain=0\nC role=switch domain=0\n[links]\n"
         "A -> B delay_ms=2 loss_prob=0 bandwidth_mbps=10\n"
         "B -> C delay_ms=3 loss_prob=0.1 bandwidth_mbps=5\n";
}

/// S reaches D over A (short, clean), B (slow, lossy) or C (slowest); A-B and
/// B-C cross links add longer detours.
inline Topology five_node_testbed() {
  return parse_topology(
      "sdnroute-topology 1\nname testbed5\n[nodes]\n"
      "S role=switch domain=0\nA role=switch domain=0\nB role=switch domain=1\nC role=switch domain=1\n"
      "D role=switch domain=1\n[links]\n"
      "S <-> A delay_ms=5 loss_prob=0 bandwidth_mbps=100\n"
      "A <-> D delay_ms=5 loss_prob=0 bandwidth_mbps=100\n"
      "S <-> B delay_ms=20 loss_prob=0.2 bandwidth_mbps=100\n"
      "B <-> D delay_ms=20 loss_prob=0.2 bandwidth_mbps=100\n"
      "S <-> C delay_ms=30 loss_prob=0 bandwidth_mbps=100\n"
      "C <-> D delay_ms=30 loss_prob=0 bandwidth_mbps=100\n"
      "A <-> B delay_ms=1 loss_prob=0 bandwidth_mbps=100\n"
      "B <-> C delay_ms=1 loss_prob=0 bandwidth_mbps=100\n",
      "testbed5");
}

/// Path with the largest utility on an idle network, by exhaustive search.
inline Path utility_optimal_path(const Topology& t, NodeId s, NodeId d, const Flow& f, const RewardConfig& rc,
                                 const EpisodeContext& ctx) {
  const LinkState ls = make_link_state(t, ctx.netsim);
  std::optional<Path> best;
  double best_u = 0.0;
  for (const Path& p : enumerate_paths(t, s, d, t.node_count())) {
    const double u = utility(path_metrics(t, ls, p, f, ctx.netsim), rc.weights, ctx.norms, t.node_count());
    if (!best || u > best_u) {
      best = p;
      best_u = u;
    }
  }
  return *best;
}

struct ConvergenceTrial {
  Path chosen;
  Path optimal;
  bool converged() const { return chosen == optimal; }
};

/// Trains a single learner on S->D flows over the testbed, then asks the
/// masked-greedy policy for the S->D route.
inline ConvergenceTrial convergence_trial(std::uint64_t seed, std::size_t episodes) {
  const Topology t = five_node_testbed();
  TrainingSetup setup;
  setup.agent.epsilon.decay_steps = episodes;
  setup.traffic.kind = TrafficPattern::Kind::fixed_pairs;
  setup.traffic.pairs = {{t.require_node("S"), t.require_node("D")}};
  FLConfig fl;
  fl.rounds = 1;
  fl.node_count = 1;
  fl.episodes_per_round = episodes;
  const auto res = run_federated_training(t, setup, fl, seed);

  Flow f;
  f.src = t.require_node("S");
  f.dst = t.require_node("D");
  ConvergenceTrial trial;
  const LinkState idle = make_link_state(t, setup.context.netsim);
  trial.chosen = greedy_path(t, idle, f, res.final_weights, setup.context.norms).value_or(Path{});
  trial.optimal = utility_optimal_path(t, f.src, f.dst, f, setup.reward, setup.context);
  return trial;
}

inline Topology random_lossy_graph(std::uint64_t seed) {
  // an edgeless graph has no action space, so redraw
  Topology t = random_graph(seed, 7, 0.45);
  for (std::uint64_t k = 1; t.link_count() == 0; ++k) t = random_graph(seed + 1000 * k, 7, 0.45);
  Rng rng(seed + 77);
  auto links = t.links();
  for (auto& l : links) {
    l.loss_prob = rng.uniform(0.0, 0.3);
    l.bandwidth_mbps = rng.uniform(0.5, 5.0);
  }
  return t.with_links(links);
}

/// Runs randomized episodes (random weights, epsilon, masks and episode modes)
/// and counts steps whose reward disagrees with the step classification:
/// invalid, loop and timeout steps must carry the penalty, intermediate steps
/// 0, and the success step the utility recomputed here from PathMetrics.
/// Successful paths must also be valid src->dst paths.
inline std::size_t reward_conformance_violations(std::uint64_t graphs, std::size_t episodes_per_graph = 20) {
  std::size_t bad = 0;
  for (std::uint64_t seed = 1; seed <= graphs; ++seed) {
    const Topology t = random_lossy_graph(seed);
    AgentConfig cfg;
    cfg.training_mask = seed % 2 ? TrainingMask::none : TrainingMask::outgoing;
    cfg.mode = seed % 3 ? EpisodeMode::penalize_and_terminate : EpisodeMode::penalize_and_continue;
    RewardConfig rc;
    rc.penalty = -0.5 - static_cast<double>(seed % 4);
    EpisodeContext ctx;
    ctx.norms.delay_ms = 20.0;
    Rng rng(seed);
    const ModelWeights w = init_weights(routing_architecture(t, {8}), seed);
    for (std::size_t e = 0; e < episodes_per_graph; ++e) {
      Flow f;
      f.src = node_id(rng.uniform_index(t.node_count()));
      f.dst = node_id(rng.uniform_index(t.node_count()));
      f.demand_mbps = rng.uniform(0.5, 3.0);
      const auto [out, exps] = run_episode(t, LinkState(t), f, w, cfg, rc, rng.uniform01(), rng, ctx);
      if (out.rewards.size() != out.steps.size()) ++bad;
      for (std::size_t k = 0; k < std::min(out.rewards.size(), out.steps.size()); ++k) {
        double expect = rc.penalty;
        if (out.steps[k] == StepKind::intermediate) expect = 0.0;
        if (out.steps[k] == StepKind::success) {
          const PathMetrics m = path_metrics(t, LinkState(t), out.path, f, ctx.netsim);
          const double x = std::clamp(m.throughput_mbps / ctx.norms.throughput_mbps, 0.0, 1.0);
          const double d = std::clamp(m.delay_ms / ctx.norms.delay_ms, 0.0, 1.0);
          const double h = static_cast<double>(m.hops) / static_cast<double>(t.node_count() - 1);
          expect = x - d - m.loss_ratio - h;
          if (!out.success) ++bad;
        }
        if (!(std::abs(out.rewards[k] - expect) <= 1e-12)) ++bad;
      }
      if (out.success && (!is_valid_path(t, out.path) || out.path.nodes.front() != f.src || out.path.nodes.back() != f.dst))
        ++bad;
      for (std::size_t k = 0; k < exps.size(); ++k)
        if (exps[k].action >= t.link_count() || exps[k].done != (k + 1 == exps.size())) ++bad;
    }
  }
  return bad;
}

/// Two-state deterministic MDP with one-hot states. From s0, action 0 moves to
/// s1 with reward 0 and action 1 ends with 0.5; from s1, action 0 ends with 1
/// and action 1 ends with -1. With discount g the fixed point is
/// Q(s0) = (g, 0.5), Q(s1) = (1, -1).
inline std::vector<Experience> two_state_mdp() {
  Vector s0(2), s1(2);
  s0 << 1.0, 0.0;
  s1 << 0.0, 1.0;
  return {
      {s0, 0, 0.0, s1, false, {0, 1}},
      {s0, 1, 0.5, s0, true, {}},
      {s1, 0, 1.0, s1, true, {}},
      {s1, 1, -1.0, s1, true, {}},
  };
}

/// Trains a small net on the two-state MDP; returns the largest deviation of
/// the learned Q-values from the fixed point.
inline double two_state_mdp_error(std::uint64_t seed, double gamma = 0.9, std::size_t steps = 6000) {
  const auto batch = two_state_mdp();
  ModelWeights w = init_weights(Architecture::mlp({2, 16, 2}), seed);
  ModelWeights target = w;
  AgentConfig cfg;
  cfg.gamma = gamma;
  SgdOptimizer opt(0.02, 0.9);
  for (std::size_t k = 0; k < steps; ++k) {
    if (k % 50 == 0) target = w;
    train_on_batch(w, target, batch, cfg, opt);
  }
  const Vector q0 = forward(w, batch[0].state);
  const Vector q1 = forward(w, batch[2].state);
  return std::max({std::abs(q0(0) - gamma), std::abs(q0(1) - 0.5), std::abs(q1(0) - 1.0), std::abs(q1(1) + 1.0)});
}

/// Central-difference check of backward_batch on a random net with tanh hidden
/// layers. Returns the largest relative error over all parameters.
inline double gradient_check(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> sizes{2 + rng.uniform_index(4)};
  const std::size_t hidden = 1 + rng.uniform_index(2);
  for (std::size_t k = 0; k < hidden; ++k) sizes.push_back(2 + rng.uniform_index(5));
  sizes.push_back(1 + rng.uniform_index(4));
  ModelWeights w = init_weights(Architecture::mlp(sizes, Activation::tanh), seed);
  const Eigen::Index B = 3;
  Matrix x(static_cast<Eigen::Index>(sizes.front()), B), r(static_cast<Eigen::Index>(sizes.back()), B);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = rng.uniform(-1.0, 1.0);

  // L = sum(r .* f(x)), so dL/dy = r.
  auto loss = [&](const ModelWeights& m) { return (forward_batch(m, x).array() * r.array()).sum(); };
  const GradientSet g = backward_batch(w, x, r);
  const double h = 1e-6;
  double worst = 0.0;
  auto check = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = loss(w);
    param = keep - h;
    const double down = loss(w);
    param = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  };
  for (std::size_t k = 0; k < w.layers.size(); ++k) {
    for (Eigen::Index i = 0; i < w.layers[k].weight.size(); ++i)
      check(w.layers[k].weight.data()[i], g.layers[k].weight.data()[i]);
    for (Eigen::Index i = 0; i < w.layers[k].bias.size(); ++i)
      check(w.layers[k].bias.data()[i], g.layers[k].bias.data()[i]);
  }
  return worst;
}

inline std::vector<LocalUpdate> random_updates(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  const Architecture arch = Architecture::mlp({3, 4, 2});
  std::vector<LocalUpdate> out;
  for (std::size_t k = 0; k < n; ++k) {
    ModelWeights w = init_weights(arch, seed * 100 + k);
    for (auto& l : w.layers) {
      for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = rng.uniform(-5.0, 5.0);
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias.data()[i] = rng.uniform(-5.0, 5.0);
    }
    out.push_back({k, 1, std::move(w), 1 + rng.uniform_index(500)});
  }
  return out;
}

/// Elementwise reference mean, accumulated in long double.
inline ModelWeights reference_mean(const std::vector<LocalUpdate>& ups, AggregationWeighting weighting) {
  ModelWeights out = ups.front().weights;
  long double total = 0.0L;
  for (const auto& u : ups) total += weighting == AggregationWeighting::uniform ? 1.0L : static_cast<long double>(u.sample_count);
  for (std::size_t k = 0; k < out.layers.size(); ++k) {
    auto mix = [&](auto get) {
      return [&, get](Eigen::Index i) {
        long double s = 0.0L;
        for (const auto& u : ups) {
          const long double c = weighting == AggregationWeighting::uniform ? 1.0L : static_cast<long double>(u.sample_count);
          s += c * static_cast<long double>(get(u.weights.layers[k])[i]);
        }
        return static_cast<double>(s / total);
      };
    };
    auto wmix = mix([](const DenseLayer& l) { return l.weight.data(); });
    auto bmix = mix([](const DenseLayer& l) { return l.bias.data(); });
    for (Eigen::Index i = 0; i < out.layers[k].weight.size(); ++i) out.layers[k].weight.data()[i] = wmix(i);
    for (Eigen::Index i = 0; i < out.layers[k].bias.size(); ++i) out.layers[k].bias.data()[i] = bmix(i);
  }
  return out;
}

inline double max_abs_diff(const ModelWeights& a, const ModelWeights& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    m = std::max(m, (a.layers[k].weight - b.layers[k].weight).cwiseAbs().maxCoeff());
    m = std::max(m, (a.layers[k].bias - b.layers[k].bias).cwiseAbs().maxCoeff());
  }
  return m;
}

/// Every parameter of `w` lies within the elementwise range of the inputs.
inline bool within_input_range(const ModelWeights& w, const std::vector<LocalUpdate>& ups) {
  for (std::size_t k = 0; k < w.layers.size(); ++k) {
    auto check = [&](auto get, Eigen::Index n) {
      for (Eigen::Index i = 0; i < n; ++i) {
        double lo = get(ups.front().weights.layers[k])[i], hi = lo;
        for (const auto& u : ups) {
          lo = std::min(lo, get(u.weights.layers[k])[i]);
          hi = std::max(hi, get(u.weights.layers[k])[i]);
        }
        const double v = get(w.layers[k])[i];
        if (v < lo - 1e-12 || v > hi + 1e-12) return false;
      }
      return true;
    };
    if (!check([](const DenseLayer& l) { return l.weight.data(); }, w.layers[k].weight.size())) return false;
    if (!check([](const DenseLayer& l) { return l.bias.data(); }, w.layers[k].bias.size())) return false;
  }
  return true;
}

/// Small federated setup on abilene used by the synchrony checks.
inline TrainingSetup small_setup() {
  TrainingSetup s;
  s.agent.hidden = {16};
  s.agent.epsilon.decay_steps = 200;
  s.traffic.holding_slots = 2;
  return s;
}

/// Pearson chi-square statistic of observed counts against a uniform expectation.
inline double chi_square_uniform(const std::vector<std::size_t>& counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  const double e = static_cast<double>(total) / static_cast<double>(counts.size());
  double x2 = 0.0;
  for (auto c : counts) x2 += (static_cast<double>(c) - e) * (static_cast<double>(c) - e) / e;
  return x2;
}

}  // namespace sdnroute::test
