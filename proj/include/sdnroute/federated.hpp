#pragma once

// Federated DRL: every SDN controller is a learning node that trains a local
// DQN on its own traffic, and the root controller averages the local
// networks (FedAvg) into the next global network. Rounds are synchronous.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sdnroute/agent.hpp"
#include "sdnroute/detail/rng.hpp"
#include "sdnroute/errors.hpp"
#include "sdnroute/netsim.hpp"
#include "sdnroute/neural.hpp"
#include "sdnroute/topology.hpp"

namespace sdnroute {

enum class AggregationWeighting { uniform, by_sample_count };
enum class TrafficSplit { by_source_domain, round_robin };

struct FLConfig {
  std::size_t rounds = 10;
  std::size_t episodes_per_round = 200;
  std::size_t node_count = 2;
  AggregationWeighting weighting = AggregationWeighting::by_sample_count;
  TrafficSplit split = TrafficSplit::by_source_domain;
  /// Give every node the same RNG seed and the same traffic (replicated
  /// rather than split). Used to check aggregation of identical updates.
  bool identical_nodes = false;

  void validate() const {
    if (rounds < 1 || episodes_per_round < 1 || node_count < 1)
      throw ValidationError("rounds, episodes_per_round and node_count must be >= 1");
  }
};

struct LocalUpdate {
  std::size_t node = 0;
  std::size_t round = 0;
  ModelWeights weights;
  std::uint64_t sample_count = 0;
};

/// Elementwise weighted mean of the local networks.
inline ModelWeights fedavg(const std::vector<LocalUpdate>& updates, AggregationWeighting weighting) {
  if (updates.empty()) throw ValidationError("fedavg: no updates");
  const auto& ref = updates.front();
  for (const auto& u : updates) {
    if (!u.weights.compatible_with(ref.weights)) throw DimensionError("fedavg: incompatible architectures");
    if (u.round != ref.round) throw ValidationError("fedavg: updates from different rounds");
  }
  std::vector<double> coef(updates.size(), 1.0);
  if (weighting == AggregationWeighting::by_sample_count) {
    std::uint64_t total = 0;
    for (const auto& u : updates) total += u.sample_count;
    if (total > 0)
      for (std::size_t i = 0; i < updates.size(); ++i) coef[i] = static_cast<double>(updates[i].sample_count);
  }
  double denom = 0.0;
  for (double c : coef) denom += c;

  // Per-entry terms are summed in sorted order so the result does not depend
  // on the order of `updates`; the clamp keeps it inside the convex hull
  // despite rounding.
  ModelWeights out = ref.weights;
  std::vector<double> terms;
  terms.reserve(updates.size());
  auto reduce = [&](double* dst, Eigen::Index n, auto&& src_of) {
    for (Eigen::Index i = 0; i < n; ++i) {
      terms.clear();
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t u = 0; u < updates.size(); ++u) {
        if (coef[u] == 0.0) continue;
        const double v = src_of(u)[i];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        terms.push_back(coef[u] * v);
      }
      std::sort(terms.begin(), terms.end());
      double sum = 0.0;
      for (double x : terms) sum += x;
      dst[i] = std::clamp(sum / denom, lo, hi);
    }
  };
  for (std::size_t k = 0; k < out.layers.size(); ++k) {
    reduce(out.layers[k].weight.data(), out.layers[k].weight.size(),
           [&](std::size_t u) { return updates[u].weights.layers[k].weight.data(); });
    reduce(out.layers[k].bias.data(), out.layers[k].bias.size(),
           [&](std::size_t u) { return updates[u].weights.layers[k].bias.data(); });
  }
  return out;
}

/// Splits flows into `node_count` disjoint, order-preserving lists.
inline std::vector<std::vector<Flow>> partition_traffic(const std::vector<Flow>& flows, const Topology& t,
                                                        std::size_t node_count, TrafficSplit mode) {
  if (node_count < 1) throw ValidationError("partition_traffic: node_count must be >= 1");
  std::vector<std::vector<Flow>> out(node_count);
  if (mode == TrafficSplit::round_robin) {
    for (std::size_t i = 0; i < flows.size(); ++i) out[i % node_count].push_back(flows[i]);
    return out;
  }
  for (const Flow& f : flows) {
    const auto c = controller_of(t, f.src, static_cast<int>(node_count));
    if (!c) throw ValidationError("partition_traffic: source node '" + t.node(f.src).name + "' has no domain");
    out[static_cast<std::size_t>(*c)].push_back(f);
  }
  return out;
}

struct NodeRoundStats {
  std::size_t node = 0;
  std::size_t episodes = 0;
  std::uint64_t sample_count = 0;
  double mean_reward = 0.0;
  double success_ratio = 0.0;
  double mean_loss = 0.0;
  /// Digest of the node's weights after it received the round's global model.
  std::uint64_t synced_digest = 0;
};

struct RoundReport {
  std::size_t round = 0;
  ModelWeights global;
  std::uint64_t global_digest = 0;
  std::vector<NodeRoundStats> nodes;
};

/// Everything a learning node needs besides its traffic.
struct TrainingSetup {
  TrafficPattern traffic;
  AgentConfig agent;
  RewardConfig reward;
  EpisodeContext context;
};

struct FederatedResult {
  ModelWeights initial;
  ModelWeights final_weights;
  std::vector<RoundReport> reports;
  /// Weights each node holds after the final broadcast.
  std::vector<ModelWeights> node_weights;
};

enum class Execution { sequential, concurrent };

/// Runs `fl.rounds` synchronous rounds. Node k trains on the share of the
/// round's flows assigned to it, starting from the previous global model.
inline FederatedResult run_federated_training(const Topology& t, const TrainingSetup& setup, const FLConfig& fl,
                                              std::uint64_t seed, Execution exec = Execution::sequential,
                                              const std::function<void(const RoundReport&)>& on_round = {}) {
  fl.validate();
  setup.agent.validate();
  const auto arch = routing_architecture(t, setup.agent.hidden);
  FederatedResult res;
  res.initial = init_weights(arch, mix_seed(seed, 0));
  ModelWeights global = res.initial;

  std::vector<DqnLearner> nodes;
  nodes.reserve(fl.node_count);
  for (std::size_t k = 0; k < fl.node_count; ++k) {
    const auto node_seed = mix_seed(seed, fl.identical_nodes ? 1 : 1 + k);
    nodes.emplace_back(t, global, setup.agent, setup.reward, setup.context, node_seed);
  }

  const std::size_t per_round = fl.identical_nodes ? fl.episodes_per_round : fl.episodes_per_round * fl.node_count;
  for (std::size_t r = 1; r <= fl.rounds; ++r) {
    const auto flows = generate_traffic(t, setup.traffic, mix_seed(seed, 1000 + r), per_round, (r - 1) * per_round,
                                        (r - 1) * per_round);
    std::vector<std::vector<Flow>> shares =
        fl.identical_nodes ? std::vector<std::vector<Flow>>(fl.node_count, flows)
                           : partition_traffic(flows, t, fl.node_count, fl.split);

    std::vector<TrainingStats> stats(fl.node_count);
    auto work = [&](std::size_t k) {
      nodes[k].load_global(global);
      stats[k] = nodes[k].train(shares[k]);
    };
    if (exec == Execution::concurrent && fl.node_count > 1) {
      std::vector<std::exception_ptr> errors(fl.node_count);
      std::vector<std::thread> threads;
      for (std::size_t k = 0; k < fl.node_count; ++k)
        threads.emplace_back([&, k] {
          try {
            work(k);
          } catch (...) {
            errors[k] = std::current_exception();
          }
        });
      for (auto& th : threads) th.join();
      for (std::size_t k = 0; k < fl.node_count; ++k)
        if (errors[k]) std::rethrow_exception(errors[k]);
    } else {
      for (std::size_t k = 0; k < fl.node_count; ++k) work(k);
    }

    std::vector<LocalUpdate> updates;
    for (std::size_t k = 0; k < fl.node_count; ++k) {
      if (!nodes[k].weights().all_finite())
        throw DivergenceError("node " + std::to_string(k) + " diverged in round " + std::to_string(r));
      updates.push_back({k, r, nodes[k].weights(), stats[k].env_steps});
    }
    global = fedavg(updates, fl.weighting);

    RoundReport rep;
    rep.round = r;
    rep.global = global;
    rep.global_digest = weights_digest(global);
    for (std::size_t k = 0; k < fl.node_count; ++k) {
      nodes[k].load_global(global);
      rep.nodes.push_back({k, stats[k].episodes, stats[k].env_steps, stats[k].mean_reward(), stats[k].success_ratio(),
                           stats[k].mean_loss(), weights_digest(nodes[k].weights())});
    }
    if (on_round) on_round(rep);
    res.reports.push_back(std::move(rep));
  }
  res.final_weights = global;
  for (const auto& n : nodes) res.node_weights.push_back(n.weights());
  return res;
}

/// Aggregate quality of a set of routed flows. Delay and hop means cover
/// accepted flows only; throughput ratio, loss, and utility cover all flows,
/// with rejections counting as ratio 0, loss 1, utility = penalty.
struct PolicySummary {
  std::size_t flows = 0;
  std::size_t accepted = 0;
  double mean_delay_ms = 0.0;
  double mean_throughput_ratio = 0.0;
  double mean_loss_ratio = 0.0;
  double mean_hops = 0.0;
  double mean_utility = 0.0;

  bool empty() const { return flows == 0; }
  double success_ratio() const { return flows ? static_cast<double>(accepted) / static_cast<double>(flows) : 0.0; }
};

inline double flow_utility(const Topology& t, const FlowRecord& r, const RewardConfig& rc, const NormBounds& nb) {
  if (r.rejected()) return rc.penalty;
  return utility(r.metrics, rc.weights, nb, t.node_count());
}

inline double throughput_ratio(const FlowRecord& r) {
  return r.flow.demand_mbps > 0.0 ? std::clamp(r.metrics.throughput_mbps / r.flow.demand_mbps, 0.0, 1.0) : 0.0;
}

inline PolicySummary summarize(const Topology& t, const std::vector<FlowRecord>& records, const RewardConfig& rc,
                               const NormBounds& nb) {
  PolicySummary s;
  s.flows = records.size();
  if (records.empty()) return s;
  for (const auto& r : records) {
    s.mean_throughput_ratio += throughput_ratio(r);
    s.mean_loss_ratio += r.metrics.loss_ratio;
    s.mean_utility += flow_utility(t, r, rc, nb);
    if (r.rejected()) continue;
    ++s.accepted;
    s.mean_delay_ms += r.end_to_end_delay_ms();
    s.mean_hops += static_cast<double>(r.metrics.hops);
  }
  const double n = static_cast<double>(s.flows);
  s.mean_throughput_ratio /= n;
  s.mean_loss_ratio /= n;
  s.mean_utility /= n;
  if (s.accepted) {
    s.mean_delay_ms /= static_cast<double>(s.accepted);
    s.mean_hops /= static_cast<double>(s.accepted);
  }
  return s;
}

/// Masked-greedy inference of `w` over `eval_flows` through the simulator.
inline PolicySummary evaluate_policy(const Topology& t, const ModelWeights& w, const std::vector<Flow>& eval_flows,
                                     const RewardConfig& rc, const EpisodeContext& ctx = {},
                                     const ControllerModel& cm = {}) {
  GreedyValuePolicy policy("drl", w, ctx.norms);
  const auto records = run_slotted(t, eval_flows, policy, cm, 0, ctx.netsim);
  return summarize(t, records, rc, ctx.norms);
}

}  // namespace sdnroute
