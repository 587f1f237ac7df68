#pragma once

// Scenario files: JSON documents describing one study. Unknown keys are
// rejected so typos fail loudly instead of silently falling back to defaults.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdnroute/agent.hpp"
#include "sdnroute/builtin_topologies.hpp"
#include "sdnroute/errors.hpp"
#include "sdnroute/federated.hpp"
#include "sdnroute/netsim.hpp"
#include "sdnroute/topology.hpp"

namespace sdnroute {

enum class StudyKind { control, routing };

inline std::string to_string(StudyKind k) { return k == StudyKind::control ? "control" : "routing"; }

/// Persistent cross traffic on one link (both directions when bidirectional).
struct BackgroundLoad {
  std::string src;
  std::string dst;
  double mbps = 0.0;
  bool bidirectional = true;
};

struct TrafficSpec {
  TrafficPattern::Kind pattern = TrafficPattern::Kind::uniform;
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> sources;
  double demand_mbps = 1.0;
  std::uint64_t size_packets = 1000;
  std::uint64_t holding_slots = 0;
};

struct Scenario {
  std::string name;
  StudyKind study = StudyKind::routing;
  /// Builtin name or path to a topology file.
  std::string topology;
  std::optional<double> loss_injection;
  TrafficSpec traffic;
  std::vector<BackgroundLoad> background;
  std::vector<int> controller_counts = {1};
  ControllerModel controller;
  std::vector<std::string> policies = {"spr"};
  PathMetric spr_metric = PathMetric::hops;
  /// Control study: flows per source-destination pair and controller count.
  std::size_t samples_per_pair = 250;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  AgentConfig agent;
  RewardConfig reward;
  NormBounds norms;
  NetsimConfig netsim;
  /// Routing study: single-node DRL training budget.
  std::size_t drl_episodes = 5000;
  FLConfig fl;
  /// Routing study: held-out evaluation flows, identical for every seed.
  std::size_t eval_flows = 1000;
  std::uint64_t eval_seed = 999;

  /// Directory that relative topology paths resolve against.
  std::filesystem::path base_dir;

  void validate() const {
    if (name.empty()) throw ValidationError("scenario: name must not be empty");
    if (topology.empty()) throw ValidationError("scenario: topology must not be empty");
    if (policies.empty()) throw ValidationError("scenario: at least one policy required");
    if (seeds.empty()) throw ValidationError("scenario: at least one seed required");
    if (controller_counts.empty()) throw ValidationError("scenario: at least one controller count required");
    for (int c : controller_counts)
      if (c < 1) throw ValidationError("scenario: controller counts must be >= 1");
    if (loss_injection && !(*loss_injection >= 0.0 && *loss_injection <= 1.0))
      throw ValidationError("scenario: loss_injection must lie in [0,1]");
    for (const auto& p : policies)
      if (p != "spr" && p != "random" && p != "drl" && p != "fdrl")
        throw ValidationError("scenario: unknown policy '" + p + "'");
    if (study == StudyKind::control) {
      if (policies.size() != 1) throw ValidationError("scenario: control study takes exactly one policy");
      if (policies.front() == "drl" || policies.front() == "fdrl")
        throw ValidationError("scenario: control study needs a non-learning policy");
      if (traffic.pattern != TrafficPattern::Kind::fixed_pairs || traffic.pairs.empty())
        throw ValidationError("scenario: control study needs fixed_pairs traffic");
      if (samples_per_pair == 0) throw ValidationError("scenario: samples_per_pair must be >= 1");
    } else {
      if (eval_flows == 0) throw ValidationError("scenario: eval_flows must be >= 1");
      if (drl_episodes == 0) throw ValidationError("scenario: drl_episodes must be >= 1");
    }
    if (!(controller.service_rate_rps > 0.0)) throw ValidationError("scenario: service_rate_rps must be > 0");
    if (!(controller.offered_load_rps >= 0.0)) throw ValidationError("scenario: offered_load_rps must be >= 0");
    for (const auto& b : background)
      if (!(b.mbps >= 0.0)) throw ValidationError("scenario: background load must be >= 0");
    agent.validate();
    reward.validate();
    norms.validate();
    fl.validate();
  }
};

namespace detail {

using nlohmann::json;

inline void only_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ValidationError(std::string(where) + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (auto allowed : keys) known = known || k == allowed;
    if (!known) throw ValidationError(std::string(where) + ": unknown key '" + k + "'");
  }
}

template <class T>
void read(const json& j, std::string_view key, T& out, std::string_view where) {
  if (!j.contains(std::string(key))) return;
  try {
    out = j.at(std::string(key)).template get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string(where) + "." + std::string(key) + ": wrong type");
  }
}

inline void read_agent(const json& j, AgentConfig& a) {
  only_keys(j, "agent",
            {"gamma", "replay_capacity", "batch_size", "target_sync_steps", "learning_rate", "momentum", "max_steps",
             "mode", "training_mask", "hidden", "warmup", "train_every", "double_q", "epsilon"});
  read(j, "gamma", a.gamma, "agent");
  read(j, "replay_capacity", a.replay_capacity, "agent");
  read(j, "batch_size", a.batch_size, "agent");
  read(j, "target_sync_steps", a.target_sync_steps, "agent");
  read(j, "learning_rate", a.learning_rate, "agent");
  read(j, "momentum", a.momentum, "agent");
  read(j, "max_steps", a.max_steps, "agent");
  read(j, "hidden", a.hidden, "agent");
  read(j, "warmup", a.warmup, "agent");
  read(j, "train_every", a.train_every, "agent");
  read(j, "double_q", a.double_q, "agent");
  if (j.contains("mode")) {
    const auto m = j.at("mode").get<std::string>();
    if (m == "terminate") a.mode = EpisodeMode::penalize_and_terminate;
    else if (m == "continue") a.mode = EpisodeMode::penalize_and_continue;
    else throw ValidationError("agent.mode: expected 'terminate' or 'continue'");
  }
  if (j.contains("training_mask")) {
    const auto m = j.at("training_mask").get<std::string>();
    if (m == "outgoing") a.training_mask = TrainingMask::outgoing;
    else if (m == "none") a.training_mask = TrainingMask::none;
    else throw ValidationError("agent.training_mask: expected 'outgoing' or 'none'");
  }
  if (j.contains("epsilon")) {
    const auto& e = j.at("epsilon");
    only_keys(e, "agent.epsilon", {"start", "end", "decay_steps"});
    read(e, "start", a.epsilon.start, "agent.epsilon");
    read(e, "end", a.epsilon.end, "agent.epsilon");
    read(e, "decay_steps", a.epsilon.decay_steps, "agent.epsilon");
  }
}

inline void read_reward(const json& j, RewardConfig& r) {
  only_keys(j, "reward", {"penalty", "weights"});
  read(j, "penalty", r.penalty, "reward");
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    only_keys(w, "reward.weights", {"throughput", "delay", "loss", "hops"});
    read(w, "throughput", r.weights.throughput, "reward.weights");
    read(w, "delay", r.weights.delay, "reward.weights");
    read(w, "loss", r.weights.loss, "reward.weights");
    read(w, "hops", r.weights.hops, "reward.weights");
  }
}

inline void read_fl(const json& j, FLConfig& fl) {
  only_keys(j, "fl", {"rounds", "episodes_per_round", "node_count", "weighting", "split"});
  read(j, "rounds", fl.rounds, "fl");
  read(j, "episodes_per_round", fl.episodes_per_round, "fl");
  read(j, "node_count", fl.node_count, "fl");
  if (j.contains("weighting")) {
    const auto w = j.at("weighting").get<std::string>();
    if (w == "uniform") fl.weighting = AggregationWeighting::uniform;
    else if (w == "sample_count") fl.weighting = AggregationWeighting::by_sample_count;
    else throw ValidationError("fl.weighting: expected 'uniform' or 'sample_count'");
  }
  if (j.contains("split")) {
    const auto s = j.at("split").get<std::string>();
    if (s == "source_domain") fl.split = TrafficSplit::by_source_domain;
    else if (s == "round_robin") fl.split = TrafficSplit::round_robin;
    else throw ValidationError("fl.split: expected 'source_domain' or 'round_robin'");
  }
}

inline void read_traffic(const json& j, TrafficSpec& t) {
  only_keys(j, "traffic", {"pattern", "pairs", "sources", "demand_mbps", "size_packets", "holding_slots"});
  if (j.contains("pattern")) {
    const auto p = j.at("pattern").get<std::string>();
    if (p == "uniform") t.pattern = TrafficPattern::Kind::uniform;
    else if (p == "fixed_pairs") t.pattern = TrafficPattern::Kind::fixed_pairs;
    else throw ValidationError("traffic.pattern: expected 'uniform' or 'fixed_pairs'");
  }
  if (j.contains("pairs")) {
    for (const auto& p : j.at("pairs")) {
      if (!p.is_array() || p.size() != 2) throw ValidationError("traffic.pairs: each pair is [src, dst]");
      t.pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
    }
  }
  read(j, "sources", t.sources, "traffic");
  read(j, "demand_mbps", t.demand_mbps, "traffic");
  read(j, "size_packets", t.size_packets, "traffic");
  read(j, "holding_slots", t.holding_slots, "traffic");
}

}  // namespace detail

inline Scenario parse_scenario(std::string_view text, const std::string& origin = "<scenario>") {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  Scenario sc;
  try {
    detail::only_keys(j, origin,
                      {"name", "study", "topology", "loss_injection", "traffic", "background", "controller_counts",
                       "controller", "policies", "spr_metric", "samples_per_pair", "seeds", "agent", "reward", "norms",
                       "netsim", "drl_episodes", "fl", "eval"});
    detail::read(j, "name", sc.name, origin);
    if (j.contains("study")) {
      const auto s = j.at("study").get<std::string>();
      if (s == "control") sc.study = StudyKind::control;
      else if (s == "routing") sc.study = StudyKind::routing;
      else throw ValidationError(origin + ".study: expected 'control' or 'routing'");
    }
    detail::read(j, "topology", sc.topology, origin);
    if (j.contains("loss_injection") && !j.at("loss_injection").is_null())
      sc.loss_injection = j.at("loss_injection").get<double>();
    if (j.contains("traffic")) detail::read_traffic(j.at("traffic"), sc.traffic);
    if (j.contains("background")) {
      for (const auto& b : j.at("background")) {
        detail::only_keys(b, "background", {"src", "dst", "mbps", "bidirectional"});
        BackgroundLoad bl;
        detail::read(b, "src", bl.src, "background");
        detail::read(b, "dst", bl.dst, "background");
        detail::read(b, "mbps", bl.mbps, "background");
        detail::read(b, "bidirectional", bl.bidirectional, "background");
        sc.background.push_back(std::move(bl));
      }
    }
    detail::read(j, "controller_counts", sc.controller_counts, origin);
    if (j.contains("controller")) {
      const auto& c = j.at("controller");
      detail::only_keys(c, "controller", {"service_rate_rps", "offered_load_rps"});
      detail::read(c, "service_rate_rps", sc.controller.service_rate_rps, "controller");
      detail::read(c, "offered_load_rps", sc.controller.offered_load_rps, "controller");
    }
    detail::read(j, "policies", sc.policies, origin);
    if (j.contains("spr_metric")) {
      const auto m = j.at("spr_metric").get<std::string>();
      if (m == "hops") sc.spr_metric = PathMetric::hops;
      else if (m == "delay") sc.spr_metric = PathMetric::delay;
      else throw ValidationError(origin + ".spr_metric: expected 'hops' or 'delay'");
    }
    detail::read(j, "samples_per_pair", sc.samples_per_pair, origin);
    detail::read(j, "seeds", sc.seeds, origin);
    if (j.contains("agent")) detail::read_agent(j.at("agent"), sc.agent);
    if (j.contains("reward")) detail::read_reward(j.at("reward"), sc.reward);
    // Throughput is normalized by the flow demand unless stated otherwise.
    sc.norms.throughput_mbps = sc.traffic.demand_mbps;
    if (j.contains("norms")) {
      const auto& n = j.at("norms");
      detail::only_keys(n, "norms", {"delay_ms", "loss", "throughput_mbps"});
      detail::read(n, "delay_ms", sc.norms.delay_ms, "norms");
      detail::read(n, "loss", sc.norms.loss, "norms");
      detail::read(n, "throughput_mbps", sc.norms.throughput_mbps, "norms");
    }
    if (j.contains("netsim")) {
      const auto& n = j.at("netsim");
      detail::only_keys(n, "netsim", {"kappa", "max_utilization", "ewma_alpha"});
      detail::read(n, "kappa", sc.netsim.kappa, "netsim");
      detail::read(n, "max_utilization", sc.netsim.max_utilization, "netsim");
      detail::read(n, "ewma_alpha", sc.netsim.ewma_alpha, "netsim");
    }
    detail::read(j, "drl_episodes", sc.drl_episodes, origin);
    if (j.contains("fl")) detail::read_fl(j.at("fl"), sc.fl);
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      detail::only_keys(e, "eval", {"flows", "seed"});
      detail::read(e, "flows", sc.eval_flows, "eval");
      detail::read(e, "seed", sc.eval_seed, "eval");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(origin + ": " + e.what());
  }
  sc.validate();
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Scenario sc = parse_scenario(ss.str(), path.string());
  sc.base_dir = path.parent_path();
  return sc;
}

/// Resolves the scenario's topology (builtin name, or file relative to the
/// scenario) and applies its loss injection.
inline Topology scenario_topology(const Scenario& sc) {
  Topology t = [&] {
    if (is_builtin_topology(sc.topology)) return builtin_topology(sc.topology);
    std::filesystem::path p(sc.topology);
    if (p.is_relative() && !sc.base_dir.empty() && !std::filesystem::exists(p)) p = sc.base_dir / p;
    return load_topology(p);
  }();
  if (sc.loss_injection) t = inject_uniform_loss(t, *sc.loss_injection);
  return t;
}

inline TrafficPattern scenario_traffic(const Scenario& sc, const Topology& t) {
  TrafficPattern p;
  p.kind = sc.traffic.pattern;
  for (const auto& [s, d] : sc.traffic.pairs) p.pairs.emplace_back(t.require_node(s), t.require_node(d));
  for (const auto& s : sc.traffic.sources) p.sources.push_back(t.require_node(s));
  p.demand_mbps = sc.traffic.demand_mbps;
  p.size_packets = sc.traffic.size_packets;
  p.holding_slots = sc.traffic.holding_slots;
  return p;
}

/// Simulator settings including the scenario's cross traffic.
inline NetsimConfig scenario_netsim(const Scenario& sc, const Topology& t) {
  NetsimConfig cfg = sc.netsim;
  if (sc.background.empty()) return cfg;
  cfg.background_mbps.assign(t.link_count(), 0.0);
  auto put = [&](const std::string& a, const std::string& b, double mbps) {
    const auto l = t.find_link(t.require_node(a), t.require_node(b));
    if (!l) throw ValidationError("background: no link " + a + " -> " + b);
    cfg.background_mbps[idx(*l)] += mbps;
  };
  for (const auto& bl : sc.background) {
    put(bl.src, bl.dst, bl.mbps);
    if (bl.bidirectional) put(bl.dst, bl.src, bl.mbps);
  }
  return cfg;
}

}  // namespace sdnroute
