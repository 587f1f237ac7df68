#pragma once

// Conventional routing baselines: static shortest-path routing and a
// loop-free random walk.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sdnroute/detail/rng.hpp"
#include "sdnroute/netsim.hpp"
#include "sdnroute/topology.hpp"

namespace sdnroute {

/// Dijkstra on the static topology; link state is ignored.
class SprPolicy : public RoutingPolicy {
 public:
  explicit SprPolicy(PathMetric metric = PathMetric::hops) : metric_(metric) {}

  std::string name() const override { return metric_ == PathMetric::hops ? "spr" : "spr-delay"; }

  std::optional<Path> route(const Topology& t, const LinkState&, const Flow& flow) override {
    return shortest_path(t, flow.src, flow.dst, metric_);
  }

  PathMetric metric() const { return metric_; }

 private:
  PathMetric metric_;
};

/// Uniform random walk over unvisited neighbours, at most |V|-1 hops.
class RandomWalkPolicy : public RoutingPolicy {
 public:
  explicit RandomWalkPolicy(std::uint64_t seed = 0) : rng_(seed) {}

  std::string name() const override { return "random"; }
  void reseed(std::uint64_t seed) override { rng_ = Rng(seed); }

  std::optional<Path> route(const Topology& t, const LinkState&, const Flow& flow) override {
    Path p{{flow.src}, {}};
    if (flow.src == flow.dst) return p;
    std::vector<bool> visited(t.node_count(), false);
    visited[idx(flow.src)] = true;
    NodeId cur = flow.src;
    std::vector<LinkId> choices;
    while (p.hops() + 1 < t.node_count()) {
      choices.clear();
      for (LinkId l : t.out_links(cur))
        if (!visited[idx(t.link(l).dst)]) choices.push_back(l);
      if (choices.empty()) return std::nullopt;
      const LinkId l = choices[rng_.uniform_index(choices.size())];
      cur = t.link(l).dst;
      visited[idx(cur)] = true;
      p.nodes.push_back(cur);
      p.links.push_back(l);
      if (cur == flow.dst) return p;
    }
    return std::nullopt;
  }

 private:
  Rng rng_;
};

inline std::unique_ptr<RoutingPolicy> spr_policy(PathMetric metric = PathMetric::hops) {
  return std::make_unique<SprPolicy>(metric);
}

inline std::unique_ptr<RoutingPolicy> random_policy(std::uint64_t seed) {
  return std::make_unique<RandomWalkPolicy>(seed);
}

}  // namespace sdnroute
