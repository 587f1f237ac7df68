#pragma once

// Slotted flow-level simulator. Flows arrive one per slot, are routed by a
// RoutingPolicy, hold bandwidth on their path for `holding_slots`, and are
// measured analytically: additive delay with a utilization-driven queuing
// factor, multiplicative delivery, bottleneck throughput.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "sdnroute/detail/rng.hpp"
#include "sdnroute/errors.hpp"
#include "sdnroute/topology.hpp"

namespace sdnroute {

struct Flow {
  std::uint64_t id = 0;
  NodeId src{};
  NodeId dst{};
  std::uint64_t arrival_slot = 0;
  double demand_mbps = 1.0;
  std::uint64_t size_packets = 1000;
  /// Slots the flow keeps its bandwidth after admission. 0 releases it before
  /// the next arrival.
  std::uint64_t holding_slots = 0;

  bool operator==(const Flow&) const = default;
};

struct PathMetrics {
  double delay_ms = 0.0;
  double throughput_mbps = 0.0;
  double loss_ratio = 0.0;
  std::size_t hops = 0;

  bool operator==(const PathMetrics&) const = default;
};

struct NetsimConfig {
  /// Queuing gain: link delay = delay_ms * (1 + kappa * u / (1 - u)).
  double kappa = 1.0;
  /// Utilization clamp applied before the queuing factor.
  double max_utilization = 0.95;
  /// Smoothing factor of the observed link statistics.
  double ewma_alpha = 0.3;
  /// Persistent cross traffic per link index; empty means none.
  std::vector<double> background_mbps;
};

/// Mutable per-run link bookkeeping. Loads are recomputed as an ordered sum
/// over active flows, so admitting then releasing a flow restores the
/// previous load bit for bit.
class LinkState {
 public:
  LinkState() = default;

  explicit LinkState(const Topology& t)
      : background_(t.link_count(), 0.0),
        load_(t.link_count(), 0.0),
        ewma_delay_(t.link_count()),
        ewma_loss_(t.link_count()),
        ewma_tp_(t.link_count()),
        active_on_link_(t.link_count()) {
    for (std::size_t i = 0; i < t.link_count(); ++i) {
      ewma_delay_[i] = t.links()[i].delay_ms;
      ewma_loss_[i] = t.links()[i].loss_prob;
      ewma_tp_[i] = t.links()[i].bandwidth_mbps;
    }
  }

  std::size_t link_count() const { return load_.size(); }
  double load_mbps(LinkId l) const { return load_.at(idx(l)); }
  double ewma_delay_ms(LinkId l) const { return ewma_delay_.at(idx(l)); }
  double ewma_loss(LinkId l) const { return ewma_loss_.at(idx(l)); }
  /// Smoothed throughput a new flow could obtain on the link (residual bandwidth).
  double ewma_throughput_mbps(LinkId l) const { return ewma_tp_.at(idx(l)); }
  std::size_t active_flow_count() const { return active_.size(); }
  bool is_active(std::uint64_t flow_id) const { return active_.count(flow_id) != 0; }

  /// Load not owned by any flow (cross traffic, test fixtures).
  void set_background_load(LinkId l, double mbps) {
    if (!(mbps >= 0.0)) throw ValidationError("background load must be >= 0");
    background_.at(idx(l)) = mbps;
    recompute(idx(l));
  }

  void add_flow(std::uint64_t flow_id, const std::vector<LinkId>& links, double mbps) {
    if (active_.count(flow_id)) throw ValidationError("flow " + std::to_string(flow_id) + " already active");
    active_.emplace(flow_id, ActiveFlow{links, mbps});
    for (LinkId l : links) {
      active_on_link_.at(idx(l)).push_back({flow_id, mbps});
      recompute(idx(l));
    }
  }

  /// Returns false when the flow was not active.
  bool remove_flow(std::uint64_t flow_id) {
    auto it = active_.find(flow_id);
    if (it == active_.end()) return false;
    for (LinkId l : it->second.links) {
      auto& v = active_on_link_[idx(l)];
      v.erase(std::remove_if(v.begin(), v.end(), [&](const auto& e) { return e.first == flow_id; }), v.end());
      recompute(idx(l));
    }
    active_.erase(it);
    return true;
  }

  void observe(LinkId l, double delay_ms, double loss, double available_mbps, double alpha) {
    const auto i = idx(l);
    ewma_delay_[i] = (1.0 - alpha) * ewma_delay_[i] + alpha * delay_ms;
    ewma_loss_[i] = (1.0 - alpha) * ewma_loss_[i] + alpha * loss;
    ewma_tp_[i] = (1.0 - alpha) * ewma_tp_[i] + alpha * available_mbps;
  }

  bool operator==(const LinkState&) const = default;

 private:
  struct ActiveFlow {
    std::vector<LinkId> links;
    double mbps = 0.0;
    bool operator==(const ActiveFlow&) const = default;
  };

  void recompute(std::size_t i) {
    double sum = background_[i];
    for (const auto& e : active_on_link_[i]) sum += e.second;
    load_[i] = sum;
  }

  std::vector<double> background_;
  std::vector<double> load_;
  std::vector<double> ewma_delay_;
  std::vector<double> ewma_loss_;
  std::vector<double> ewma_tp_;
  std::vector<std::vector<std::pair<std::uint64_t, double>>> active_on_link_;
  std::map<std::uint64_t, ActiveFlow> active_;
};

/// Current delay of one link under its carried load.
inline double link_delay_ms(const Topology& t, const LinkState& s, LinkId l, const NetsimConfig& cfg = {}) {
  const Link& link = t.link(l);
  const double u = std::clamp(s.load_mbps(l) / link.bandwidth_mbps, 0.0, cfg.max_utilization);
  return link.delay_ms * (1.0 + cfg.kappa * u / (1.0 - u));
}

inline double residual_mbps(const Topology& t, const LinkState& s, LinkId l) {
  return std::max(0.0, t.link(l).bandwidth_mbps - s.load_mbps(l));
}

/// Fresh link state carrying the configured cross traffic, with the observed
/// statistics seeded from the loaded network.
inline LinkState make_link_state(const Topology& t, const NetsimConfig& cfg = {}) {
  LinkState s(t);
  if (cfg.background_mbps.empty()) return s;
  if (cfg.background_mbps.size() != t.link_count())
    throw ValidationError("background load needs one entry per link");
  for (std::size_t i = 0; i < t.link_count(); ++i) s.set_background_load(link_id(i), cfg.background_mbps[i]);
  for (std::size_t i = 0; i < t.link_count(); ++i) {
    const LinkId l = link_id(i);
    s.observe(l, link_delay_ms(t, s, l, cfg), t.link(l).loss_prob, residual_mbps(t, s, l), 1.0);
  }
  return s;
}

/// Feeds the link's current delay, loss and residual bandwidth into its EWMA.
inline void observe_link(const Topology& t, LinkState& s, LinkId l, const NetsimConfig& cfg = {}) {
  s.observe(l, link_delay_ms(t, s, l, cfg), t.link(l).loss_prob, residual_mbps(t, s, l), cfg.ewma_alpha);
}

/// Metrics a flow would see on `p` in the current state, before admission.
inline PathMetrics path_metrics(const Topology& t, const LinkState& s, const Path& p, const Flow& flow,
                                const NetsimConfig& cfg = {}) {
  if (!is_valid_path(t, p)) throw ValidationError("path_metrics: invalid path");
  PathMetrics m;
  m.hops = p.hops();
  m.throughput_mbps = flow.demand_mbps;
  double delivered = 1.0;
  for (LinkId l : p.links) {
    m.delay_ms += link_delay_ms(t, s, l, cfg);
    delivered *= 1.0 - t.link(l).loss_prob;
    m.throughput_mbps = std::min(m.throughput_mbps, residual_mbps(t, s, l));
  }
  m.loss_ratio = std::clamp(1.0 - delivered, 0.0, 1.0);
  return m;
}

struct FlowOutcome {
  PathMetrics metrics;
  double delivered_packets = 0.0;
  double lost_packets = 0.0;
};

/// Measures the flow, then reserves its realized throughput on every link of
/// `p` and refreshes the observed statistics of those links.
inline FlowOutcome apply_flow(const Topology& t, LinkState& s, const Path& p, const Flow& flow,
                              const NetsimConfig& cfg = {}) {
  FlowOutcome out;
  out.metrics = path_metrics(t, s, p, flow, cfg);
  const double size = static_cast<double>(flow.size_packets);
  out.lost_packets = size * out.metrics.loss_ratio;
  out.delivered_packets = size - out.lost_packets;
  if (!p.links.empty()) s.add_flow(flow.id, p.links, out.metrics.throughput_mbps);
  for (LinkId l : p.links) observe_link(t, s, l, cfg);
  return out;
}

/// Periodic statistics sweep over every link.
inline void observe_all(const Topology& t, LinkState& s, const NetsimConfig& cfg = {}) {
  for (std::size_t i = 0; i < t.link_count(); ++i) observe_link(t, s, link_id(i), cfg);
}

// --- traffic ---------------------------------------------------------------

struct TrafficPattern {
  enum class Kind { uniform, fixed_pairs };
  Kind kind = Kind::uniform;
  /// fixed_pairs: cycled in order. uniform: ignored.
  std::vector<std::pair<NodeId, NodeId>> pairs;
  /// uniform: restricts sources to these nodes when non-empty.
  std::vector<NodeId> sources;
  double demand_mbps = 1.0;
  std::uint64_t size_packets = 1000;
  std::uint64_t holding_slots = 0;
};

/// Deterministic flow list; flow k arrives in slot `first_slot + k` and
/// carries id `first_id + k`.
inline std::vector<Flow> generate_traffic(const Topology& t, const TrafficPattern& pattern, std::uint64_t seed,
                                          std::size_t n_flows, std::uint64_t first_id = 0,
                                          std::uint64_t first_slot = 0) {
  if (!(pattern.demand_mbps > 0.0)) throw ValidationError("traffic demand must be > 0");
  if (pattern.size_packets == 0) throw ValidationError("traffic size must be > 0 packets");
  std::vector<Flow> out;
  out.reserve(n_flows);
  auto make = [&](std::size_t k, NodeId s, NodeId d) {
    return Flow{first_id + k, s, d, first_slot + k, pattern.demand_mbps, pattern.size_packets, pattern.holding_slots};
  };
  if (pattern.kind == TrafficPattern::Kind::fixed_pairs) {
    if (pattern.pairs.empty() && n_flows > 0) throw ValidationError("fixed-pair pattern without pairs");
    for (const auto& [s, d] : pattern.pairs) {
      if (!t.contains(s) || !t.contains(d)) throw ValidationError("traffic pattern references unknown node");
      if (s == d) throw ValidationError("traffic pair with identical endpoints");
    }
    for (std::size_t k = 0; k < n_flows; ++k) {
      const auto& [s, d] = pattern.pairs[k % pattern.pairs.size()];
      out.push_back(make(k, s, d));
    }
    return out;
  }
  const auto ends = t.endpoints();
  std::vector<NodeId> srcs = pattern.sources.empty() ? ends : pattern.sources;
  for (NodeId s : srcs)
    if (!t.contains(s)) throw ValidationError("traffic pattern references unknown node");
  if (n_flows == 0) return out;
  if (ends.size() < 2 || srcs.empty()) throw ValidationError("uniform traffic needs at least two endpoints");
  Rng rng(seed);
  for (std::size_t k = 0; k < n_flows; ++k) {
    const NodeId s = srcs[rng.uniform_index(srcs.size())];
    NodeId d = s;
    while (d == s) d = ends[rng.uniform_index(ends.size())];
    out.push_back(make(k, s, d));
  }
  return out;
}

// --- control plane -----------------------------------------------------------

struct ControllerModel {
  int controller_count = 1;
  /// Flow-setup requests one controller serves per second.
  double service_rate_rps = 1000.0;
  /// Network-wide flow-setup request rate, split evenly over controllers.
  double offered_load_rps = 500.0;
};

/// Mean M/M/1 sojourn time of one controller when the offered load is split
/// evenly over `controller_count` controllers: 1000 / (mu - lambda / C) ms.
inline double controller_setup_delay(const ControllerModel& cm, double offered_load_rps) {
  if (cm.controller_count < 1) throw ValidationError("controller_count must be >= 1");
  if (!(cm.service_rate_rps > 0.0)) throw ValidationError("service rate must be > 0");
  if (!(offered_load_rps >= 0.0)) throw ValidationError("offered load must be >= 0");
  const double per_controller = offered_load_rps / cm.controller_count;
  if (per_controller >= cm.service_rate_rps)
    throw SaturationError("controller saturated: per-controller load " + detail::format_double(per_controller) +
                          " rps >= service rate " + detail::format_double(cm.service_rate_rps) + " rps");
  return 1000.0 / (cm.service_rate_rps - per_controller);
}

inline double controller_setup_delay(const ControllerModel& cm) {
  return controller_setup_delay(cm, cm.offered_load_rps);
}

/// Controller owning `n` when the topology's domains are folded onto
/// `controller_count` controllers in contiguous blocks.
inline std::optional<int> controller_of(const Topology& t, NodeId n, int controller_count) {
  const auto d = t.domain_of(n);
  if (!d || t.domain_count() == 0) return std::nullopt;
  const int c = std::max(1, controller_count);
  return static_cast<int>(static_cast<long long>(*d) * c / t.domain_count());
}

// --- routing -----------------------------------------------------------------

/// Anything that maps (topology, state, flow) to a path or a rejection.
class RoutingPolicy {
 public:
  virtual ~RoutingPolicy() = default;
  virtual std::string name() const = 0;
  /// nullopt rejects the flow.
  virtual std::optional<Path> route(const Topology& t, const LinkState& s, const Flow& flow) = 0;
  virtual void reseed(std::uint64_t /*seed*/) {}
};

struct FlowRecord {
  Flow flow;
  std::optional<Path> path;
  PathMetrics metrics;
  double setup_delay_ms = 0.0;
  double delivered_packets = 0.0;
  double lost_packets = 0.0;

  bool rejected() const { return !path.has_value(); }
  double end_to_end_delay_ms() const { return metrics.delay_ms + setup_delay_ms; }
};

/// Routes `flows` in arrival order on a fresh LinkState. Rejections become
/// records with loss_ratio 1 and no path.
inline std::vector<FlowRecord> run_slotted(const Topology& t, const std::vector<Flow>& flows, RoutingPolicy& router,
                                           const ControllerModel& cm, std::uint64_t seed,
                                           const NetsimConfig& cfg = {}) {
  for (std::size_t i = 1; i < flows.size(); ++i)
    if (flows[i].arrival_slot < flows[i - 1].arrival_slot)
      throw ValidationError("run_slotted: flows not sorted by arrival slot");
  const double setup = controller_setup_delay(cm);
  router.reseed(seed);
  LinkState state = make_link_state(t, cfg);
  using Departure = std::pair<std::uint64_t, std::uint64_t>;  // (slot, flow id)
  std::priority_queue<Departure, std::vector<Departure>, std::greater<>> departures;
  std::vector<FlowRecord> out;
  out.reserve(flows.size());
  for (const Flow& f : flows) {
    while (!departures.empty() && departures.top().first <= f.arrival_slot) {
      state.remove_flow(departures.top().second);
      departures.pop();
    }
    observe_all(t, state, cfg);
    FlowRecord rec;
    rec.flow = f;
    rec.setup_delay_ms = setup;
    auto p = router.route(t, state, f);
    if (p && (!is_valid_path(t, *p) || p->nodes.front() != f.src || p->nodes.back() != f.dst)) p.reset();
    if (!p) {
      rec.metrics = PathMetrics{0.0, 0.0, 1.0, 0};
      rec.lost_packets = static_cast<double>(f.size_packets);
    } else {
      const auto o = apply_flow(t, state, *p, f, cfg);
      rec.metrics = o.metrics;
      rec.delivered_packets = o.delivered_packets;
      rec.lost_packets = o.lost_packets;
      if (!p->links.empty()) departures.push({f.arrival_slot + f.holding_slots, f.id});
      rec.path = std::move(p);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

/// Copy of `t` with every link's loss probability set to `loss`.
inline Topology inject_uniform_loss(const Topology& t, double loss) {
  if (!(loss >= 0.0 && loss <= 1.0)) throw ValidationError("injected loss must lie in [0,1]");
  auto links = t.links();
  for (auto& l : links) l.loss_prob = loss;
  return t.with_links(std::move(links));
}

}  // namespace sdnroute
