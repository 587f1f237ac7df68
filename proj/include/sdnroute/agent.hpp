#pragma once

// DRL routing agent. A path is built one link at a time: in each step the
// value network scores every link of the topology and the agent picks one.
// Picking a link that does not leave the current node, or that returns to a
// visited node, earns the penalty p; reaching the destination earns the
// flow's utility; other steps earn 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdnroute/detail/rng.hpp"
#include "sdnroute/errors.hpp"
#include "sdnroute/netsim.hpp"
#include "sdnroute/neural.hpp"
#include "sdnroute/topology.hpp"

namespace sdnroute {

/// Upper ends of the [0, bound] min-max scaling used for both the state
/// features and the utility terms. Hops are scaled by |V| - 1.
struct NormBounds {
  double delay_ms = 100.0;
  double loss = 1.0;
  /// Flow-demand scale: a flow's normalized throughput is its throughput ratio.
  double throughput_mbps = 1.0;

  void validate() const {
    if (!(delay_ms > 0.0 && loss > 0.0 && throughput_mbps > 0.0))
      throw ValidationError("normalization bounds must be positive");
  }
};

struct UtilityWeights {
  double throughput = 1.0;
  double delay = 1.0;
  double loss = 1.0;
  double hops = 1.0;

  void validate() const {
    if (throughput < 0.0 || delay < 0.0 || loss < 0.0 || hops < 0.0)
      throw ValidationError("utility weights must be non-negative");
    if (throughput == 0.0 && delay == 0.0 && loss == 0.0 && hops == 0.0)
      throw ValidationError("utility weights must not all be zero");
  }
};

struct RewardConfig {
  double penalty = -1.0;
  UtilityWeights weights;

  void validate() const {
    if (!(penalty < 0.0)) throw ValidationError("penalty must be strictly negative");
    weights.validate();
  }
};

/// Per-flow metrics on the [0,1] scale the utility is defined on.
struct NormalizedMetrics {
  double throughput = 0.0;
  double delay = 0.0;
  double loss = 0.0;
  double hops = 0.0;
};

inline double scale01(double v, double bound) { return std::clamp(v / bound, 0.0, 1.0); }

inline NormalizedMetrics normalize(const PathMetrics& m, const NormBounds& nb, std::size_t node_count) {
  const double max_hops = node_count > 1 ? static_cast<double>(node_count - 1) : 1.0;
  return {scale01(m.throughput_mbps, nb.throughput_mbps), scale01(m.delay_ms, nb.delay_ms),
          scale01(m.loss_ratio, nb.loss), scale01(static_cast<double>(m.hops), max_hops)};
}

/// U = w1 x - w2 d - w3 l - w4 h.
inline double utility(const NormalizedMetrics& m, const UtilityWeights& w) {
  return w.throughput * m.throughput - w.delay * m.delay - w.loss * m.loss - w.hops * m.hops;
}

inline double utility(const PathMetrics& m, const UtilityWeights& w, const NormBounds& nb, std::size_t node_count) {
  return utility(normalize(m, nb, node_count), w);
}

enum class StepKind { intermediate, success, invalid_link, loop, timeout };

inline std::string to_string(StepKind k) {
  switch (k) {
    case StepKind::intermediate: return "intermediate";
    case StepKind::success: return "success";
    case StepKind::invalid_link: return "invalid_link";
    case StepKind::loop: return "loop";
    case StepKind::timeout: return "timeout";
  }
  return "?";
}

/// Classification of one step; `metrics` is read only for success.
struct StepClass {
  StepKind kind = StepKind::intermediate;
  NormalizedMetrics metrics{};
};

inline double reward(const StepClass& step, const RewardConfig& rc) {
  switch (step.kind) {
    case StepKind::invalid_link:
    case StepKind::loop:
    case StepKind::timeout: return rc.penalty;
    case StepKind::success: return utility(step.metrics, rc.weights);
    case StepKind::intermediate: return 0.0;
  }
  return rc.penalty;
}

/// [per-link delay, loss, available-throughput features (3|E|) | current one-hot (|V|) | destination one-hot (|V|)].
inline std::size_t state_size(const Topology& t) { return 3 * t.link_count() + 2 * t.node_count(); }

inline Vector encode_state(const Topology& t, const LinkState& ls, NodeId current, NodeId dest, const NormBounds& nb) {
  nb.validate();
  if (!t.contains(current) || !t.contains(dest)) throw ValidationError("encode_state: unknown node");
  const std::size_t E = t.link_count();
  const std::size_t V = t.node_count();
  Vector s = Vector::Zero(static_cast<Eigen::Index>(3 * E + 2 * V));
  for (std::size_t i = 0; i < E; ++i) {
    const LinkId l = link_id(i);
    s(static_cast<Eigen::Index>(i)) = scale01(ls.ewma_delay_ms(l), nb.delay_ms);
    s(static_cast<Eigen::Index>(E + i)) = scale01(ls.ewma_loss(l), nb.loss);
    s(static_cast<Eigen::Index>(2 * E + i)) = scale01(ls.ewma_throughput_mbps(l), nb.throughput_mbps);
  }
  s(static_cast<Eigen::Index>(3 * E + idx(current))) = 1.0;
  s(static_cast<Eigen::Index>(3 * E + V + idx(dest))) = 1.0;
  return s;
}

/// With probability epsilon a uniform draw over the allowed actions,
/// otherwise the allowed argmax (lowest id wins ties). An empty mask allows
/// every action.
inline std::size_t select_action(std::span<const double> q, std::span<const bool> mask, double epsilon, Rng& rng) {
  if (q.empty()) throw ValidationError("select_action: empty action space");
  if (!mask.empty() && mask.size() != q.size()) throw DimensionError("select_action: mask length mismatch");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ValidationError("select_action: epsilon outside [0,1]");
  std::vector<std::size_t> allowed;
  allowed.reserve(q.size());
  for (std::size_t a = 0; a < q.size(); ++a)
    if (mask.empty() || mask[a]) allowed.push_back(a);
  if (allowed.empty()) throw ValidationError("select_action: no valid action");
  if (epsilon > 0.0 && rng.uniform01() < epsilon) return allowed[rng.uniform_index(allowed.size())];
  std::size_t best = allowed.front();
  for (std::size_t a : allowed)
    if (q[a] > q[best]) best = a;
  return best;
}

inline std::size_t select_action(const Vector& q, std::span<const bool> mask, double epsilon, Rng& rng) {
  return select_action(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())), mask, epsilon, rng);
}

struct Experience {
  Vector state;
  std::uint32_t action = 0;
  double reward = 0.0;
  Vector next_state;
  bool done = false;
  /// Actions that leave the node of `next_state`; the bootstrap max runs over these.
  std::vector<std::uint32_t> next_valid;
};

/// Invalid/loop handling during training.
enum class EpisodeMode { penalize_and_terminate, penalize_and_continue };

/// Action set exposed to exploration and greedy choice during training.
enum class TrainingMask { none, outgoing };

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  std::uint64_t decay_steps = 5000;

  double at(std::uint64_t step) const {
    if (decay_steps == 0 || step >= decay_steps) return end;
    const double frac = static_cast<double>(step) / static_cast<double>(decay_steps);
    return start + (end - start) * frac;
  }
};

struct AgentConfig {
  EpsilonSchedule epsilon;
  double gamma = 0.95;
  std::size_t replay_capacity = 10000;
  std::size_t batch_size = 64;
  std::uint64_t target_sync_steps = 250;
  double learning_rate = 1e-3;
  double momentum = 0.0;
  /// 0 means 2 * |V|.
  std::size_t max_steps = 0;
  EpisodeMode mode = EpisodeMode::penalize_and_terminate;
  TrainingMask training_mask = TrainingMask::outgoing;
  std::vector<std::size_t> hidden = {128, 128};
  /// Gradient steps start once the replay buffer holds this many samples.
  std::size_t warmup = 64;
  /// One gradient step per this many environment steps.
  std::size_t train_every = 1;
  /// Bootstrap with the target network's value of the online network's
  /// argmax instead of the target network's own max.
  bool double_q = false;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("gamma must lie in [0,1)");
    if (!(epsilon.start >= 0.0 && epsilon.start <= 1.0 && epsilon.end >= 0.0 && epsilon.end <= 1.0))
      throw ValidationError("epsilon must lie in [0,1]");
    if (replay_capacity == 0 || batch_size == 0) throw ValidationError("replay capacity and batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
    if (train_every == 0) throw ValidationError("train_every must be >= 1");
  }

  std::size_t step_limit(const Topology& t) const { return max_steps ? max_steps : 2 * t.node_count(); }
};

inline Architecture routing_architecture(const Topology& t, const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> sizes{state_size(t)};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(t.link_count());
  return Architecture::mlp(std::move(sizes));
}

inline std::vector<std::uint32_t> outgoing_actions(const Topology& t, NodeId n) {
  std::vector<std::uint32_t> v;
  for (LinkId l : t.out_links(n)) v.push_back(static_cast<std::uint32_t>(idx(l)));
  return v;
}

struct EpisodeOutcome {
  bool success = false;
  /// Nodes visited so far; complete α→β path on success.
  Path path;
  std::vector<double> rewards;
  std::vector<StepKind> steps;
  /// U on success, p otherwise.
  double terminal_value = 0.0;
  std::optional<PathMetrics> metrics;
};

struct EpisodeContext {
  NormBounds norms;
  NetsimConfig netsim;
};

/// One routing attempt for `flow`, emitting one Experience per step.
inline std::pair<EpisodeOutcome, std::vector<Experience>> run_episode(const Topology& t, const LinkState& ls,
                                                                      const Flow& flow, const ModelWeights& w,
                                                                      const AgentConfig& cfg, const RewardConfig& rc,
                                                                      double epsilon, Rng& rng,
                                                                      const EpisodeContext& ctx = {}) {
  if (!t.contains(flow.src) || !t.contains(flow.dst)) throw ValidationError("run_episode: flow endpoint not in topology");
  EpisodeOutcome out;
  std::vector<Experience> exps;
  out.path.nodes.push_back(flow.src);
  auto succeed = [&]() {
    const PathMetrics m = path_metrics(t, ls, out.path, flow, ctx.netsim);
    out.success = true;
    out.metrics = m;
    out.terminal_value = reward(StepClass{StepKind::success, normalize(m, ctx.norms, t.node_count())}, rc);
  };
  if (flow.src == flow.dst) {
    succeed();
    return {std::move(out), std::move(exps)};
  }

  const std::size_t E = t.link_count();
  const std::size_t limit = cfg.step_limit(t);
  std::vector<bool> visited(t.node_count(), false);
  visited[idx(flow.src)] = true;
  NodeId cur = flow.src;
  Vector state = encode_state(t, ls, cur, flow.dst, ctx.norms);
  auto mask = std::make_unique<bool[]>(E);

  for (std::size_t step = 0; step < limit; ++step) {
    const Vector q = forward(w, state);
    std::span<const bool> mask_view;
    if (cfg.training_mask == TrainingMask::outgoing) {
      std::fill(mask.get(), mask.get() + E, false);
      for (LinkId l : t.out_links(cur)) mask[idx(l)] = true;
      mask_view = std::span<const bool>(mask.get(), E);
      if (t.out_links(cur).empty()) {
        // dead end: nothing can leave this node
        out.rewards.push_back(rc.penalty);
        out.steps.push_back(StepKind::invalid_link);
        out.terminal_value = rc.penalty;
        break;
      }
    }
    const auto a = static_cast<std::uint32_t>(select_action(q, mask_view, epsilon, rng));
    const Link& link = t.link(link_id(a));
    Experience e;
    e.state = state;
    e.action = a;

    StepKind kind;
    if (link.src != cur) kind = StepKind::invalid_link;
    else if (visited[idx(link.dst)]) kind = StepKind::loop;
    else if (link.dst == flow.dst) kind = StepKind::success;
    else kind = StepKind::intermediate;
    const bool last = step + 1 == limit;

    if (kind == StepKind::invalid_link || kind == StepKind::loop) {
      e.reward = rc.penalty;
      e.next_state = state;
      e.next_valid = outgoing_actions(t, cur);
      e.done = cfg.mode == EpisodeMode::penalize_and_terminate || last;
      out.rewards.push_back(e.reward);
      out.steps.push_back(kind);
      exps.push_back(std::move(e));
      if (exps.back().done) {
        out.terminal_value = rc.penalty;
        break;
      }
      continue;
    }

    out.path.nodes.push_back(link.dst);
    out.path.links.push_back(link_id(a));
    visited[idx(link.dst)] = true;
    cur = link.dst;

    if (kind == StepKind::success) {
      succeed();
      e.reward = out.terminal_value;
      e.next_state = encode_state(t, ls, cur, flow.dst, ctx.norms);
      e.done = true;
      out.rewards.push_back(e.reward);
      out.steps.push_back(kind);
      exps.push_back(std::move(e));
      break;
    }

    state = encode_state(t, ls, cur, flow.dst, ctx.norms);
    e.next_state = state;
    e.next_valid = outgoing_actions(t, cur);
    if (cfg.training_mask == TrainingMask::outgoing && e.next_valid.empty()) {
      // walked into a dead end; under the mask no action is left
      kind = StepKind::invalid_link;
      e.reward = rc.penalty;
      e.done = true;
      out.terminal_value = rc.penalty;
    } else if (last) {
      kind = StepKind::timeout;
      e.reward = rc.penalty;
      e.done = true;
      out.terminal_value = rc.penalty;
    } else {
      e.reward = 0.0;
    }
    out.rewards.push_back(e.reward);
    out.steps.push_back(kind);
    exps.push_back(std::move(e));
    if (exps.back().done) break;
  }
  return {std::move(out), std::move(exps)};
}

/// Fixed-capacity ring of experiences with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000) : capacity_(capacity) {
    if (capacity == 0) throw ValidationError("replay capacity must be >= 1");
  }

  void push(Experience e) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(e));
    } else {
      items_[next_] = std::move(e);
    }
    next_ = (next_ + 1) % capacity_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }

  /// `n` draws with replacement.
  std::vector<const Experience*> sample(std::size_t n, Rng& rng) const {
    if (items_.empty()) throw ValidationError("sample from empty replay buffer");
    std::vector<const Experience*> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[rng.uniform_index(items_.size())]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Experience> items_;
};

/// One gradient step on the mean squared TD error
/// (q(s,a) - [r + gamma * max_{a' valid} q_target(s', a')])^2, no bootstrap on done.
/// Updates `w` in place and returns the pre-step loss.
inline double train_on_batch(ModelWeights& w, const ModelWeights& target, std::span<const Experience* const> batch,
                             const AgentConfig& cfg, SgdOptimizer& opt) {
  if (batch.empty()) throw ValidationError("train_on_batch: empty batch");
  if (!w.compatible_with(target)) throw DimensionError("train_on_batch: target network architecture differs");
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto in = static_cast<Eigen::Index>(w.arch.input_size());
  const auto out_n = static_cast<Eigen::Index>(w.arch.output_size());
  Matrix states(in, B);
  Matrix next_states(in, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Experience& e = *batch[static_cast<std::size_t>(b)];
    if (e.state.size() != in || e.next_state.size() != in) throw DimensionError("train_on_batch: state size mismatch");
    if (e.action >= out_n) throw DimensionError("train_on_batch: action id out of range");
    states.col(b) = e.state;
    next_states.col(b) = e.next_state;
  }
  const Matrix q = forward_batch(w, states);
  Matrix q_next;
  Matrix q_pick;
  if (cfg.gamma > 0.0) {
    q_next = forward_batch(target, next_states);
    q_pick = cfg.double_q ? forward_batch(w, next_states) : q_next;
  }

  Matrix grad = Matrix::Zero(out_n, B);
  double loss = 0.0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const Experience& e = *batch[static_cast<std::size_t>(b)];
    double y = e.reward;
    if (!e.done && cfg.gamma > 0.0) {
      Eigen::Index best = 0;
      if (e.next_valid.empty()) {
        q_pick.col(b).maxCoeff(&best);
      } else {
        best = e.next_valid.front();
        for (auto a : e.next_valid)
          if (q_pick(a, b) > q_pick(best, b)) best = a;
      }
      y += cfg.gamma * q_next(best, b);
    }
    const double err = q(e.action, b) - y;
    loss += err * err;
    grad(e.action, b) = 2.0 * err / static_cast<double>(B);
  }
  loss /= static_cast<double>(B);
  if (!std::isfinite(loss)) throw DivergenceError("non-finite training loss");
  opt.step(w, backward_batch(w, states, grad));
  return loss;
}

inline double train_on_batch(ModelWeights& w, const ModelWeights& target, const std::vector<Experience>& batch,
                             const AgentConfig& cfg, SgdOptimizer& opt) {
  std::vector<const Experience*> ptrs;
  for (const auto& e : batch) ptrs.push_back(&e);
  return train_on_batch(w, target, ptrs, cfg, opt);
}

/// Masked greedy inference: only links leaving the current node towards an
/// unvisited node are eligible, so every returned path is valid.
inline std::optional<Path> greedy_path(const Topology& t, const LinkState& ls, const Flow& flow, const ModelWeights& w,
                                       const NormBounds& nb) {
  Path p{{flow.src}, {}};
  if (flow.src == flow.dst) return p;
  std::vector<bool> visited(t.node_count(), false);
  visited[idx(flow.src)] = true;
  NodeId cur = flow.src;
  for (std::size_t step = 0; step < t.node_count(); ++step) {
    const Vector q = forward(w, encode_state(t, ls, cur, flow.dst, nb));
    std::optional<LinkId> best;
    for (LinkId l : t.out_links(cur)) {
      if (visited[idx(t.link(l).dst)]) continue;
      if (!best || q(static_cast<Eigen::Index>(idx(l))) > q(static_cast<Eigen::Index>(idx(*best)))) best = l;
    }
    if (!best) return std::nullopt;
    cur = t.link(*best).dst;
    visited[idx(cur)] = true;
    p.nodes.push_back(cur);
    p.links.push_back(*best);
    if (cur == flow.dst) return p;
  }
  return std::nullopt;
}

/// Routing policy backed by a value network (DRL-R / FDRL-R in deployment).
class GreedyValuePolicy : public RoutingPolicy {
 public:
  GreedyValuePolicy(std::string name, ModelWeights w, NormBounds nb)
      : name_(std::move(name)), weights_(std::move(w)), norms_(nb) {}

  std::string name() const override { return name_; }
  std::optional<Path> route(const Topology& t, const LinkState& s, const Flow& flow) override {
    return greedy_path(t, s, flow, weights_, norms_);
  }
  const ModelWeights& weights() const { return weights_; }

 private:
  std::string name_;
  ModelWeights weights_;
  NormBounds norms_;
};

struct TrainingStats {
  std::size_t episodes = 0;
  std::size_t successes = 0;
  std::size_t env_steps = 0;
  std::size_t gradient_steps = 0;
  double reward_sum = 0.0;
  double loss_sum = 0.0;

  double mean_reward() const { return episodes ? reward_sum / static_cast<double>(episodes) : 0.0; }
  double success_ratio() const { return episodes ? static_cast<double>(successes) / static_cast<double>(episodes) : 0.0; }
  double mean_loss() const { return gradient_steps ? loss_sum / static_cast<double>(gradient_steps) : 0.0; }
};

/// A DQN learner that owns its network, target network, optimizer, replay
/// buffer, RNG, and simulated network state. Flows handed to `train` are
/// routed one per episode; successful paths hold bandwidth on the learner's
/// private LinkState for their holding time. Arrival slots must keep
/// increasing across calls.
class DqnLearner {
 public:
  DqnLearner(const Topology& t, ModelWeights initial, AgentConfig cfg, RewardConfig rc, EpisodeContext ctx,
             std::uint64_t seed)
      : topo_(&t),
        cfg_(std::move(cfg)),
        rc_(rc),
        ctx_(ctx),
        weights_(std::move(initial)),
        target_(weights_),
        opt_(cfg_.learning_rate, cfg_.momentum),
        replay_(cfg_.replay_capacity),
        rng_(seed),
        state_(make_link_state(t, ctx_.netsim)) {
    cfg_.validate();
    rc_.validate();
    ctx_.norms.validate();
    if (weights_.arch.input_size() != state_size(t) || weights_.arch.output_size() != t.link_count())
      throw DimensionError("weights do not match the topology's state/action encoding");
  }

  /// Replaces the online and target networks (start of a federated round).
  void load_global(const ModelWeights& w) {
    if (!w.compatible_with(weights_)) throw DimensionError("global weights incompatible with learner");
    weights_ = w;
    target_ = w;
  }

  const ModelWeights& weights() const { return weights_; }
  std::uint64_t env_steps() const { return steps_; }

  TrainingStats train(const std::vector<Flow>& flows) {
    TrainingStats st;
    for (const Flow& f : flows) {
      while (!departures_.empty() && departures_.top().first <= f.arrival_slot) {
        state_.remove_flow(departures_.top().second);
        departures_.pop();
      }
      observe_all(*topo_, state_, ctx_.netsim);
      const double eps = cfg_.epsilon.at(steps_);
      auto [outcome, exps] = run_episode(*topo_, state_, f, weights_, cfg_, rc_, eps, rng_, ctx_);
      ++st.episodes;
      if (outcome.success) ++st.successes;
      for (double r : outcome.rewards) st.reward_sum += r;
      if (exps.empty()) st.reward_sum += outcome.terminal_value;
      for (auto& e : exps) {
        replay_.push(std::move(e));
        ++steps_;
        ++st.env_steps;
        if (replay_.size() >= std::max(cfg_.warmup, std::size_t{1}) && steps_ % cfg_.train_every == 0) {
          const auto batch = replay_.sample(cfg_.batch_size, rng_);
          st.loss_sum += train_on_batch(weights_, target_, batch, cfg_, opt_);
          ++st.gradient_steps;
        }
        if (cfg_.target_sync_steps > 0 && steps_ % cfg_.target_sync_steps == 0) target_ = weights_;
      }
      if (outcome.success && !outcome.path.links.empty()) {
        const auto id = next_flow_key_++;
        state_.add_flow(id, outcome.path.links, outcome.metrics->throughput_mbps);
        for (LinkId l : outcome.path.links) observe_link(*topo_, state_, l, ctx_.netsim);
        departures_.push({f.arrival_slot + f.holding_slots, id});
      }
    }
    return st;
  }

 private:
  const Topology* topo_;
  AgentConfig cfg_;
  RewardConfig rc_;
  EpisodeContext ctx_;
  ModelWeights weights_;
  ModelWeights target_;
  SgdOptimizer opt_;
  ReplayBuffer replay_;
  Rng rng_;
  LinkState state_;
  std::uint64_t steps_ = 0;
  std::uint64_t next_flow_key_ = 0;
  using Departure = std::pair<std::uint64_t, std::uint64_t>;
  std::priority_queue<Departure, std::vector<Departure>, std::greater<>> departures_;
};

}  // namespace sdnroute
