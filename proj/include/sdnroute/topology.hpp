#pragma once

// Directed network graph with per-link delay/loss/bandwidth, controller
// domains, the line-oriented topology file format, and exact path search.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sdnroute/detail/text.hpp"
#include "sdnroute/errors.hpp"

namespace sdnroute {

enum class NodeId : std::uint32_t {};
enum class LinkId : std::uint32_t {};

constexpr std::size_t idx(NodeId n) { return static_cast<std::size_t>(n); }
constexpr std::size_t idx(LinkId l) { return static_cast<std::size_t>(l); }
constexpr NodeId node_id(std::size_t i) { return NodeId{static_cast<std::uint32_t>(i)}; }
constexpr LinkId link_id(std::size_t i) { return LinkId{static_cast<std::uint32_t>(i)}; }

enum class NodeRole { host, switch_ };

struct Node {
  std::string name;
  NodeRole role = NodeRole::switch_;
  /// Controller domain; hosts may leave it unset.
  std::optional<int> domain;

  bool operator==(const Node&) const = default;
};

struct Link {
  NodeId src{};
  NodeId dst{};
  double delay_ms = 1.0;
  double loss_prob = 0.0;
  double bandwidth_mbps = 100.0;

  bool operator==(const Link&) const = default;
};

/// Loop-free walk; links[k] joins nodes[k] -> nodes[k+1].
struct Path {
  std::vector<NodeId> nodes;
  std::vector<LinkId> links;

  std::size_t hops() const { return links.size(); }
  bool operator==(const Path&) const = default;
};

enum class PathMetric { hops, delay };

class Topology {
 public:
  Topology() = default;

  /// Validates every invariant; throws ValidationError on violation.
  Topology(std::string name, std::vector<Node> nodes, std::vector<Link> links)
      : name_(std::move(name)), nodes_(std::move(nodes)), links_(std::move(links)) {
    validate();
    index();
  }

  const std::string& name() const { return name_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t link_count() const { return links_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const Node& node(NodeId n) const { return nodes_.at(idx(n)); }
  const Link& link(LinkId l) const { return links_.at(idx(l)); }

  /// Outgoing links of `n` in LinkId order.
  std::span<const LinkId> out_links(NodeId n) const { return out_.at(idx(n)); }

  std::optional<LinkId> find_link(NodeId src, NodeId dst) const {
    for (LinkId l : out_links(src))
      if (links_[idx(l)].dst == dst) return l;
    return std::nullopt;
  }

  std::optional<NodeId> find_node(std::string_view name) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].name == name) return node_id(i);
    return std::nullopt;
  }

  NodeId require_node(std::string_view name) const {
    if (auto n = find_node(name)) return *n;
    throw ValidationError("unknown node '" + std::string(name) + "' in topology " + name_);
  }

  bool contains(NodeId n) const { return idx(n) < nodes_.size(); }

  /// Number of controller domains (ids are dense in [0, count)).
  int domain_count() const { return domain_count_; }

  std::optional<int> domain_of(NodeId n) const { return node(n).domain; }

  /// Traffic endpoints: the hosts when any exist, otherwise every node.
  std::vector<NodeId> endpoints() const {
    std::vector<NodeId> hosts;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].role == NodeRole::host) hosts.push_back(node_id(i));
    if (!hosts.empty()) return hosts;
    std::vector<NodeId> all(nodes_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = node_id(i);
    return all;
  }

  /// Copy with the link list replaced (same nodes, same LinkIds).
  Topology with_links(std::vector<Link> links) const {
    return Topology(name_, nodes_, std::move(links));
  }

  bool operator==(const Topology& o) const {
    return name_ == o.name_ && nodes_ == o.nodes_ && links_ == o.links_;
  }

 private:
  void validate() const {
    std::set<std::string> names;
    for (const auto& n : nodes_) {
      if (n.name.empty()) throw ValidationError("node with empty name");
      if (!names.insert(n.name).second)
        throw ValidationError("duplicate node '" + n.name + "'");
      if (n.role == NodeRole::switch_ && !n.domain)
        throw ValidationError("switch '" + n.name + "' has no controller domain");
      if (n.domain && *n.domain < 0)
        throw ValidationError("negative domain on node '" + n.name + "'");
    }
    std::set<std::pair<NodeId, NodeId>> seen;
    for (const auto& l : links_) {
      if (idx(l.src) >= nodes_.size() || idx(l.dst) >= nodes_.size())
        throw ValidationError("link endpoint out of range");
      const auto label = nodes_[idx(l.src)].name + "->" + nodes_[idx(l.dst)].name;
      if (l.src == l.dst) throw ValidationError("self-loop link " + label);
      if (!seen.insert({l.src, l.dst}).second) throw ValidationError("duplicate link " + label);
      if (!(l.delay_ms > 0.0) || !std::isfinite(l.delay_ms))
        throw ValidationError("non-positive delay on link " + label);
      if (!(l.bandwidth_mbps > 0.0) || !std::isfinite(l.bandwidth_mbps))
        throw ValidationError("non-positive bandwidth on link " + label);
      if (!(l.loss_prob >= 0.0 && l.loss_prob <= 1.0))
        throw ValidationError("loss_prob outside [0,1] on link " + label);
    }
  }

  void index() {
    out_.assign(nodes_.size(), {});
    for (std::size_t i = 0; i < links_.size(); ++i) out_[idx(links_[i].src)].push_back(link_id(i));
    std::set<int> domains;
    for (const auto& n : nodes_)
      if (n.domain) domains.insert(*n.domain);
    domain_count_ = static_cast<int>(domains.size());
    int expect = 0;
    for (int d : domains)
      if (d != expect++) throw ValidationError("controller domain ids are not dense from 0");
  }

  std::string name_;
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::vector<std::vector<LinkId>> out_;
  int domain_count_ = 0;
};

/// True when `p` is a loop-free walk along existing links of `t`.
inline bool is_valid_path(const Topology& t, const Path& p) {
  if (p.nodes.empty() || p.nodes.size() != p.links.size() + 1) return false;
  std::set<NodeId> visited;
  for (NodeId n : p.nodes) {
    if (!t.contains(n) || !visited.insert(n).second) return false;
  }
  for (std::size_t k = 0; k < p.links.size(); ++k) {
    if (idx(p.links[k]) >= t.link_count()) return false;
    const Link& l = t.link(p.links[k]);
    if (l.src != p.nodes[k] || l.dst != p.nodes[k + 1]) return false;
  }
  return true;
}

/// Cost of a path under `metric`, summed in path order.
inline double path_cost(const Topology& t, const Path& p, PathMetric metric) {
  double c = 0.0;
  for (LinkId l : p.links) c += metric == PathMetric::hops ? 1.0 : t.link(l).delay_ms;
  return c;
}

/// Dijkstra over (cost, node sequence) labels so equal-cost ties resolve to
/// the lexicographically smallest node sequence. Returns nullopt if unreachable.
inline std::optional<Path> shortest_path(const Topology& t, NodeId src, NodeId dst,
                                         PathMetric metric = PathMetric::hops) {
  if (!t.contains(src) || !t.contains(dst)) throw ValidationError("shortest_path: node out of range");
  struct Label {
    double cost;
    std::vector<NodeId> seq;
    std::vector<LinkId> links;
    bool operator>(const Label& o) const {
      if (cost != o.cost) return cost > o.cost;
      return seq > o.seq;
    }
    bool better_than(const Label& o) const {
      if (cost != o.cost) return cost < o.cost;
      return seq < o.seq;
    }
  };
  std::vector<std::optional<Label>> best(t.node_count());
  std::vector<bool> settled(t.node_count(), false);
  std::priority_queue<Label, std::vector<Label>, std::greater<>> pq;
  best[idx(src)] = Label{0.0, {src}, {}};
  pq.push(*best[idx(src)]);
  while (!pq.empty()) {
    Label cur = pq.top();
    pq.pop();
    const NodeId u = cur.seq.back();
    if (settled[idx(u)]) continue;
    settled[idx(u)] = true;
    if (u == dst) return Path{std::move(cur.seq), std::move(cur.links)};
    for (LinkId lid : t.out_links(u)) {
      const Link& l = t.link(lid);
      if (settled[idx(l.dst)]) continue;
      Label next{cur.cost + (metric == PathMetric::hops ? 1.0 : l.delay_ms), cur.seq, cur.links};
      next.seq.push_back(l.dst);
      next.links.push_back(lid);
      auto& slot = best[idx(l.dst)];
      if (!slot || next.better_than(*slot)) {
        slot = next;
        pq.push(std::move(next));
      }
    }
  }
  return std::nullopt;
}

/// All loop-free src->dst paths with at most `max_hops` links, ordered by
/// (hop count, node sequence).
inline std::vector<Path> enumerate_paths(const Topology& t, NodeId src, NodeId dst,
                                         std::size_t max_hops) {
  std::vector<Path> out;
  if (!t.contains(src) || !t.contains(dst)) return out;
  if (src == dst) {
    out.push_back(Path{{src}, {}});
    return out;
  }
  std::vector<bool> on_path(t.node_count(), false);
  Path cur{{src}, {}};
  on_path[idx(src)] = true;
  auto dfs = [&](auto&& self, NodeId u) -> void {
    if (cur.links.size() >= max_hops) return;
    for (LinkId lid : t.out_links(u)) {
      const NodeId v = t.link(lid).dst;
      if (on_path[idx(v)]) continue;
      cur.nodes.push_back(v);
      cur.links.push_back(lid);
      if (v == dst) {
        out.push_back(cur);
      } else {
        on_path[idx(v)] = true;
        self(self, v);
        on_path[idx(v)] = false;
      }
      cur.nodes.pop_back();
      cur.links.pop_back();
    }
  };
  dfs(dfs, src);
  std::sort(out.begin(), out.end(), [](const Path& a, const Path& b) {
    if (a.hops() != b.hops()) return a.hops() < b.hops();
    return a.nodes < b.nodes;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Topology file format (version 1)
//
//   sdnroute-topology 1
//   name <identifier>                       (optional)
//   [nodes]
//   <name> role=<host|switch> [domain=<int>]
//   [links]
//   <a> -> <b>  delay_ms=<r> loss_prob=<r> bandwidth_mbps=<r>
//   <a> <-> <b> delay_ms=<r> loss_prob=<r> bandwidth_mbps=<r>
//
// '#' starts a comment. '<->' expands to a->b followed by b->a. LinkIds follow
// the expanded order. Unknown keys, sections, or directives are rejected.
// ---------------------------------------------------------------------------

inline Topology parse_topology(std::string_view text, std::string_view origin = "<text>") {
  using detail::split_ws;
  using detail::trim;
  auto fail = [&](std::size_t line, const std::string& msg) -> ParseError {
    return ParseError(std::string(origin) + ":" + std::to_string(line) + ": " + msg);
  };

  enum class Section { header, nodes, links } section = Section::header;
  bool saw_magic = false;
  std::string name;
  std::vector<Node> nodes;
  std::map<std::string, NodeId, std::less<>> by_name;
  std::vector<Link> links;

  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    line = trim(line);
    if (line.empty()) continue;
    auto tok = split_ws(line);

    if (!saw_magic) {
      if (tok.size() != 2 || tok[0] != "sdnroute-topology") throw fail(line_no, "missing 'sdnroute-topology' header");
      if (tok[1] != "1") throw fail(line_no, "unsupported topology format version " + std::string(tok[1]));
      saw_magic = true;
      continue;
    }
    if (line == "[nodes]") {
      section = Section::nodes;
      continue;
    }
    if (line == "[links]") {
      section = Section::links;
      continue;
    }
    if (line.front() == '[') throw fail(line_no, "unknown section " + std::string(line));

    switch (section) {
      case Section::header: {
        if (tok[0] == "name" && tok.size() == 2) {
          name = tok[1];
        } else {
          throw fail(line_no, "unexpected directive '" + std::string(tok[0]) + "'");
        }
        break;
      }
      case Section::nodes: {
        Node n;
        n.name = tok[0];
        bool has_role = false;
        for (std::size_t i = 1; i < tok.size(); ++i) {
          auto eq = tok[i].find('=');
          if (eq == std::string_view::npos) throw fail(line_no, "expected key=value, got '" + std::string(tok[i]) + "'");
          auto key = tok[i].substr(0, eq);
          auto val = tok[i].substr(eq + 1);
          if (key == "role") {
            if (val == "host") n.role = NodeRole::host;
            else if (val == "switch") n.role = NodeRole::switch_;
            else throw fail(line_no, "unknown role '" + std::string(val) + "'");
            has_role = true;
          } else if (key == "domain") {
            auto d = detail::parse_int<int>(val);
            if (!d) throw fail(line_no, "bad domain '" + std::string(val) + "'");
            n.domain = *d;
          } else {
            throw fail(line_no, "unknown node field '" + std::string(key) + "'");
          }
        }
        if (!has_role) throw fail(line_no, "node '" + n.name + "' missing role");
        if (by_name.count(n.name)) throw ValidationError("duplicate node '" + n.name + "'");
        by_name.emplace(n.name, node_id(nodes.size()));
        nodes.push_back(std::move(n));
        break;
      }
      case Section::links: {
        if (tok.size() < 3) throw fail(line_no, "link needs '<a> -> <b>' or '<a> <-> <b>'");
        const bool bidir = tok[1] == "<->";
        if (!bidir && tok[1] != "->") throw fail(line_no, "bad link arrow '" + std::string(tok[1]) + "'");
        auto lookup = [&](std::string_view nm) {
          auto it = by_name.find(nm);
          if (it == by_name.end()) throw fail(line_no, "unknown node '" + std::string(nm) + "'");
          return it->second;
        };
        Link l;
        l.src = lookup(tok[0]);
        l.dst = lookup(tok[2]);
        std::set<std::string_view> keys;
        for (std::size_t i = 3; i < tok.size(); ++i) {
          auto eq = tok[i].find('=');
          if (eq == std::string_view::npos) throw fail(line_no, "expected key=value, got '" + std::string(tok[i]) + "'");
          auto key = tok[i].substr(0, eq);
          auto val = detail::parse_double(tok[i].substr(eq + 1));
          if (!val) throw fail(line_no, "bad number for '" + std::string(key) + "'");
          if (!keys.insert(key).second) throw fail(line_no, "repeated field '" + std::string(key) + "'");
          if (key == "delay_ms") l.delay_ms = *val;
          else if (key == "loss_prob") l.loss_prob = *val;
          else if (key == "bandwidth_mbps") l.bandwidth_mbps = *val;
          else throw fail(line_no, "unknown link field '" + std::string(key) + "'");
        }
        if (keys.size() != 3) throw fail(line_no, "link requires delay_ms, loss_prob and bandwidth_mbps");
        links.push_back(l);
        if (bidir) {
          std::swap(l.src, l.dst);
          links.push_back(l);
        }
        break;
      }
    }
  }
  if (!saw_magic) throw ParseError(std::string(origin) + ": empty topology file");
  return Topology(std::move(name), std::move(nodes), std::move(links));
}

inline Topology load_topology(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open topology file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_topology(ss.str(), path);
}

/// Serializes with one directed link per line at full precision.
inline std::string format_topology(const Topology& t) {
  std::ostringstream o;
  o << "sdnroute-topology 1\n";
  if (!t.name().empty()) o << "name " << t.name() << "\n";
  o << "\n[nodes]\n";
  for (const auto& n : t.nodes()) {
    o << n.name << " role=" << (n.role == NodeRole::host ? "host" : "switch");
    if (n.domain) o << " domain=" << *n.domain;
    o << "\n";
  }
  o << "\n[links]\n";
  for (const auto& l : t.links()) {
    o << t.node(l.src).name << " -> " << t.node(l.dst).name
      << " delay_ms=" << detail::format_double(l.delay_ms)
      << " loss_prob=" << detail::format_double(l.loss_prob)
      << " bandwidth_mbps=" << detail::format_double(l.bandwidth_mbps) << "\n";
  }
  return o.str();
}

inline void save_topology(const Topology& t, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write topology file " + path);
  f << format_topology(t);
  if (!f) throw Error("write failed for " + path);
}

}  // namespace sdnroute
