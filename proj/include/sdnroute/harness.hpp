#pragma once

// Study runners and result export. Each (scenario, seed) cell is independent;
// cells may run on worker threads but rows are always assembled in seed order.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdnroute/agent.hpp"
#include "sdnroute/baseline.hpp"
#include "sdnroute/detail/text.hpp"
#include "sdnroute/errors.hpp"
#include "sdnroute/federated.hpp"
#include "sdnroute/netsim.hpp"
#include "sdnroute/neural.hpp"
#include "sdnroute/scenario.hpp"
#include "sdnroute/topology.hpp"

namespace sdnroute {

struct ResultRecord {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string policy;
  int controller_count = 1;
  std::uint64_t flow_id = 0;
  std::string src;
  std::string dst;
  /// End-to-end: path delay plus controller setup delay.
  double delay_ms = 0.0;
  double setup_delay_ms = 0.0;
  double throughput_mbps = 0.0;
  double throughput_ratio = 0.0;
  double loss_ratio = 0.0;
  std::size_t hops = 0;
  double utility = 0.0;

  /// Flows the policy could not route carry no path.
  bool rejected() const { return hops == 0 && loss_ratio == 1.0; }
  double goodput_mbps() const { return throughput_mbps * (1.0 - loss_ratio); }

  bool operator==(const ResultRecord&) const = default;
};

inline constexpr std::string_view kResultColumns[] = {
    "scenario",   "seed",         "policy",          "controller_count", "flow_id",    "src",  "dst",
    "delay_ms",   "setup_delay_ms", "throughput_mbps", "throughput_ratio", "loss_ratio", "hops", "utility"};

enum class ExportFormat { csv, jsonl };

struct StudyOptions {
  /// Upper bound on concurrently running seed cells.
  std::size_t jobs = 1;
  /// Called once per finished cell, possibly from a worker thread.
  std::function<void(const std::string&)> log;
};

struct TrainingLogEntry {
  std::string scenario;
  std::string policy;
  std::uint64_t seed = 0;
  std::size_t round = 0;
  std::size_t node = 0;
  std::size_t episodes = 0;
  std::uint64_t samples = 0;
  double mean_reward = 0.0;
  double success_ratio = 0.0;
  double mean_loss = 0.0;
  std::uint64_t global_digest = 0;
};

struct Checkpoint {
  std::string policy;
  std::uint64_t seed = 0;
  ModelWeights weights;
};

struct RoutingStudyResult {
  std::vector<ResultRecord> rows;
  std::vector<Checkpoint> checkpoints;
  std::vector<TrainingLogEntry> training_log;
};

namespace detail {

/// Runs `fn(i)` for i in [0, n) on at most `jobs` threads; the first
/// exception (lowest index) is rethrown after all workers finish.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline ResultRecord make_record(const Topology& t, const Scenario& sc, std::uint64_t seed, const std::string& policy,
                                int controllers, const FlowRecord& r, const RewardConfig& rc, const NormBounds& nb) {
  ResultRecord rec;
  rec.scenario = sc.name;
  rec.seed = seed;
  rec.policy = policy;
  rec.controller_count = controllers;
  rec.flow_id = r.flow.id;
  rec.src = t.node(r.flow.src).name;
  rec.dst = t.node(r.flow.dst).name;
  rec.delay_ms = r.end_to_end_delay_ms();
  rec.setup_delay_ms = r.setup_delay_ms;
  rec.throughput_mbps = r.metrics.throughput_mbps;
  rec.throughput_ratio = throughput_ratio(r);
  rec.loss_ratio = r.metrics.loss_ratio;
  rec.hops = r.metrics.hops;
  rec.utility = flow_utility(t, r, rc, nb);
  return rec;
}

inline std::unique_ptr<RoutingPolicy> baseline_policy(const Scenario& sc, const std::string& name) {
  if (name == "spr") return spr_policy(sc.spr_metric);
  if (name == "random") return random_policy(0);
  throw ValidationError("policy '" + name + "' is not a baseline");
}

inline ControllerModel controller_model(const Scenario& sc, int controllers) {
  ControllerModel cm = sc.controller;
  cm.controller_count = controllers;
  return cm;
}

inline std::string context(const Scenario& sc, std::uint64_t seed) {
  return "scenario '" + sc.name + "', seed " + std::to_string(seed);
}

}  // namespace detail

/// Routes `samples_per_pair` flows per configured pair with the scenario's
/// fixed policy, once per controller count. Rows per seed:
/// samples_per_pair * |pairs| * |controller_counts|.
inline std::vector<ResultRecord> run_distributed_control_study(const Scenario& sc, const StudyOptions& opt = {}) {
  if (sc.study != StudyKind::control) throw ValidationError("scenario '" + sc.name + "' is not a control study");
  const Topology t = scenario_topology(sc);
  const TrafficPattern pattern = scenario_traffic(sc, t);
  const NetsimConfig netsim = scenario_netsim(sc, t);
  const std::size_t n_flows = sc.samples_per_pair * pattern.pairs.size();

  std::vector<std::vector<ResultRecord>> cells(sc.seeds.size());
  detail::parallel_for(sc.seeds.size(), opt.jobs, [&](std::size_t i) {
    const auto seed = sc.seeds[i];
    const auto flows = generate_traffic(t, pattern, seed, n_flows);
    for (int c : sc.controller_counts) {
      auto policy = detail::baseline_policy(sc, sc.policies.front());
      std::vector<FlowRecord> recs;
      try {
        recs = run_slotted(t, flows, *policy, detail::controller_model(sc, c), seed, netsim);
      } catch (const SaturationError& e) {
        throw SaturationError(detail::context(sc, seed) + ", " + std::to_string(c) + " controllers: " + e.what());
      }
      for (const auto& r : recs)
        cells[i].push_back(detail::make_record(t, sc, seed, policy->name(), c, r, sc.reward, sc.norms));
    }
    if (opt.log) opt.log(detail::context(sc, seed) + ": " + std::to_string(cells[i].size()) + " rows");
  });
  std::vector<ResultRecord> rows;
  for (auto& c : cells) rows.insert(rows.end(), std::make_move_iterator(c.begin()), std::make_move_iterator(c.end()));
  return rows;
}

/// Context shared by the learning policies of a routing scenario.
inline TrainingSetup routing_training_setup(const Scenario& sc, const Topology& t) {
  TrainingSetup setup;
  setup.traffic = scenario_traffic(sc, t);
  setup.agent = sc.agent;
  setup.reward = sc.reward;
  setup.context.norms = sc.norms;
  setup.context.netsim = scenario_netsim(sc, t);
  return setup;
}

/// Single-node training: one round holding the whole DRL budget.
inline FLConfig drl_config(const Scenario& sc) {
  FLConfig fl;
  fl.rounds = 1;
  fl.episodes_per_round = sc.drl_episodes;
  fl.node_count = 1;
  return fl;
}

/// Trains the learning policies per seed, then routes the held-out flow set
/// with every policy. Rows per seed: eval_flows * |policies|.
inline RoutingStudyResult run_intelligent_routing_study(const Scenario& sc, const StudyOptions& opt = {}) {
  if (sc.study != StudyKind::routing) throw ValidationError("scenario '" + sc.name + "' is not a routing study");
  const Topology t = scenario_topology(sc);
  const TrainingSetup setup = routing_training_setup(sc, t);
  const auto eval = generate_traffic(t, setup.traffic, sc.eval_seed, sc.eval_flows);
  const int controllers = sc.controller_counts.front();
  const ControllerModel cm = detail::controller_model(sc, controllers);

  std::vector<RoutingStudyResult> cells(sc.seeds.size());
  detail::parallel_for(sc.seeds.size(), opt.jobs, [&](std::size_t i) {
    const auto seed = sc.seeds[i];
    auto& cell = cells[i];
    for (const auto& name : sc.policies) {
      std::unique_ptr<RoutingPolicy> policy;
      if (name == "drl" || name == "fdrl") {
        const FLConfig fl = name == "drl" ? drl_config(sc) : sc.fl;
        FederatedResult fr;
        try {
          fr = run_federated_training(t, setup, fl, seed);
        } catch (const DivergenceError& e) {
          throw DivergenceError(detail::context(sc, seed) + ", policy " + name + ": " + e.what());
        }
        for (const auto& rep : fr.reports)
          for (const auto& n : rep.nodes)
            cell.training_log.push_back({sc.name, name, seed, rep.round, n.node, n.episodes, n.sample_count,
                                         n.mean_reward, n.success_ratio, n.mean_loss, rep.global_digest});
        cell.checkpoints.push_back({name, seed, fr.final_weights});
        policy = std::make_unique<GreedyValuePolicy>(name, fr.final_weights, setup.context.norms);
      } else {
        policy = detail::baseline_policy(sc, name);
      }
      std::vector<FlowRecord> recs;
      try {
        recs = run_slotted(t, eval, *policy, cm, seed, setup.context.netsim);
      } catch (const SaturationError& e) {
        throw SaturationError(detail::context(sc, seed) + ": " + e.what());
      }
      for (const auto& r : recs)
        cell.rows.push_back(detail::make_record(t, sc, seed, name, controllers, r, sc.reward, sc.norms));
    }
    if (opt.log) opt.log(detail::context(sc, seed) + ": " + std::to_string(cell.rows.size()) + " rows");
  });
  RoutingStudyResult out;
  for (auto& c : cells) {
    out.rows.insert(out.rows.end(), c.rows.begin(), c.rows.end());
    out.checkpoints.insert(out.checkpoints.end(), c.checkpoints.begin(), c.checkpoints.end());
    out.training_log.insert(out.training_log.end(), c.training_log.begin(), c.training_log.end());
  }
  return out;
}

// --- aggregation ---------------------------------------------------------------

/// Means over rows; delay and hops cover routed flows only.
struct RowSummary {
  std::size_t rows = 0;
  std::size_t routed = 0;
  double mean_delay_ms = 0.0;
  double mean_goodput_mbps = 0.0;
  double mean_throughput_ratio = 0.0;
  double mean_loss_ratio = 0.0;
  double mean_hops = 0.0;
  double mean_utility = 0.0;
};

inline RowSummary summarize_rows(const std::vector<ResultRecord>& rows,
                                 const std::function<bool(const ResultRecord&)>& keep = {}) {
  RowSummary s;
  for (const auto& r : rows) {
    if (keep && !keep(r)) continue;
    ++s.rows;
    s.mean_goodput_mbps += r.goodput_mbps();
    s.mean_throughput_ratio += r.throughput_ratio;
    s.mean_loss_ratio += r.loss_ratio;
    s.mean_utility += r.utility;
    if (r.rejected()) continue;
    ++s.routed;
    s.mean_delay_ms += r.delay_ms;
    s.mean_hops += static_cast<double>(r.hops);
  }
  if (s.rows) {
    const double n = static_cast<double>(s.rows);
    s.mean_goodput_mbps /= n;
    s.mean_throughput_ratio /= n;
    s.mean_loss_ratio /= n;
    s.mean_utility /= n;
  }
  if (s.routed) {
    s.mean_delay_ms /= static_cast<double>(s.routed);
    s.mean_hops /= static_cast<double>(s.routed);
  }
  return s;
}

// --- export ----------------------------------------------------------------------

namespace detail {

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Splits one CSV line honoring double-quoted fields.
inline std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted CSV field");
  return out;
}

inline double number_field(const std::string& s, std::string_view col) {
  auto v = parse_double(s);
  if (!v) throw ParseError("bad number in column " + std::string(col) + ": '" + s + "'");
  return *v;
}

template <typename Int>
Int integer_field(const std::string& s, std::string_view col) {
  auto v = parse_int<Int>(s);
  if (!v) throw ParseError("bad integer in column " + std::string(col) + ": '" + s + "'");
  return *v;
}

}  // namespace detail

inline std::string format_results_csv(const std::vector<ResultRecord>& rows) {
  std::string out;
  for (std::size_t i = 0; i < std::size(kResultColumns); ++i) {
    if (i) out += ',';
    out += kResultColumns[i];
  }
  out += '\n';
  using detail::csv_field;
  using detail::format_double;
  for (const auto& r : rows) {
    out += csv_field(r.scenario) + ',' + std::to_string(r.seed) + ',' + csv_field(r.policy) + ',' +
           std::to_string(r.controller_count) + ',' + std::to_string(r.flow_id) + ',' + csv_field(r.src) + ',' +
           csv_field(r.dst) + ',' + format_double(r.delay_ms) + ',' + format_double(r.setup_delay_ms) + ',' +
           format_double(r.throughput_mbps) + ',' + format_double(r.throughput_ratio) + ',' +
           format_double(r.loss_ratio) + ',' + std::to_string(r.hops) + ',' + format_double(r.utility) + '\n';
  }
  return out;
}

inline std::vector<ResultRecord> parse_results_csv(std::string_view text) {
  std::vector<ResultRecord> rows;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto f = detail::csv_split(line);
    if (f.size() != std::size(kResultColumns)) throw ParseError("CSV row has " + std::to_string(f.size()) + " fields");
    if (header) {
      for (std::size_t i = 0; i < f.size(); ++i)
        if (f[i] != kResultColumns[i]) throw ParseError("unexpected CSV column '" + f[i] + "'");
      header = false;
      continue;
    }
    ResultRecord r;
    r.scenario = f[0];
    r.seed = detail::integer_field<std::uint64_t>(f[1], "seed");
    r.policy = f[2];
    r.controller_count = detail::integer_field<int>(f[3], "controller_count");
    r.flow_id = detail::integer_field<std::uint64_t>(f[4], "flow_id");
    r.src = f[5];
    r.dst = f[6];
    r.delay_ms = detail::number_field(f[7], "delay_ms");
    r.setup_delay_ms = detail::number_field(f[8], "setup_delay_ms");
    r.throughput_mbps = detail::number_field(f[9], "throughput_mbps");
    r.throughput_ratio = detail::number_field(f[10], "throughput_ratio");
    r.loss_ratio = detail::number_field(f[11], "loss_ratio");
    r.hops = detail::integer_field<std::size_t>(f[12], "hops");
    r.utility = detail::number_field(f[13], "utility");
    rows.push_back(std::move(r));
  }
  if (header) throw ParseError("CSV without header");
  return rows;
}

/// One JSON object per line; numbers keep the same shortest round-trip text
/// as the CSV export.
inline std::string format_results_jsonl(const std::vector<ResultRecord>& rows) {
  using detail::format_double;
  auto str = [](const std::string& s) { return nlohmann::json(s).dump(); };
  std::string out;
  for (const auto& r : rows) {
    out += "{\"scenario\":" + str(r.scenario) + ",\"seed\":" + std::to_string(r.seed) + ",\"policy\":" + str(r.policy) +
           ",\"controller_count\":" + std::to_string(r.controller_count) + ",\"flow_id\":" + std::to_string(r.flow_id) +
           ",\"src\":" + str(r.src) + ",\"dst\":" + str(r.dst) + ",\"delay_ms\":" + format_double(r.delay_ms) +
           ",\"setup_delay_ms\":" + format_double(r.setup_delay_ms) +
           ",\"throughput_mbps\":" + format_double(r.throughput_mbps) +
           ",\"throughput_ratio\":" + format_double(r.throughput_ratio) +
           ",\"loss_ratio\":" + format_double(r.loss_ratio) + ",\"hops\":" + std::to_string(r.hops) +
           ",\"utility\":" + format_double(r.utility) + "}\n";
  }
  return out;
}

inline std::vector<ResultRecord> parse_results_jsonl(std::string_view text) {
  std::vector<ResultRecord> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto num = [&](const char* k) { return j.at(k).get<double>(); };
      ResultRecord r;
      r.scenario = j.at("scenario").get<std::string>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.policy = j.at("policy").get<std::string>();
      r.controller_count = j.at("controller_count").get<int>();
      r.flow_id = j.at("flow_id").get<std::uint64_t>();
      r.src = j.at("src").get<std::string>();
      r.dst = j.at("dst").get<std::string>();
      r.delay_ms = num("delay_ms");
      r.setup_delay_ms = num("setup_delay_ms");
      r.throughput_mbps = num("throughput_mbps");
      r.throughput_ratio = num("throughput_ratio");
      r.loss_ratio = num("loss_ratio");
      r.hops = j.at("hops").get<std::size_t>();
      r.utility = num("utility");
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad JSON-lines record: ") + e.what());
    }
  }
  return rows;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline void export_results(const std::vector<ResultRecord>& rows, const std::filesystem::path& path,
                           ExportFormat format) {
  detail::write_text(path, format == ExportFormat::csv ? format_results_csv(rows) : format_results_jsonl(rows));
}

inline std::vector<ResultRecord> import_results(const std::filesystem::path& path, ExportFormat format) {
  const auto text = detail::read_text(path);
  return format == ExportFormat::csv ? parse_results_csv(text) : parse_results_jsonl(text);
}

inline std::string format_training_log(const std::vector<TrainingLogEntry>& log) {
  using detail::format_double;
  std::string out;
  for (const auto& e : log) {
    out += "{\"scenario\":" + nlohmann::json(e.scenario).dump() + ",\"policy\":" + nlohmann::json(e.policy).dump() +
           ",\"seed\":" + std::to_string(e.seed) + ",\"round\":" + std::to_string(e.round) +
           ",\"node\":" + std::to_string(e.node) + ",\"episodes\":" + std::to_string(e.episodes) +
           ",\"samples\":" + std::to_string(e.samples) + ",\"mean_reward\":" + format_double(e.mean_reward) +
           ",\"success_ratio\":" + format_double(e.success_ratio) + ",\"mean_loss\":" + format_double(e.mean_loss) +
           ",\"global_digest\":\"" + digest_hex(e.global_digest) + "\"}\n";
  }
  return out;
}

inline std::string checkpoint_filename(const std::string& scenario, const Checkpoint& c) {
  return scenario + "_" + c.policy + "_seed" + std::to_string(c.seed) + ".weights";
}

}  // namespace sdnroute
