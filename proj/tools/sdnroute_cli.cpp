// Command-line front end: topology inspection, training, evaluation, and the
// two studies.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sdnroute/sdnroute.hpp"

namespace fs = std::filesystem;
using namespace sdnroute;

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string topology;
  std::string format = "csv";
  std::string weights;
  std::string policy = "drl";
  int verbosity = 0;
};

ExportFormat export_format(const Options& o) { return o.format == "jsonl" ? ExportFormat::jsonl : ExportFormat::csv; }

std::string extension(const Options& o) { return o.format == "jsonl" ? ".jsonl" : ".csv"; }

Scenario load(const Options& o) {
  if (o.config.empty()) throw ValidationError("--config is required");
  if (!fs::exists(o.config)) throw ValidationError("config file not found: " + o.config);
  Scenario sc = load_scenario(o.config);
  if (o.seed) sc.seeds = {*o.seed};
  if (!o.topology.empty()) sc.topology = o.topology;
  sc.validate();
  return sc;
}

StudyOptions study_options(const Options& o) {
  StudyOptions so;
  so.jobs = o.jobs;
  if (o.verbosity > 0) so.log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  return so;
}

void info(const Options& o, const std::string& msg) {
  if (o.verbosity >= 0) std::cout << msg << '\n';
}

int cmd_inspect(const Options& o) {
  Topology t = o.topology.empty() ? scenario_topology(load(o)) : resolve_topology(o.topology);
  std::cout << "topology " << t.name() << '\n';
  std::cout << "nodes " << t.node_count() << '\n';
  std::cout << "links " << t.link_count() << '\n';
  std::cout << "domains " << t.domain_count() << '\n';
  for (std::size_t i = 0; i < t.node_count(); ++i) {
    const auto& n = t.node(node_id(i));
    std::cout << "  " << n.name << ' ' << (n.role == NodeRole::host ? "host" : "switch") << " domain="
              << (n.domain ? std::to_string(*n.domain) : std::string("-")) << '\n';
  }
  return 0;
}

int cmd_study_control(const Options& o) {
  const Scenario sc = load(o);
  const auto rows = run_distributed_control_study(sc, study_options(o));
  const fs::path path = fs::path(o.out) / (sc.name + extension(o));
  export_results(rows, path, export_format(o));
  info(o, "wrote " + std::to_string(rows.size()) + " rows to " + path.string());
  return 0;
}

void write_training_outputs(const Scenario& sc, const RoutingStudyResult& res, const fs::path& out) {
  for (const auto& c : res.checkpoints) {
    const auto p = out / "checkpoints" / checkpoint_filename(sc.name, c);
    fs::create_directories(p.parent_path());
    save_weights(c.weights, p.string());
  }
  detail::write_text(out / (sc.name + "_training.jsonl"), format_training_log(res.training_log));
}

int cmd_study_routing(const Options& o) {
  const Scenario sc = load(o);
  const auto res = run_intelligent_routing_study(sc, study_options(o));
  const fs::path out(o.out);
  const fs::path path = out / (sc.name + extension(o));
  export_results(res.rows, path, export_format(o));
  write_training_outputs(sc, res, out);
  info(o, "wrote " + std::to_string(res.rows.size()) + " rows to " + path.string());
  if (o.verbosity > 0) {
    for (const auto& p : sc.policies) {
      const auto s = summarize_rows(res.rows, [&](const ResultRecord& r) { return r.policy == p; });
      std::cerr << p << ": utility " << s.mean_utility << " delay_ms " << s.mean_delay_ms << " throughput_ratio "
                << s.mean_throughput_ratio << " loss " << s.mean_loss_ratio << " hops " << s.mean_hops << '\n';
    }
  }
  return 0;
}

int cmd_train(const Options& o) {
  Scenario sc = load(o);
  if (sc.study != StudyKind::routing) throw ValidationError("train needs a routing scenario");
  if (o.policy != "drl" && o.policy != "fdrl") throw ValidationError("--policy must be drl or fdrl");
  const Topology t = scenario_topology(sc);
  const TrainingSetup setup = routing_training_setup(sc, t);
  const FLConfig fl = o.policy == "drl" ? drl_config(sc) : sc.fl;
  RoutingStudyResult res;
  for (auto seed : sc.seeds) {
    const auto fr = run_federated_training(t, setup, fl, seed);
    for (const auto& rep : fr.reports)
      for (const auto& n : rep.nodes)
        res.training_log.push_back({sc.name, o.policy, seed, rep.round, n.node, n.episodes, n.sample_count,
                                    n.mean_reward, n.success_ratio, n.mean_loss, rep.global_digest});
    res.checkpoints.push_back({o.policy, seed, fr.final_weights});
    info(o, "trained " + o.policy + " seed " + std::to_string(seed) + " digest " +
                digest_hex(weights_digest(fr.final_weights)));
  }
  write_training_outputs(sc, res, o.out);
  return 0;
}

int cmd_evaluate(const Options& o) {
  const Scenario sc = load(o);
  if (sc.study != StudyKind::routing) throw ValidationError("evaluate needs a routing scenario");
  if (o.weights.empty()) throw ValidationError("--weights is required");
  if (!fs::exists(o.weights)) throw ValidationError("weights file not found: " + o.weights);
  const Topology t = scenario_topology(sc);
  const TrainingSetup setup = routing_training_setup(sc, t);
  const ModelWeights w = load_weights(o.weights);
  if (w.arch.input_size() != state_size(t) || w.arch.output_size() != t.link_count())
    throw DimensionError("weights do not match topology " + t.name());
  const auto eval = generate_traffic(t, setup.traffic, sc.eval_seed, sc.eval_flows);
  const int controllers = sc.controller_counts.front();
  ControllerModel cm = sc.controller;
  cm.controller_count = controllers;
  GreedyValuePolicy policy(o.policy, w, setup.context.norms);
  std::vector<ResultRecord> rows;
  const std::uint64_t seed = o.seed.value_or(sc.seeds.front());
  for (const auto& r : run_slotted(t, eval, policy, cm, seed, setup.context.netsim))
    rows.push_back(detail::make_record(t, sc, seed, o.policy, controllers, r, sc.reward, sc.norms));
  const fs::path path = fs::path(o.out) / (sc.name + "_eval" + extension(o));
  export_results(rows, path, export_format(o));
  const auto s = summarize_rows(rows);
  info(o, "utility " + detail::format_double(s.mean_utility) + " delay_ms " + detail::format_double(s.mean_delay_ms) +
              " throughput_ratio " + detail::format_double(s.mean_throughput_ratio) + " loss_ratio " +
              detail::format_double(s.mean_loss_ratio));
  return 0;
}

/// Figure specifications for the plotting tool, pointing at the study export.
int cmd_export_plots(const Options& o) {
  const Scenario sc = load(o);
  const fs::path out(o.out);
  const std::string csv = (out / (sc.name + ".csv")).string();
  std::vector<std::pair<std::string, nlohmann::ordered_json>> specs;
  auto spec = [&](const std::string& kind, std::vector<std::string> group) {
    nlohmann::ordered_json j;
    j["kind"] = kind;
    j["inputs"] = {csv};
    j["output"] = (out / "figures" / (sc.name + "_" + kind + ".png")).string();
    j["group_by"] = group;
    specs.emplace_back(sc.name + "_" + kind + ".figure.json", j);
  };
  if (sc.study == StudyKind::control) {
    spec("delay_series", {"controller_count", "src", "dst"});
    spec("controller_averages", {"controller_count"});
  } else {
    spec("policy_comparison", {"scenario", "policy"});
  }
  for (const auto& [name, j] : specs) {
    detail::write_text(out / name, j.dump(2) + "\n");
    info(o, "wrote " + (out / name).string());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and learning toolkit for multi-controller SDN routing"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Options o;
  int verbose = 0;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "More diagnostics on stderr (repeatable)");
  app.add_flag("-q,--quiet", quiet, "Suppress normal output");

  auto add_config = [&](CLI::App* c) { c->add_option("--config", o.config, "Scenario file (JSON)"); };
  auto add_out = [&](CLI::App* c) { c->add_option("--out", o.out, "Output directory")->capture_default_str(); };
  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Run only this seed instead of the scenario's list"); };
  auto add_topology = [&](CLI::App* c) {
    c->add_option("--topology", o.topology, "Builtin topology name or topology file (overrides the scenario)");
  };
  auto add_format = [&](CLI::App* c) {
    c->add_option("--format", o.format, "Result format")->check(CLI::IsMember({"csv", "jsonl"}))->capture_default_str();
  };
  auto add_jobs = [&](CLI::App* c) {
    c->add_option("--jobs", o.jobs, "Maximum concurrent seed cells")->check(CLI::PositiveNumber)->capture_default_str();
  };

  auto* inspect = app.add_subcommand("inspect", "Print node and link counts and the domain map");
  add_topology(inspect);
  add_config(inspect);

  auto* train = app.add_subcommand("train", "Train DRL or FDRL weights for a routing scenario");
  add_config(train);
  add_out(train);
  add_seed(train);
  add_topology(train);
  train->add_option("--policy", o.policy, "drl or fdrl")->check(CLI::IsMember({"drl", "fdrl"}))->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "Route the scenario's evaluation flows with saved weights");
  add_config(evaluate);
  add_out(evaluate);
  add_seed(evaluate);
  add_topology(evaluate);
  add_format(evaluate);
  evaluate->add_option("--weights", o.weights, "Checkpoint file");
  evaluate->add_option("--policy", o.policy, "Policy label for the rows")->capture_default_str();

  auto* control = app.add_subcommand("study-control", "Distributed-control study: delay per controller count");
  auto* routing = app.add_subcommand("study-routing", "Routing study: SPR against trained DRL/FDRL");
  for (auto* c : {control, routing}) {
    add_config(c);
    add_out(c);
    add_seed(c);
    add_jobs(c);
    add_topology(c);
    add_format(c);
  }

  auto* plots = app.add_subcommand("export-plots-data", "Write figure specifications for a study's export");
  add_config(plots);
  add_out(plots);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  o.verbosity = quiet ? -1 : verbose;

  try {
    if (*inspect) return cmd_inspect(o);
    if (*train) return cmd_train(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*control) return cmd_study_control(o);
    if (*routing) return cmd_study_routing(o);
    if (*plots) return cmd_export_plots(o);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
