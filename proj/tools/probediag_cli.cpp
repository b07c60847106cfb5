// probediag command line: instance generation, probe design, diagnosis
// sweeps, aggregation and split-tree analysis.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "probediag/error.hpp"
#include "probediag/experiment.hpp"
#include "probediag/split_tree.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace probediag;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* opt = cmd->add_option("--config", args.config, "JSON configuration file");
  if (config_required) opt->required();
  cmd->add_option("--seed", args.seed, "Base seed (overrides the config)");
  cmd->add_option("--out", args.out, "Output directory");
}

json load_config_json(const CommonArgs& args) {
  if (args.config.empty()) return json::object();
  return read_json_file(args.config);
}

ExperimentConfig load_experiment_config(const CommonArgs& args) {
  json j = load_config_json(args);
  if (args.seed) j["seed"] = *args.seed;
  return experiment_config_from_json(j);
}

void write_json(const fs::path& path, const json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

json probe_report(const ProbeInstance& inst) {
  json unresolved = json::array();
  for (const auto& [a, b] : inst.unresolved) unresolved.push_back({a, b});
  return {{"probes", inst.probes.probes.size()},
          {"stations", inst.topology.stations},
          {"detection_complete", inst.detection_complete},
          {"diagnosis_complete", inst.diagnosis_complete},
          {"unresolved_pairs", unresolved},
          {"notices", inst.notices}};
}

std::vector<int> first_placement(const ExperimentConfig& c, const Topology& t) {
  if (!c.station_ids.empty()) return c.station_ids;
  return default_stations(t, c.stations.front());
}

int cmd_generate(const CommonArgs& args) {
  const ExperimentConfig c = load_experiment_config(args);
  const fs::path out = args.out;
  fs::create_directories(out);
  Topology t = load_or_generate_topology(c);
  const ProbeInstance inst = design_probe_set(t, first_placement(c, t), c.design);
  t.stations = inst.topology.stations;
  const NoisyOrNetwork net = NoisyOrNetwork::homogeneous(
      t.num_nodes, c.alpha.front(), inst.probes.parent_sets(), c.rho.front(), inst.probes.ids());
  write_json(out / "topology.json", to_json(t));
  write_json(out / "probes.json", to_json(inst.probes));
  write_json(out / "model.json", to_json(net));
  write_json(out / "design.json", probe_report(inst));
  return 0;
}

int cmd_design(const CommonArgs& args, const std::string& topology_file) {
  ExperimentConfig c = load_experiment_config(args);
  if (!topology_file.empty()) c.topology_file = topology_file;
  const fs::path out = args.out;
  fs::create_directories(out);
  const Topology t = load_or_generate_topology(c);
  std::vector<int> stations = first_placement(c, t);
  if (c.station_ids.empty() && !t.stations.empty() && c.topology_file) stations = t.stations;
  const ProbeInstance inst = design_probe_set(t, stations, c.design);
  write_json(out / "probes.json", to_json(inst.probes));
  write_json(out / "design.json", probe_report(inst));
  return 0;
}

int cmd_diagnose(const CommonArgs& args, const std::string& model, const std::string& probes) {
  ExperimentConfig c = load_experiment_config(args);
  if (!model.empty()) c.model_file = model;
  if (!probes.empty()) c.probes_file = probes;
  const fs::path out = args.out;
  const ExperimentResult r = run_experiment(c, out);
  json notices = r.notices;
  write_json(out / "notices.json", notices);
  std::size_t aborted = 0;
  for (const auto& s : r.sessions) aborted += s.trace.final.aborted ? 1 : 0;
  std::cout << json{{"sessions", r.sessions.size()}, {"aborted", aborted}, {"out", out.string()}}.dump()
            << "\n";
  return 0;
}

int cmd_report(const CommonArgs& args, const std::string& traces) {
  const fs::path in = traces.empty() ? fs::path(args.out) : fs::path(traces);
  const Report report = build_report(in);
  write_report(report, args.out);
  std::cout << json{{"rows", report.rows.size()}, {"sessions", report.sessions.size()}}.dump() << "\n";
  return 0;
}

int cmd_split_tree(const CommonArgs& args, const std::string& instance_file,
                   const std::string& criterion_arg) {
  const json cfg = load_config_json(args);
  const json st = cfg.contains("split_tree") ? cfg.at("split_tree") : cfg;
  std::string instance_path = instance_file;
  if (instance_path.empty() && st.contains("instance")) instance_path = st.at("instance").get<std::string>();
  std::string criterion = criterion_arg;
  if (criterion.empty()) criterion = st.value("criterion", std::string("entropy"));

  const fs::path out = args.out;
  fs::create_directories(out);
  json report;
  if (!instance_path.empty() || st.contains("states")) {
    const SplitInstance inst =
        split_instance_from_json(instance_path.empty() ? st : read_json_file(instance_path));
    std::vector<SplitCriterion> crits;
    if (criterion == "both") {
      crits = {SplitCriterion::balance, SplitCriterion::entropy};
    } else {
      crits = {split_criterion_from_string(criterion)};
    }
    for (SplitCriterion c : crits) {
      const DiagnosisTree tree = build_greedy_tree(inst.space, inst.tests, c);
      validate_tree(tree, inst.space, inst.tests);
      write_json(out / (std::string("tree_") + to_string(c) + ".json"), to_json(tree, inst.space));
      report["trees"][to_string(c)] = {{"cost", tree.cost},
                                       {"leaves", tree.leaves().size()},
                                       {"argmins_unique", tree.argmins_unique}};
    }
    if (inst.space.size() <= kOptimalMaxStates && inst.tests.size() <= kOptimalMaxTests) {
      const double opt = optimal_tree_cost(inst.space, inst.tests);
      report["optimal_cost"] = opt;
      for (auto& [name, t] : report["trees"].items()) {
        t["ratio_to_optimal"] = opt > 0.0 ? json(t["cost"].get<double>() / opt) : json(nullptr);
      }
    } else if (st.value("optimal", false)) {
      optimal_tree_cost(inst.space, inst.tests);  // raises the budget error
    }
  }
  if (st.contains("equivalence_max_n")) {
    const int max_n = st.at("equivalence_max_n").get<int>();
    json failures = json::array();
    for (int n = 2; n <= max_n; ++n) {
      if (!equivalence_check(n)) failures.push_back(n);
    }
    report["equivalence"] = {{"max_n", max_n}, {"failures", failures}};
  }
  if (st.contains("ratio_n")) {
    const RatioScan scan = ratio_scan(st.at("ratio_n").get<int>());
    report["ratio_scan"] = {{"n", st.at("ratio_n")},
                            {"max_entropy_ratio", scan.max_entropy_ratio},
                            {"x_star", scan.argmax_x_star},
                            {"x", scan.argmax_x},
                            {"balance_within_1_plus_2a", scan.balance_within_bound},
                            {"points", scan.points}};
  }
  if (st.contains("markov")) {
    const json& m = st.at("markov");
    const MarkovTruncation t =
        markov_truncation(m.at("alpha").get<double>(), m.at("N").get<int>(), m.at("c").get<double>());
    report["markov"] = {{"max_faults", t.max_faults},
                        {"mass_bound", t.mass_bound},
                        {"exact_tail", t.exact_tail ? json(*t.exact_tail) : json(nullptr)}};
  }
  if (report.is_null()) throw InvalidArgument("split-tree needs an instance or a scan request");
  write_json(out / "split_report.json", report);
  std::cout << report.dump() << "\n";
  return 0;
}

void print_error(const char* kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probe-based fault diagnosis with belief-propagation entropy scores"};
  app.require_subcommand(1);

  CommonArgs gen_args, design_args, diag_args, report_args, split_args;
  std::string design_topology, diag_model, diag_probes, report_traces, split_instance,
      split_criterion;

  auto* gen = app.add_subcommand("generate", "Generate a topology, probe set and model");
  add_common(gen, gen_args, false);

  auto* design = app.add_subcommand("design-probes", "Design a probe set for a topology");
  add_common(design, design_args, false);
  design->add_option("--topology", design_topology, "Topology JSON file");

  auto* diag = app.add_subcommand("diagnose", "Run active-probing sessions");
  add_common(diag, diag_args, false);
  diag->add_option("--model", diag_model, "Noisy-OR model JSON (skips the sweep)");
  diag->add_option("--probes", diag_probes, "Probe set JSON restricting the candidates");

  auto* rep = app.add_subcommand("report", "Aggregate a diagnose output directory");
  add_common(rep, report_args, false);
  rep->add_option("--traces", report_traces, "Diagnose output directory (default: --out)");

  auto* split = app.add_subcommand("split-tree", "Greedy split trees, ratio and truncation checks");
  add_common(split, split_args, false);
  split->add_option("--instance", split_instance, "Split-tree instance JSON");
  split->add_option("--criterion", split_criterion, "balance, entropy or both");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*gen) return cmd_generate(gen_args);
    if (*design) return cmd_design(design_args, design_topology);
    if (*diag) return cmd_diagnose(diag_args, diag_model, diag_probes);
    if (*rep) return cmd_report(report_args, report_traces);
    if (*split) return cmd_split_tree(split_args, split_instance, split_criterion);
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return 1;
  } catch (const fs::filesystem_error& e) {
    print_error("io", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 1;
}
