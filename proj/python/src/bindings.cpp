// Python bindings. Structured inputs and outputs cross the boundary as JSON
// text; the package __init__ converts them to and from dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <set>
#include <sstream>

#include "probediag/active_probing.hpp"
#include "probediag/bp_engine.hpp"
#include "probediag/bpea.hpp"
#include "probediag/error.hpp"
#include "probediag/exact_oracle.hpp"
#include "probediag/experiment.hpp"
#include "probediag/noisy_or.hpp"
#include "probediag/probe_design.hpp"
#include "probediag/split_tree.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace probediag;

namespace {

BpConfig bp_config_from(const json& j) {
  BpConfig c;
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.damping = j.value("damping", c.damping);
  if (j.contains("schedule")) {
    const auto s = j.at("schedule").get<std::string>();
    if (s == "synchronous") {
      c.schedule = Schedule::synchronous;
    } else if (s == "sequential") {
      c.schedule = Schedule::sequential;
    } else {
      throw InvalidArgument("unknown schedule '" + s + "'");
    }
  }
  c.validate();
  return c;
}

Evidence evidence_from(const json& j) {
  Evidence e;
  for (const auto& [k, v] : j.items()) e.observe(std::stoi(k), v.get<int>());
  return e;
}

std::string run_bp_json(const std::string& graph, const std::string& evidence, const std::string& config) {
  const BpResult r = run_bp(factor_graph_from_json(json::parse(graph)), evidence_from(json::parse(evidence)),
                            bp_config_from(json::parse(config)));
  json out;
  out["node_beliefs"] = r.node_beliefs;
  out["factor_beliefs"] = r.factor_beliefs;
  out["converged"] = r.converged;
  out["iterations"] = r.iterations;
  json scopes = json::array();
  for (const auto& f : r.graph.factors()) {
    scopes.push_back(approx_scope_entropy(r.graph, r.store, {f.id, f.scope.front(), EntropyMode::entropy, {}}).value);
  }
  out["scope_entropies"] = scopes;
  return out.dump();
}

std::string score_tests_json(const std::string& model, const std::string& evidence, const std::string& config) {
  const NoisyOrNetwork net = network_from_json(json::parse(model));
  const NoisyOrGraph ng = to_factor_graph(net);
  Evidence e;
  const json ev = json::parse(evidence);
  for (const auto& [k, v] : ev.items()) {
    e.observe(ng.test_variable[net.test_index(std::stoi(k))], v.get<int>());
  }
  const BpResult r = run_bp(ng.graph, e, bp_config_from(json::parse(config)));
  std::vector<TestFamily> fams;
  for (std::size_t i = 0; i < net.num_tests(); ++i) fams.push_back({ng.test_factor[i], ng.test_variable[i]});
  const ScoreBatch batch = score_all_tests(r.graph, r.store, fams);
  std::map<int, std::size_t> by_factor;
  for (std::size_t i = 0; i < ng.test_factor.size(); ++i) by_factor[ng.test_factor[i]] = i;
  json out = json::array();
  for (const auto& s : batch.scores) {
    out.push_back({{"test", net.tests()[by_factor.at(s.factor_id)].id},
                   {"A_term", s.a_term},
                   {"H_T_term", s.h_t},
                   {"score", s.score},
                   {"bp_converged", s.bp_converged}});
  }
  return json{{"scores", out}, {"notices", batch.notices}}.dump();
}

std::string exact_terms_json(const std::string& model, const std::string& evidence) {
  const NoisyOrNetwork net = network_from_json(json::parse(model));
  FaultPosterior post(net);
  std::set<std::size_t> seen;
  const json ev = json::parse(evidence);
  for (const auto& [k, v] : ev.items()) {
    const std::size_t i = net.test_index(std::stoi(k));
    post.observe(i, v.get<int>());
    seen.insert(i);
  }
  json terms = json::array();
  for (std::size_t i = 0; i < net.num_tests(); ++i) {
    if (seen.count(i)) continue;
    const auto t = post.test_terms(i);
    terms.push_back({{"test", net.tests()[i].id},
                     {"A_term", t.a_term},
                     {"H_T_term", t.h_t},
                     {"p_fail", t.p_fail},
                     {"selection_score", t.selection_score}});
  }
  return json{{"entropy_bits", post.entropy(LogBase::bits)},
              {"prior_entropy_bits", post.prior_entropy(LogBase::bits)},
              {"fault_marginals", post.fault_marginals()},
              {"terms", terms}}
      .dump();
}

std::string sample_world_json(const std::string& model, std::uint64_t seed) {
  const WorldSample w = sample_world(network_from_json(json::parse(model)), seed);
  return json{{"fault_state", w.fault_state}, {"outcomes", w.outcomes}, {"seed", w.seed}}.dump();
}

std::string run_session_json(const std::string& model, const std::string& world, const std::string& config) {
  const NoisyOrNetwork net = network_from_json(json::parse(model));
  const json wj = json::parse(world);
  WorldSample w;
  w.fault_state = wj.at("fault_state").get<std::vector<int>>();
  w.outcomes = wj.at("outcomes").get<std::vector<int>>();
  w.seed = wj.value("seed", std::uint64_t{0});
  const json cj = json::parse(config);
  SessionConfig c;
  c.scorer = scorer_from_string(cj.value("scorer", std::string("bpea")));
  c.stop_window = cj.value("stop_window", c.stop_window);
  c.stop_threshold = cj.value("stop_threshold", c.stop_threshold);
  c.warm_start = cj.value("warm_start", c.warm_start);
  c.oracle = cj.value("oracle", c.oracle);
  c.record_candidates = cj.value("record_candidates", c.record_candidates);
  if (cj.contains("bp")) c.bp = bp_config_from(cj.at("bp"));
  c.validate();
  const SessionTrace t = run_session(net, w, c);
  std::ostringstream csv;
  write_trace_csv(csv, t);
  json out = summary_json(t);
  out["trace_csv"] = csv.str();
  if (c.record_candidates && c.oracle && c.scorer == Scorer::bpea) {
    const ErrorReport r = relative_error_report(t);
    out["R_A"] = r.a_term.r;
    out["R_H"] = r.h_t.r;
  }
  return out.dump();
}

std::string design_probes_json(const std::string& topology, const std::vector<int>& stations,
                               const std::string& mode) {
  const ProbeInstance d =
      design_probe_set(topology_from_json(json::parse(topology)), stations, probe_design_mode_from_string(mode));
  return json{{"probes", to_json(d.probes)},
              {"detection_complete", d.detection_complete},
              {"diagnosis_complete", d.diagnosis_complete},
              {"notices", d.notices}}
      .dump();
}

std::string split_tree_json(const std::string& instance, const std::string& criterion) {
  const SplitInstance inst = split_instance_from_json(json::parse(instance));
  const DiagnosisTree t = build_greedy_tree(inst.space, inst.tests, split_criterion_from_string(criterion));
  validate_tree(t, inst.space, inst.tests);
  return to_json(t, inst.space).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Probe selection and split-tree diagnostics";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ContradictionError>(m, "ContradictionError", PyExc_RuntimeError);
  py::register_exception<SizeGuardError>(m, "SizeGuardError", PyExc_RuntimeError);

  m.def("run_bp", &run_bp_json, py::arg("graph"), py::arg("evidence"), py::arg("config"));
  m.def("score_tests", &score_tests_json, py::arg("model"), py::arg("evidence"), py::arg("config"));
  m.def("exact_terms", &exact_terms_json, py::arg("model"), py::arg("evidence"));
  m.def("sample_world", &sample_world_json, py::arg("model"), py::arg("seed"));
  m.def("run_session", &run_session_json, py::arg("model"), py::arg("world"), py::arg("config"));
  m.def("generate_topology",
        [](int nodes, int attachment, std::uint64_t seed) {
          return to_json(generate_topology(nodes, attachment, seed)).dump();
        },
        py::arg("nodes"), py::arg("attachment"), py::arg("seed"));
  m.def("design_probes", &design_probes_json, py::arg("topology"), py::arg("stations"), py::arg("mode"));
  m.def("split_tree", &split_tree_json, py::arg("instance"), py::arg("criterion"));
  m.def("optimal_tree_cost",
        [](const std::string& instance) {
          const SplitInstance inst = split_instance_from_json(json::parse(instance));
          return optimal_tree_cost(inst.space, inst.tests);
        },
        py::arg("instance"));
  m.def("equivalence_check", &equivalence_check, py::arg("n"));
  m.def("ratio_scan",
        [](int n) {
          const RatioScan s = ratio_scan(n);
          return py::dict(py::arg("max_entropy_ratio") = s.max_entropy_ratio,
                          py::arg("argmax_x_star") = s.argmax_x_star, py::arg("argmax_x") = s.argmax_x,
                          py::arg("balance_within_bound") = s.balance_within_bound, py::arg("points") = s.points);
        },
        py::arg("n"));
  m.def("markov_truncation",
        [](double alpha, int n, double c) {
          const MarkovTruncation t = markov_truncation(alpha, n, c);
          py::object tail = t.exact_tail ? py::object(py::float_(*t.exact_tail)) : py::object(py::none());
          return py::dict(py::arg("max_faults") = t.max_faults, py::arg("mass_bound") = t.mass_bound,
                          py::arg("exact_tail") = tail);
        },
        py::arg("alpha"), py::arg("n"), py::arg("c"));
  m.def("run_experiment",
        [](const std::string& config, const std::string& out_dir) {
          py::gil_scoped_release release;
          const ExperimentResult r = run_experiment(experiment_config_from_json(json::parse(config)),
                                                    std::filesystem::path(out_dir));
          write_report(build_report(out_dir), out_dir);
          return r.sessions.size();
        },
        py::arg("config"), py::arg("out_dir"));
}
