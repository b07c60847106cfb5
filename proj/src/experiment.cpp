#include "probediag/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "probediag/error.hpp"
#include "probediag/exact_oracle.hpp"
#include "probediag/rng.hpp"

namespace probediag {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_g(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Rows of a CSV file keyed by header name.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty CSV");
  const auto header = split_csv_line(line);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw IoError(path.string() + ": row has " + std::to_string(cells.size()) +
                    " fields, header has " + std::to_string(header.size()));
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

double to_double(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(path.string() + ": bad number '" + s + "'");
  }
}

SessionConfig session_config_for(const ExperimentConfig& config, const std::string& scorer,
                                 bool oracle_ok) {
  SessionConfig s;
  s.scorer = scorer == "exact" ? Scorer::exact : Scorer::bpea;
  s.warm_start = scorer != "bpea-cold";
  s.stop_window = config.stop_window;
  s.stop_threshold = config.stop_threshold;
  s.bp = config.bp;
  s.seed = config.seed;
  s.oracle = config.oracle && oracle_ok;
  s.record_candidates = scorer == "bpea" && config.record_candidates && s.oracle;
  s.timing = config.timing;
  return s;
}

std::string session_stem(int sample, const std::string& scorer) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "s%03d_%s", sample, scorer.c_str());
  return buf;
}

struct Cell {
  CellKey key;
  NoisyOrNetwork network;
  std::vector<int> candidates;  // test positions
  bool oracle_ok = true;
  std::size_t probe_count = 0;
  std::vector<std::string> notices;
  std::uint64_t seed = 0;
};

template <class T>
std::optional<double> mean_of(const std::vector<T>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

const char* to_string(ProbeDesignMode m) {
  switch (m) {
    case ProbeDesignMode::designed: return "designed";
    case ProbeDesignMode::designed_plus_singles: return "designed+singles";
    case ProbeDesignMode::all_candidates: return "all";
  }
  return "designed";
}

ProbeDesignMode probe_design_mode_from_string(const std::string& s) {
  if (s == "designed") return ProbeDesignMode::designed;
  if (s == "designed+singles") return ProbeDesignMode::designed_plus_singles;
  if (s == "all") return ProbeDesignMode::all_candidates;
  throw InvalidArgument("unknown probe design '" + s + "' (designed, designed+singles, all)");
}

void ExperimentConfig::validate() const {
  if (!topology_file && nodes < 2) throw InvalidArgument("nodes must be >= 2");
  if (attachment < 1) throw InvalidArgument("attachment must be >= 1");
  if (!model_file) {
    if (stations.empty() && station_ids.empty()) throw InvalidArgument("stations grid is empty");
    for (int k : stations) {
      if (k < 1) throw InvalidArgument("station counts must be >= 1");
    }
    if (alpha.empty()) throw InvalidArgument("alpha grid is empty");
    if (rho.empty()) throw InvalidArgument("rho grid is empty");
    for (double a : alpha) {
      if (!(a >= 0.0 && a <= 1.0)) throw InvalidArgument("alpha values must lie in [0, 1]");
    }
    for (double r : rho) {
      if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgument("rho values must lie in [0, 1]");
    }
  }
  if (samples < 1) throw InvalidArgument("samples must be >= 1");
  if (scorers.empty()) throw InvalidArgument("scorers list is empty");
  for (const auto& s : scorers) {
    if (std::find(kKnownScorers.begin(), kKnownScorers.end(), s) == kKnownScorers.end()) {
      throw InvalidArgument("unknown scorer '" + s + "'");
    }
  }
  if (std::set<std::string>(scorers.begin(), scorers.end()).size() != scorers.size()) {
    throw InvalidArgument("scorers list has duplicates");
  }
  if (stop_window < 1) throw InvalidArgument("stop_window must be >= 1");
  if (!(stop_threshold >= 0.0)) throw InvalidArgument("stop_threshold must be >= 0");
  if (threads < 0) throw InvalidArgument("threads must be >= 0");
  bp.validate();
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
    static const std::set<std::string> known = {
        "topology", "model", "probes", "stations", "station_ids", "design", "alpha", "rho",
        "samples", "scorers", "oracle", "record_candidates", "stop_window", "stop_threshold",
        "bp", "seed", "threads", "timing", "split_tree"};
    for (const auto& [key, _] : j.items()) {
      if (!known.count(key)) throw InvalidArgument("unknown config key '" + key + "'");
    }
    if (j.contains("topology")) {
      const json& t = j.at("topology");
      if (t.contains("file")) c.topology_file = t.at("file").get<std::string>();
      c.nodes = t.value("nodes", c.nodes);
      c.attachment = t.value("attachment", c.attachment);
    }
    if (j.contains("model")) c.model_file = j.at("model").get<std::string>();
    if (j.contains("probes")) c.probes_file = j.at("probes").get<std::string>();
    auto list_or_scalar = [&](const char* key, auto& target) {
      if (!j.contains(key)) return;
      using V = typename std::decay_t<decltype(target)>::value_type;
      const json& v = j.at(key);
      target = v.is_array() ? v.get<std::vector<V>>() : std::vector<V>{v.get<V>()};
    };
    list_or_scalar("stations", c.stations);
    if (j.contains("station_ids")) c.station_ids = j.at("station_ids").get<std::vector<int>>();
    if (j.contains("design")) c.design = probe_design_mode_from_string(j.at("design").get<std::string>());
    list_or_scalar("alpha", c.alpha);
    list_or_scalar("rho", c.rho);
    list_or_scalar("scorers", c.scorers);
    c.samples = j.value("samples", c.samples);
    c.oracle = j.value("oracle", c.oracle);
    c.record_candidates = j.value("record_candidates", c.record_candidates);
    c.stop_window = j.value("stop_window", c.stop_window);
    c.stop_threshold = j.value("stop_threshold", c.stop_threshold);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.timing = j.value("timing", c.timing);
    if (j.contains("bp")) {
      const json& b = j.at("bp");
      c.bp.max_iterations = b.value("max_iterations", c.bp.max_iterations);
      c.bp.tolerance = b.value("tolerance", c.bp.tolerance);
      c.bp.damping = b.value("damping", c.bp.damping);
      const std::string sched = b.value("schedule", std::string("synchronous"));
      if (sched == "synchronous") c.bp.schedule = Schedule::synchronous;
      else if (sched == "sequential") c.bp.schedule = Schedule::sequential;
      else throw InvalidArgument("unknown schedule '" + sched + "'");
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json t;
  if (c.topology_file) t["file"] = *c.topology_file;
  t["nodes"] = c.nodes;
  t["attachment"] = c.attachment;
  json j;
  j["topology"] = t;
  if (c.model_file) j["model"] = *c.model_file;
  if (c.probes_file) j["probes"] = *c.probes_file;
  j["stations"] = c.stations;
  if (!c.station_ids.empty()) j["station_ids"] = c.station_ids;
  j["design"] = to_string(c.design);
  j["alpha"] = c.alpha;
  j["rho"] = c.rho;
  j["samples"] = c.samples;
  j["scorers"] = c.scorers;
  j["oracle"] = c.oracle;
  j["record_candidates"] = c.record_candidates;
  j["stop_window"] = c.stop_window;
  j["stop_threshold"] = c.stop_threshold;
  j["bp"] = {{"max_iterations", c.bp.max_iterations},
             {"tolerance", c.bp.tolerance},
             {"damping", c.bp.damping},
             {"schedule", c.bp.schedule == Schedule::sequential ? "sequential" : "synchronous"}};
  j["seed"] = c.seed;
  j["timing"] = c.timing;
  return j;
}

ProbeInstance design_probe_set(const Topology& topology, const std::vector<int>& stations,
                               ProbeDesignMode mode) {
  ProbeInstance inst;
  inst.topology = topology;
  inst.topology.stations = stations;
  inst.topology.validate();
  CandidateList cands = candidate_probes(inst.topology, stations);
  inst.notices = cands.notices;
  std::vector<int> elements(static_cast<std::size_t>(topology.num_nodes));
  for (int i = 0; i < topology.num_nodes; ++i) elements[static_cast<std::size_t>(i)] = i;

  if (mode == ProbeDesignMode::all_candidates) {
    inst.probes.probes = cands.probes;
  } else {
    const ProbeSet cover = greedy_detection_cover(cands.probes, elements);
    const DiagnosisAugmentation aug = augment_for_diagnosis(cover, cands.probes, elements);
    inst.probes = aug.probes;
    if (mode == ProbeDesignMode::designed_plus_singles) {
      int next_id = 0;
      for (const auto& p : cands.probes) next_id = std::max(next_id, p.id + 1);
      for (auto& p : single_node_probes(topology.num_nodes, next_id)) {
        inst.probes.probes.push_back(p);
      }
    }
  }
  inst.probes.index(topology.num_nodes);
  inst.detection_complete = true;
  for (const auto& c : inst.probes.coverage) {
    if (c.empty()) inst.detection_complete = false;
  }
  inst.unresolved = confused_pairs(inst.probes, elements);
  inst.diagnosis_complete = inst.unresolved.empty();
  return inst;
}

Topology load_or_generate_topology(const ExperimentConfig& config) {
  if (config.topology_file) return topology_from_json(read_json_file(*config.topology_file));
  return generate_topology(config.nodes, config.attachment, config.seed);
}

std::string CellKey::name() const {
  if (fixed_model) return "model";
  return "k" + std::to_string(stations) + "_a" + fmt_g(alpha) + "_r" + fmt_g(rho);
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::optional<fs::path>& out_dir) {
  config.validate();
  ExperimentResult result;
  std::vector<Cell> cells;
  std::optional<Topology> topology;

  if (config.model_file) {
    Cell cell;
    cell.key.fixed_model = true;
    cell.network = network_from_json(read_json_file(*config.model_file));
    if (config.probes_file) {
      const ProbeSet ps = probe_set_from_json(read_json_file(*config.probes_file),
                                              static_cast<int>(cell.network.num_faults()));
      for (int id : ps.ids()) cell.candidates.push_back(static_cast<int>(cell.network.test_index(id)));
      std::sort(cell.candidates.begin(), cell.candidates.end());
    } else {
      for (std::size_t i = 0; i < cell.network.num_tests(); ++i) cell.candidates.push_back(static_cast<int>(i));
    }
    cell.probe_count = cell.candidates.size();
    cells.push_back(std::move(cell));
  } else {
    topology = load_or_generate_topology(config);
    std::vector<std::vector<int>> placements;
    if (!config.station_ids.empty()) {
      placements.push_back(config.station_ids);
    } else {
      for (int k : config.stations) placements.push_back(default_stations(*topology, k));
    }
    for (const auto& stations : placements) {
      const ProbeInstance inst = design_probe_set(*topology, stations, config.design);
      for (double a : config.alpha) {
        for (double r : config.rho) {
          Cell cell;
          cell.key.stations = static_cast<int>(stations.size());
          cell.key.alpha = a;
          cell.key.rho = r;
          cell.network = NoisyOrNetwork::homogeneous(topology->num_nodes, a,
                                                     inst.probes.parent_sets(), r,
                                                     inst.probes.ids());
          for (std::size_t i = 0; i < cell.network.num_tests(); ++i) cell.candidates.push_back(static_cast<int>(i));
          cell.probe_count = inst.probes.probes.size();
          cell.notices = inst.notices;
          if (!inst.diagnosis_complete) {
            cell.notices.push_back(std::to_string(inst.unresolved.size()) +
                                   " element pairs share a single-fault signature");
          }
          cells.push_back(std::move(cell));
        }
      }
    }
  }

  for (std::size_t c = 0; c < cells.size(); ++c) {
    Cell& cell = cells[c];
    cell.seed = mix_seed(config.seed, 1000 + c);
    const double states = std::ldexp(1.0, static_cast<int>(std::min<std::size_t>(cell.network.num_faults(), 1000)));
    cell.oracle_ok = states <= static_cast<double>(kDefaultStateBudget);
    if (config.oracle && !cell.oracle_ok) {
      cell.notices.push_back("oracle skipped: " + std::to_string(cell.network.num_faults()) +
                             " faults exceed the exact state budget");
    }
    for (const auto& n : cell.notices) result.notices.push_back(cell.key.name() + ": " + n);
  }

  struct Job {
    std::size_t cell;
    int sample;
    std::string scorer;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (int s = 0; s < config.samples; ++s) {
      for (const auto& sc : config.scorers) {
        if (sc == "exact" && !cells[c].oracle_ok) continue;
        jobs.push_back({c, s, sc});
      }
    }
  }

  if (out_dir) {
    fs::create_directories(*out_dir / "cells");
    write_file_atomic(*out_dir / "config.json", to_json(config).dump(2) + "\n");
    if (topology) write_file_atomic(*out_dir / "topology.json", to_json(*topology).dump(2) + "\n");
    const std::string fingerprint = to_json(config).dump();
    for (const Cell& cell : cells) {
      const fs::path dir = *out_dir / "cells" / cell.key.name();
      fs::create_directories(dir);
      json meta = {{"cell", cell.key.name()},
                   {"stations", cell.key.stations},
                   {"alpha", cell.key.alpha},
                   {"rho", cell.key.rho},
                   {"faults", cell.network.num_faults()},
                   {"probes", cell.probe_count},
                   {"oracle", config.oracle && cell.oracle_ok},
                   {"notices", cell.notices},
                   {"config", fingerprint}};
      write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
      write_file_atomic(dir / "model.json", to_json(cell.network).dump(2) + "\n");
    }
  }

  std::vector<SessionRecord> records(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= jobs.size()) return;
      try {
        const Job& job = jobs[k];
        const Cell& cell = cells[job.cell];
        const WorldSample world =
            sample_world(cell.network, mix_seed(cell.seed, static_cast<std::uint64_t>(job.sample)));
        const SessionConfig sc = session_config_for(config, job.scorer, cell.oracle_ok);
        SessionRecord rec;
        rec.cell = cell.key;
        rec.sample = job.sample;
        rec.scorer = job.scorer;
        rec.trace = run_session(cell.network, world, sc, cell.candidates);
        if (sc.record_candidates) {
          const ErrorReport er = relative_error_report(rec.trace);
          rec.r_a = er.a_term.r;
          rec.r_h = er.h_t.r;
        }
        if (out_dir) {
          const fs::path dir = *out_dir / "cells" / cell.key.name();
          const std::string stem = session_stem(job.sample, job.scorer);
          std::ostringstream trace_csv;
          write_trace_csv(trace_csv, rec.trace);
          write_file_atomic(dir / (stem + ".trace.csv"), trace_csv.str());
          json summary = summary_json(rec.trace);
          summary["sample"] = job.sample;
          summary["cell"] = cell.key.name();
          write_file_atomic(dir / (stem + ".summary.json"), summary.dump(2) + "\n");
          if (sc.record_candidates) {
            std::ostringstream approx, exact;
            write_candidate_csv(approx, rec.trace, false);
            write_candidate_csv(exact, rec.trace, true);
            write_file_atomic(dir / (stem + ".cand_approx.csv"), approx.str());
            write_file_atomic(dir / (stem + ".cand_exact.csv"), exact.str());
          }
        }
        records[k] = std::move(rec);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(jobs.size());
        return;
      }
    }
  };
  int threads = config.threads > 0 ? config.threads
                                   : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min<int>(threads, static_cast<int>(std::max<std::size_t>(1, jobs.size())));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  result.sessions = std::move(records);
  return result;
}

Report build_report(const fs::path& run_dir) {
  const fs::path cells_dir = run_dir / "cells";
  if (!fs::is_directory(cells_dir)) {
    throw IoError(cells_dir.string() + ": no cells directory (not a diagnose output)");
  }
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(cells_dir)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw IoError(cells_dir.string() + ": no cells");

  Report report;
  std::optional<std::string> fingerprint;
  for (const fs::path& dir : dirs) {
    const json meta = read_json_file(dir / "meta.json");
    const std::string fp = meta.at("config").get<std::string>();
    if (fingerprint && *fingerprint != fp) {
      throw InvalidArgument(dir.string() + " was produced under a different configuration");
    }
    fingerprint = fp;

    ReportRow row;
    row.cell = meta.at("cell").get<std::string>();
    row.stations = meta.at("stations").get<int>();
    row.alpha = meta.at("alpha").get<double>();
    row.rho = meta.at("rho").get<double>();

    std::vector<fs::path> summaries;
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (name.size() > 13 && name.ends_with(".summary.json")) summaries.push_back(e.path());
    }
    std::sort(summaries.begin(), summaries.end());

    std::map<std::string, std::vector<double>> red, size, iters, cpu;
    std::vector<double> ra, rh;
    std::map<int, std::map<std::string, SessionMetrics>> by_sample;
    for (const fs::path& sp : summaries) {
      const std::string stem = sp.filename().string().substr(0, sp.filename().string().size() - 13);
      const json s = read_json_file(sp);
      SessionMetrics m;
      m.cell = row.cell;
      m.stations = row.stations;
      m.alpha = row.alpha;
      m.rho = row.rho;
      m.sample = s.at("sample").get<int>();
      m.scorer = stem.substr(stem.find('_') + 1);
      m.final_size = s.at("final_size").get<int>();
      if (!s.at("reduction_bits").is_null()) m.reduction_bits = s.at("reduction_bits").get<double>();
      m.aborted = s.at("aborted").get<bool>();

      const auto steps = read_csv(dir / (stem + ".trace.csv"));
      double it = 0.0, ms = 0.0;
      for (const auto& r : steps) {
        it += to_double(r.at("bp_iterations"), dir);
        ms += to_double(r.at("cpu_ms"), dir);
      }
      if (!steps.empty()) {
        m.mean_bp_iterations = it / static_cast<double>(steps.size());
        m.mean_cpu_ms = ms / static_cast<double>(steps.size());
      }

      const fs::path ap = dir / (stem + ".cand_approx.csv");
      const fs::path ep = dir / (stem + ".cand_exact.csv");
      if (fs::exists(ap) && fs::exists(ep)) {
        const auto arows = read_csv(ap), erows = read_csv(ep);
        if (arows.size() != erows.size()) throw IoError(ap.string() + ": candidate files misaligned");
        std::vector<std::vector<double>> a_h, a_H, h_h, h_H;
        std::string last_step;
        for (std::size_t i = 0; i < arows.size(); ++i) {
          if (arows[i].at("step") != erows[i].at("step") ||
              arows[i].at("candidate_id") != erows[i].at("candidate_id")) {
            throw IoError(ap.string() + ": candidate files misaligned at row " + std::to_string(i));
          }
          if (i == 0 || arows[i].at("step") != last_step) {
            a_h.emplace_back(); a_H.emplace_back(); h_h.emplace_back(); h_H.emplace_back();
            last_step = arows[i].at("step");
          }
          a_h.back().push_back(to_double(arows[i].at("A_term"), ap));
          a_H.back().push_back(to_double(erows[i].at("A_term"), ep));
          h_h.back().push_back(to_double(arows[i].at("H_T_term"), ap));
          h_H.back().push_back(to_double(erows[i].at("H_T_term"), ep));
        }
        m.r_a = relative_error(a_h, a_H).r;
        m.r_h = relative_error(h_h, h_H).r;
        ra.push_back(*m.r_a);
        rh.push_back(*m.r_h);
      }

      if (!m.aborted) {
        if (m.reduction_bits) red[m.scorer].push_back(*m.reduction_bits);
        size[m.scorer].push_back(m.final_size);
        iters[m.scorer].push_back(m.mean_bp_iterations);
        cpu[m.scorer].push_back(m.mean_cpu_ms);
      }
      by_sample[m.sample][m.scorer] = m;
      report.sessions.push_back(m);
      ++row.sessions;
    }

    auto minmax = [](const std::vector<double>& v, std::optional<double>& mean,
                     std::optional<double>& lo, std::optional<double>& hi) {
      if (v.empty()) return;
      mean = mean_of(v);
      lo = *std::min_element(v.begin(), v.end());
      hi = *std::max_element(v.begin(), v.end());
    };
    minmax(ra, row.r_a_mean, row.r_a_min, row.r_a_max);
    minmax(rh, row.r_h_mean, row.r_h_min, row.r_h_max);
    row.reduction_bpea = mean_of(red["bpea"]);
    row.reduction_exact = mean_of(red["exact"]);
    row.size_bpea = mean_of(size["bpea"]);
    row.size_exact = mean_of(size["exact"]);
    row.iterations_warm = mean_of(iters["bpea"]);
    row.iterations_cold = mean_of(iters["bpea-cold"]);
    row.cpu_warm = mean_of(cpu["bpea"]);
    row.cpu_cold = mean_of(cpu["bpea-cold"]);
    // Paired per sample so a missing session cannot bias the difference.
    std::vector<double> saved, dcpu;
    for (const auto& [sample, m] : by_sample) {
      const auto w = m.find("bpea"), c = m.find("bpea-cold");
      if (w == m.end() || c == m.end() || w->second.aborted || c->second.aborted) continue;
      saved.push_back(c->second.mean_bp_iterations - w->second.mean_bp_iterations);
      dcpu.push_back(c->second.mean_cpu_ms - w->second.mean_cpu_ms);
    }
    row.iterations_saved = mean_of(saved);
    row.cpu_delta = mean_of(dcpu);
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_report(const Report& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  auto opt = [](std::ostream& out, const std::optional<double>& v) {
    out << ',';
    if (v) out << *v;
  };
  std::ostringstream rows;
  rows.precision(12);
  rows << "cell,stations,alpha,rho,sessions,R_A_mean,R_A_min,R_A_max,R_H_mean,R_H_min,R_H_max,"
          "reduction_bits_bpea,reduction_bits_exact,set_size_bpea,set_size_exact,"
          "bp_iterations_warm,bp_iterations_cold,bp_iterations_saved,"
          "cpu_ms_warm,cpu_ms_cold,cpu_ms_delta\n";
  for (const ReportRow& r : report.rows) {
    rows << r.cell << ',' << r.stations << ',' << r.alpha << ',' << r.rho << ',' << r.sessions;
    for (const auto& v : {r.r_a_mean, r.r_a_min, r.r_a_max, r.r_h_mean, r.r_h_min, r.r_h_max,
                          r.reduction_bpea, r.reduction_exact, r.size_bpea, r.size_exact,
                          r.iterations_warm, r.iterations_cold, r.iterations_saved, r.cpu_warm,
                          r.cpu_cold, r.cpu_delta}) {
      opt(rows, v);
    }
    rows << '\n';
  }
  write_file_atomic(out_dir / "report.csv", rows.str());

  std::ostringstream sess;
  sess.precision(12);
  sess << "cell,stations,alpha,rho,sample,scorer,final_size,reduction_bits,"
          "mean_bp_iterations,mean_cpu_ms,R_A,R_H,aborted\n";
  for (const SessionMetrics& m : report.sessions) {
    sess << m.cell << ',' << m.stations << ',' << m.alpha << ',' << m.rho << ',' << m.sample
         << ',' << m.scorer << ',' << m.final_size;
    opt(sess, m.reduction_bits);
    sess << ',' << m.mean_bp_iterations << ',' << m.mean_cpu_ms;
    opt(sess, m.r_a);
    opt(sess, m.r_h);
    sess << ',' << (m.aborted ? 1 : 0) << '\n';
  }
  write_file_atomic(out_dir / "sessions.csv", sess.str());
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp.string() + ": cannot open for writing");
    out << content;
    out.flush();
    if (!out) throw IoError(tmp.string() + ": write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError(path.string() + ": rename failed: " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace probediag
