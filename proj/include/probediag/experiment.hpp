#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "probediag/active_probing.hpp"
#include "probediag/bp_engine.hpp"
#include "probediag/noisy_or.hpp"
#include "probediag/probe_design.hpp"

namespace probediag {

enum class ProbeDesignMode {
  designed,               // detection cover + diagnosis augmentation
  designed_plus_singles,  // the above plus one single-element probe per element
  all_candidates,         // every station-target shortest path
};

const char* to_string(ProbeDesignMode m);
ProbeDesignMode probe_design_mode_from_string(const std::string& s);

// Session flavours run per world sample. "bpea-cold" is bpea without
// message reuse.
inline const std::vector<std::string> kKnownScorers = {"bpea", "bpea-cold", "exact"};

struct ExperimentConfig {
  std::optional<std::string> topology_file;
  int nodes = 20;
  int attachment = 2;
  std::optional<std::string> model_file;   // diagnose a fixed network instead of a sweep
  std::optional<std::string> probes_file;  // restricts candidates to these probe ids
  std::vector<int> stations = {2};         // station counts (highest degree first)
  std::vector<int> station_ids;            // explicit placement; overrides `stations`
  ProbeDesignMode design = ProbeDesignMode::designed_plus_singles;
  std::vector<double> alpha = {0.01, 0.1};
  std::vector<double> rho = {0.0, 0.1, 0.3};
  int samples = 10;
  std::vector<std::string> scorers = {"bpea", "bpea-cold", "exact"};
  bool oracle = true;
  bool record_candidates = true;
  int stop_window = 5;
  double stop_threshold = 1e-5;
  BpConfig bp;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
  bool timing = false;

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

struct ProbeInstance {
  Topology topology;
  ProbeSet probes;
  bool detection_complete = false;
  bool diagnosis_complete = false;
  std::vector<std::pair<int, int>> unresolved;
  std::vector<std::string> notices;
};

// Probe set for `topology` with the given stations under `mode`.
ProbeInstance design_probe_set(const Topology& topology, const std::vector<int>& stations,
                               ProbeDesignMode mode);

Topology load_or_generate_topology(const ExperimentConfig& config);

struct CellKey {
  int stations = 0;
  double alpha = 0.0;
  double rho = 0.0;
  bool fixed_model = false;  // model file rather than a generated grid point
  std::string name() const;
};

struct SessionRecord {
  CellKey cell;
  int sample = 0;
  std::string scorer;
  SessionTrace trace;
  std::optional<double> r_a, r_h;  // relative errors when both routes were recorded
};

struct ExperimentResult {
  std::vector<SessionRecord> sessions;
  std::vector<std::string> notices;
};

// Runs every (cell, sample, scorer) job. With `out_dir`, writes
// config.json, per-cell meta.json and per-session trace files.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::optional<std::filesystem::path>& out_dir);

struct SessionMetrics {
  std::string cell;
  int stations = 0;
  double alpha = 0.0, rho = 0.0;
  int sample = 0;
  std::string scorer;
  int final_size = 0;
  std::optional<double> reduction_bits;
  double mean_bp_iterations = 0.0;
  double mean_cpu_ms = 0.0;
  std::optional<double> r_a, r_h;
  bool aborted = false;
};

struct ReportRow {
  std::string cell;
  int stations = 0;
  double alpha = 0.0, rho = 0.0;
  std::size_t sessions = 0;
  std::optional<double> r_a_mean, r_a_min, r_a_max;
  std::optional<double> r_h_mean, r_h_min, r_h_max;
  std::optional<double> reduction_bpea, reduction_exact;
  std::optional<double> size_bpea, size_exact;
  std::optional<double> iterations_warm, iterations_cold, iterations_saved;
  std::optional<double> cpu_warm, cpu_cold, cpu_delta;
};

struct Report {
  std::vector<SessionMetrics> sessions;
  std::vector<ReportRow> rows;
};

// Aggregates from the raw files of a run directory only. Throws
// InvalidArgument when cells were produced under different configurations.
Report build_report(const std::filesystem::path& run_dir);
// report.csv (per cell) and sessions.csv (per session).
void write_report(const Report& report, const std::filesystem::path& out_dir);

void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace probediag
