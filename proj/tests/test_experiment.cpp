#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "probediag/error.hpp"
#include "probediag/experiment.hpp"

using namespace probediag;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("probediag_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.nodes = 8;
  c.alpha = {0.1};
  c.rho = {0.1};
  c.samples = 2;
  c.threads = 1;
  return c;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return files;
}

}  // namespace

TEST_SUITE("experiment_cli") {

TEST_CASE("config parsing") {
  const auto c = experiment_config_from_json(nlohmann::json::parse(
      R"({"alpha":0.2,"rho":[0,0.5],"samples":3,"scorers":["bpea"],"topology":{"nodes":12},
          "bp":{"damping":0.25,"schedule":"sequential"},"design":"all","seed":5})"));
  CHECK(c.alpha == std::vector<double>{0.2});
  CHECK(c.rho == std::vector<double>{0.0, 0.5});
  CHECK(c.samples == 3);
  CHECK(c.nodes == 12);
  CHECK(c.bp.damping == 0.25);
  CHECK(c.design == ProbeDesignMode::all_candidates);
  CHECK(c.seed == 5);
  const auto back = experiment_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json::parse(R"({"alhpa":0.1})")), InvalidArgument);
  CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json::parse(R"({"samples":0})")), InvalidArgument);
  CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json::parse(R"({"alpha":[]})")), InvalidArgument);
  CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json::parse(R"({"scorers":["map"]})")), InvalidArgument);
}

TEST_CASE("probe design for the sweep") {
  Topology t = generate_topology(20, 2, 1);
  const auto stations = default_stations(t, 2);
  const ProbeInstance d = design_probe_set(t, stations, ProbeDesignMode::designed);
  CHECK(d.detection_complete);
  for (const auto& cov : d.probes.coverage) CHECK_FALSE(cov.empty());
  const ProbeInstance ds = design_probe_set(t, stations, ProbeDesignMode::designed_plus_singles);
  CHECK(ds.diagnosis_complete);
  CHECK(ds.probes.probes.size() == d.probes.probes.size() + 20);
  CHECK(confused_pairs(ds.probes, [] {
          std::vector<int> e(20);
          for (int i = 0; i < 20; ++i) e[static_cast<std::size_t>(i)] = i;
          return e;
        }()).empty());
}

TEST_CASE("cell names") {
  CHECK(CellKey{2, 0.1, 0.3, false}.name() == "k2_a0.1_r0.3");
  CHECK(CellKey{1, 0.01, 0.0, false}.name() == "k1_a0.01_r0");
  CHECK(CellKey{0, 0, 0, true}.name() == "model");
}

TEST_CASE("runs are byte-identical and the report aggregates raw files") {
  const ExperimentConfig c = small_config();
  const fs::path a = scratch("run_a");
  const fs::path b = scratch("run_b");
  const ExperimentResult ra = run_experiment(c, a);
  run_experiment(c, b);
  CHECK(ra.sessions.size() == 2 * 3);
  const auto sa = snapshot(a), sb = snapshot(b);
  CHECK(sa.size() > 10);
  CHECK(sa == sb);

  const Report r = build_report(a);
  REQUIRE(r.rows.size() == 1);
  const ReportRow& row = r.rows[0];
  CHECK(row.sessions == 6);

  // independent aggregation straight from the summary files
  double sum_bpea = 0.0, sum_exact = 0.0, size_bpea = 0.0;
  int nb = 0, ne = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    const std::string name = e.path().filename().string();
    if (name.size() < 13 || name.substr(name.size() - 13) != ".summary.json") continue;
    const auto j = read_json_file(e.path());
    const std::string scorer = j.at("scorer").get<std::string>();
    if (name.find("_bpea.") != std::string::npos) {
      sum_bpea += j.at("reduction_bits").get<double>();
      size_bpea += j.at("final_size").get<double>();
      ++nb;
    } else if (scorer == "exact") {
      sum_exact += j.at("reduction_bits").get<double>();
      ++ne;
    }
  }
  REQUIRE(nb == 2);
  REQUIRE(ne == 2);
  CHECK(*row.reduction_bpea == doctest::Approx(sum_bpea / nb).epsilon(1e-9));
  CHECK(*row.reduction_exact == doctest::Approx(sum_exact / ne).epsilon(1e-9));
  CHECK(*row.size_bpea == doctest::Approx(size_bpea / nb));
  REQUIRE(row.r_a_mean.has_value());
  CHECK(*row.r_a_min <= *row.r_a_mean);
  CHECK(*row.r_a_mean <= *row.r_a_max);

  // in-memory relative errors match the ones recomputed from the CSVs
  for (const auto& s : ra.sessions) {
    if (s.scorer != "bpea") continue;
    const auto it = std::find_if(r.sessions.begin(), r.sessions.end(), [&](const SessionMetrics& m) {
      return m.scorer == "bpea" && m.sample == s.sample;
    });
    REQUIRE(it != r.sessions.end());
    CHECK(*it->r_a == doctest::Approx(*s.r_a).epsilon(1e-9));
    CHECK(*it->r_h == doctest::Approx(*s.r_h).epsilon(1e-9));
  }

  write_report(r, a);
  CHECK(fs::exists(a / "report.csv"));
  CHECK(read_file(a / "report.csv").rfind("cell,stations,alpha,rho,sessions,R_A_mean", 0) == 0);
  CHECK(fs::exists(a / "sessions.csv"));
}

TEST_CASE("single sample: min, max and mean coincide") {
  ExperimentConfig c = small_config();
  c.samples = 1;
  c.scorers = {"bpea"};
  const fs::path d = scratch("single");
  run_experiment(c, d);
  const Report r = build_report(d);
  REQUIRE(r.rows.size() == 1);
  CHECK(*r.rows[0].r_a_min == *r.rows[0].r_a_max);
  CHECK(*r.rows[0].r_a_mean == *r.rows[0].r_a_max);
  CHECK(*r.rows[0].r_h_min == *r.rows[0].r_h_max);
}

TEST_CASE("directories mixing configurations are rejected") {
  ExperimentConfig c1 = small_config();
  c1.samples = 1;
  c1.scorers = {"bpea"};
  ExperimentConfig c2 = c1;
  c2.rho = {0.3};
  c2.stop_window = 3;
  const fs::path d1 = scratch("mix_a");
  const fs::path d2 = scratch("mix_b");
  run_experiment(c1, d1);
  run_experiment(c2, d2);
  for (const auto& e : fs::directory_iterator(d2 / "cells")) {
    fs::copy(e.path(), d1 / "cells" / e.path().filename(), fs::copy_options::recursive);
  }
  CHECK_THROWS_AS(build_report(d1), InvalidArgument);
}

TEST_CASE("oracle size guard becomes a skip notice") {
  ExperimentConfig c = small_config();
  c.nodes = 30;
  c.samples = 1;
  c.scorers = {"bpea", "exact"};
  c.stop_threshold = 1e-3;
  c.record_candidates = false;
  const ExperimentResult r = run_experiment(c, std::nullopt);
  CHECK_FALSE(r.notices.empty());
  for (const auto& s : r.sessions) CHECK(s.scorer != "exact");
}

}  // TEST_SUITE
