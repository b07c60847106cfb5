#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace probediag {

// Undirected network of elements 0..num_nodes-1.
struct Topology {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;  // a < b, sorted, unique
  std::vector<int> stations;

  std::vector<std::vector<int>> adjacency() const;  // sorted neighbor lists
  std::vector<int> degrees() const;
  void validate() const;  // connected, no self-loops or duplicates, stations valid
};

// Preferential attachment: each new node links to `attachment` distinct
// existing nodes chosen with probability proportional to degree.
Topology generate_topology(int num_nodes, int attachment, std::uint64_t seed);

// The k highest-degree nodes, ties broken by lower id.
std::vector<int> default_stations(const Topology& topology, int k);

struct Probe {
  int id = 0;
  int station = 0;
  int target = 0;
  std::vector<int> path;  // station ... target
};

struct ProbeSet {
  std::vector<Probe> probes;
  std::vector<std::vector<int>> coverage;  // element -> probe ids containing it

  // Rebuilds coverage for elements 0..num_elements-1.
  void index(int num_elements);
  std::vector<std::vector<int>> parent_sets() const;
  std::vector<int> ids() const;
};

struct CandidateList {
  std::vector<Probe> probes;
  std::vector<std::string> notices;  // unreachable targets
};

// One shortest path per (station, target ≠ station). Among shortest paths
// the lexicographically smallest node sequence wins.
CandidateList candidate_probes(const Topology& topology, const std::vector<int>& stations);

// Probes whose path is one element, one per element; ids start at `first_id`.
std::vector<Probe> single_node_probes(int num_elements, int first_id);

// Greedy max-new-coverage; ties to the lowest id. Throws InvalidArgument
// listing elements no candidate covers.
ProbeSet greedy_detection_cover(const std::vector<Probe>& candidates,
                                const std::vector<int>& elements);

struct DiagnosisAugmentation {
  ProbeSet probes;
  std::vector<std::pair<int, int>> unresolved;  // element pairs with equal signatures
  bool complete() const { return unresolved.empty(); }
};

// Adds candidates until all single-fault signatures over `elements` are
// pairwise distinct, each time taking the probe that separates the most
// still-confused pairs (ties to the lowest id).
DiagnosisAugmentation augment_for_diagnosis(const ProbeSet& probe_set,
                                            const std::vector<Probe>& candidates,
                                            const std::vector<int>& elements);

// Equal-signature element pairs under `probe_set`.
std::vector<std::pair<int, int>> confused_pairs(const ProbeSet& probe_set,
                                                const std::vector<int>& elements);

bool is_valid_path(const Topology& topology, const Probe& probe);

nlohmann::json to_json(const Topology& topology);
Topology topology_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProbeSet& probe_set);
ProbeSet probe_set_from_json(const nlohmann::json& j, int num_elements);

}  // namespace probediag
