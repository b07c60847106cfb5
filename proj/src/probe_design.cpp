#include "probediag/probe_design.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <queue>
#include <set>

#include "probediag/error.hpp"
#include "probediag/rng.hpp"

namespace probediag {

std::vector<std::vector<int>> Topology::adjacency() const {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(num_nodes));
  for (auto [a, b] : edges) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& n : adj) std::sort(n.begin(), n.end());
  return adj;
}

std::vector<int> Topology::degrees() const {
  std::vector<int> d(static_cast<std::size_t>(num_nodes), 0);
  for (auto [a, b] : edges) {
    ++d[static_cast<std::size_t>(a)];
    ++d[static_cast<std::size_t>(b)];
  }
  return d;
}

void Topology::validate() const {
  if (num_nodes < 1) throw InvalidArgument("topology has no nodes");
  std::set<std::pair<int, int>> seen;
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= num_nodes || b >= num_nodes) {
      throw InvalidArgument("edge references unknown node");
    }
    if (a == b) throw InvalidArgument("self-loop at node " + std::to_string(a));
    if (!seen.insert({std::min(a, b), std::max(a, b)}).second) {
      throw InvalidArgument("duplicate edge " + std::to_string(a) + "-" + std::to_string(b));
    }
  }
  if (stations.empty()) throw InvalidArgument("topology has no probe stations");
  for (int s : stations) {
    if (s < 0 || s >= num_nodes) throw InvalidArgument("station " + std::to_string(s) + " is not a node");
  }
  const auto adj = adjacency();
  std::vector<bool> reached(static_cast<std::size_t>(num_nodes), false);
  std::vector<int> stack{0};
  reached[0] = true;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (!reached[static_cast<std::size_t>(w)]) {
        reached[static_cast<std::size_t>(w)] = true;
        ++count;
        stack.push_back(w);
      }
    }
  }
  if (count != num_nodes) throw InvalidArgument("topology is not connected");
}

Topology generate_topology(int num_nodes, int attachment, std::uint64_t seed) {
  if (num_nodes < 2) throw InvalidArgument("generate_topology needs at least 2 nodes");
  if (attachment < 1) throw InvalidArgument("attachment parameter must be >= 1");
  Rng rng(seed);
  Topology t;
  t.num_nodes = num_nodes;
  // Each edge endpoint appears once here, so a uniform draw is degree-biased.
  std::vector<int> endpoints{0, 1};
  std::set<std::pair<int, int>> edges{{0, 1}};
  for (int v = 2; v < num_nodes; ++v) {
    const int want = std::min(attachment, v);
    std::set<int> targets;
    while (static_cast<int>(targets.size()) < want) {
      targets.insert(endpoints[rng.below(endpoints.size())]);
    }
    for (int u : targets) {
      edges.insert({u, v});
      endpoints.push_back(u);
      endpoints.push_back(v);
    }
  }
  t.edges.assign(edges.begin(), edges.end());
  t.stations = default_stations(t, 1);
  return t;
}

std::vector<int> default_stations(const Topology& topology, int k) {
  const auto deg = topology.degrees();
  std::vector<int> order(static_cast<std::size_t>(topology.num_nodes));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return deg[static_cast<std::size_t>(a)] > deg[static_cast<std::size_t>(b)];
  });
  order.resize(static_cast<std::size_t>(std::clamp(k, 0, topology.num_nodes)));
  return order;
}

void ProbeSet::index(int num_elements) {
  coverage.assign(static_cast<std::size_t>(num_elements), {});
  for (const Probe& p : probes) {
    for (int e : p.path) {
      if (e < 0 || e >= num_elements) {
        throw InvalidArgument("probe " + std::to_string(p.id) + " visits unknown element " +
                              std::to_string(e));
      }
      coverage[static_cast<std::size_t>(e)].push_back(p.id);
    }
  }
}

std::vector<std::vector<int>> ProbeSet::parent_sets() const {
  std::vector<std::vector<int>> out;
  for (const Probe& p : probes) out.push_back(p.path);
  return out;
}

std::vector<int> ProbeSet::ids() const {
  std::vector<int> out;
  for (const Probe& p : probes) out.push_back(p.id);
  return out;
}

CandidateList candidate_probes(const Topology& topology, const std::vector<int>& stations) {
  const auto adj = topology.adjacency();
  const auto n = static_cast<std::size_t>(topology.num_nodes);
  CandidateList out;
  int next_id = 0;
  for (int station : stations) {
    if (station < 0 || station >= topology.num_nodes) {
      throw InvalidArgument("station " + std::to_string(station) + " is not a node");
    }
    for (int target = 0; target < topology.num_nodes; ++target) {
      if (target == station) continue;
      // Distances to the target; walking from the station always to the
      // smallest neighbor one step closer gives the lexicographic minimum.
      std::vector<int> dist(n, -1);
      std::queue<int> q;
      dist[static_cast<std::size_t>(target)] = 0;
      q.push(target);
      while (!q.empty()) {
        const int v = q.front();
        q.pop();
        for (int w : adj[static_cast<std::size_t>(v)]) {
          if (dist[static_cast<std::size_t>(w)] < 0) {
            dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + 1;
            q.push(w);
          }
        }
      }
      if (dist[static_cast<std::size_t>(station)] < 0) {
        out.notices.push_back("target " + std::to_string(target) +
                              " unreachable from station " + std::to_string(station));
        continue;
      }
      Probe p;
      p.id = next_id++;
      p.station = station;
      p.target = target;
      int v = station;
      p.path.push_back(v);
      while (v != target) {
        for (int w : adj[static_cast<std::size_t>(v)]) {
          if (dist[static_cast<std::size_t>(w)] == dist[static_cast<std::size_t>(v)] - 1) {
            v = w;
            break;
          }
        }
        p.path.push_back(v);
      }
      out.probes.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<Probe> single_node_probes(int num_elements, int first_id) {
  std::vector<Probe> out;
  for (int e = 0; e < num_elements; ++e) out.push_back({first_id + e, e, e, {e}});
  return out;
}

ProbeSet greedy_detection_cover(const std::vector<Probe>& candidates,
                                const std::vector<int>& elements) {
  std::set<int> uncovered(elements.begin(), elements.end());
  std::set<int> reachable;
  for (const Probe& p : candidates) reachable.insert(p.path.begin(), p.path.end());
  std::vector<int> missing;
  for (int e : uncovered) {
    if (!reachable.count(e)) missing.push_back(e);
  }
  if (!missing.empty()) {
    std::string list;
    for (int e : missing) list += (list.empty() ? "" : ",") + std::to_string(e);
    throw InvalidArgument("elements not covered by any candidate probe: " + list);
  }

  int max_element = -1;
  for (int e : elements) max_element = std::max(max_element, e);
  for (const Probe& p : candidates) {
    for (int e : p.path) max_element = std::max(max_element, e);
  }

  ProbeSet out;
  std::vector<bool> used(candidates.size(), false);
  while (!uncovered.empty()) {
    std::size_t best = candidates.size();
    std::size_t best_gain = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      std::size_t gain = 0;
      for (int e : candidates[c].path) gain += uncovered.count(e);
      if (gain > best_gain ||
          (gain == best_gain && gain > 0 && candidates[c].id < candidates[best].id)) {
        best = c;
        best_gain = gain;
      }
    }
    used[best] = true;
    for (int e : candidates[best].path) uncovered.erase(e);
    out.probes.push_back(candidates[best]);
  }
  out.index(max_element + 1);
  return out;
}

namespace {

// Signature of each element: sorted ids of probes containing it.
std::map<int, std::vector<int>> signatures(const std::vector<Probe>& probes,
                                           const std::vector<int>& elements) {
  std::map<int, std::vector<int>> sig;
  for (int e : elements) sig[e];
  for (const Probe& p : probes) {
    for (int e : p.path) {
      auto it = sig.find(e);
      if (it != sig.end()) it->second.push_back(p.id);
    }
  }
  for (auto& [e, s] : sig) std::sort(s.begin(), s.end());
  return sig;
}

}  // namespace

std::vector<std::pair<int, int>> confused_pairs(const ProbeSet& probe_set,
                                                const std::vector<int>& elements) {
  const auto sig = signatures(probe_set.probes, elements);
  std::vector<std::pair<int, int>> out;
  for (auto a = sig.begin(); a != sig.end(); ++a) {
    for (auto b = std::next(a); b != sig.end(); ++b) {
      if (a->second == b->second) out.emplace_back(a->first, b->first);
    }
  }
  return out;
}

DiagnosisAugmentation augment_for_diagnosis(const ProbeSet& probe_set,
                                            const std::vector<Probe>& candidates,
                                            const std::vector<int>& elements) {
  DiagnosisAugmentation out;
  out.probes = probe_set;
  std::set<int> in_set;
  for (const Probe& p : probe_set.probes) in_set.insert(p.id);

  // Classes of currently indistinguishable elements.
  auto classes_of = [&](const std::vector<Probe>& probes) {
    std::map<std::vector<int>, std::vector<int>> by_sig;
    for (const auto& [e, s] : signatures(probes, elements)) by_sig[s].push_back(e);
    std::vector<std::vector<int>> classes;
    for (auto& [s, members] : by_sig) {
      if (members.size() > 1) classes.push_back(members);
    }
    return classes;
  };

  auto classes = classes_of(out.probes.probes);
  while (!classes.empty()) {
    std::size_t best = candidates.size();
    std::size_t best_gain = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (in_set.count(candidates[c].id)) continue;
      const std::set<int> path(candidates[c].path.begin(), candidates[c].path.end());
      std::size_t gain = 0;
      for (const auto& cls : classes) {
        std::size_t inside = 0;
        for (int e : cls) inside += path.count(e);
        gain += inside * (cls.size() - inside);
      }
      if (gain > best_gain ||
          (gain == best_gain && gain > 0 && candidates[c].id < candidates[best].id)) {
        best = c;
        best_gain = gain;
      }
    }
    if (best_gain == 0) break;
    in_set.insert(candidates[best].id);
    out.probes.probes.push_back(candidates[best]);
    classes = classes_of(out.probes.probes);
  }
  out.unresolved = confused_pairs(out.probes, elements);

  int max_element = -1;
  for (int e : elements) max_element = std::max(max_element, e);
  for (const Probe& p : out.probes.probes) {
    for (int e : p.path) max_element = std::max(max_element, e);
  }
  out.probes.index(max_element + 1);
  return out;
}

bool is_valid_path(const Topology& topology, const Probe& probe) {
  if (probe.path.empty()) return false;
  if (probe.path.front() != probe.station || probe.path.back() != probe.target) return false;
  std::set<int> seen;
  std::set<std::pair<int, int>> edges(topology.edges.begin(), topology.edges.end());
  for (std::size_t k = 0; k < probe.path.size(); ++k) {
    const int v = probe.path[k];
    if (v < 0 || v >= topology.num_nodes || !seen.insert(v).second) return false;
    if (k > 0) {
      const int u = probe.path[k - 1];
      if (!edges.count({std::min(u, v), std::max(u, v)})) return false;
    }
  }
  return true;
}

nlohmann::json to_json(const Topology& topology) {
  nlohmann::json j;
  std::vector<int> nodes(static_cast<std::size_t>(topology.num_nodes));
  std::iota(nodes.begin(), nodes.end(), 0);
  j["nodes"] = nodes;
  j["edges"] = nlohmann::json::array();
  for (auto [a, b] : topology.edges) j["edges"].push_back({a, b});
  j["stations"] = topology.stations;
  return j;
}

Topology topology_from_json(const nlohmann::json& j) {
  try {
    Topology t;
    const auto nodes = j.at("nodes").get<std::vector<int>>();
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (nodes[k] != static_cast<int>(k)) {
        throw InvalidArgument("topology node ids must be dense 0..n-1");
      }
    }
    t.num_nodes = static_cast<int>(nodes.size());
    std::set<std::pair<int, int>> edges;
    for (const auto& e : j.at("edges")) {
      const int a = e.at(0).get<int>();
      const int b = e.at(1).get<int>();
      if (!edges.insert({std::min(a, b), std::max(a, b)}).second) {
        throw InvalidArgument("duplicate edge " + std::to_string(a) + "-" + std::to_string(b));
      }
      if (a == b) throw InvalidArgument("self-loop at node " + std::to_string(a));
    }
    t.edges.assign(edges.begin(), edges.end());
    t.stations = j.value("stations", std::vector<int>{});
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed topology JSON: ") + e.what());
  }
}

nlohmann::json to_json(const ProbeSet& probe_set) {
  nlohmann::json j;
  j["probes"] = nlohmann::json::array();
  for (const Probe& p : probe_set.probes) {
    j["probes"].push_back(
        {{"id", p.id}, {"station", p.station}, {"target", p.target}, {"path", p.path}});
  }
  return j;
}

ProbeSet probe_set_from_json(const nlohmann::json& j, int num_elements) {
  try {
    ProbeSet s;
    for (const auto& p : j.at("probes")) {
      s.probes.push_back({p.at("id").get<int>(), p.at("station").get<int>(),
                          p.at("target").get<int>(), p.at("path").get<std::vector<int>>()});
    }
    s.index(num_elements);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed probe set JSON: ") + e.what());
  }
}

}  // namespace probediag
