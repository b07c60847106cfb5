#include "probediag/noisy_or.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "probediag/error.hpp"
#include "probediag/rng.hpp"

namespace probediag {

namespace {

void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidArgument(what + " must lie in [0, 1], got " + std::to_string(p));
  }
}

}  // namespace

NoisyOrNetwork::NoisyOrNetwork(std::vector<FaultNode> faults,
                               std::vector<TestNode> tests)
    : faults_(std::move(faults)), tests_(std::move(tests)) {
  for (std::size_t j = 0; j < faults_.size(); ++j) {
    if (faults_[j].id != static_cast<int>(j)) {
      throw InvalidArgument("fault ids must be dense 0..N-1; found " +
                            std::to_string(faults_[j].id) + " at position " +
                            std::to_string(j));
    }
    check_probability(faults_[j].alpha, "alpha of fault " + std::to_string(j));
  }
  std::unordered_set<int> test_ids;
  std::vector<bool> covered(faults_.size(), false);
  for (const TestNode& t : tests_) {
    if (!test_ids.insert(t.id).second) {
      throw InvalidArgument("duplicate test id " + std::to_string(t.id));
    }
    if (t.rho.size() != t.parents.size()) {
      throw InvalidArgument("test " + std::to_string(t.id) + " has " +
                            std::to_string(t.parents.size()) + " parents but " +
                            std::to_string(t.rho.size()) + " inhibition values");
    }
    check_probability(t.rho0, "rho0 of test " + std::to_string(t.id));
    std::set<int> seen;
    for (std::size_t k = 0; k < t.parents.size(); ++k) {
      const int p = t.parents[k];
      if (p < 0 || p >= static_cast<int>(faults_.size())) {
        throw InvalidArgument("test " + std::to_string(t.id) +
                              " references unknown fault " + std::to_string(p));
      }
      if (!seen.insert(p).second) {
        throw InvalidArgument("test " + std::to_string(t.id) + " lists fault " +
                              std::to_string(p) + " twice");
      }
      check_probability(t.rho[k], "rho of test " + std::to_string(t.id));
      covered[static_cast<std::size_t>(p)] = true;
    }
  }
  for (std::size_t j = 0; j < covered.size(); ++j) {
    if (!covered[j]) {
      warnings_.push_back("fault " + std::to_string(j) + " is not covered by any test");
    }
  }
}

NoisyOrNetwork NoisyOrNetwork::homogeneous(
    int num_faults, double alpha, const std::vector<std::vector<int>>& parent_sets,
    double rho, const std::vector<int>& test_ids) {
  if (!test_ids.empty() && test_ids.size() != parent_sets.size()) {
    throw InvalidArgument("test id list does not match parent sets");
  }
  std::vector<FaultNode> faults;
  for (int j = 0; j < num_faults; ++j) faults.push_back({j, alpha});
  std::vector<TestNode> tests;
  for (std::size_t i = 0; i < parent_sets.size(); ++i) {
    TestNode t;
    t.id = test_ids.empty() ? static_cast<int>(i) : test_ids[i];
    t.parents = parent_sets[i];
    t.rho0 = 1.0;
    t.rho.assign(parent_sets[i].size(), rho);
    tests.push_back(std::move(t));
  }
  return NoisyOrNetwork(std::move(faults), std::move(tests));
}

std::size_t NoisyOrNetwork::test_index(int test_id) const {
  for (std::size_t i = 0; i < tests_.size(); ++i) {
    if (tests_[i].id == test_id) return i;
  }
  throw InvalidArgument("unknown test id " + std::to_string(test_id));
}

double test_cpd(const NoisyOrNetwork& network, std::size_t test_index,
                std::span<const int> parent_assignment) {
  const TestNode& t = network.tests().at(test_index);
  if (parent_assignment.size() != t.parents.size()) {
    throw InvalidArgument("parent assignment has " +
                          std::to_string(parent_assignment.size()) +
                          " entries, test has " + std::to_string(t.parents.size()) +
                          " parents");
  }
  double q = t.rho0;
  for (std::size_t k = 0; k < t.parents.size(); ++k) {
    if (parent_assignment[k] != 0) q *= t.rho[k];
  }
  return q;
}

NoisyOrGraph to_factor_graph(const NoisyOrNetwork& network) {
  const std::size_t n = network.num_faults();
  const std::size_t m = network.num_tests();
  NoisyOrGraph out;
  std::vector<VariableNode> vars;
  std::vector<FactorNode> factors;
  for (std::size_t j = 0; j < n; ++j) {
    vars.push_back({static_cast<int>(j), 2, "S" + std::to_string(j)});
    out.fault_variable.push_back(static_cast<int>(j));
    const double a = network.faults()[j].alpha;
    factors.push_back({static_cast<int>(j), {static_cast<int>(j)}, {1.0 - a, a}});
  }
  for (std::size_t i = 0; i < m; ++i) {
    const TestNode& t = network.tests()[i];
    const int tv = static_cast<int>(n + i);
    vars.push_back({tv, 2, "T" + std::to_string(t.id)});
    out.test_variable.push_back(tv);
    out.test_factor.push_back(static_cast<int>(n + i));

    FactorNode f;
    f.id = static_cast<int>(n + i);
    f.scope.push_back(tv);
    for (int p : t.parents) f.scope.push_back(p);
    const std::size_t rows = std::size_t{1} << t.parents.size();
    f.table.resize(2 * rows);
    std::vector<int> pa(t.parents.size());
    for (std::size_t r = 0; r < rows; ++r) {
      // Row-major: the first parent is the most significant bit.
      for (std::size_t k = 0; k < pa.size(); ++k) {
        pa[k] = static_cast<int>((r >> (pa.size() - 1 - k)) & 1U);
      }
      const double q = test_cpd(network, i, pa);
      f.table[r] = q;
      f.table[rows + r] = 1.0 - q;
    }
    factors.push_back(std::move(f));
  }
  out.graph = FactorGraph(std::move(vars), std::move(factors));
  out.graph.set_known_partition(1.0);
  return out;
}

WorldSample sample_world(const NoisyOrNetwork& network, std::uint64_t seed) {
  Rng rng(seed);
  WorldSample w;
  w.seed = seed;
  w.fault_state.reserve(network.num_faults());
  for (const auto& f : network.faults()) {
    w.fault_state.push_back(rng.bernoulli(f.alpha) ? 1 : 0);
  }
  std::vector<int> pa;
  for (std::size_t i = 0; i < network.num_tests(); ++i) {
    const TestNode& t = network.tests()[i];
    pa.clear();
    for (int p : t.parents) pa.push_back(w.fault_state[static_cast<std::size_t>(p)]);
    const double q = test_cpd(network, i, pa);
    w.outcomes.push_back(rng.uniform() < q ? 0 : 1);
  }
  return w;
}

nlohmann::json to_json(const NoisyOrNetwork& network) {
  nlohmann::json j;
  j["faults"] = nlohmann::json::array();
  for (const auto& f : network.faults()) {
    j["faults"].push_back({{"id", f.id}, {"alpha", f.alpha}});
  }
  j["tests"] = nlohmann::json::array();
  for (const auto& t : network.tests()) {
    j["tests"].push_back(
        {{"id", t.id}, {"parents", t.parents}, {"rho0", t.rho0}, {"rho", t.rho}});
  }
  return j;
}

NoisyOrNetwork network_from_json(const nlohmann::json& j) {
  try {
    const bool has_alpha = j.contains("alpha");
    const bool has_rho = j.contains("rho") && j.at("rho").is_number();
    const double alpha = has_alpha ? j.at("alpha").get<double>() : 0.0;
    const double rho = has_rho ? j.at("rho").get<double>() : 0.0;

    std::vector<FaultNode> faults;
    for (const auto& f : j.at("faults")) {
      FaultNode node;
      node.id = f.at("id").get<int>();
      if (f.contains("alpha")) {
        node.alpha = f.at("alpha").get<double>();
      } else if (has_alpha) {
        node.alpha = alpha;
      } else {
        throw InvalidArgument("fault " + std::to_string(node.id) +
                              " has no alpha and no top-level default");
      }
      faults.push_back(node);
    }
    std::vector<TestNode> tests;
    for (const auto& t : j.at("tests")) {
      TestNode node;
      node.id = t.at("id").get<int>();
      node.parents = t.at("parents").get<std::vector<int>>();
      node.rho0 = t.value("rho0", 1.0);
      if (t.contains("rho")) {
        if (t.at("rho").is_number()) {
          node.rho.assign(node.parents.size(), t.at("rho").get<double>());
        } else {
          node.rho = t.at("rho").get<std::vector<double>>();
        }
      } else if (has_rho) {
        node.rho.assign(node.parents.size(), rho);
      } else {
        throw InvalidArgument("test " + std::to_string(node.id) +
                              " has no rho and no top-level default");
      }
      tests.push_back(std::move(node));
    }
    return NoisyOrNetwork(std::move(faults), std::move(tests));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace probediag
