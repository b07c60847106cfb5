#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "probediag/bpea.hpp"
#include "probediag/factor_graph.hpp"

namespace probediag {

struct FaultNode {
  int id = 0;
  double alpha = 0.0;  // prior P(S_j = 1)
};

// P(T = 0 | s_pa) = rho0 · ∏_j rho[j]^{s_j}; rho0 = 1 means no leak.
struct TestNode {
  int id = 0;
  std::vector<int> parents;  // fault ids
  double rho0 = 1.0;
  std::vector<double> rho;   // inhibition probability per parent
};

class NoisyOrNetwork {
 public:
  NoisyOrNetwork() = default;

  // Fault ids must be dense 0..N-1; test ids must be unique.
  NoisyOrNetwork(std::vector<FaultNode> faults, std::vector<TestNode> tests);

  // Every test gets inhibition `rho` on each parent and no leak.
  static NoisyOrNetwork homogeneous(int num_faults, double alpha,
                                    const std::vector<std::vector<int>>& parent_sets,
                                    double rho, const std::vector<int>& test_ids = {});

  const std::vector<FaultNode>& faults() const { return faults_; }
  const std::vector<TestNode>& tests() const { return tests_; }
  std::size_t num_faults() const { return faults_.size(); }
  std::size_t num_tests() const { return tests_.size(); }

  // Position of the test with the given id; throws when absent.
  std::size_t test_index(int test_id) const;

  // Faults that no test covers (detection precondition violations).
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::vector<FaultNode> faults_;
  std::vector<TestNode> tests_;
  std::vector<std::string> warnings_;
};

// P(t_i = 0 | s_pa) for the test at position `test_index`; parent_assignment
// follows the order of the test's parent list.
double test_cpd(const NoisyOrNetwork& network, std::size_t test_index,
                std::span<const int> parent_assignment);

// Variables: fault j is variable j, test i is variable N+i. Factors: prior of
// fault j is factor j; family of test i is factor N+i with scope
// (T_i, parents...).
struct NoisyOrGraph {
  FactorGraph graph;
  std::vector<int> fault_variable;
  std::vector<int> test_variable;
  std::vector<int> test_factor;

  TestFamily family(std::size_t test_index) const {
    return {test_factor[test_index], test_variable[test_index]};
  }
};

NoisyOrGraph to_factor_graph(const NoisyOrNetwork& network);

struct WorldSample {
  std::vector<int> fault_state;
  std::vector<int> outcomes;  // one per test position
  std::uint64_t seed = 0;
};

// Forward sample; faults first, then tests, from one seeded generator.
WorldSample sample_world(const NoisyOrNetwork& network, std::uint64_t seed);

nlohmann::json to_json(const NoisyOrNetwork& network);
NoisyOrNetwork network_from_json(const nlohmann::json& j);

}  // namespace probediag
