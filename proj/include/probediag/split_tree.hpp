#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace probediag {

struct WeightedState {
  int id = 0;
  double weight = 0.0;
};

// Positive weights, renormalized to sum 1 on construction.
class StateSpace {
 public:
  explicit StateSpace(std::vector<WeightedState> states);
  static StateSpace uniform(int n);

  const std::vector<WeightedState>& states() const { return states_; }
  std::size_t size() const { return states_.size(); }
  // Position of a state id; throws InvalidArgument when unknown.
  std::size_t index_of(int id) const;

 private:
  std::vector<WeightedState> states_;
};

struct DisjunctiveTest {
  int id = 0;
  std::vector<int> positive;  // state ids where the test reads 1
};

// Surviving subset of a space, as state positions.
using StateSet = std::vector<std::size_t>;

enum class SplitCriterion { balance, entropy };

const char* to_string(SplitCriterion c);
SplitCriterion split_criterion_from_string(const std::string& s);

// |P(T=0) - P(T=1)| with masses renormalized within `surviving`.
double balance_score(const DisjunctiveTest& test, const StateSpace& space,
                     const StateSet& surviving);
double balance_score(const DisjunctiveTest& test, const StateSpace& space);

// Σ_o P(o) H(S*|o) in nats, within `surviving`.
double entropy_score(const DisjunctiveTest& test, const StateSpace& space,
                     const StateSet& surviving);
double entropy_score(const DisjunctiveTest& test, const StateSpace& space);

// Uniform n states, split sizes n0 = 1..n-1: do both scores have the same
// argmin set?
bool equivalence_check(int n);

struct TreeNode {
  int test_id = -1;            // -1 marks a leaf
  int child[2] = {-1, -1};     // node indices for outcome 0 / 1
  StateSet states;             // states consistent with the path
  double mass = 0.0;
  int depth = 0;
};

struct DiagnosisTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double cost = 0.0;            // Σ_s P(s) c(s), accumulated at internal nodes
  bool argmins_unique = true;   // no tie at any internal node

  std::vector<int> leaves() const;
  // Σ over leaves of mass × depth; must match `cost`.
  double cost_from_leaves() const;
};

DiagnosisTree build_greedy_tree(const StateSpace& space,
                                const std::vector<DisjunctiveTest>& tests,
                                SplitCriterion criterion);

// Checks the tree's structural invariants; throws InvalidArgument on failure.
void validate_tree(const DiagnosisTree& tree, const StateSpace& space,
                   const std::vector<DisjunctiveTest>& tests);

inline constexpr std::size_t kOptimalMaxStates = 8;
inline constexpr std::size_t kOptimalMaxTests = 6;

// Minimum expected cost over trees that refine as far as the tests allow.
// Throws SizeGuardError beyond the exhaustive budget.
double optimal_tree_cost(const StateSpace& space, const std::vector<DisjunctiveTest>& tests);

struct RatioBounds {
  double balance_ratio_bound = 0.0;
  double entropy_ratio = 0.0;
};

// Requires n/2 <= x_star <= n-1 and 0 < a <= n-1-x_star.
RatioBounds approximation_ratio_bounds(double n, double x_star, double a);

struct RatioScan {
  double max_entropy_ratio = 0.0;
  double argmax_x_star = 0.0, argmax_x = 0.0;
  bool balance_within_bound = true;  // 1 + 2a held at every grid point
  std::size_t points = 0;
};

// Integer grid x_star in [ceil(n/2), n-1], x in (x_star, n-1].
RatioScan ratio_scan(int n);

struct MarkovTruncation {
  long long max_faults = 0;  // ceil(alpha N c)
  double mass_bound = 0.0;   // 1/c
  std::optional<double> exact_tail;  // P(#faults > alpha N c), binomial
};

MarkovTruncation markov_truncation(double alpha, int n, double c);

nlohmann::json to_json(const DiagnosisTree& tree, const StateSpace& space);

struct SplitInstance {
  StateSpace space;
  std::vector<DisjunctiveTest> tests;
};

SplitInstance split_instance_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SplitInstance& instance);

}  // namespace probediag
