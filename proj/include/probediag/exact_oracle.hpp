#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "probediag/factor_graph.hpp"
#include "probediag/noisy_or.hpp"

namespace probediag {

// Brute-force ground truth for instances small enough to enumerate.

enum class LogBase { nats, bits };

inline constexpr std::size_t kDefaultStateBudget = std::size_t{1} << 22;

// Dense normalized table, row-major over `scope` (first entry most
// significant).
struct JointTable {
  std::vector<int> scope;
  std::vector<int> cards;
  std::vector<double> probs;
};

// P(x | e) over every variable of the graph. Evidence restricts states
// directly rather than through δ-factors.
JointTable enumerate(const FactorGraph& graph, const Evidence& evidence,
                     std::size_t budget = kDefaultStateBudget);

// Renormalized restriction of `table` to the states consistent with `evidence`.
JointTable condition(const JointTable& table, const Evidence& evidence);

// Sums out every variable not in `subset`; the result's scope is `subset`
// in the given order.
JointTable exact_marginal(const JointTable& table, std::span<const int> subset);

double exact_entropy(const JointTable& table, std::span<const int> subset,
                     LogBase base = LogBase::nats);

// H(S | T, t') = H(S, T | t') - H(T | t'), nats.
double exact_selection_score(const FactorGraph& graph, const Evidence& evidence,
                             std::span<const int> fault_vars, int test_var,
                             std::size_t budget = kDefaultStateBudget);

// The two T-dependent terms of the selection score, from exact marginals:
// A = -Σ P(x_a | e) log f_a(x_a) over the test family and H(T | e).
struct ExactTerms {
  double a_term = 0.0;
  double h_t = 0.0;
};
ExactTerms exact_family_terms(const JointTable& table, const FactorGraph& graph,
                              int factor, int test_var);

// Σ_i H(X_i | Pa_i) from the CPTs weighted by exact family marginals, nats.
double family_entropy_sum(const std::vector<BayesNode>& nodes);

// Exact posterior over the fault vector of a noisy-OR network. Unobserved
// tests are barren and sum out, so only the 2^N fault states are stored.
class FaultPosterior {
 public:
  explicit FaultPosterior(const NoisyOrNetwork& network,
                          std::size_t budget = kDefaultStateBudget);

  // Multiplies in P(t_i = outcome | s_pa) and renormalizes. Throws
  // ContradictionError when the outcome has zero probability.
  void observe(std::size_t test_index, int outcome);

  double entropy(LogBase base = LogBase::nats) const;
  double prior_entropy(LogBase base = LogBase::nats) const;
  std::vector<double> fault_marginals() const;
  double probability_of_failure(std::size_t test_index) const;  // P(t_i = 1 | t')

  struct TestTerms {
    double a_term = 0.0;          // E[H_b(P(T=0 | s_pa))], nats
    double h_t = 0.0;             // H(T | t'), nats
    double p_fail = 0.0;          // P(T = 1 | t')
    double selection_score = 0.0; // H(S | T, t') = H(S|t') + a_term - h_t
  };
  TestTerms test_terms(std::size_t test_index) const;

  const std::vector<double>& probs() const { return probs_; }
  std::size_t num_faults() const { return num_faults_; }

 private:
  // Distribution of the test's parent configuration (bit k = parent k).
  std::vector<double> parent_marginal(std::size_t test_index) const;
  std::vector<double> failure_table(std::size_t test_index) const;

  std::vector<double> alphas_;
  std::vector<TestNode> tests_;
  std::size_t num_faults_;
  std::vector<double> probs_;
  double entropy_nats_ = 0.0;
};

}  // namespace probediag
