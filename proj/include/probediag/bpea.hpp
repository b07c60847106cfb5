#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "probediag/bp_engine.hpp"
#include "probediag/factor_graph.hpp"

namespace probediag {

// Entropy read-outs over single factor scopes, computed from converged (or
// not) BP messages. The modified root message never feeds back into the
// store.

enum class EntropyMode {
  entropy,        // -Σ b̃ log b̃, then h̃/σ + log σ
  cross_entropy,  // -Σ b̃ log f_a with f_a the known conditional, then h̃/σ
  generic_cost,   // Σ b̃ c(x_a), then h̃/σ
};

struct EntropyQuery {
  int factor_id = 0;
  int root_variable = 0;
  EntropyMode mode = EntropyMode::entropy;
  std::vector<double> cost_table;  // generic_cost only; same layout as f_a
};

struct EntropyResult {
  double value = 0.0;  // nats
  double sigma = 1.0;
  EntropyMode mode = EntropyMode::entropy;
  bool bp_converged = false;
};

struct UnnormalizedBelief {
  std::vector<double> table;  // b̃_a, same layout as f_a
  double sigma = 0.0;         // Σ b̃_a
};

UnnormalizedBelief unnormalized_factor_belief(const FactorGraph& graph,
                                              const MessageStore& store,
                                              int factor);

// m'_{a→0}(x_0): the per-root-state partial sum selected by `query.mode`.
std::vector<double> entropy_message(const FactorGraph& graph,
                                    const MessageStore& store,
                                    const EntropyQuery& query);

EntropyResult approx_scope_entropy(const FactorGraph& graph,
                                   const MessageStore& store,
                                   const EntropyQuery& query);

// A test family: the factor P(T | S_pa) and the test variable T in it.
struct TestFamily {
  int factor_id = 0;
  int test_variable = 0;
};

struct TestScore {
  int factor_id = 0;
  int test_variable = 0;
  double a_term = 0.0;  // A(T, S_pa | t'), nats
  double h_t = 0.0;     // H(T | t'), nats
  double score = 0.0;   // a_term - h_t; lower is more informative
  bool bp_converged = false;
};

struct ScoreBatch {
  std::vector<TestScore> scores;   // candidate order preserved
  std::vector<std::string> notices;
};

// Scores every candidate from one message store; observed candidates are
// skipped with a notice.
ScoreBatch score_all_tests(const FactorGraph& graph, const MessageStore& store,
                           const std::vector<TestFamily>& candidates);

// Index into `scores` of the lowest score; ties go to the lowest factor id.
std::size_t best_score_index(const std::vector<TestScore>& scores);

// CSV header `step,candidate_id,A_term,H_T_term,score,bp_converged`.
void write_score_header(std::ostream& out);
void write_score_rows(std::ostream& out, int step,
                      const std::vector<TestScore>& scores,
                      const std::vector<int>& candidate_ids);

double binary_entropy_nats(double p);
double entropy_nats(const std::vector<double>& dist);

}  // namespace probediag
