#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "probediag/bp_engine.hpp"
#include "probediag/bpea.hpp"
#include "probediag/exact_oracle.hpp"
#include "probediag/noisy_or.hpp"

namespace probediag {

enum class Scorer { exact, bpea };

const char* to_string(Scorer s);
Scorer scorer_from_string(const std::string& s);

struct SessionConfig {
  Scorer scorer = Scorer::bpea;
  int stop_window = 5;
  double stop_threshold = 1e-5;  // bits
  bool warm_start = true;
  BpConfig bp;
  std::uint64_t seed = 0;
  // Track the exact posterior: the stopping rule then watches exact H(S|t')
  // instead of the belief-entropy proxy, and exact values enter the trace.
  bool oracle = false;
  // Keep per-step per-candidate terms (both routes where available).
  bool record_candidates = false;
  bool timing = false;  // cpu_ms stays 0 when off, keeping traces reproducible

  void validate() const;
};

struct CandidateRecord {
  int probe_id = 0;
  std::optional<double> approx_a, approx_h, approx_score;
  std::optional<double> exact_a, exact_h, exact_score;  // score = a - h both routes
};

struct SessionStep {
  int step = 0;
  int probe_id = 0;
  int outcome = 0;
  double score = 0.0;  // scorer's value for the chosen probe, nats
  double entropy_proxy_bits = 0.0;             // after the outcome
  std::optional<double> exact_entropy_bits;    // after the outcome
  int bp_iterations = 0;
  bool bp_converged = true;
  double cpu_ms = 0.0;
  std::vector<CandidateRecord> candidates;
};

struct SessionSummary {
  int final_size = 0;
  std::optional<double> reduction_bits;  // H(S) - H(S|t'), exact
  double initial_proxy_bits = 0.0;
  std::optional<double> initial_exact_bits;
  std::vector<int> diagnosis;
  std::vector<int> ground_truth;
  std::vector<int> correct;  // per element, 1 if diagnosis matches truth
  std::uint64_t seed = 0;
  bool stopped_by_rule = false;
  bool aborted = false;
  std::string diagnostic;
};

struct SessionTrace {
  Scorer scorer = Scorer::bpea;
  std::vector<SessionStep> steps;
  SessionSummary final;
  std::vector<std::string> notices;
};

// Incremental inference state of one probing session.
class ProbingState {
 public:
  // `network` must outlive the state.
  ProbingState(const NoisyOrNetwork& network, const SessionConfig& config);

  struct Scored {
    int test_index = 0;
    double score = 0.0;
    std::optional<double> a_term, h_t;
  };

  // Scores every remaining test with the configured scorer.
  std::vector<Scored> score(const std::vector<int>& remaining) const;

  // argmin of `score`; ties to the lowest probe id.
  int select_next(const std::vector<int>& remaining) const;

  // Records the outcome and refreshes inference (BP and/or exact posterior).
  void observe(int test_index, int outcome);

  const NoisyOrNetwork& network() const { return *network_; }
  const NoisyOrGraph& model() const { return model_; }
  const Evidence& evidence() const { return evidence_; }
  const BpResult* bp() const { return bp_ ? &*bp_ : nullptr; }
  const FaultPosterior* posterior() const { return posterior_.get(); }

  double entropy_proxy_bits() const;  // Σ_j H_bits(b_j) over faults
  std::vector<double> fault_beliefs() const;  // P(S_j = 1) as used for diagnosis
  double last_update_ms() const { return last_update_ms_; }

 private:
  void refresh_bp();

  const NoisyOrNetwork* network_;
  SessionConfig config_;
  NoisyOrGraph model_;
  Evidence evidence_;
  FactorGraph current_;  // model plus δ-factors in observation order
  std::optional<BpResult> bp_;
  std::unique_ptr<FaultPosterior> posterior_;
  double last_update_ms_ = 0.0;
};

// Pure function of the entropy series E_0..E_k (bits): true once the last
// `window` step-to-step changes are all at most `threshold` in magnitude.
bool stopping_rule_fires(std::span<const double> series_bits, int window,
                         double threshold);

// Runs the online select-observe loop over `candidate_tests` (test positions;
// empty means every test).
SessionTrace run_session(const NoisyOrNetwork& network, const WorldSample& world,
                         const SessionConfig& config,
                         const std::vector<int>& candidate_tests = {});

// H(S) - H(S|t') in bits after replaying the trace's outcomes exactly.
double diagnosis_quality(const NoisyOrNetwork& network, const SessionTrace& trace);

// Element j is faulty iff P(S_j = 1) > 0.5.
std::vector<int> marginal_diagnosis(std::span<const double> fault_probabilities);

struct RelativeError {
  double r = 0.0;
  std::size_t included = 0;
  std::size_t excluded = 0;  // |H| at or below the zero tolerance
  std::size_t steps = 0;     // steps with at least one included term
};

// R(h, H) = mean over steps of the mean over candidates of |h - H| / |H|.
RelativeError relative_error(const std::vector<std::vector<double>>& approx,
                             const std::vector<std::vector<double>>& exact,
                             double zero_tolerance = 1e-12);

struct ErrorReport {
  RelativeError a_term;
  RelativeError h_t;
};

// Errors of the approximate terms against exact ones recorded in the trace.
ErrorReport relative_error_report(const SessionTrace& trace,
                                  double zero_tolerance = 1e-12);

// Trace CSV: step,probe_id,outcome,score,entropy_proxy_bits,exact_entropy_bits,
// bp_iterations,bp_converged,cpu_ms
void write_trace_csv(std::ostream& out, const SessionTrace& trace);
// Per-candidate terms: step,candidate_id,A_term,H_T_term,score,bp_converged,
// from the approximate route or (exact_terms) from the exact posterior.
void write_candidate_csv(std::ostream& out, const SessionTrace& trace,
                         bool exact_terms);
nlohmann::json summary_json(const SessionTrace& trace);

}  // namespace probediag
