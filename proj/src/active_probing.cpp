#include "probediag/active_probing.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "probediag/error.hpp"

namespace probediag {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

const char* to_string(Scorer s) { return s == Scorer::exact ? "exact" : "bpea"; }

Scorer scorer_from_string(const std::string& s) {
  if (s == "exact") return Scorer::exact;
  if (s == "bpea") return Scorer::bpea;
  throw InvalidArgument("unknown scorer '" + s + "' (expected exact or bpea)");
}

void SessionConfig::validate() const {
  if (stop_window < 1) throw InvalidArgument("stop_window must be >= 1");
  if (!(stop_threshold >= 0.0)) throw InvalidArgument("stop_threshold must be >= 0");
  bp.validate();
}

ProbingState::ProbingState(const NoisyOrNetwork& network, const SessionConfig& config)
    : network_(&network), config_(config), model_(to_factor_graph(network)),
      current_(model_.graph) {
  config_.validate();
  if (config_.scorer == Scorer::exact || config_.oracle) {
    posterior_ = std::make_unique<FaultPosterior>(network);
  }
  if (config_.scorer == Scorer::bpea) refresh_bp();
}

void ProbingState::refresh_bp() {
  const auto start = Clock::now();
  const MessageStore* warm =
      (config_.warm_start && bp_) ? &bp_->store : nullptr;
  // Appending evidence one factor at a time keeps earlier edges at their
  // positions, which the warm start relies on.
  BpResult next = run_bp(current_, Evidence{}, config_.bp, warm);
  bp_ = std::move(next);
  last_update_ms_ = elapsed_ms(start);
}

std::vector<ProbingState::Scored> ProbingState::score(
    const std::vector<int>& remaining) const {
  std::vector<Scored> out;
  out.reserve(remaining.size());
  if (config_.scorer == Scorer::bpea) {
    std::vector<TestFamily> families;
    for (int i : remaining) families.push_back(model_.family(static_cast<std::size_t>(i)));
    const ScoreBatch batch = score_all_tests(bp_->graph, bp_->store, families);
    if (batch.scores.size() != remaining.size()) {
      throw InvalidArgument("a remaining test is already observed");
    }
    for (std::size_t k = 0; k < remaining.size(); ++k) {
      const TestScore& s = batch.scores[k];
      out.push_back({remaining[k], s.score, s.a_term, s.h_t});
    }
  } else {
    for (int i : remaining) {
      const auto t = posterior_->test_terms(static_cast<std::size_t>(i));
      out.push_back({i, t.a_term - t.h_t, t.a_term, t.h_t});
    }
  }
  return out;
}

int ProbingState::select_next(const std::vector<int>& remaining) const {
  if (remaining.empty()) throw InvalidArgument("no remaining candidates");
  const auto scored = score(remaining);
  std::size_t best = 0;
  const auto& tests = network_->tests();
  for (std::size_t k = 1; k < scored.size(); ++k) {
    const int id = tests[static_cast<std::size_t>(scored[k].test_index)].id;
    const int best_id = tests[static_cast<std::size_t>(scored[best].test_index)].id;
    if (scored[k].score < scored[best].score ||
        (scored[k].score == scored[best].score && id < best_id)) {
      best = k;
    }
  }
  return scored[best].test_index;
}

void ProbingState::observe(int test_index, int outcome) {
  if (outcome != 0 && outcome != 1) throw InvalidArgument("outcome must be 0 or 1");
  const int var = model_.test_variable.at(static_cast<std::size_t>(test_index));
  evidence_.observe(var, outcome);
  Evidence single;
  single.observe(var, outcome);
  current_ = apply_evidence(current_, single);
  double ms = 0.0;
  if (posterior_) {
    const auto start = Clock::now();
    posterior_->observe(static_cast<std::size_t>(test_index), outcome);
    ms = elapsed_ms(start);
  }
  if (config_.scorer == Scorer::bpea) {
    refresh_bp();
  } else {
    last_update_ms_ = ms;
  }
}

std::vector<double> ProbingState::fault_beliefs() const {
  if (config_.scorer == Scorer::bpea) {
    std::vector<double> b;
    for (int v : model_.fault_variable) {
      b.push_back(bp_->node_beliefs[static_cast<std::size_t>(v)][1]);
    }
    return b;
  }
  return posterior_->fault_marginals();
}

double ProbingState::entropy_proxy_bits() const {
  double h = 0.0;
  for (double p : fault_beliefs()) h += binary_entropy_nats(p);
  return h / kLn2;
}

bool stopping_rule_fires(std::span<const double> series_bits, int window,
                         double threshold) {
  if (window < 1) throw InvalidArgument("window must be >= 1");
  const auto w = static_cast<std::size_t>(window);
  if (series_bits.size() < w + 1) return false;
  for (std::size_t i = series_bits.size() - w; i < series_bits.size(); ++i) {
    if (std::abs(series_bits[i - 1] - series_bits[i]) > threshold) return false;
  }
  return true;
}

SessionTrace run_session(const NoisyOrNetwork& network, const WorldSample& world,
                         const SessionConfig& config,
                         const std::vector<int>& candidate_tests) {
  config.validate();
  if (world.fault_state.size() != network.num_faults() ||
      world.outcomes.size() != network.num_tests()) {
    throw InvalidArgument("world sample does not match the network dimensions");
  }
  SessionTrace trace;
  trace.scorer = config.scorer;
  trace.final.seed = world.seed;
  trace.final.ground_truth = world.fault_state;

  std::vector<int> remaining = candidate_tests;
  if (remaining.empty()) {
    for (std::size_t i = 0; i < network.num_tests(); ++i) remaining.push_back(static_cast<int>(i));
  }
  for (int i : remaining) {
    if (i < 0 || i >= static_cast<int>(network.num_tests())) {
      throw InvalidArgument("candidate test index " + std::to_string(i) + " out of range");
    }
  }

  ProbingState state(network, config);
  for (const auto& w : network.warnings()) trace.notices.push_back(w);

  const bool use_exact_series = state.posterior() != nullptr;
  std::vector<double> series;
  trace.final.initial_proxy_bits = state.entropy_proxy_bits();
  if (use_exact_series) {
    trace.final.initial_exact_bits = state.posterior()->entropy(LogBase::bits);
    series.push_back(*trace.final.initial_exact_bits);
  } else {
    series.push_back(trace.final.initial_proxy_bits);
  }

  int step = 0;
  try {
    while (!remaining.empty()) {
      SessionStep rec;
      rec.step = step;
      const auto start = Clock::now();
      const auto scored = state.score(remaining);
      double cpu = elapsed_ms(start) + state.last_update_ms();

      std::size_t best = 0;
      for (std::size_t k = 1; k < scored.size(); ++k) {
        const int id = network.tests()[static_cast<std::size_t>(scored[k].test_index)].id;
        const int best_id = network.tests()[static_cast<std::size_t>(scored[best].test_index)].id;
        if (scored[k].score < scored[best].score ||
            (scored[k].score == scored[best].score && id < best_id)) {
          best = k;
        }
      }
      const int chosen = scored[best].test_index;

      if (config.record_candidates) {
        for (const auto& s : scored) {
          CandidateRecord c;
          c.probe_id = network.tests()[static_cast<std::size_t>(s.test_index)].id;
          if (config.scorer == Scorer::bpea) {
            c.approx_a = s.a_term;
            c.approx_h = s.h_t;
            c.approx_score = s.score;
          }
          if (state.posterior()) {
            const auto t = state.posterior()->test_terms(static_cast<std::size_t>(s.test_index));
            c.exact_a = t.a_term;
            c.exact_h = t.h_t;
            c.exact_score = t.a_term - t.h_t;
          }
          rec.candidates.push_back(std::move(c));
        }
      }

      rec.probe_id = network.tests()[static_cast<std::size_t>(chosen)].id;
      rec.score = scored[best].score;
      if (config.scorer == Scorer::exact) rec.score += state.posterior()->entropy();
      if (const BpResult* bp = state.bp()) {
        rec.bp_iterations = bp->iterations;
        rec.bp_converged = bp->converged;
      }
      rec.outcome = world.outcomes[static_cast<std::size_t>(chosen)];
      rec.cpu_ms = config.timing ? cpu : 0.0;

      remaining.erase(std::find(remaining.begin(), remaining.end(), chosen));
      state.observe(chosen, rec.outcome);

      rec.entropy_proxy_bits = state.entropy_proxy_bits();
      if (state.posterior()) rec.exact_entropy_bits = state.posterior()->entropy(LogBase::bits);
      series.push_back(use_exact_series ? *rec.exact_entropy_bits : rec.entropy_proxy_bits);
      trace.steps.push_back(std::move(rec));
      ++step;

      if (stopping_rule_fires(series, config.stop_window, config.stop_threshold)) {
        trace.final.stopped_by_rule = true;
        break;
      }
    }
  } catch (const ContradictionError& e) {
    trace.final.aborted = true;
    trace.final.diagnostic = std::string("step ") + std::to_string(step) + ": " + e.what();
  }

  trace.final.final_size = static_cast<int>(trace.steps.size());
  if (!trace.final.aborted) {
    const auto beliefs = state.fault_beliefs();
    trace.final.diagnosis = marginal_diagnosis(beliefs);
    for (std::size_t j = 0; j < beliefs.size(); ++j) {
      trace.final.correct.push_back(trace.final.diagnosis[j] == world.fault_state[j] ? 1 : 0);
    }
    if (const FaultPosterior* post = state.posterior()) {
      trace.final.reduction_bits =
          post->prior_entropy(LogBase::bits) - post->entropy(LogBase::bits);
    }
  }
  return trace;
}

double diagnosis_quality(const NoisyOrNetwork& network, const SessionTrace& trace) {
  FaultPosterior post(network);
  for (const SessionStep& s : trace.steps) {
    post.observe(network.test_index(s.probe_id), s.outcome);
  }
  return post.prior_entropy(LogBase::bits) - post.entropy(LogBase::bits);
}

std::vector<int> marginal_diagnosis(std::span<const double> fault_probabilities) {
  std::vector<int> out;
  out.reserve(fault_probabilities.size());
  for (double p : fault_probabilities) out.push_back(p > 0.5 ? 1 : 0);
  return out;
}

RelativeError relative_error(const std::vector<std::vector<double>>& approx,
                             const std::vector<std::vector<double>>& exact,
                             double zero_tolerance) {
  if (approx.size() != exact.size()) {
    throw InvalidArgument("approximate and exact series have different step counts");
  }
  RelativeError out;
  double outer = 0.0;
  for (std::size_t i = 0; i < approx.size(); ++i) {
    if (approx[i].size() != exact[i].size()) {
      throw InvalidArgument("step " + std::to_string(i) + " candidate lists are misaligned");
    }
    double inner = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < approx[i].size(); ++j) {
      const double H = exact[i][j];
      if (std::abs(H) <= zero_tolerance) {
        ++out.excluded;
        continue;
      }
      inner += std::abs(approx[i][j] - H) / std::abs(H);
      ++count;
    }
    if (count > 0) {
      outer += inner / static_cast<double>(count);
      out.included += count;
      ++out.steps;
    }
  }
  out.r = out.steps > 0 ? outer / static_cast<double>(out.steps) : 0.0;
  return out;
}

ErrorReport relative_error_report(const SessionTrace& trace, double zero_tolerance) {
  std::vector<std::vector<double>> ha, Ha, hh, Hh;
  for (const SessionStep& s : trace.steps) {
    std::vector<double> a1, a2, h1, h2;
    for (const CandidateRecord& c : s.candidates) {
      if (!(c.approx_a && c.exact_a && c.approx_h && c.exact_h)) continue;
      a1.push_back(*c.approx_a);
      a2.push_back(*c.exact_a);
      h1.push_back(*c.approx_h);
      h2.push_back(*c.exact_h);
    }
    if (a1.empty()) continue;
    ha.push_back(std::move(a1));
    Ha.push_back(std::move(a2));
    hh.push_back(std::move(h1));
    Hh.push_back(std::move(h2));
  }
  return {relative_error(ha, Ha, zero_tolerance), relative_error(hh, Hh, zero_tolerance)};
}

void write_trace_csv(std::ostream& out, const SessionTrace& trace) {
  const auto precision = out.precision(12);
  out << "step,probe_id,outcome,score,entropy_proxy_bits,exact_entropy_bits,"
         "bp_iterations,bp_converged,cpu_ms\n";
  for (const SessionStep& s : trace.steps) {
    out << s.step << ',' << s.probe_id << ',' << s.outcome << ',' << s.score << ','
        << s.entropy_proxy_bits << ',';
    if (s.exact_entropy_bits) out << *s.exact_entropy_bits;
    out << ',' << s.bp_iterations << ',' << (s.bp_converged ? 1 : 0) << ',' << s.cpu_ms
        << '\n';
  }
  out.precision(precision);
}

void write_candidate_csv(std::ostream& out, const SessionTrace& trace, bool exact_terms) {
  const auto precision = out.precision(12);
  out << "step,candidate_id,A_term,H_T_term,score,bp_converged\n";
  for (const SessionStep& s : trace.steps) {
    for (const CandidateRecord& c : s.candidates) {
      const auto& a = exact_terms ? c.exact_a : c.approx_a;
      const auto& h = exact_terms ? c.exact_h : c.approx_h;
      const auto& sc = exact_terms ? c.exact_score : c.approx_score;
      if (!a || !h || !sc) continue;
      out << s.step << ',' << c.probe_id << ',' << *a << ',' << *h << ',' << *sc << ','
          << ((exact_terms || s.bp_converged) ? 1 : 0) << '\n';
    }
  }
  out.precision(precision);
}

nlohmann::json summary_json(const SessionTrace& trace) {
  nlohmann::json j;
  j["scorer"] = to_string(trace.scorer);
  j["final_size"] = trace.final.final_size;
  j["reduction_bits"] = trace.final.reduction_bits
                            ? nlohmann::json(*trace.final.reduction_bits)
                            : nlohmann::json(nullptr);
  j["diagnosis"] = trace.final.diagnosis;
  j["correct"] = trace.final.correct;
  j["ground_truth"] = trace.final.ground_truth;
  j["seed"] = trace.final.seed;
  j["stopped_by_rule"] = trace.final.stopped_by_rule;
  j["aborted"] = trace.final.aborted;
  if (trace.final.aborted) j["diagnostic"] = trace.final.diagnostic;
  j["notices"] = trace.notices;
  return j;
}

}  // namespace probediag
