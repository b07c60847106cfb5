#include "probediag/bpea.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "probediag/error.hpp"

namespace probediag {

double binary_entropy_nats(double p) {
  double h = 0.0;
  if (p > 0.0 && p < 1.0) h = -p * std::log(p) - (1.0 - p) * std::log1p(-p);
  return h;
}

double entropy_nats(const std::vector<double>& dist) {
  double h = 0.0;
  for (double p : dist) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

UnnormalizedBelief unnormalized_factor_belief(const FactorGraph& graph,
                                              const MessageStore& store,
                                              int factor) {
  const FactorNode& f = graph.factor(factor);
  const std::size_t k = f.scope.size();
  const std::size_t first = store.first_edge(factor);
  std::vector<int> cards = graph.scope_cards(factor);
  UnnormalizedBelief out;
  out.table.resize(f.table.size());
  std::vector<int> digit(k, 0);
  for (std::size_t idx = 0; idx < f.table.size(); ++idx) {
    double v = f.table[idx];
    for (std::size_t p = 0; p < k && v != 0.0; ++p) {
      v *= store.var_to_factor(first + p)[static_cast<std::size_t>(digit[p])];
    }
    out.table[idx] = v;
    out.sigma += v;
    for (std::size_t p = k; p-- > 0;) {
      if (++digit[p] < cards[p]) break;
      digit[p] = 0;
    }
  }
  return out;
}

namespace {

std::size_t root_position(const FactorNode& f, int root) {
  auto it = std::find(f.scope.begin(), f.scope.end(), root);
  if (it == f.scope.end()) {
    throw InvalidArgument("root variable " + std::to_string(root) +
                          " is not in the scope of factor " + std::to_string(f.id));
  }
  return static_cast<std::size_t>(it - f.scope.begin());
}

std::vector<double> message_from_belief(const FactorGraph& graph,
                                        const EntropyQuery& query,
                                        const UnnormalizedBelief& belief) {
  const FactorNode& f = graph.factor(query.factor_id);
  const std::size_t root = root_position(f, query.root_variable);
  const std::vector<int> cards = graph.scope_cards(query.factor_id);
  if (query.mode == EntropyMode::generic_cost &&
      query.cost_table.size() != f.table.size()) {
    throw InvalidArgument("cost table size does not match factor " +
                          std::to_string(f.id));
  }

  // Stride of the root digit in the row-major table.
  std::size_t stride = 1;
  for (std::size_t p = cards.size(); p-- > root + 1;) stride *= static_cast<std::size_t>(cards[p]);
  const auto root_card = static_cast<std::size_t>(cards[root]);

  std::vector<double> m(root_card, 0.0);
  for (std::size_t idx = 0; idx < belief.table.size(); ++idx) {
    const double b = belief.table[idx];
    if (b == 0.0) continue;  // 0·log 0 = 0
    const std::size_t x0 = (idx / stride) % root_card;
    switch (query.mode) {
      case EntropyMode::entropy:
        m[x0] -= b * std::log(b);
        break;
      case EntropyMode::cross_entropy: {
        const double fa = f.table[idx];
        if (!(fa > 0.0)) {
          throw ContradictionError("factor " + std::to_string(f.id) +
                                   " has zero probability at a cell with positive belief");
        }
        m[x0] -= b * std::log(fa);
        break;
      }
      case EntropyMode::generic_cost:
        m[x0] += b * query.cost_table[idx];
        break;
    }
  }
  return m;
}

}  // namespace

std::vector<double> entropy_message(const FactorGraph& graph,
                                    const MessageStore& store,
                                    const EntropyQuery& query) {
  return message_from_belief(graph, query,
                             unnormalized_factor_belief(graph, store, query.factor_id));
}

EntropyResult approx_scope_entropy(const FactorGraph& graph,
                                   const MessageStore& store,
                                   const EntropyQuery& query) {
  const UnnormalizedBelief belief =
      unnormalized_factor_belief(graph, store, query.factor_id);
  if (!(belief.sigma > 0.0)) {
    throw ContradictionError("factor " + std::to_string(query.factor_id) +
                             " has an identically zero belief");
  }
  const std::vector<double> m = message_from_belief(graph, query, belief);
  double h_tilde = 0.0;
  for (double x : m) h_tilde += x;

  EntropyResult r;
  r.sigma = belief.sigma;
  r.mode = query.mode;
  r.bp_converged = store.converged;
  r.value = h_tilde / belief.sigma;
  if (query.mode == EntropyMode::entropy) r.value += std::log(belief.sigma);
  return r;
}

ScoreBatch score_all_tests(const FactorGraph& graph, const MessageStore& store,
                           const std::vector<TestFamily>& candidates) {
  ScoreBatch batch;
  batch.scores.reserve(candidates.size());
  for (const TestFamily& c : candidates) {
    if (graph.evidence().contains(c.test_variable)) {
      batch.notices.push_back("candidate test variable " +
                              std::to_string(c.test_variable) +
                              " is already observed; skipped");
      continue;
    }
    EntropyQuery q{c.factor_id, c.test_variable, EntropyMode::cross_entropy, {}};
    TestScore s;
    s.factor_id = c.factor_id;
    s.test_variable = c.test_variable;
    s.a_term = approx_scope_entropy(graph, store, q).value;
    s.h_t = entropy_nats(node_belief(graph, store, c.test_variable));
    s.score = s.a_term - s.h_t;
    s.bp_converged = store.converged;
    batch.scores.push_back(s);
  }
  return batch;
}

std::size_t best_score_index(const std::vector<TestScore>& scores) {
  if (scores.empty()) throw InvalidArgument("no scores to choose from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i].score < scores[best].score ||
        (scores[i].score == scores[best].score &&
         scores[i].factor_id < scores[best].factor_id)) {
      best = i;
    }
  }
  return best;
}

void write_score_header(std::ostream& out) {
  out << "step,candidate_id,A_term,H_T_term,score,bp_converged\n";
}

void write_score_rows(std::ostream& out, int step,
                      const std::vector<TestScore>& scores,
                      const std::vector<int>& candidate_ids) {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int id = i < candidate_ids.size() ? candidate_ids[i] : scores[i].factor_id;
    out << step << ',' << id << ',' << scores[i].a_term << ',' << scores[i].h_t << ','
        << scores[i].score << ',' << (scores[i].bp_converged ? 1 : 0) << '\n';
  }
}

}  // namespace probediag
