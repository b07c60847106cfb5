#include "probediag/bp_engine.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "probediag/error.hpp"

namespace probediag {

void BpConfig::validate() const {
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
  if (!(tolerance >= 0.0)) throw InvalidArgument("tolerance must be >= 0");
  if (!(damping >= 0.0 && damping < 1.0)) {
    throw InvalidArgument("damping must lie in [0, 1)");
  }
}

MessageStore::MessageStore(const FactorGraph& graph) {
  std::size_t offset = 0;
  factor_first_edge_.reserve(graph.num_factors());
  for (const auto& f : graph.factors()) {
    factor_first_edge_.push_back(edges_.size());
    for (std::size_t k = 0; k < f.scope.size(); ++k) {
      const int card = graph.variable(f.scope[k]).cardinality;
      edges_.push_back({f.id, static_cast<int>(k), f.scope[k], card, offset});
      offset += static_cast<std::size_t>(card);
    }
  }
  v2f_.resize(offset);
  f2v_.resize(offset);
  for (const auto& e : edges_) {
    std::fill_n(v2f_.begin() + static_cast<std::ptrdiff_t>(e.offset), e.cardinality,
                1.0 / e.cardinality);
    std::fill_n(f2v_.begin() + static_cast<std::ptrdiff_t>(e.offset), e.cardinality,
                1.0 / e.cardinality);
  }
}

std::span<double> MessageStore::var_to_factor(std::size_t e) {
  const Edge& ed = edges_.at(e);
  return {v2f_.data() + ed.offset, static_cast<std::size_t>(ed.cardinality)};
}
std::span<const double> MessageStore::var_to_factor(std::size_t e) const {
  const Edge& ed = edges_.at(e);
  return {v2f_.data() + ed.offset, static_cast<std::size_t>(ed.cardinality)};
}
std::span<double> MessageStore::factor_to_var(std::size_t e) {
  const Edge& ed = edges_.at(e);
  return {f2v_.data() + ed.offset, static_cast<std::size_t>(ed.cardinality)};
}
std::span<const double> MessageStore::factor_to_var(std::size_t e) const {
  const Edge& ed = edges_.at(e);
  return {f2v_.data() + ed.offset, static_cast<std::size_t>(ed.cardinality)};
}

void MessageStore::warm_start_from(const MessageStore& prior) {
  const std::size_t shared = std::min(edges_.size(), prior.edges_.size());
  for (std::size_t e = 0; e < shared; ++e) {
    const Edge& mine = edges_[e];
    const Edge& theirs = prior.edges_[e];
    if (mine.factor != theirs.factor || mine.variable != theirs.variable ||
        mine.cardinality != theirs.cardinality) {
      throw InvalidArgument("warm-start store does not match graph at edge " +
                            std::to_string(e));
    }
    std::copy_n(prior.v2f_.begin() + static_cast<std::ptrdiff_t>(theirs.offset),
                theirs.cardinality,
                v2f_.begin() + static_cast<std::ptrdiff_t>(mine.offset));
    std::copy_n(prior.f2v_.begin() + static_cast<std::ptrdiff_t>(theirs.offset),
                theirs.cardinality,
                f2v_.begin() + static_cast<std::ptrdiff_t>(mine.offset));
  }
}

namespace {

// Sums to one in place; returns the pre-normalization total.
double normalize(std::span<double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  if (s > 0.0) {
    for (double& x : v) x /= s;
  }
  return s;
}

std::size_t position_in_scope(const FactorNode& f, int var) {
  auto it = std::find(f.scope.begin(), f.scope.end(), var);
  if (it == f.scope.end()) {
    throw InvalidArgument("variable " + std::to_string(var) +
                          " is not in the scope of factor " + std::to_string(f.id));
  }
  return static_cast<std::size_t>(it - f.scope.begin());
}

// For each variable, the edges (into incident factors) that touch it.
std::vector<std::vector<std::size_t>> variable_edges(const FactorGraph& graph,
                                                     const MessageStore& store) {
  std::vector<std::vector<std::size_t>> out(graph.num_variables());
  for (std::size_t e = 0; e < store.num_edges(); ++e) {
    out[static_cast<std::size_t>(store.edges()[e].variable)].push_back(e);
  }
  return out;
}

// Fills every n_{i→a} of variable `var` from the current m messages.
void refresh_variable(MessageStore& store, const std::vector<std::size_t>& edges,
                      int card, bool normalize_messages, int& degenerate) {
  for (std::size_t target : edges) {
    auto out = store.var_to_factor(target);
    std::fill(out.begin(), out.end(), 1.0);
    for (std::size_t other : edges) {
      if (other == target) continue;
      auto in = store.factor_to_var(other);
      for (int x = 0; x < card; ++x) out[x] *= in[x];
    }
    double s = 0.0;
    for (double x : out) s += x;
    if (!(s > 0.0)) {
      ++degenerate;
      std::fill(out.begin(), out.end(), 1.0 / card);
    } else if (normalize_messages) {
      for (double& x : out) x /= s;
    }
  }
}

// Computes all outgoing m_{a→i} of factor `a` into `out` (one vector per
// scope position) from the current n messages.
void compute_factor_messages(const FactorGraph& graph, const MessageStore& store,
                             int a, std::vector<std::vector<double>>& out) {
  const FactorNode& f = graph.factor(a);
  const std::size_t k = f.scope.size();
  const std::size_t first = store.first_edge(a);
  std::vector<int> cards(k);
  std::vector<std::span<const double>> incoming(k);
  out.resize(k);
  for (std::size_t p = 0; p < k; ++p) {
    cards[p] = store.edges()[first + p].cardinality;
    incoming[p] = store.var_to_factor(first + p);
    out[p].assign(static_cast<std::size_t>(cards[p]), 0.0);
  }
  std::vector<int> digit(k, 0);
  std::vector<double> prefix(k + 1), suffix(k + 1);
  for (std::size_t idx = 0; idx < f.table.size(); ++idx) {
    const double value = f.table[idx];
    if (value != 0.0) {
      prefix[0] = 1.0;
      for (std::size_t p = 0; p < k; ++p) prefix[p + 1] = prefix[p] * incoming[p][digit[p]];
      suffix[k] = 1.0;
      for (std::size_t p = k; p-- > 0;) suffix[p] = suffix[p + 1] * incoming[p][digit[p]];
      for (std::size_t p = 0; p < k; ++p) {
        out[p][static_cast<std::size_t>(digit[p])] += value * prefix[p] * suffix[p + 1];
      }
    }
    for (std::size_t p = k; p-- > 0;) {
      if (++digit[p] < cards[p]) break;
      digit[p] = 0;
    }
  }
}

void check_nonzero(const std::vector<double>& m, int factor, int var) {
  for (double x : m) {
    if (x > 0.0) return;
  }
  throw ContradictionError("factor " + std::to_string(factor) +
                           " sends an all-zero message to variable " +
                           std::to_string(var) +
                           " (contradictory potential or evidence)");
}

// Writes fresh factor messages into the store, returning the max change.
double commit_factor(MessageStore& store, const FactorGraph& graph, int a,
                     std::vector<std::vector<double>>& fresh,
                     const BpConfig& config) {
  const FactorNode& f = graph.factor(a);
  const std::size_t first = store.first_edge(a);
  double max_change = 0.0;
  for (std::size_t p = 0; p < f.scope.size(); ++p) {
    auto& m = fresh[p];
    check_nonzero(m, a, f.scope[p]);
    if (config.normalize_messages) normalize(m);
    auto dst = store.factor_to_var(first + p);
    if (config.damping > 0.0) {
      for (std::size_t x = 0; x < m.size(); ++x) {
        m[x] = (1.0 - config.damping) * m[x] + config.damping * dst[x];
      }
      if (config.normalize_messages) normalize(m);
    }
    for (std::size_t x = 0; x < m.size(); ++x) {
      max_change = std::max(max_change, std::abs(m[x] - dst[x]));
      dst[x] = m[x];
    }
  }
  return max_change;
}

}  // namespace

std::vector<double> variable_to_factor(const MessageStore& store,
                                       const FactorGraph& graph, int var,
                                       int factor, bool* degenerate) {
  const int card = graph.variable(var).cardinality;
  std::vector<double> out(static_cast<std::size_t>(card), 1.0);
  bool found = false;
  for (int c : graph.incident_factors(var)) {
    const std::size_t e = store.edge_index(c, static_cast<int>(position_in_scope(graph.factor(c), var)));
    if (c == factor) {
      found = true;
      continue;
    }
    auto in = store.factor_to_var(e);
    for (int x = 0; x < card; ++x) out[x] *= in[x];
  }
  if (!found) {
    throw InvalidArgument("variable " + std::to_string(var) +
                          " is not adjacent to factor " + std::to_string(factor));
  }
  const bool zero = !(normalize(out) > 0.0);
  if (zero) std::fill(out.begin(), out.end(), 1.0 / card);
  if (degenerate) *degenerate = zero;
  return out;
}

std::vector<double> factor_to_variable(const MessageStore& store,
                                       const FactorGraph& graph, int factor,
                                       int var, bool normalize_message) {
  const std::size_t pos = position_in_scope(graph.factor(factor), var);
  std::vector<std::vector<double>> out;
  compute_factor_messages(graph, store, factor, out);
  check_nonzero(out[pos], factor, var);
  if (normalize_message) normalize(out[pos]);
  return out[pos];
}

std::vector<double> node_belief(const FactorGraph& graph,
                                const MessageStore& store, int var) {
  const int card = graph.variable(var).cardinality;
  std::vector<double> b(static_cast<std::size_t>(card), 1.0);
  for (int a : graph.incident_factors(var)) {
    auto in = store.factor_to_var(
        store.edge_index(a, static_cast<int>(position_in_scope(graph.factor(a), var))));
    for (int x = 0; x < card; ++x) b[x] *= in[x];
  }
  if (!(normalize(b) > 0.0)) {
    throw ContradictionError("belief of variable " + std::to_string(var) +
                             " is identically zero");
  }
  return b;
}

std::vector<double> factor_belief(const FactorGraph& graph,
                                  const MessageStore& store, int factor) {
  const FactorNode& f = graph.factor(factor);
  const std::size_t k = f.scope.size();
  const std::size_t first = store.first_edge(factor);
  std::vector<int> cards(k);
  for (std::size_t p = 0; p < k; ++p) cards[p] = store.edges()[first + p].cardinality;
  std::vector<double> b(f.table.size());
  std::vector<int> digit(k, 0);
  for (std::size_t idx = 0; idx < f.table.size(); ++idx) {
    double v = f.table[idx];
    for (std::size_t p = 0; p < k && v != 0.0; ++p) {
      v *= store.var_to_factor(first + p)[static_cast<std::size_t>(digit[p])];
    }
    b[idx] = v;
    for (std::size_t p = k; p-- > 0;) {
      if (++digit[p] < cards[p]) break;
      digit[p] = 0;
    }
  }
  if (!(normalize(b) > 0.0)) {
    throw ContradictionError("belief of factor " + std::to_string(factor) +
                             " is identically zero");
  }
  return b;
}

BpResult run_bp(const FactorGraph& graph, const Evidence& evidence,
                const BpConfig& config, const MessageStore* warm_start) {
  config.validate();
  BpResult result;
  result.graph = evidence.empty() ? graph : apply_evidence(graph, evidence);
  const FactorGraph& g = result.graph;
  MessageStore store(g);
  if (warm_start) store.warm_start_from(*warm_start);

  const auto var_edges = variable_edges(g, store);
  std::vector<std::vector<double>> fresh;
  int moved = 0;
  bool converged = false;

  for (int sweep = 0; sweep < config.max_iterations; ++sweep) {
    double max_change = 0.0;
    if (config.schedule == Schedule::synchronous) {
      for (std::size_t v = 0; v < g.num_variables(); ++v) {
        refresh_variable(store, var_edges[v], g.variable(static_cast<int>(v)).cardinality,
                         config.normalize_messages, store.degenerate_products);
      }
      std::vector<std::vector<std::vector<double>>> all(g.num_factors());
      for (std::size_t a = 0; a < g.num_factors(); ++a) {
        compute_factor_messages(g, store, static_cast<int>(a), all[a]);
      }
      for (std::size_t a = 0; a < g.num_factors(); ++a) {
        max_change = std::max(max_change,
                              commit_factor(store, g, static_cast<int>(a), all[a], config));
      }
    } else {
      for (const auto& f : g.factors()) {
        for (int v : f.scope) {
          refresh_variable(store, var_edges[static_cast<std::size_t>(v)],
                           g.variable(v).cardinality, config.normalize_messages,
                           store.degenerate_products);
        }
        compute_factor_messages(g, store, f.id, fresh);
        max_change = std::max(max_change, commit_factor(store, g, f.id, fresh, config));
      }
    }
    if (max_change < config.tolerance) {
      converged = true;
      break;
    }
    ++moved;
  }

  // Final n messages consistent with the final m messages.
  int scratch = 0;
  for (std::size_t v = 0; v < g.num_variables(); ++v) {
    refresh_variable(store, var_edges[v], g.variable(static_cast<int>(v)).cardinality,
                     config.normalize_messages, scratch);
  }
  store.iteration_count = moved;
  store.converged = converged;

  result.node_beliefs.reserve(g.num_variables());
  for (std::size_t v = 0; v < g.num_variables(); ++v) {
    result.node_beliefs.push_back(node_belief(g, store, static_cast<int>(v)));
  }
  result.factor_beliefs.reserve(g.num_factors());
  for (std::size_t a = 0; a < g.num_factors(); ++a) {
    result.factor_beliefs.push_back(factor_belief(g, store, static_cast<int>(a)));
  }
  result.converged = converged;
  result.iterations = moved;
  result.store = std::move(store);
  return result;
}

void write_message_dump(std::ostream& out, const MessageStore& store) {
  out << "edge_kind,from,to,state,value,iteration\n";
  for (std::size_t e = 0; e < store.num_edges(); ++e) {
    const Edge& ed = store.edges()[e];
    auto n = store.var_to_factor(e);
    for (int x = 0; x < ed.cardinality; ++x) {
      out << "var_to_factor," << ed.variable << ',' << ed.factor << ',' << x << ','
          << n[x] << ',' << store.iteration_count << '\n';
    }
  }
  for (std::size_t e = 0; e < store.num_edges(); ++e) {
    const Edge& ed = store.edges()[e];
    auto m = store.factor_to_var(e);
    for (int x = 0; x < ed.cardinality; ++x) {
      out << "factor_to_var," << ed.factor << ',' << ed.variable << ',' << x << ','
          << m[x] << ',' << store.iteration_count << '\n';
    }
  }
}

}  // namespace probediag
