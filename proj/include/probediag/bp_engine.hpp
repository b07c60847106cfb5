#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "probediag/factor_graph.hpp"

namespace probediag {

enum class Schedule { synchronous, sequential };

struct BpConfig {
  int max_iterations = 1000;
  double tolerance = 1e-9;   // max absolute factor-to-variable message change
  double damping = 0.0;      // fraction of the previous message retained
  Schedule schedule = Schedule::synchronous;
  bool normalize_messages = true;

  void validate() const;
};

// One directed pair of messages per (factor, scope position). Edges are
// numbered factor by factor in scope order, so appending factors to a graph
// only appends edges.
struct Edge {
  int factor = 0;
  int position = 0;
  int variable = 0;
  int cardinality = 2;
  std::size_t offset = 0;  // into the flat message buffers
};

class MessageStore {
 public:
  MessageStore() = default;

  // Every message set to uniform.
  explicit MessageStore(const FactorGraph& graph);

  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t num_edges() const { return edges_.size(); }

  // Edge index for (factor, scope position).
  std::size_t edge_index(int factor, int position) const {
    return factor_first_edge_.at(factor) + static_cast<std::size_t>(position);
  }
  std::size_t first_edge(int factor) const { return factor_first_edge_.at(factor); }

  // n_{i→a} and m_{a→i} for edge e.
  std::span<double> var_to_factor(std::size_t e);
  std::span<const double> var_to_factor(std::size_t e) const;
  std::span<double> factor_to_var(std::size_t e);
  std::span<const double> factor_to_var(std::size_t e) const;

  // Copies messages from `prior` on every edge both stores share (same
  // factor, variable and cardinality). Edges that exist only here keep their
  // current values. Throws InvalidArgument when a shared edge disagrees.
  void warm_start_from(const MessageStore& prior);

  int iteration_count = 0;
  bool converged = false;
  int degenerate_products = 0;  // all-zero n_{i→a} replaced by uniform

 private:
  std::vector<Edge> edges_;
  std::vector<std::size_t> factor_first_edge_;
  std::vector<double> v2f_;
  std::vector<double> f2v_;
};

struct BpResult {
  FactorGraph graph;  // input graph with evidence δ-factors appended
  MessageStore store;
  std::vector<std::vector<double>> node_beliefs;
  std::vector<std::vector<double>> factor_beliefs;
  bool converged = false;
  int iterations = 0;
};

// n_{i→a}: product of the other incoming factor messages, normalized.
std::vector<double> variable_to_factor(const MessageStore& store,
                                       const FactorGraph& graph, int var,
                                       int factor, bool* degenerate = nullptr);

// m_{a→i}: marginalize f_a times the other incoming variable messages.
// Throws ContradictionError when the result is identically zero.
std::vector<double> factor_to_variable(const MessageStore& store,
                                       const FactorGraph& graph, int factor,
                                       int var, bool normalize = true);

// b_i ∝ ∏_a m_{a→i}. Throws ContradictionError on an all-zero belief.
std::vector<double> node_belief(const FactorGraph& graph,
                                const MessageStore& store, int var);

// b_a ∝ f_a ∏_i n_{i→a}. Throws ContradictionError on an all-zero belief.
std::vector<double> factor_belief(const FactorGraph& graph,
                                  const MessageStore& store, int factor);

// Applies `evidence`, iterates until the largest message change drops below
// the tolerance or max_iterations sweeps have run. `iterations` counts the
// sweeps that moved some message by at least the tolerance, so a warm start
// already at the fixed point reports zero.
BpResult run_bp(const FactorGraph& graph, const Evidence& evidence,
                const BpConfig& config,
                const MessageStore* warm_start = nullptr);

// CSV dump: edge_kind,from,to,state,value,iteration
void write_message_dump(std::ostream& out, const MessageStore& store);

}  // namespace probediag
