#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace probediag {

struct VariableNode {
  int id = 0;
  int cardinality = 2;
  std::string label;
};

// Dense potential over `scope`. Row-major, first scope variable is the most
// significant digit.
struct FactorNode {
  int id = 0;
  std::vector<int> scope;
  std::vector<double> table;
};

// Observed states, keyed by variable id.
class Evidence {
 public:
  Evidence() = default;

  // Throws InvalidArgument when `var` is already observed in another state.
  void observe(int var, int state);

  std::optional<int> state_of(int var) const;
  bool contains(int var) const { return assignments_.count(var) != 0; }
  bool empty() const { return assignments_.empty(); }
  std::size_t size() const { return assignments_.size(); }
  const std::map<int, int>& assignments() const { return assignments_; }

 private:
  std::map<int, int> assignments_;
};

// Mixed-radix row-major index of `assignment` under `cards`.
// Throws StateOutOfRange naming the first bad position.
std::size_t assignment_to_index(std::span<const int> cards,
                                std::span<const int> assignment);
std::vector<int> index_to_assignment(std::span<const int> cards,
                                     std::size_t index);

class FactorGraph {
 public:
  FactorGraph() = default;

  // Validates ids, table sizes, nonnegativity and scope uniqueness.
  FactorGraph(std::vector<VariableNode> variables,
              std::vector<FactorNode> factors);

  const std::vector<VariableNode>& variables() const { return variables_; }
  const std::vector<FactorNode>& factors() const { return factors_; }
  const VariableNode& variable(int id) const { return variables_.at(id); }
  const FactorNode& factor(int id) const { return factors_.at(id); }
  std::size_t num_variables() const { return variables_.size(); }
  std::size_t num_factors() const { return factors_.size(); }

  // N(i): ids of factors whose scope contains variable i, ascending.
  const std::vector<int>& incident_factors(int var) const {
    return adjacency_.at(var);
  }

  std::vector<int> scope_cards(int factor_id) const;
  std::size_t total_states() const;  // saturates at SIZE_MAX

  // Variables fixed by δ-factors appended through apply_evidence.
  const Evidence& evidence() const { return evidence_; }

  // Set when the factor product is known to be normalized (Bayes nets).
  std::optional<double> known_partition() const { return known_partition_; }
  void set_known_partition(double z) { known_partition_ = z; }

  // ∏_a f_a(x_a) for a complete assignment (indexed by variable id).
  double factor_product(std::span<const int> full_assignment) const;

 private:
  friend FactorGraph apply_evidence(const FactorGraph&, const Evidence&);

  std::vector<VariableNode> variables_;
  std::vector<FactorNode> factors_;
  std::vector<std::vector<int>> adjacency_;
  Evidence evidence_;
  std::optional<double> known_partition_;
};

// One family {x_i, pa_i}. `cpt` is row-major over (parents..., child): the
// row for parent configuration p occupies cpt[p*card .. p*card+card).
struct BayesNode {
  int cardinality = 2;
  std::string label;
  std::vector<int> parents;
  std::vector<double> cpt;
};

// Builds one factor per family with scope (parents..., child). Rejects
// cycles and rows that do not sum to 1 within 1e-12.
FactorGraph bayesnet_to_factor_graph(const std::vector<BayesNode>& nodes);

// (1/Z)·∏_a f_a(x_a). Z is computed by enumeration unless known.
double joint_probability(const FactorGraph& graph,
                         std::span<const int> full_assignment);

// Appends one δ-factor per newly observed variable. Original factors are
// untouched; re-observing a variable in the same state adds nothing.
FactorGraph apply_evidence(const FactorGraph& graph, const Evidence& evidence);

nlohmann::json to_json(const FactorGraph& graph);
FactorGraph factor_graph_from_json(const nlohmann::json& j);

}  // namespace probediag
