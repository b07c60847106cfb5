#include "probediag/factor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "probediag/error.hpp"

namespace probediag {

void Evidence::observe(int var, int state) {
  auto it = assignments_.find(var);
  if (it != assignments_.end()) {
    if (it->second != state) {
      throw InvalidArgument("variable " + std::to_string(var) +
                            " already observed in state " +
                            std::to_string(it->second) +
                            ", cannot re-observe as " + std::to_string(state));
    }
    return;
  }
  assignments_.emplace(var, state);
}

std::optional<int> Evidence::state_of(int var) const {
  auto it = assignments_.find(var);
  if (it == assignments_.end()) return std::nullopt;
  return it->second;
}

std::size_t assignment_to_index(std::span<const int> cards,
                                std::span<const int> assignment) {
  if (cards.size() != assignment.size()) {
    throw InvalidArgument("assignment has " + std::to_string(assignment.size()) +
                          " entries, scope has " + std::to_string(cards.size()));
  }
  std::size_t index = 0;
  for (std::size_t k = 0; k < cards.size(); ++k) {
    if (assignment[k] < 0 || assignment[k] >= cards[k]) {
      throw StateOutOfRange("state " + std::to_string(assignment[k]) +
                                " out of range at position " +
                                std::to_string(k) + " (cardinality " +
                                std::to_string(cards[k]) + ")",
                            k);
    }
    index = index * static_cast<std::size_t>(cards[k]) +
            static_cast<std::size_t>(assignment[k]);
  }
  return index;
}

std::vector<int> index_to_assignment(std::span<const int> cards,
                                     std::size_t index) {
  std::vector<int> out(cards.size());
  for (std::size_t k = cards.size(); k-- > 0;) {
    out[k] = static_cast<int>(index % static_cast<std::size_t>(cards[k]));
    index /= static_cast<std::size_t>(cards[k]);
  }
  if (index != 0) throw InvalidArgument("index exceeds table size");
  return out;
}

FactorGraph::FactorGraph(std::vector<VariableNode> variables,
                         std::vector<FactorNode> factors)
    : variables_(std::move(variables)), factors_(std::move(factors)) {
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].id != static_cast<int>(i)) {
      throw InvalidArgument("variable ids must be dense 0..V-1; found id " +
                            std::to_string(variables_[i].id) + " at position " +
                            std::to_string(i));
    }
    if (variables_[i].cardinality < 2) {
      throw InvalidArgument("variable " + std::to_string(i) +
                            " has cardinality < 2");
    }
  }
  adjacency_.assign(variables_.size(), {});
  for (std::size_t a = 0; a < factors_.size(); ++a) {
    const FactorNode& f = factors_[a];
    if (f.id != static_cast<int>(a)) {
      throw InvalidArgument("factor ids must be dense 0..F-1; found id " +
                            std::to_string(f.id) + " at position " +
                            std::to_string(a));
    }
    std::set<int> seen;
    std::size_t expected = 1;
    for (int v : f.scope) {
      if (v < 0 || v >= static_cast<int>(variables_.size())) {
        throw InvalidArgument("factor " + std::to_string(a) +
                              " references unknown variable " +
                              std::to_string(v));
      }
      if (!seen.insert(v).second) {
        throw InvalidArgument("factor " + std::to_string(a) +
                              " lists variable " + std::to_string(v) + " twice");
      }
      expected *= static_cast<std::size_t>(variables_[v].cardinality);
    }
    if (f.table.size() != expected) {
      throw InvalidArgument("factor " + std::to_string(a) + " table has " +
                            std::to_string(f.table.size()) + " entries, expected " +
                            std::to_string(expected));
    }
    bool positive = false;
    for (double x : f.table) {
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw InvalidArgument("factor " + std::to_string(a) +
                              " has a negative or non-finite entry");
      }
      positive = positive || x > 0.0;
    }
    if (!positive) {
      throw InvalidArgument("factor " + std::to_string(a) + " is identically zero");
    }
    for (int v : f.scope) adjacency_[v].push_back(static_cast<int>(a));
  }
}

std::vector<int> FactorGraph::scope_cards(int factor_id) const {
  const FactorNode& f = factors_.at(factor_id);
  std::vector<int> cards;
  cards.reserve(f.scope.size());
  for (int v : f.scope) cards.push_back(variables_[v].cardinality);
  return cards;
}

std::size_t FactorGraph::total_states() const {
  std::size_t total = 1;
  for (const auto& v : variables_) {
    const auto c = static_cast<std::size_t>(v.cardinality);
    if (total > std::numeric_limits<std::size_t>::max() / c) {
      return std::numeric_limits<std::size_t>::max();
    }
    total *= c;
  }
  return total;
}

double FactorGraph::factor_product(std::span<const int> full_assignment) const {
  if (full_assignment.size() != variables_.size()) {
    throw InvalidArgument("assignment covers " +
                          std::to_string(full_assignment.size()) + " of " +
                          std::to_string(variables_.size()) + " variables");
  }
  double p = 1.0;
  std::vector<int> local;
  for (const auto& f : factors_) {
    local.clear();
    for (int v : f.scope) local.push_back(full_assignment[v]);
    p *= f.table[assignment_to_index(scope_cards(f.id), local)];
  }
  return p;
}

namespace {

std::vector<int> topological_order(const std::vector<BayesNode>& nodes) {
  const int n = static_cast<int>(nodes.size());
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> children(n);
  for (int i = 0; i < n; ++i) {
    for (int p : nodes[i].parents) {
      if (p < 0 || p >= n) {
        throw InvalidArgument("node " + std::to_string(i) +
                              " has unknown parent " + std::to_string(p));
      }
      children[p].push_back(i);
      ++indegree[i];
    }
  }
  std::vector<int> order;
  std::vector<int> ready;
  for (int i = n - 1; i >= 0; --i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  while (!ready.empty()) {
    int v = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (int c : children[v]) {
      if (--indegree[c] == 0) ready.push_back(c);
    }
  }
  if (static_cast<int>(order.size()) != n) {
    throw InvalidArgument("parent structure contains a cycle");
  }
  return order;
}

}  // namespace

FactorGraph bayesnet_to_factor_graph(const std::vector<BayesNode>& nodes) {
  topological_order(nodes);

  std::vector<VariableNode> vars;
  vars.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    vars.push_back({static_cast<int>(i), nodes[i].cardinality, nodes[i].label});
  }

  std::vector<FactorNode> factors;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const BayesNode& node = nodes[i];
    std::size_t rows = 1;
    for (int p : node.parents) rows *= static_cast<std::size_t>(nodes[p].cardinality);
    const auto card = static_cast<std::size_t>(node.cardinality);
    if (node.cpt.size() != rows * card) {
      throw InvalidArgument("node " + std::to_string(i) + " CPT has " +
                            std::to_string(node.cpt.size()) +
                            " entries, expected " + std::to_string(rows * card));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0.0;
      for (std::size_t x = 0; x < card; ++x) sum += node.cpt[r * card + x];
      if (std::abs(sum - 1.0) > 1e-12) {
        throw InvalidArgument("node " + std::to_string(i) + " CPT row " +
                              std::to_string(r) + " sums to " +
                              std::to_string(sum));
      }
    }
    FactorNode f;
    f.id = static_cast<int>(i);
    f.scope = node.parents;
    f.scope.push_back(static_cast<int>(i));
    f.table = node.cpt;
    factors.push_back(std::move(f));
  }
  FactorGraph g(std::move(vars), std::move(factors));
  g.set_known_partition(1.0);
  return g;
}

double joint_probability(const FactorGraph& graph,
                         std::span<const int> full_assignment) {
  const double numerator = graph.factor_product(full_assignment);
  if (auto z = graph.known_partition()) return numerator / *z;

  constexpr std::size_t kBudget = std::size_t{1} << 22;
  const std::size_t total = graph.total_states();
  if (total > kBudget) {
    throw SizeGuardError("partition function needs " + std::to_string(total) +
                             " states; budget is " + std::to_string(kBudget),
                         static_cast<double>(total),
                         static_cast<double>(kBudget));
  }
  std::vector<int> cards;
  for (const auto& v : graph.variables()) cards.push_back(v.cardinality);
  double z = 0.0;
  for (std::size_t idx = 0; idx < total; ++idx) {
    z += graph.factor_product(index_to_assignment(cards, idx));
  }
  if (z <= 0.0) throw ContradictionError("partition function is zero");
  return numerator / z;
}

FactorGraph apply_evidence(const FactorGraph& graph, const Evidence& evidence) {
  FactorGraph out = graph;
  for (const auto& [var, state] : evidence.assignments()) {
    if (var < 0 || var >= static_cast<int>(graph.num_variables())) {
      throw InvalidArgument("evidence on unknown variable " + std::to_string(var));
    }
    const int card = graph.variable(var).cardinality;
    if (state < 0 || state >= card) {
      throw StateOutOfRange("observed state " + std::to_string(state) +
                                " out of range for variable " +
                                std::to_string(var),
                            0);
    }
    if (out.evidence_.contains(var)) {
      out.evidence_.observe(var, state);  // throws on conflict
      continue;
    }
    out.evidence_.observe(var, state);
    FactorNode delta;
    delta.id = static_cast<int>(out.factors_.size());
    delta.scope = {var};
    delta.table.assign(static_cast<std::size_t>(card), 0.0);
    delta.table[static_cast<std::size_t>(state)] = 1.0;
    out.adjacency_[var].push_back(delta.id);
    out.factors_.push_back(std::move(delta));
  }
  // Restricting a Bayes net changes Z to P(e).
  if (!evidence.empty()) out.known_partition_.reset();
  return out;
}

nlohmann::json to_json(const FactorGraph& graph) {
  nlohmann::json j;
  j["variables"] = nlohmann::json::array();
  for (const auto& v : graph.variables()) {
    j["variables"].push_back(
        {{"id", v.id}, {"cardinality", v.cardinality}, {"label", v.label}});
  }
  j["factors"] = nlohmann::json::array();
  for (const auto& f : graph.factors()) {
    j["factors"].push_back({{"id", f.id}, {"scope", f.scope}, {"table", f.table}});
  }
  return j;
}

FactorGraph factor_graph_from_json(const nlohmann::json& j) {
  try {
    std::vector<VariableNode> vars;
    for (const auto& v : j.at("variables")) {
      vars.push_back({v.at("id").get<int>(), v.value("cardinality", 2),
                      v.value("label", std::string{})});
    }
    std::vector<FactorNode> factors;
    for (const auto& f : j.at("factors")) {
      factors.push_back({f.at("id").get<int>(),
                         f.at("scope").get<std::vector<int>>(),
                         f.at("table").get<std::vector<double>>()});
    }
    return FactorGraph(std::move(vars), std::move(factors));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed factor graph JSON: ") + e.what());
  }
}

}  // namespace probediag
