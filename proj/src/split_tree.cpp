#include "probediag/split_tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <unordered_map>

#include "probediag/error.hpp"

namespace probediag {

namespace {

constexpr double kTieTolerance = 1e-12;

bool near_tie(double a, double b) {
  return std::abs(a - b) <= kTieTolerance * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

std::vector<char> positive_mask(const DisjunctiveTest& test, const StateSpace& space) {
  std::vector<char> mask(space.size(), 0);
  for (int id : test.positive) mask[space.index_of(id)] = 1;
  return mask;
}

struct SideMasses {
  double m0 = 0.0, m1 = 0.0;
};

SideMasses side_masses(const std::vector<char>& mask, const StateSpace& space,
                       const StateSet& surviving) {
  SideMasses s;
  for (std::size_t i : surviving) {
    (mask[i] ? s.m1 : s.m0) += space.states()[i].weight;
  }
  return s;
}

double balance_from(const SideMasses& s) {
  const double total = s.m0 + s.m1;
  if (!(total > 0.0)) return 0.0;
  return std::abs(s.m0 - s.m1) / total;
}

// Σ_o P(o) H(S*|o) = H(S*) - H(O) computed per side.
double entropy_from(const std::vector<char>& mask, const StateSpace& space,
                    const StateSet& surviving) {
  double total = 0.0;
  for (std::size_t i : surviving) total += space.states()[i].weight;
  if (!(total > 0.0)) return 0.0;
  double side_mass[2] = {0.0, 0.0};
  double side_xlogx[2] = {0.0, 0.0};
  for (std::size_t i : surviving) {
    const double p = space.states()[i].weight / total;
    const int o = mask[i] ? 1 : 0;
    side_mass[o] += p;
    side_xlogx[o] += xlogx(p);
  }
  double h = 0.0;
  for (int o = 0; o < 2; ++o) {
    if (side_mass[o] <= 0.0) continue;
    // P(o) H(S*|o) = -Σ p log p + P(o) log P(o)
    h += -side_xlogx[o] + xlogx(side_mass[o]);
  }
  return h;
}

StateSet all_states(const StateSpace& space) {
  StateSet s(space.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = i;
  return s;
}

}  // namespace

StateSpace::StateSpace(std::vector<WeightedState> states) : states_(std::move(states)) {
  if (states_.empty()) throw InvalidArgument("state space is empty");
  std::set<int> seen;
  double total = 0.0;
  for (const auto& s : states_) {
    if (!seen.insert(s.id).second) {
      throw InvalidArgument("duplicate state id " + std::to_string(s.id));
    }
    if (!(s.weight > 0.0) || !std::isfinite(s.weight)) {
      throw InvalidArgument("state " + std::to_string(s.id) + " has non-positive weight");
    }
    total += s.weight;
  }
  for (auto& s : states_) s.weight /= total;
}

StateSpace StateSpace::uniform(int n) {
  if (n < 1) throw InvalidArgument("uniform space needs n >= 1");
  std::vector<WeightedState> s;
  for (int i = 0; i < n; ++i) s.push_back({i, 1.0});
  return StateSpace(std::move(s));
}

std::size_t StateSpace::index_of(int id) const {
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (states_[i].id == id) return i;
  }
  throw InvalidArgument("unknown state id " + std::to_string(id));
}

const char* to_string(SplitCriterion c) {
  return c == SplitCriterion::balance ? "balance" : "entropy";
}

SplitCriterion split_criterion_from_string(const std::string& s) {
  if (s == "balance") return SplitCriterion::balance;
  if (s == "entropy") return SplitCriterion::entropy;
  throw InvalidArgument("unknown criterion '" + s + "' (expected balance or entropy)");
}

double balance_score(const DisjunctiveTest& test, const StateSpace& space,
                     const StateSet& surviving) {
  return balance_from(side_masses(positive_mask(test, space), space, surviving));
}

double balance_score(const DisjunctiveTest& test, const StateSpace& space) {
  return balance_score(test, space, all_states(space));
}

double entropy_score(const DisjunctiveTest& test, const StateSpace& space,
                     const StateSet& surviving) {
  return entropy_from(positive_mask(test, space), space, surviving);
}

double entropy_score(const DisjunctiveTest& test, const StateSpace& space) {
  return entropy_score(test, space, all_states(space));
}

bool equivalence_check(int n) {
  if (n < 2) throw InvalidArgument("equivalence_check needs n >= 2");
  const double dn = n;
  std::vector<double> bal, ent;
  for (int n0 = 1; n0 < n; ++n0) {
    const int n1 = n - n0;
    bal.push_back(std::abs(n0 - n1) / dn);
    ent.push_back((xlogx(n0) + xlogx(n1)) / dn);
  }
  auto argmins = [](const std::vector<double>& v) {
    const double best = *std::min_element(v.begin(), v.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (near_tie(v[i], best)) out.push_back(i);
    }
    return out;
  };
  return argmins(bal) == argmins(ent);
}

std::vector<int> DiagnosisTree::leaves() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].test_id < 0) out.push_back(static_cast<int>(i));
  }
  return out;
}

double DiagnosisTree::cost_from_leaves() const {
  double c = 0.0;
  for (int leaf : leaves()) c += nodes[leaf].mass * nodes[leaf].depth;
  return c;
}

DiagnosisTree build_greedy_tree(const StateSpace& space,
                                const std::vector<DisjunctiveTest>& tests,
                                SplitCriterion criterion) {
  std::vector<std::size_t> order(tests.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return tests[a].id < tests[b].id; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (tests[order[k]].id == tests[order[k - 1]].id) {
      throw InvalidArgument("duplicate test id " + std::to_string(tests[order[k]].id));
    }
  }
  std::vector<std::vector<char>> masks;
  for (std::size_t t : order) masks.push_back(positive_mask(tests[t], space));

  DiagnosisTree tree;
  std::vector<char> used(order.size(), 0);

  std::function<int(StateSet, int)> grow = [&](StateSet states, int depth) -> int {
    TreeNode node;
    node.states = std::move(states);
    node.depth = depth;
    for (std::size_t i : node.states) node.mass += space.states()[i].weight;
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);
    if (tree.nodes[index].states.size() <= 1) return index;

    const StateSet& s = tree.nodes[index].states;
    std::vector<double> scores(order.size(), std::numeric_limits<double>::infinity());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (used[k]) continue;
      scores[k] = criterion == SplitCriterion::balance
                      ? balance_from(side_masses(masks[k], space, s))
                      : entropy_from(masks[k], space, s);
      best = std::min(best, scores[k]);
    }
    if (!std::isfinite(best)) return index;
    int chosen = -1, ties = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (used[k] || !near_tie(scores[k], best)) continue;
      if (chosen < 0) chosen = static_cast<int>(k);
      ++ties;
    }
    StateSet side[2];
    for (std::size_t i : s) side[masks[chosen][i] ? 1 : 0].push_back(i);
    if (side[0].empty() || side[1].empty()) return index;  // nothing separates S*
    if (ties > 1) tree.argmins_unique = false;

    tree.nodes[index].test_id = tests[order[chosen]].id;
    tree.cost += tree.nodes[index].mass;
    used[chosen] = 1;
    for (int o = 0; o < 2; ++o) {
      const int c = grow(std::move(side[o]), depth + 1);
      tree.nodes[index].child[o] = c;
    }
    used[chosen] = 0;
    return index;
  };
  grow(all_states(space), 0);
  return tree;
}

void validate_tree(const DiagnosisTree& tree, const StateSpace& space,
                   const std::vector<DisjunctiveTest>& tests) {
  if (tree.nodes.empty()) throw InvalidArgument("tree has no nodes");
  std::unordered_map<int, std::vector<char>> masks;
  for (const auto& t : tests) masks[t.id] = positive_mask(t, space);

  std::vector<int> covered(space.size(), 0);
  std::vector<int> path_tests;
  std::function<void(int, const StateSet&)> walk = [&](int idx, const StateSet& consistent) {
    const TreeNode& n = tree.nodes.at(static_cast<std::size_t>(idx));
    if (n.states != consistent) {
      throw InvalidArgument("node " + std::to_string(idx) +
                            " state set differs from the path-consistent set");
    }
    if (n.test_id < 0) {
      for (std::size_t i : n.states) ++covered[i];
      return;
    }
    if (std::find(path_tests.begin(), path_tests.end(), n.test_id) != path_tests.end()) {
      throw InvalidArgument("test " + std::to_string(n.test_id) + " repeats on a path");
    }
    const auto it = masks.find(n.test_id);
    if (it == masks.end()) throw InvalidArgument("tree uses unknown test " + std::to_string(n.test_id));
    path_tests.push_back(n.test_id);
    for (int o = 0; o < 2; ++o) {
      StateSet sub;
      for (std::size_t i : consistent) {
        if ((it->second[i] ? 1 : 0) == o) sub.push_back(i);
      }
      walk(n.child[o], sub);
    }
    path_tests.pop_back();
  };
  walk(0, all_states(space));
  for (std::size_t i = 0; i < covered.size(); ++i) {
    if (covered[i] != 1) {
      throw InvalidArgument("state " + std::to_string(space.states()[i].id) +
                            " lies in " + std::to_string(covered[i]) + " leaves");
    }
  }
  if (std::abs(tree.cost - tree.cost_from_leaves()) > 1e-12) {
    throw InvalidArgument("incremental cost disagrees with leaf depths");
  }
}

double optimal_tree_cost(const StateSpace& space, const std::vector<DisjunctiveTest>& tests) {
  if (space.size() > kOptimalMaxStates || tests.size() > kOptimalMaxTests) {
    throw SizeGuardError("optimal tree search is limited to " +
                             std::to_string(kOptimalMaxStates) + " states and " +
                             std::to_string(kOptimalMaxTests) + " tests",
                         static_cast<double>(space.size()), static_cast<double>(kOptimalMaxStates));
  }
  const std::size_t n = space.size();
  std::vector<unsigned> tmask;
  for (const auto& t : tests) {
    unsigned m = 0;
    for (int id : t.positive) m |= 1u << space.index_of(id);
    tmask.push_back(m);
  }
  const unsigned full = (1u << n) - 1;
  std::vector<double> mass(full + 1, 0.0);
  for (unsigned s = 1; s <= full; ++s) {
    const int low = std::countr_zero(s);
    mass[s] = mass[s & (s - 1)] + space.states()[static_cast<std::size_t>(low)].weight;
  }
  // A test already on the path cannot split its own survivors, so the
  // surviving set alone determines the subproblem.
  std::vector<double> memo(full + 1, -1.0);
  std::function<double(unsigned)> opt = [&](unsigned s) -> double {
    if (std::popcount(s) <= 1) return 0.0;
    if (memo[s] >= 0.0) return memo[s];
    double best = std::numeric_limits<double>::infinity();
    for (unsigned m : tmask) {
      const unsigned a = s & m, b = s & ~m;
      if (a == 0 || b == 0) continue;
      best = std::min(best, opt(a) + opt(b));
    }
    memo[s] = std::isfinite(best) ? mass[s] + best : 0.0;
    return memo[s];
  };
  return opt(full);
}

RatioBounds approximation_ratio_bounds(double n, double x_star, double a) {
  if (!(x_star >= n / 2.0) || !(x_star <= n - 1.0)) {
    throw InvalidArgument("x_star must lie in [n/2, n-1]");
  }
  if (!(a > 0.0) || !(a <= n - 1.0 - x_star)) {
    throw InvalidArgument("a must lie in (0, n-1-x_star]");
  }
  const double x = x_star + a;
  RatioBounds r;
  r.balance_ratio_bound = 1.0 + a * n / (x_star * (n - x_star - a));
  r.entropy_ratio = (xlogx(x) + xlogx(n - x)) / (xlogx(x_star) + xlogx(n - x_star));
  return r;
}

RatioScan ratio_scan(int n) {
  if (n < 3) throw InvalidArgument("ratio_scan needs n >= 3");
  RatioScan scan;
  for (int xs = (n + 1) / 2; xs <= n - 1; ++xs) {
    for (int x = xs + 1; x <= n - 1; ++x) {
      const double a = x - xs;
      const RatioBounds r = approximation_ratio_bounds(n, xs, a);
      ++scan.points;
      if (r.entropy_ratio > scan.max_entropy_ratio) {
        scan.max_entropy_ratio = r.entropy_ratio;
        scan.argmax_x_star = xs;
        scan.argmax_x = x;
      }
      if (r.balance_ratio_bound > 1.0 + 2.0 * a + 1e-12 * (1.0 + 2.0 * a)) {
        scan.balance_within_bound = false;
      }
    }
  }
  return scan;
}

MarkovTruncation markov_truncation(double alpha, int n, double c) {
  if (!(c >= 1.0)) throw InvalidArgument("c must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
  if (n < 0) throw InvalidArgument("N must be nonnegative");
  const double x = alpha * n * c;
  const double r = std::round(x);
  const bool integral = std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x));
  MarkovTruncation out;
  out.max_faults = static_cast<long long>(integral ? r : std::ceil(x));
  out.mass_bound = 1.0 / c;
  if (n <= 1000) {
    // K > x  <=>  K > cut for integer K
    const long long cut = static_cast<long long>(integral ? r : std::floor(x));
    double tail = 0.0;
    for (long long k = std::max(0LL, cut + 1); k <= n; ++k) {
      if (alpha == 0.0) break;
      double logp = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                    k * std::log(alpha);
      if (n - k > 0) {
        if (alpha == 1.0) continue;
        logp += (n - k) * std::log1p(-alpha);
      }
      tail += std::exp(logp);
    }
    out.exact_tail = std::min(tail, 1.0);
  }
  return out;
}

nlohmann::json to_json(const DiagnosisTree& tree, const StateSpace& space) {
  std::function<nlohmann::json(int)> dump = [&](int idx) {
    const TreeNode& n = tree.nodes[static_cast<std::size_t>(idx)];
    nlohmann::json j;
    j["mass"] = n.mass;
    if (n.test_id < 0) {
      std::vector<int> ids;
      for (std::size_t i : n.states) ids.push_back(space.states()[i].id);
      j["states"] = ids;
    } else {
      j["test"] = n.test_id;
      j["outcome0"] = dump(n.child[0]);
      j["outcome1"] = dump(n.child[1]);
    }
    return j;
  };
  return nlohmann::json{{"cost", tree.cost},
                        {"argmins_unique", tree.argmins_unique},
                        {"tree", dump(0)}};
}

SplitInstance split_instance_from_json(const nlohmann::json& j) {
  try {
    std::vector<WeightedState> states;
    for (const auto& s : j.at("states")) {
      states.push_back({s.at("id").get<int>(), s.value("weight", 1.0)});
    }
    StateSpace space(std::move(states));
    std::vector<DisjunctiveTest> tests;
    for (const auto& t : j.at("tests")) {
      DisjunctiveTest test{t.at("id").get<int>(), t.at("positive").get<std::vector<int>>()};
      for (int id : test.positive) space.index_of(id);
      tests.push_back(std::move(test));
    }
    return {std::move(space), std::move(tests)};
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed split-tree instance: ") + e.what());
  }
}

nlohmann::json to_json(const SplitInstance& instance) {
  nlohmann::json states = nlohmann::json::array(), tests = nlohmann::json::array();
  for (const auto& s : instance.space.states()) states.push_back({{"id", s.id}, {"weight", s.weight}});
  for (const auto& t : instance.tests) tests.push_back({{"id", t.id}, {"positive", t.positive}});
  return {{"states", states}, {"tests", tests}};
}

}  // namespace probediag
