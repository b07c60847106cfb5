#include <doctest.h>

#include <cmath>
#include <map>

#include "helpers.hpp"
#include "probediag/error.hpp"
#include "probediag/split_tree.hpp"

using namespace probediag;

namespace {

std::vector<DisjunctiveTest> singleton_tests(int n, int first_id = 0) {
  std::vector<DisjunctiveTest> t;
  for (int s = 0; s < n; ++s) t.push_back({first_id + s, {s}});
  return t;
}

// Direct Σ_o P(o) H(S|o) in nats over the whole space.
double brute_conditional_entropy(const StateSpace& space, const DisjunctiveTest& t) {
  double m[2] = {0.0, 0.0};
  std::vector<std::pair<int, double>> side;
  for (const auto& s : space.states()) {
    const bool pos = std::find(t.positive.begin(), t.positive.end(), s.id) != t.positive.end();
    m[pos ? 1 : 0] += s.weight;
    side.emplace_back(pos ? 1 : 0, s.weight);
  }
  double h = 0.0;
  for (int o = 0; o < 2; ++o) {
    if (m[o] <= 0.0) continue;
    double ho = 0.0;
    for (const auto& [so, w] : side) {
      if (so == o) ho -= (w / m[o]) * std::log(w / m[o]);
    }
    h += m[o] * ho;
  }
  return h;
}

}  // namespace

TEST_SUITE("split_tree") {

TEST_CASE("state space") {
  const StateSpace s({{3, 2.0}, {5, 6.0}});
  CHECK(s.states()[0].weight == doctest::Approx(0.25));
  CHECK(s.index_of(5) == 1);
  CHECK_THROWS_AS(s.index_of(4), InvalidArgument);
  CHECK_THROWS_AS(StateSpace({{0, 1.0}, {0, 1.0}}), InvalidArgument);
  CHECK_THROWS_AS(StateSpace({{0, 0.0}}), InvalidArgument);
  double total = 0.0;
  const StateSpace seven = StateSpace::uniform(7);
  for (const auto& st : seven.states()) total += st.weight;
  CHECK(std::abs(total - 1.0) <= 1e-12);
}

TEST_CASE("balance score") {
  const StateSpace u = StateSpace::uniform(4);
  CHECK(balance_score({0, {0, 1}}, u) == doctest::Approx(0.0));
  CHECK(balance_score({0, {}}, u) == doctest::Approx(1.0));
  const StateSpace w({{0, 0.1}, {1, 0.2}, {2, 0.3}, {3, 0.4}});
  CHECK(balance_score({0, {0, 3}}, w) == doctest::Approx(0.0));
  CHECK(balance_score({0, {2}}, w) == doctest::Approx(std::abs(0.7 - 0.3)));
  // restricted to {1, 2}: masses 0.2 and 0.3 renormalize to 0.4 / 0.6
  CHECK(balance_score({0, {2}}, w, {1, 2}) == doctest::Approx(0.2));
}

TEST_CASE("entropy score") {
  const StateSpace u10 = StateSpace::uniform(10);
  std::vector<int> five{0, 1, 2, 3, 4}, nine{0, 1, 2, 3, 4, 5, 6, 7, 8};
  CHECK(entropy_score({0, five}, u10) < entropy_score({1, nine}, u10));
  CHECK(entropy_score({0, {}}, u10) == doctest::Approx(std::log(10.0)));
  CHECK(entropy_score({0, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}}, u10) == doctest::Approx(std::log(10.0)));
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<WeightedState> st;
    for (int i = 0; i < 7; ++i) st.push_back({i * 3, 0.05 + rng.uniform()});
    const StateSpace s(st);
    DisjunctiveTest t{0, {}};
    for (int i = 0; i < 7; ++i) {
      if (rng.bernoulli(0.4)) t.positive.push_back(i * 3);
    }
    CHECK(entropy_score(t, s) == doctest::Approx(brute_conditional_entropy(s, t)).epsilon(1e-12));
  }
}

TEST_CASE("balance and entropy minimizers coincide on uniform splits") {
  CHECK(equivalence_check(2));
  CHECK(equivalence_check(10));
  CHECK(equivalence_check(11));
  for (int n = 2; n <= 300; ++n) REQUIRE(equivalence_check(n));
}

TEST_CASE("greedy trees") {
  SUBCASE("two states, one test") {
    const StateSpace s = StateSpace::uniform(2);
    const DiagnosisTree t = build_greedy_tree(s, {{0, {1}}}, SplitCriterion::balance);
    CHECK(t.cost == doctest::Approx(1.0));
    CHECK(t.nodes.size() == 3);
    CHECK(t.leaves().size() == 2);
    validate_tree(t, s, {{0, {1}}});
  }
  SUBCASE("balanced test chosen first") {
    const StateSpace s = StateSpace::uniform(4);
    auto tests = singleton_tests(4);
    tests.push_back({9, {0, 1}});
    for (SplitCriterion c : {SplitCriterion::balance, SplitCriterion::entropy}) {
      const DiagnosisTree t = build_greedy_tree(s, tests, c);
      CHECK(t.nodes[0].test_id == 9);
      validate_tree(t, s, tests);
    }
  }
  SUBCASE("residual leaves when tests cannot separate") {
    const StateSpace s = StateSpace::uniform(3);
    const std::vector<DisjunctiveTest> tests{{0, {0}}};
    const DiagnosisTree t = build_greedy_tree(s, tests, SplitCriterion::entropy);
    CHECK(t.leaves().size() == 2);
    CHECK(t.cost == doctest::Approx(1.0));
    validate_tree(t, s, tests);
  }
  SUBCASE("duplicate test ids rejected") {
    CHECK_THROWS_AS(build_greedy_tree(StateSpace::uniform(2), {{0, {0}}, {0, {1}}}, SplitCriterion::balance),
                    InvalidArgument);
  }
  SUBCASE("validation catches a wrong cost") {
    const StateSpace s = StateSpace::uniform(2);
    DiagnosisTree t = build_greedy_tree(s, {{0, {1}}}, SplitCriterion::balance);
    t.cost += 0.5;
    CHECK_THROWS_AS(validate_tree(t, s, {{0, {1}}}), InvalidArgument);
  }
}

TEST_CASE("optimal tree cost") {
  CHECK(optimal_tree_cost(StateSpace::uniform(1), {}) == 0.0);
  CHECK(optimal_tree_cost(StateSpace::uniform(2), {{0, {0}}}) == doctest::Approx(1.0));
  CHECK(optimal_tree_cost(StateSpace::uniform(4), {{0, {0, 1}}, {1, {0, 2}}}) == doctest::Approx(2.0));
  // singletons only on 3 uniform states: 1 + 2/3
  CHECK(optimal_tree_cost(StateSpace::uniform(3), singleton_tests(3)) == doctest::Approx(5.0 / 3.0));
  CHECK_THROWS_AS(optimal_tree_cost(StateSpace::uniform(9), {}), SizeGuardError);
  CHECK_THROWS_AS(optimal_tree_cost(StateSpace::uniform(3), singleton_tests(7)), SizeGuardError);
}

TEST_CASE("greedy cost within the logarithmic factor of optimal") {
  Rng rng(41);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(7));
    std::vector<WeightedState> st;
    for (int i = 0; i < n; ++i) st.push_back({i, trial % 2 ? 1.0 : 0.1 + rng.uniform()});
    const StateSpace s(st);
    std::vector<DisjunctiveTest> tests;
    const int m = 1 + static_cast<int>(rng.below(6));
    for (int k = 0; k < m; ++k) {
      DisjunctiveTest t{k, {}};
      for (int i = 0; i < n; ++i) {
        if (rng.bernoulli(0.5)) t.positive.push_back(i);
      }
      tests.push_back(t);
    }
    const double opt = optimal_tree_cost(s, tests);
    for (SplitCriterion c : {SplitCriterion::balance, SplitCriterion::entropy}) {
      const DiagnosisTree t = build_greedy_tree(s, tests, c);
      validate_tree(t, s, tests);
      REQUIRE(t.cost >= opt - 1e-12);
      REQUIRE(t.cost <= (1.0 + std::log2(static_cast<double>(n))) * opt + 1e-12);
    }
  }
}

TEST_CASE("uniform instances with unique argmins give equal costs") {
  Rng rng(43);
  int compared = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(6));
    const StateSpace s = StateSpace::uniform(n);
    std::vector<DisjunctiveTest> tests;
    for (int k = 0; k < 5; ++k) {
      DisjunctiveTest t{k, {}};
      for (int i = 0; i < n; ++i) {
        if (rng.bernoulli(0.35)) t.positive.push_back(i);
      }
      tests.push_back(t);
    }
    const DiagnosisTree b = build_greedy_tree(s, tests, SplitCriterion::balance);
    const DiagnosisTree e = build_greedy_tree(s, tests, SplitCriterion::entropy);
    if (!b.argmins_unique || !e.argmins_unique) continue;
    ++compared;
    CHECK(b.cost == doctest::Approx(e.cost).epsilon(1e-12));
  }
  CHECK(compared > 20);
}

TEST_CASE("approximation ratio bounds") {
  const RatioBounds tiny = approximation_ratio_bounds(1000, 500, 1e-9);
  CHECK(tiny.balance_ratio_bound == doctest::Approx(1.0));
  CHECK(tiny.entropy_ratio == doctest::Approx(1.0));
  const RatioBounds worst = approximation_ratio_bounds(1000, 500, 499);
  CHECK(worst.entropy_ratio == doctest::Approx(1.1104).epsilon(1e-3));
  // direct evaluation of both expressions
  const double n = 20, xs = 12, a = 3, x = xs + a;
  const RatioBounds r = approximation_ratio_bounds(n, xs, a);
  CHECK(r.balance_ratio_bound == doctest::Approx(1 + a * n / (xs * (n - xs - a))));
  CHECK(r.entropy_ratio ==
        doctest::Approx((x * std::log(x) + (n - x) * std::log(n - x)) / (xs * std::log(xs) + (n - xs) * std::log(n - xs))));
  CHECK_THROWS_AS(approximation_ratio_bounds(10, 4, 1), InvalidArgument);
  CHECK_THROWS_AS(approximation_ratio_bounds(10, 6, 0), InvalidArgument);
  CHECK_THROWS_AS(approximation_ratio_bounds(10, 6, 4), InvalidArgument);
}

TEST_CASE("ratio scan") {
  const RatioScan s = ratio_scan(1000);
  CHECK(s.max_entropy_ratio == doctest::Approx(1.1104).epsilon(1e-3));
  CHECK(s.argmax_x_star == 500);
  CHECK(s.argmax_x == 999);
  CHECK(s.balance_within_bound);
  CHECK(s.points > 0);
}

TEST_CASE("Markov truncation") {
  const MarkovTruncation m = markov_truncation(0.05, 100, 2);
  CHECK(m.max_faults == 10);
  CHECK(m.mass_bound == 0.5);
  REQUIRE(m.exact_tail.has_value());
  CHECK(*m.exact_tail <= 0.5);
  CHECK(markov_truncation(0.1, 10, 1).mass_bound == 1.0);
  // independent binomial tail P(K > 3) for N = 10, alpha = 0.2, c = 1.5
  double tail = 0.0;
  for (int k = 4; k <= 10; ++k) {
    tail += std::tgamma(11.0) / (std::tgamma(k + 1.0) * std::tgamma(11.0 - k)) * std::pow(0.2, k) * std::pow(0.8, 10 - k);
  }
  const MarkovTruncation q = markov_truncation(0.2, 10, 1.5);
  CHECK(q.max_faults == 3);
  CHECK(*q.exact_tail == doctest::Approx(tail).epsilon(1e-10));
  CHECK_THROWS_AS(markov_truncation(0.1, 10, 0.5), InvalidArgument);
  CHECK_THROWS_AS(markov_truncation(1.5, 10, 2), InvalidArgument);
}

TEST_CASE("instance and tree JSON") {
  const auto j = nlohmann::json::parse(
      R"({"states":[{"id":1,"weight":1},{"id":2,"weight":3}],"tests":[{"id":0,"positive":[2]}]})");
  const SplitInstance inst = split_instance_from_json(j);
  CHECK(inst.space.states()[1].weight == doctest::Approx(0.75));
  CHECK(split_instance_from_json(to_json(inst)).tests[0].positive == std::vector<int>{2});
  const DiagnosisTree t = build_greedy_tree(inst.space, inst.tests, SplitCriterion::entropy);
  const auto tj = to_json(t, inst.space);
  CHECK(tj.at("cost").get<double>() == doctest::Approx(1.0));
  CHECK(tj.at("tree").at("test").get<int>() == 0);
  CHECK(tj.at("tree").at("outcome1").at("states") == nlohmann::json::array({2}));
  CHECK_THROWS_AS(split_instance_from_json(nlohmann::json::parse(R"({"states":[]})")), InvalidArgument);
  CHECK(split_criterion_from_string("balance") == SplitCriterion::balance);
  CHECK_THROWS_AS(split_criterion_from_string("gini"), InvalidArgument);
}

}  // TEST_SUITE
