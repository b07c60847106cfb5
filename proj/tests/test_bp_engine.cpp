#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "probediag/bp_engine.hpp"
#include "probediag/error.hpp"
#include "probediag/noisy_or.hpp"

using namespace probediag;

namespace {

void set(std::span<double> dst, std::vector<double> v) { std::copy(v.begin(), v.end(), dst.begin()); }

double max_belief_error(const BpResult& r, const std::vector<double>& joint, int n) {
  double err = 0.0;
  for (int v = 0; v < n; ++v) {
    const auto m = testutil::marginal(joint, n, {v});
    for (int s = 0; s < 2; ++s) {
      err = std::max(err, std::abs(r.node_beliefs[static_cast<std::size_t>(v)][static_cast<std::size_t>(s)] - m[static_cast<std::size_t>(s)]));
    }
  }
  return err;
}

struct PolytreeCase {
  std::vector<BayesNode> nodes;
  Evidence evidence;
  std::map<int, int> ev;
};

PolytreeCase random_case(Rng& rng, int max_n) {
  PolytreeCase c;
  const int n = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_n - 1)));
  c.nodes = testutil::random_polytree(rng, n);
  for (int v = 0; v < n; ++v) {
    if (rng.bernoulli(0.25)) {
      const int s = static_cast<int>(rng.below(2));
      c.evidence.observe(v, s);
      c.ev[v] = s;
    }
  }
  return c;
}

}  // namespace

TEST_SUITE("bp_engine") {

TEST_CASE("variable-to-factor messages") {
  SUBCASE("single incident factor gives uniform") {
    FactorGraph g({{0, 2, "x"}}, {{0, {0}, {0.3, 0.7}}});
    MessageStore s(g);
    CHECK(variable_to_factor(s, g, 0, 0) == std::vector<double>{0.5, 0.5});
  }
  SUBCASE("product of the other incoming messages") {
    FactorGraph g({{0, 2, "x"}}, {{0, {0}, {1, 1}}, {1, {0}, {1, 1}}, {2, {0}, {1, 1}}});
    MessageStore s(g);
    set(s.factor_to_var(s.edge_index(1, 0)), {0.8, 0.2});
    set(s.factor_to_var(s.edge_index(2, 0)), {0.5, 0.5});
    const auto m = variable_to_factor(s, g, 0, 0);
    CHECK(m[0] == doctest::Approx(0.8));
    CHECK(m[1] == doctest::Approx(0.2));
  }
  SUBCASE("random star") {
    Rng rng(3);
    FactorGraph g({{0, 3, "x"}}, {{0, {0}, {1, 1, 1}}, {1, {0}, {1, 1, 1}}, {2, {0}, {1, 1, 1}}});
    for (int t = 0; t < 10; ++t) {
      MessageStore s(g);
      std::vector<double> a{rng.uniform(), rng.uniform(), rng.uniform()};
      std::vector<double> b{rng.uniform(), rng.uniform(), rng.uniform()};
      set(s.factor_to_var(s.edge_index(0, 0)), a);
      set(s.factor_to_var(s.edge_index(2, 0)), b);
      const auto m = variable_to_factor(s, g, 0, 1);
      double z = 0.0;
      for (int k = 0; k < 3; ++k) z += a[k] * b[k];
      for (int k = 0; k < 3; ++k) CHECK(m[static_cast<std::size_t>(k)] == doctest::Approx(a[k] * b[k] / z).epsilon(1e-12));
    }
  }
  SUBCASE("all-zero product becomes uniform and is flagged") {
    FactorGraph g({{0, 2, "x"}}, {{0, {0}, {1, 1}}, {1, {0}, {1, 1}}, {2, {0}, {1, 1}}});
    MessageStore s(g);
    set(s.factor_to_var(s.edge_index(1, 0)), {1.0, 0.0});
    set(s.factor_to_var(s.edge_index(2, 0)), {0.0, 1.0});
    bool degenerate = false;
    CHECK(variable_to_factor(s, g, 0, 0, &degenerate) == std::vector<double>{0.5, 0.5});
    CHECK(degenerate);
  }
}

TEST_CASE("factor-to-variable messages") {
  SUBCASE("delta factor") {
    FactorGraph g({{0, 2, "x"}}, {{0, {0}, {0.0, 1.0}}});
    MessageStore s(g);
    CHECK(factor_to_variable(s, g, 0, 0) == std::vector<double>{0.0, 1.0});
  }
  SUBCASE("identity factor copies the incoming message") {
    FactorGraph g({{0, 2, "a"}, {1, 2, "b"}}, {{0, {0, 1}, {1, 0, 0, 1}}});
    MessageStore s(g);
    set(s.var_to_factor(s.edge_index(0, 0)), {0.9, 0.1});
    const auto m = factor_to_variable(s, g, 0, 1);
    CHECK(m[0] == doctest::Approx(0.9));
    CHECK(m[1] == doctest::Approx(0.1));
  }
  SUBCASE("noisy-OR family, one parent with inhibition 0.2") {
    NoisyOrNetwork net({{0, 0.5}}, {{7, {0}, 1.0, {0.2}}});
    const NoisyOrGraph ng = to_factor_graph(net);
    MessageStore s(ng.graph);
    const auto m = factor_to_variable(s, ng.graph, ng.test_factor[0], ng.test_variable[0]);
    CHECK(m[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(m[1] == doctest::Approx(0.4).epsilon(1e-12));
  }
  SUBCASE("contradiction names the factor") {
    FactorGraph g({{0, 2, "a"}, {1, 2, "b"}}, {{0, {0, 1}, {1, 0, 0, 1}}});
    MessageStore s(g);
    set(s.var_to_factor(s.edge_index(0, 0)), {0.0, 0.0});
    CHECK_THROWS_WITH_AS(factor_to_variable(s, g, 0, 1), doctest::Contains("factor 0"),
                         ContradictionError);
  }
}

TEST_CASE("run_bp basics") {
  SUBCASE("chain marginals") {
    const std::vector<BayesNode> chain = {{2, "a", {}, {0.3, 0.7}},
                                          {2, "b", {0}, {0.9, 0.1, 0.2, 0.8}},
                                          {2, "c", {1}, {0.6, 0.4, 0.25, 0.75}}};
    const BpResult r = run_bp(bayesnet_to_factor_graph(chain), Evidence{}, BpConfig{});
    CHECK(r.converged);
    CHECK(max_belief_error(r, testutil::bn_joint(chain), 3) <= 1e-12);
  }
  SUBCASE("delta evidence on a lone variable takes one iteration") {
    FactorGraph g({{0, 2, "x"}}, {{0, {0}, {0.5, 0.5}}});
    Evidence e;
    e.observe(0, 1);
    const BpResult r = run_bp(g, e, BpConfig{});
    CHECK(r.iterations == 1);
    CHECK(r.converged);
    CHECK(r.node_beliefs[0] == std::vector<double>{0.0, 1.0});
  }
  SUBCASE("config validation") {
    BpConfig c;
    c.max_iterations = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = BpConfig{};
    c.damping = 1.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
  }
}

TEST_CASE("polytree exactness under both schedules") {
  Rng rng(101);
  BpConfig sync, seq;
  sync.tolerance = seq.tolerance = 1e-12;
  seq.schedule = Schedule::sequential;
  for (int trial = 0; trial < 120; ++trial) {
    const PolytreeCase c = random_case(rng, 12);
    const int n = static_cast<int>(c.nodes.size());
    const FactorGraph g = bayesnet_to_factor_graph(c.nodes);
    const auto joint = testutil::condition(testutil::bn_joint(c.nodes), n, c.ev);
    const BpResult a = run_bp(g, c.evidence, sync);
    const BpResult b = run_bp(g, c.evidence, seq);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    REQUIRE(max_belief_error(a, joint, n) <= 1e-9);
    REQUIRE(max_belief_error(b, joint, n) <= 1e-9);
    for (int v = 0; v < n; ++v) {
      for (int s = 0; s < 2; ++s) {
        REQUIRE(std::abs(a.node_beliefs[v][s] - b.node_beliefs[v][s]) <= 1e-9);
      }
    }
  }
}

TEST_CASE("beliefs are normalized and factor beliefs agree with node beliefs") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const NoisyOrNetwork net = testutil::random_noisy_or(rng, 5, 6, 3, 0.05, 0.6, true);
    const NoisyOrGraph ng = to_factor_graph(net);
    Evidence e;
    e.observe(ng.test_variable[0], static_cast<int>(rng.below(2)));
    const BpResult r = run_bp(ng.graph, e, BpConfig{});
    REQUIRE(r.converged);
    for (const auto& b : r.node_beliefs) {
      double s = 0.0;
      for (double x : b) s += x;
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (std::size_t a = 0; a < r.graph.num_factors(); ++a) {
      const auto& f = r.graph.factor(static_cast<int>(a));
      const auto& ba = r.factor_beliefs[a];
      const auto cards = r.graph.scope_cards(static_cast<int>(a));
      for (std::size_t pos = 0; pos < f.scope.size(); ++pos) {
        std::vector<double> m(2, 0.0);
        for (std::size_t idx = 0; idx < ba.size(); ++idx) {
          m[static_cast<std::size_t>(index_to_assignment(cards, idx)[pos])] += ba[idx];
        }
        const auto& bi = r.node_beliefs[static_cast<std::size_t>(f.scope[pos])];
        CHECK(std::abs(m[0] - bi[0]) <= 1e-8);
      }
    }
  }
}

TEST_CASE("loopy noisy-OR graph reaches the long-run fixed point") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const NoisyOrNetwork net = testutil::random_noisy_or(rng, 4, 6, 3, 0.1, 0.5, false);
    const NoisyOrGraph ng = to_factor_graph(net);
    Evidence e;
    for (int i = 0; i < 3; ++i) e.observe(ng.test_variable[static_cast<std::size_t>(i)], static_cast<int>(rng.below(2)));
    const BpConfig c;
    BpConfig longer = c;
    longer.max_iterations = 10 * c.max_iterations;
    longer.tolerance = 1e-14;
    const BpResult r = run_bp(ng.graph, e, c);
    const BpResult ref = run_bp(ng.graph, e, longer);
    CHECK(r.converged == (r.store.converged));
    if (r.converged) {
      for (std::size_t v = 0; v < r.node_beliefs.size(); ++v) {
        CHECK(std::abs(r.node_beliefs[v][1] - ref.node_beliefs[v][1]) <= 1e-7);
      }
    }
  }
}

TEST_CASE("non-convergence is reported, not thrown") {
  NoisyOrNetwork net({{0, 0.3}, {1, 0.3}}, {{0, {0, 1}, 1.0, {0.1, 0.1}}, {1, {0, 1}, 1.0, {0.1, 0.1}}});
  const NoisyOrGraph ng = to_factor_graph(net);
  BpConfig c;
  c.max_iterations = 1;
  Evidence e;
  e.observe(ng.test_variable[0], 1);
  const BpResult r = run_bp(ng.graph, e, c);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 1);
}

TEST_CASE("warm start lands on the same fixed point") {
  Rng rng(23);
  for (int trial = 0; trial < 15; ++trial) {
    const NoisyOrNetwork net = testutil::random_noisy_or(rng, 5, 7, 3, 0.1, 0.6, false);
    const NoisyOrGraph ng = to_factor_graph(net);
    Evidence e1;
    e1.observe(ng.test_variable[0], 1);
    const BpResult first = run_bp(ng.graph, e1, BpConfig{});
    Evidence e2 = e1;
    e2.observe(ng.test_variable[1], 0);
    const BpResult cold = run_bp(ng.graph, e2, BpConfig{});
    const BpResult warm = run_bp(ng.graph, e2, BpConfig{}, &first.store);
    REQUIRE(cold.converged);
    REQUIRE(warm.converged);
    for (std::size_t v = 0; v < cold.node_beliefs.size(); ++v) {
      CHECK(std::abs(cold.node_beliefs[v][1] - warm.node_beliefs[v][1]) <= 1e-8);
    }
    // restarting from the converged store needs no moving sweeps
    const BpResult again = run_bp(ng.graph, e2, BpConfig{}, &warm.store);
    CHECK(again.iterations == 0);
  }
}

TEST_CASE("warm start rejects a store from another graph") {
  FactorGraph a({{0, 2, "x"}, {1, 2, "y"}}, {{0, {0, 1}, {1, 2, 3, 4}}});
  FactorGraph b({{0, 2, "x"}, {1, 2, "y"}}, {{0, {1, 0}, {1, 2, 3, 4}}});
  const BpResult ra = run_bp(a, Evidence{}, BpConfig{});
  CHECK_THROWS_AS(run_bp(b, Evidence{}, BpConfig{}, &ra.store), InvalidArgument);
}

TEST_CASE("message normalization does not change polytree beliefs") {
  Rng rng(31);
  BpConfig raw;
  raw.normalize_messages = false;
  raw.tolerance = 1e-12;
  BpConfig norm;
  norm.tolerance = 1e-12;
  for (int trial = 0; trial < 30; ++trial) {
    const PolytreeCase c = random_case(rng, 8);
    const FactorGraph g = bayesnet_to_factor_graph(c.nodes);
    const BpResult a = run_bp(g, c.evidence, norm);
    const BpResult b = run_bp(g, c.evidence, raw);
    for (std::size_t v = 0; v < a.node_beliefs.size(); ++v) {
      REQUIRE(std::abs(a.node_beliefs[v][1] - b.node_beliefs[v][1]) <= 1e-9);
    }
  }
}

TEST_CASE("message dump") {
  FactorGraph g({{0, 2, "x"}}, {{0, {0}, {0.3, 0.7}}});
  const BpResult r = run_bp(g, Evidence{}, BpConfig{});
  std::ostringstream out;
  write_message_dump(out, r.store);
  const std::string s = out.str();
  CHECK(s.rfind("edge_kind,from,to,state,value,iteration\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 5);
}

}  // TEST_SUITE
