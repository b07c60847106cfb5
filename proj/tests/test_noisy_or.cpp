#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "probediag/error.hpp"
#include "probediag/exact_oracle.hpp"
#include "probediag/noisy_or.hpp"

using namespace probediag;

TEST_SUITE("noisy_or_model") {

TEST_CASE("test_cpd") {
  NoisyOrNetwork net({{0, 0.1}, {1, 0.1}},
                     {{0, {0, 1}, 0.9, {0.2, 0.5}}, {1, {0}, 1.0, {0.2}}, {2, {0, 1}, 1.0, {0.0, 0.0}}});
  CHECK(test_cpd(net, 0, std::vector<int>{0, 0}) == doctest::Approx(0.9));
  CHECK(test_cpd(net, 0, std::vector<int>{1, 1}) == doctest::Approx(0.9 * 0.2 * 0.5));
  CHECK(test_cpd(net, 1, std::vector<int>{1}) == doctest::Approx(0.2));
  CHECK(test_cpd(net, 2, std::vector<int>{0, 1}) == 0.0);
  CHECK(test_cpd(net, 2, std::vector<int>{1, 1}) == 0.0);
  CHECK(test_cpd(net, 2, std::vector<int>{0, 0}) == 1.0);
  CHECK_THROWS_AS(test_cpd(net, 0, std::vector<int>{1}), InvalidArgument);
}

TEST_CASE("validation and warnings") {
  CHECK_THROWS_AS(NoisyOrNetwork({{1, 0.1}}, {}), InvalidArgument);
  CHECK_THROWS_AS(NoisyOrNetwork({{0, 1.5}}, {}), InvalidArgument);
  CHECK_THROWS_AS(NoisyOrNetwork({{0, 0.1}}, {{0, {0, 0}, 1.0, {0.1, 0.1}}}), InvalidArgument);
  CHECK_THROWS_AS(NoisyOrNetwork({{0, 0.1}}, {{0, {0}, 1.0, {0.1, 0.1}}}), InvalidArgument);
  CHECK_THROWS_AS(NoisyOrNetwork({{0, 0.1}}, {{0, {3}, 1.0, {0.1}}}), InvalidArgument);
  CHECK_THROWS_AS(NoisyOrNetwork({{0, 0.1}}, {{4, {0}, 1.0, {0.1}}, {4, {0}, 1.0, {0.1}}}), InvalidArgument);
  NoisyOrNetwork net({{0, 0.1}, {1, 0.1}}, {{0, {0}, 1.0, {0.1}}});
  REQUIRE(net.warnings().size() == 1);
  CHECK(net.warnings()[0].find('1') != std::string::npos);
}

TEST_CASE("factor graph of the model") {
  SUBCASE("one fault, one deterministic test") {
    NoisyOrNetwork net({{0, 0.5}}, {{0, {0}, 1.0, {0.0}}});
    const JointTable t = enumerate(to_factor_graph(net).graph, Evidence{});
    // scope (S, T)
    CHECK(t.probs[0b00] == doctest::Approx(0.5));
    CHECK(t.probs[0b11] == doctest::Approx(0.5));
    CHECK(t.probs[0b01] == 0.0);
    CHECK(t.probs[0b10] == 0.0);
  }
  SUBCASE("two faults under one noise-free test") {
    const double a = 0.2;
    NoisyOrNetwork net = NoisyOrNetwork::homogeneous(2, a, {{0, 1}}, 0.0);
    const JointTable t = enumerate(to_factor_graph(net).graph, Evidence{});
    const std::vector<int> tv{2};
    CHECK(exact_marginal(t, tv).probs[1] == doctest::Approx(1 - (1 - a) * (1 - a)));
  }
  SUBCASE("family table layout matches test_cpd") {
    NoisyOrNetwork net({{0, 0.1}, {1, 0.2}}, {{5, {1, 0}, 0.7, {0.3, 0.6}}});
    const NoisyOrGraph ng = to_factor_graph(net);
    const auto& f = ng.graph.factor(ng.test_factor[0]);
    REQUIRE(f.scope == std::vector<int>{ng.test_variable[0], 1, 0});
    for (int t = 0; t < 2; ++t) {
      for (int s1 = 0; s1 < 2; ++s1) {
        for (int s0 = 0; s0 < 2; ++s0) {
          const double q = test_cpd(net, 0, std::vector<int>{s1, s0});
          const std::size_t idx = static_cast<std::size_t>(t * 4 + s1 * 2 + s0);
          CHECK(f.table[idx] == doctest::Approx(t == 0 ? q : 1 - q));
        }
      }
    }
    CHECK(ng.graph.known_partition().value() == 1.0);
  }
  SUBCASE("random 5-fault / 6-test nets: enumeration equals the direct product") {
    Rng rng(13);
    for (int trial = 0; trial < 5; ++trial) {
      const NoisyOrNetwork net = testutil::random_noisy_or(rng, 5, 6, 3, 0.0, 0.8, true);
      const JointTable t = enumerate(to_factor_graph(net).graph, Evidence{});
      const auto ref = testutil::noisy_or_joint(net);
      REQUIRE(t.probs.size() == ref.size());
      for (std::size_t x = 0; x < ref.size(); ++x) REQUIRE(std::abs(t.probs[x] - ref[x]) <= 1e-15);
    }
  }
}

TEST_CASE("conditionals sum to one") {
  Rng rng(19);
  const NoisyOrNetwork net = testutil::random_noisy_or(rng, 6, 8, 4, 0.0, 1.0, true);
  const NoisyOrGraph ng = to_factor_graph(net);
  for (std::size_t i = 0; i < net.num_tests(); ++i) {
    const auto& f = ng.graph.factor(ng.test_factor[i]);
    const std::size_t half = f.table.size() / 2;
    for (std::size_t c = 0; c < half; ++c) CHECK(f.table[c] + f.table[half + c] == 1.0);
  }
}

TEST_CASE("world sampling") {
  SUBCASE("no faults, leak only") {
    NoisyOrNetwork net({{0, 0.0}, {1, 0.0}}, {{0, {0, 1}, 0.7, {0.5, 0.5}}});
    int fails = 0;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
      const WorldSample w = sample_world(net, seed);
      CHECK(w.fault_state == std::vector<int>{0, 0});
      fails += w.outcomes[0];
    }
    CHECK(fails / 2000.0 == doctest::Approx(0.3).epsilon(0.15));
  }
  SUBCASE("all faulty, noise free") {
    NoisyOrNetwork net = NoisyOrNetwork::homogeneous(3, 1.0, {{0}, {1, 2}, {0, 2}}, 0.0);
    const WorldSample w = sample_world(net, 99);
    CHECK(w.outcomes == std::vector<int>{1, 1, 1});
    CHECK(w.seed == 99);
  }
  SUBCASE("reproducible") {
    Rng rng(1);
    const NoisyOrNetwork net = testutil::random_noisy_or(rng, 6, 6, 3, 0.1, 0.5, true);
    const WorldSample a = sample_world(net, 42), b = sample_world(net, 42);
    CHECK(a.fault_state == b.fault_state);
    CHECK(a.outcomes == b.outcomes);
  }
  SUBCASE("empirical failure rate of a two-parent test") {
    NoisyOrNetwork net({{0, 0.3}, {1, 0.6}}, {{0, {0, 1}, 0.9, {0.4, 0.2}}});
    const auto joint = testutil::noisy_or_joint(net);
    const double p = testutil::marginal(joint, 3, {2})[1];
    const int n = 100000;
    int fails = 0;
    for (int s = 0; s < n; ++s) fails += sample_world(net, static_cast<std::uint64_t>(s)).outcomes[0];
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(fails / double(n) - p) <= 3 * se);
  }
}

TEST_CASE("forward samples match the joint (chi-square)") {
  NoisyOrNetwork net({{0, 0.3}, {1, 0.5}, {2, 0.2}},
                     {{0, {0, 1}, 0.9, {0.3, 0.4}}, {1, {1, 2}, 1.0, {0.2, 0.5}}, {2, {0, 2}, 0.8, {0.6, 0.1}}});
  const auto joint = testutil::noisy_or_joint(net);
  const int n = 100000;
  std::vector<int> counts(joint.size(), 0);
  for (int s = 0; s < n; ++s) {
    const WorldSample w = sample_world(net, static_cast<std::uint64_t>(1000000 + s));
    std::size_t x = 0;
    for (int v : w.fault_state) x = x * 2 + static_cast<std::size_t>(v);
    for (int v : w.outcomes) x = x * 2 + static_cast<std::size_t>(v);
    ++counts[x];
  }
  double chi2 = 0.0;
  int cells = 0;
  for (std::size_t x = 0; x < joint.size(); ++x) {
    const double e = joint[x] * n;
    if (e < 5.0) continue;
    chi2 += (counts[x] - e) * (counts[x] - e) / e;
    ++cells;
  }
  // 99.9th percentile of chi-square with up to 63 degrees of freedom is about 104
  CHECK(chi2 < 110.0);
  CHECK(cells > 20);
}

TEST_CASE("a failed noise-free test implicates some parent") {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    NoisyOrNetwork base = testutil::random_noisy_or(rng, 4, 4, 3, 0.0, 0.0, false);
    const NoisyOrGraph ng = to_factor_graph(base);
    Evidence e;
    e.observe(ng.test_variable[0], 1);
    const JointTable t = enumerate(ng.graph, e);
    const auto& parents = base.tests()[0].parents;
    double none_faulty = 0.0;
    for (std::size_t x = 0; x < t.probs.size(); ++x) {
      bool any = false;
      for (int p : parents) any = any || testutil::bit_of(x, 8, p);
      if (!any) none_faulty += t.probs[x];
    }
    CHECK(none_faulty == 0.0);
  }
}

TEST_CASE("model JSON") {
  SUBCASE("round trip") {
    NoisyOrNetwork net({{0, 0.1}, {1, 0.25}}, {{3, {1, 0}, 0.9, {0.3, 0.6}}});
    const NoisyOrNetwork back = network_from_json(to_json(net));
    CHECK(to_json(back) == to_json(net));
    CHECK(back.test_index(3) == 0);
    CHECK_THROWS(back.test_index(4));
  }
  SUBCASE("scalar shorthand") {
    const auto j = nlohmann::json::parse(
        R"({"alpha":0.2,"rho":0.1,"faults":[{"id":0},{"id":1,"alpha":0.4}],
            "tests":[{"id":0,"parents":[0,1]},{"id":1,"parents":[1],"rho":0.5,"rho0":0.8}]})");
    const NoisyOrNetwork net = network_from_json(j);
    CHECK(net.faults()[0].alpha == doctest::Approx(0.2));
    CHECK(net.faults()[1].alpha == doctest::Approx(0.4));
    CHECK(net.tests()[0].rho == std::vector<double>{0.1, 0.1});
    CHECK(net.tests()[0].rho0 == 1.0);
    CHECK(net.tests()[1].rho == std::vector<double>{0.5});
    CHECK(net.tests()[1].rho0 == doctest::Approx(0.8));
  }
  SUBCASE("malformed") {
    CHECK_THROWS_AS(network_from_json(nlohmann::json::parse(R"({"faults":[{"id":0}]})")), InvalidArgument);
  }
}

}  // TEST_SUITE
