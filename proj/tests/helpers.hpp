#pragma once

// Random instance generators and brute-force reference computations that
// share no code with the library's own enumeration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "probediag/factor_graph.hpp"
#include "probediag/noisy_or.hpp"
#include "probediag/rng.hpp"

namespace testutil {

using probediag::BayesNode;
using probediag::NoisyOrNetwork;
using probediag::Rng;

inline double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

inline std::vector<double> random_cpt(Rng& rng, int rows, int card, double floor = 0.02) {
  std::vector<double> cpt;
  for (int r = 0; r < rows; ++r) {
    std::vector<double> row(static_cast<std::size_t>(card));
    double s = 0.0;
    for (double& x : row) {
      x = floor + rng.uniform();
      s += x;
    }
    for (double x : row) cpt.push_back(x / s);
  }
  return cpt;
}

// Random tree skeleton with each edge oriented at random.
inline std::vector<BayesNode> random_polytree(Rng& rng, int n) {
  std::vector<std::vector<int>> parents(static_cast<std::size_t>(n));
  for (int i = 1; i < n; ++i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i)));
    if (rng.bernoulli(0.5)) {
      parents[static_cast<std::size_t>(i)].push_back(j);
    } else {
      parents[static_cast<std::size_t>(j)].push_back(i);
    }
  }
  std::vector<BayesNode> nodes(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& nd = nodes[static_cast<std::size_t>(i)];
    nd.parents = parents[static_cast<std::size_t>(i)];
    nd.cpt = random_cpt(rng, 1 << nd.parents.size(), 2);
  }
  return nodes;
}

// Random DAG: node i draws up to `max_parents` parents among 0..i-1.
inline std::vector<BayesNode> random_dag(Rng& rng, int n, int max_parents) {
  std::vector<BayesNode> nodes(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& nd = nodes[static_cast<std::size_t>(i)];
    const int want = std::min<int>(i, static_cast<int>(rng.below(static_cast<std::uint64_t>(max_parents) + 1)));
    while (static_cast<int>(nd.parents.size()) < want) {
      const int p = static_cast<int>(rng.below(static_cast<std::uint64_t>(i)));
      if (std::find(nd.parents.begin(), nd.parents.end(), p) == nd.parents.end()) nd.parents.push_back(p);
    }
    nd.cpt = random_cpt(rng, 1 << nd.parents.size(), 2);
  }
  return nodes;
}

// Joint over binary variables, state integer x with variable 0 as the most
// significant bit, straight from the CPT products.
inline std::vector<double> bn_joint(const std::vector<BayesNode>& nodes) {
  const int n = static_cast<int>(nodes.size());
  std::vector<double> p(std::size_t{1} << n);
  for (std::size_t x = 0; x < p.size(); ++x) {
    auto bit = [&](int v) { return static_cast<int>((x >> (n - 1 - v)) & 1U); };
    double prod = 1.0;
    for (int i = 0; i < n; ++i) {
      std::size_t row = 0;
      for (int par : nodes[static_cast<std::size_t>(i)].parents) row = row * 2 + static_cast<std::size_t>(bit(par));
      prod *= nodes[static_cast<std::size_t>(i)].cpt[row * 2 + static_cast<std::size_t>(bit(i))];
    }
    p[x] = prod;
  }
  return p;
}

inline int bit_of(std::size_t x, int n, int v) {
  return static_cast<int>((x >> (n - 1 - v)) & 1U);
}

// Zeroes inconsistent states and renormalizes.
inline std::vector<double> condition(std::vector<double> p, int n,
                                     const std::map<int, int>& evidence) {
  double z = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) {
    for (const auto& [v, s] : evidence) {
      if (bit_of(x, n, v) != s) {
        p[x] = 0.0;
        break;
      }
    }
    z += p[x];
  }
  for (double& q : p) q /= z;
  return p;
}

// Marginal over `vars` (first most significant).
inline std::vector<double> marginal(const std::vector<double>& p, int n, const std::vector<int>& vars) {
  std::vector<double> m(std::size_t{1} << vars.size(), 0.0);
  for (std::size_t x = 0; x < p.size(); ++x) {
    std::size_t idx = 0;
    for (int v : vars) idx = idx * 2 + static_cast<std::size_t>(bit_of(x, n, v));
    m[idx] += p[x];
  }
  return m;
}

inline double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double q : p) h -= xlogx(q);
  return h;
}

// Random bipartite noisy-OR network; every fault gets at least one test.
inline NoisyOrNetwork random_noisy_or(Rng& rng, int faults, int tests, int max_parents,
                                      double rho_lo, double rho_hi, bool leak) {
  std::vector<probediag::FaultNode> f;
  for (int j = 0; j < faults; ++j) f.push_back({j, 0.05 + 0.4 * rng.uniform()});
  std::vector<probediag::TestNode> t;
  for (int i = 0; i < tests; ++i) {
    probediag::TestNode node;
    node.id = 100 + i;
    const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(max_parents, faults))));
    if (i < faults) node.parents.push_back(i);
    while (static_cast<int>(node.parents.size()) < k) {
      const int p = static_cast<int>(rng.below(static_cast<std::uint64_t>(faults)));
      if (std::find(node.parents.begin(), node.parents.end(), p) == node.parents.end()) node.parents.push_back(p);
    }
    for (std::size_t p = 0; p < node.parents.size(); ++p) node.rho.push_back(rho_lo + (rho_hi - rho_lo) * rng.uniform());
    node.rho0 = leak ? 0.8 + 0.2 * rng.uniform() : 1.0;
    t.push_back(node);
  }
  return NoisyOrNetwork(f, t);
}

// Joint over (S_0..S_{N-1}, T_0..T_{M-1}) in that order, variable 0 most
// significant, from the noisy-OR formula directly.
inline std::vector<double> noisy_or_joint(const NoisyOrNetwork& net) {
  const int nf = static_cast<int>(net.num_faults());
  const int nt = static_cast<int>(net.num_tests());
  const int n = nf + nt;
  std::vector<double> p(std::size_t{1} << n);
  for (std::size_t x = 0; x < p.size(); ++x) {
    double prod = 1.0;
    for (int j = 0; j < nf; ++j) {
      const double a = net.faults()[static_cast<std::size_t>(j)].alpha;
      prod *= bit_of(x, n, j) ? a : 1.0 - a;
    }
    for (int i = 0; i < nt; ++i) {
      const auto& t = net.tests()[static_cast<std::size_t>(i)];
      double pass = t.rho0;
      for (std::size_t k = 0; k < t.parents.size(); ++k) {
        if (bit_of(x, n, t.parents[k])) pass *= t.rho[k];
      }
      prod *= bit_of(x, n, nf + i) ? 1.0 - pass : pass;
    }
    p[x] = prod;
  }
  return p;
}

}  // namespace testutil
