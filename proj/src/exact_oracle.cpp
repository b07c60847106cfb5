#include "probediag/exact_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "probediag/bpea.hpp"
#include "probediag/error.hpp"

namespace probediag {

namespace {

constexpr std::size_t kLogDomainThreshold = std::size_t{1} << 16;

double to_base(double nats, LogBase base) {
  return base == LogBase::bits ? nats / std::log(2.0) : nats;
}

void check_budget(double states, std::size_t budget, const char* what) {
  if (states > static_cast<double>(budget)) {
    throw SizeGuardError(std::string(what) + " needs " + std::to_string(states) +
                             " states; budget is " + std::to_string(budget),
                         states, static_cast<double>(budget));
  }
}

// Pairwise sum, keeps rounding at O(log n) for long tables.
double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 64) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

double normalize_table(std::vector<double>& probs) {
  const double z = pairwise_sum(probs.data(), probs.size());
  if (!(z > 0.0)) throw ContradictionError("evidence has zero probability under the model");
  for (double& p : probs) p /= z;
  return z;
}

}  // namespace

JointTable enumerate(const FactorGraph& graph, const Evidence& evidence,
                     std::size_t budget) {
  double states = 1.0;
  for (const auto& v : graph.variables()) states *= v.cardinality;
  check_budget(states, budget, "enumeration");

  JointTable t;
  for (const auto& v : graph.variables()) {
    t.scope.push_back(v.id);
    t.cards.push_back(v.cardinality);
  }
  const std::size_t total = static_cast<std::size_t>(states);
  const std::size_t nv = graph.num_variables();
  t.probs.assign(total, 0.0);

  std::vector<int> observed(nv, -1);
  for (const auto& [var, state] : evidence.assignments()) {
    if (var < 0 || var >= static_cast<int>(nv)) {
      throw InvalidArgument("evidence on unknown variable " + std::to_string(var));
    }
    observed[static_cast<std::size_t>(var)] = state;
  }

  const bool log_domain = total > kLogDomainThreshold;
  std::vector<int> x(nv, 0);
  std::vector<std::size_t> local(graph.num_factors());
  for (std::size_t idx = 0; idx < total; ++idx) {
    bool consistent = true;
    for (std::size_t v = 0; v < nv && consistent; ++v) {
      consistent = observed[v] < 0 || observed[v] == x[v];
    }
    if (consistent) {
      double acc = log_domain ? 0.0 : 1.0;
      for (const auto& f : graph.factors()) {
        std::size_t li = 0;
        for (int v : f.scope) {
          li = li * static_cast<std::size_t>(graph.variable(v).cardinality) +
               static_cast<std::size_t>(x[static_cast<std::size_t>(v)]);
        }
        const double val = f.table[li];
        if (log_domain) {
          acc += val > 0.0 ? std::log(val) : -std::numeric_limits<double>::infinity();
        } else {
          acc *= val;
        }
        if (!log_domain && acc == 0.0) break;
      }
      t.probs[idx] = acc;
    } else if (log_domain) {
      t.probs[idx] = -std::numeric_limits<double>::infinity();
    }
    for (std::size_t v = nv; v-- > 0;) {
      if (++x[v] < t.cards[v]) break;
      x[v] = 0;
    }
  }
  if (log_domain) {
    const double mx = *std::max_element(t.probs.begin(), t.probs.end());
    if (!std::isfinite(mx)) throw ContradictionError("evidence has zero probability under the model");
    for (double& p : t.probs) p = std::exp(p - mx);
  }
  normalize_table(t.probs);
  return t;
}

JointTable condition(const JointTable& table, const Evidence& evidence) {
  JointTable out = table;
  std::vector<int> x(table.scope.size(), 0);
  for (std::size_t idx = 0; idx < out.probs.size(); ++idx) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      auto s = evidence.state_of(table.scope[k]);
      if (s && *s != x[k]) {
        out.probs[idx] = 0.0;
        break;
      }
    }
    for (std::size_t k = x.size(); k-- > 0;) {
      if (++x[k] < table.cards[k]) break;
      x[k] = 0;
    }
  }
  normalize_table(out.probs);
  return out;
}

JointTable exact_marginal(const JointTable& table, std::span<const int> subset) {
  JointTable out;
  std::vector<std::size_t> pos;
  for (int v : subset) {
    auto it = std::find(table.scope.begin(), table.scope.end(), v);
    if (it == table.scope.end()) {
      throw InvalidArgument("variable " + std::to_string(v) + " is not in the table scope");
    }
    if (std::find(out.scope.begin(), out.scope.end(), v) != out.scope.end()) {
      throw InvalidArgument("variable " + std::to_string(v) + " listed twice");
    }
    const auto k = static_cast<std::size_t>(it - table.scope.begin());
    pos.push_back(k);
    out.scope.push_back(v);
    out.cards.push_back(table.cards[k]);
  }
  std::size_t size = 1;
  for (int c : out.cards) size *= static_cast<std::size_t>(c);
  out.probs.assign(size, 0.0);

  std::vector<int> x(table.scope.size(), 0);
  for (std::size_t idx = 0; idx < table.probs.size(); ++idx) {
    std::size_t sub = 0;
    for (std::size_t k = 0; k < pos.size(); ++k) {
      sub = sub * static_cast<std::size_t>(out.cards[k]) + static_cast<std::size_t>(x[pos[k]]);
    }
    out.probs[sub] += table.probs[idx];
    for (std::size_t k = x.size(); k-- > 0;) {
      if (++x[k] < table.cards[k]) break;
      x[k] = 0;
    }
  }
  return out;
}

double exact_entropy(const JointTable& table, std::span<const int> subset,
                     LogBase base) {
  const JointTable m = exact_marginal(table, subset);
  double h = 0.0;
  for (double p : m.probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return to_base(h, base);
}

double exact_selection_score(const FactorGraph& graph, const Evidence& evidence,
                             std::span<const int> fault_vars, int test_var,
                             std::size_t budget) {
  const JointTable joint = enumerate(graph, evidence, budget);
  std::vector<int> st(fault_vars.begin(), fault_vars.end());
  st.push_back(test_var);
  const int t[] = {test_var};
  return exact_entropy(joint, st) - exact_entropy(joint, t);
}

ExactTerms exact_family_terms(const JointTable& table, const FactorGraph& graph,
                              int factor, int test_var) {
  const FactorNode& f = graph.factor(factor);
  const JointTable fam = exact_marginal(table, f.scope);
  ExactTerms out;
  for (std::size_t idx = 0; idx < fam.probs.size(); ++idx) {
    const double p = fam.probs[idx];
    if (p <= 0.0) continue;
    if (!(f.table[idx] > 0.0)) {
      throw ContradictionError("positive posterior mass on a zero-probability cell of factor " +
                               std::to_string(factor));
    }
    out.a_term -= p * std::log(f.table[idx]);
  }
  const int t[] = {test_var};
  out.h_t = exact_entropy(table, t);
  return out;
}

double family_entropy_sum(const std::vector<BayesNode>& nodes) {
  const FactorGraph graph = bayesnet_to_factor_graph(nodes);
  const JointTable joint = enumerate(graph, Evidence{});
  double total = 0.0;
  for (const auto& f : graph.factors()) {
    const JointTable fam = exact_marginal(joint, f.scope);
    for (std::size_t idx = 0; idx < fam.probs.size(); ++idx) {
      const double p = fam.probs[idx];
      if (p > 0.0) total -= p * std::log(f.table[idx]);
    }
  }
  return total;
}

// ---------------------------------------------------------------------------

namespace {

// Maps a fault-state integer (bit j = S_j) to the parent-configuration index
// of one test (bit k = k-th parent) with two table lookups.
struct ParentGather {
  unsigned low_bits = 0;
  std::size_t low_mask = 0;
  std::vector<std::uint32_t> low;
  std::vector<std::uint32_t> high;

  ParentGather(const std::vector<int>& parents, std::size_t num_faults) {
    low_bits = static_cast<unsigned>(std::min<std::size_t>(num_faults, 11));
    const unsigned high_bits = static_cast<unsigned>(num_faults) - low_bits;
    low_mask = (std::size_t{1} << low_bits) - 1;
    low.assign(std::size_t{1} << low_bits, 0);
    high.assign(std::size_t{1} << high_bits, 0);
    for (std::size_t x = 0; x < low.size(); ++x) {
      for (std::size_t k = 0; k < parents.size(); ++k) {
        const auto j = static_cast<unsigned>(parents[k]);
        if (j < low_bits && ((x >> j) & 1U)) low[x] |= 1U << k;
      }
    }
    for (std::size_t y = 0; y < high.size(); ++y) {
      for (std::size_t k = 0; k < parents.size(); ++k) {
        const auto j = static_cast<unsigned>(parents[k]);
        if (j >= low_bits && ((y >> (j - low_bits)) & 1U)) high[y] |= 1U << k;
      }
    }
  }

  std::uint32_t operator()(std::size_t s) const {
    return low[s & low_mask] | high[s >> low_bits];
  }
};

}  // namespace

FaultPosterior::FaultPosterior(const NoisyOrNetwork& network, std::size_t budget)
    : tests_(network.tests()), num_faults_(network.num_faults()) {
  if (num_faults_ > 30) {
    throw SizeGuardError("fault posterior over " + std::to_string(num_faults_) +
                             " faults exceeds the state budget",
                         std::ldexp(1.0, static_cast<int>(num_faults_)),
                         static_cast<double>(budget));
  }
  check_budget(std::ldexp(1.0, static_cast<int>(num_faults_)), budget, "fault posterior");
  for (const auto& f : network.faults()) alphas_.push_back(f.alpha);
  probs_.assign(1, 1.0);
  probs_.reserve(std::size_t{1} << num_faults_);
  for (std::size_t j = 0; j < num_faults_; ++j) {
    const std::size_t half = probs_.size();
    probs_.resize(2 * half);
    for (std::size_t s = 0; s < half; ++s) {
      probs_[half + s] = probs_[s] * alphas_[j];
      probs_[s] *= 1.0 - alphas_[j];
    }
  }
  // independent priors: the joint entropy is the sum of the marginal ones
  entropy_nats_ = prior_entropy();
}

std::vector<double> FaultPosterior::failure_table(std::size_t test_index) const {
  const TestNode& t = tests_.at(test_index);
  const std::size_t k = t.parents.size();
  std::vector<double> q(std::size_t{1} << k);
  for (std::size_t c = 0; c < q.size(); ++c) {
    double v = t.rho0;
    for (std::size_t p = 0; p < k; ++p) {
      if ((c >> p) & 1U) v *= t.rho[p];
    }
    q[c] = v;  // P(T = 0 | config c)
  }
  return q;
}

void FaultPosterior::observe(std::size_t test_index, int outcome) {
  const TestNode& t = tests_.at(test_index);
  const ParentGather gather(t.parents, num_faults_);
  const std::vector<double> q = failure_table(test_index);
  for (std::size_t s = 0; s < probs_.size(); ++s) {
    const double pass = q[gather(s)];
    probs_[s] *= outcome == 0 ? pass : 1.0 - pass;
  }
  const double z = pairwise_sum(probs_.data(), probs_.size());
  if (!(z > 0.0)) {
    throw ContradictionError("outcome " + std::to_string(outcome) + " of test " +
                             std::to_string(t.id) +
                             " has zero probability given previous outcomes");
  }
  const double inv = 1.0 / z;
  entropy_nats_ = 0.0;
  for (double& p : probs_) {
    p *= inv;
    if (p > 0.0) entropy_nats_ -= p * std::log(p);
  }
}

double FaultPosterior::entropy(LogBase base) const { return to_base(entropy_nats_, base); }

double FaultPosterior::prior_entropy(LogBase base) const {
  double h = 0.0;
  for (double a : alphas_) h += binary_entropy_nats(a);
  return to_base(h, base);
}

std::vector<double> FaultPosterior::fault_marginals() const {
  std::vector<double> m(num_faults_, 0.0);
  for (std::size_t j = 0; j < num_faults_; ++j) {
    const std::size_t run = std::size_t{1} << j;
    double acc = 0.0;
    for (std::size_t base = run; base < probs_.size(); base += 2 * run) {
      acc += pairwise_sum(probs_.data() + base, run);
    }
    m[j] = acc;
  }
  return m;
}

namespace {

// Marginal of `probs` (2^n entries) onto the bits in `keep` (ascending),
// indexed by rank within `keep`. Bits are summed out from the top down in
// contiguous runs, so the work is under 2^(n+1) additions.
void sum_out_to(const std::vector<double>& probs, unsigned n, const std::vector<unsigned>& keep,
                std::vector<double>& result) {
  thread_local std::vector<double> buf_a, buf_b;
  const double* src = probs.data();
  std::size_t size = probs.size();
  std::vector<double>* dst = &buf_a;
  std::size_t kp = keep.size();
  for (unsigned b = n; b-- > 0;) {
    if (kp > 0 && keep[kp - 1] == b) {
      --kp;
      continue;
    }
    const std::size_t run = std::size_t{1} << b;
    const std::size_t blocks = size >> (b + 1);
    if (dst->size() < size / 2) dst->resize(size / 2);
    double* out = dst->data();
    for (std::size_t hi = 0; hi < blocks; ++hi) {
      const double* a = src + hi * 2 * run;
      double* o = out + hi * run;
      for (std::size_t lo = 0; lo < run; ++lo) o[lo] = a[lo] + a[lo + run];
    }
    size /= 2;
    src = out;
    dst = dst == &buf_a ? &buf_b : &buf_a;
  }
  result.assign(src, src + size);
}

}  // namespace

std::vector<double> FaultPosterior::parent_marginal(std::size_t test_index) const {
  const TestNode& t = tests_.at(test_index);
  std::vector<unsigned> keep;
  for (int j : t.parents) keep.push_back(static_cast<unsigned>(j));
  std::sort(keep.begin(), keep.end());
  std::vector<double> compact;
  sum_out_to(probs_, static_cast<unsigned>(num_faults_), keep, compact);
  // compact bit r is fault keep[r]; reorder to bit k = parent k.
  std::vector<unsigned> rank(t.parents.size());
  for (std::size_t k = 0; k < t.parents.size(); ++k) {
    rank[k] = static_cast<unsigned>(
        std::lower_bound(keep.begin(), keep.end(), static_cast<unsigned>(t.parents[k])) - keep.begin());
  }
  std::vector<double> marg(std::size_t{1} << t.parents.size(), 0.0);
  for (std::size_t c = 0; c < marg.size(); ++c) {
    std::size_t r = 0;
    for (std::size_t k = 0; k < rank.size(); ++k) {
      if ((c >> k) & 1U) r |= std::size_t{1} << rank[k];
    }
    marg[c] = compact[r];
  }
  return marg;
}

double FaultPosterior::probability_of_failure(std::size_t test_index) const {
  const std::vector<double> marg = parent_marginal(test_index);
  const std::vector<double> q = failure_table(test_index);
  double fail = 0.0;
  for (std::size_t c = 0; c < marg.size(); ++c) fail += marg[c] * (1.0 - q[c]);
  return std::clamp(fail, 0.0, 1.0);
}

FaultPosterior::TestTerms FaultPosterior::test_terms(std::size_t test_index) const {
  const std::vector<double> marg = parent_marginal(test_index);
  const std::vector<double> q = failure_table(test_index);
  TestTerms out;
  // Summing the failure mass directly avoids cancellation when P(T=1) is tiny.
  double fail = 0.0;
  for (std::size_t c = 0; c < marg.size(); ++c) {
    if (marg[c] == 0.0) continue;
    fail += marg[c] * (1.0 - q[c]);
    out.a_term += marg[c] * binary_entropy_nats(q[c]);
  }
  out.p_fail = std::clamp(fail, 0.0, 1.0);
  out.h_t = binary_entropy_nats(out.p_fail);
  out.selection_score = entropy_nats_ + out.a_term - out.h_t;
  return out;
}

}  // namespace probediag
