#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include "crcbn/dataset.hpp"
#include "crcbn/model.hpp"
#include "crcbn/rng.hpp"

namespace crcbn {

/// Dense table over an ordered scope; the last scope variable varies fastest.
struct Factor {
  std::vector<VarId> scope;
  std::vector<std::size_t> cards;
  std::vector<double> values;

  std::size_t position(VarId v) const {
    for (std::size_t i = 0; i < scope.size(); ++i)
      if (scope[i] == v) return i;
    return scope.size();
  }
  bool contains(VarId v) const { return position(v) < scope.size(); }

  std::size_t stride(std::size_t pos) const {
    std::size_t s = 1;
    for (std::size_t i = pos + 1; i < cards.size(); ++i) s *= cards[i];
    return s;
  }

  double sum() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
};

inline Factor cpt_factor(const Cpt& c) {
  Factor f;
  f.scope = c.parents();
  f.scope.push_back(c.node());
  f.cards = c.parent_cardinalities();
  f.cards.push_back(c.cardinality());
  f.values = c.table();
  return f;
}

inline Factor multiply(const Factor& a, const Factor& b) {
  Factor out;
  out.scope = a.scope;
  out.cards = a.cards;
  for (std::size_t i = 0; i < b.scope.size(); ++i)
    if (!a.contains(b.scope[i])) {
      out.scope.push_back(b.scope[i]);
      out.cards.push_back(b.cards[i]);
    }
  const std::size_t n = out.scope.size();
  std::vector<std::size_t> sa(n, 0), sb(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (auto p = a.position(out.scope[i]); p < a.scope.size()) sa[i] = a.stride(p);
    if (auto p = b.position(out.scope[i]); p < b.scope.size()) sb[i] = b.stride(p);
  }
  std::size_t total = 1;
  for (auto c : out.cards) total *= c;
  out.values.resize(total);
  std::vector<std::size_t> digit(n, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t k = 0; k < total; ++k) {
    out.values[k] = a.values[ia] * b.values[ib];
    for (std::size_t j = n; j-- > 0;) {
      ++digit[j];
      ia += sa[j];
      ib += sb[j];
      if (digit[j] < out.cards[j]) break;
      ia -= sa[j] * out.cards[j];
      ib -= sb[j] * out.cards[j];
      digit[j] = 0;
    }
  }
  return out;
}

inline Factor sum_out(const Factor& f, VarId v) {
  const std::size_t p = f.position(v);
  require(p < f.scope.size(), "variable not in factor scope");
  const std::size_t card = f.cards[p], inner = f.stride(p);
  const std::size_t outer = f.values.size() / (card * inner);
  Factor out;
  out.scope = f.scope;
  out.cards = f.cards;
  out.scope.erase(out.scope.begin() + static_cast<std::ptrdiff_t>(p));
  out.cards.erase(out.cards.begin() + static_cast<std::ptrdiff_t>(p));
  out.values.assign(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t x = 0; x < card; ++x)
      for (std::size_t i = 0; i < inner; ++i) out.values[o * inner + i] += f.values[(o * card + x) * inner + i];
  return out;
}

/// Slice of `f` at v = s (v leaves the scope).
inline Factor reduce(const Factor& f, VarId v, State s) {
  const std::size_t p = f.position(v);
  if (p == f.scope.size()) return f;
  const std::size_t card = f.cards[p], inner = f.stride(p);
  const std::size_t outer = f.values.size() / (card * inner);
  Factor out;
  out.scope = f.scope;
  out.cards = f.cards;
  out.scope.erase(out.scope.begin() + static_cast<std::ptrdiff_t>(p));
  out.cards.erase(out.cards.begin() + static_cast<std::ptrdiff_t>(p));
  out.values.resize(outer * inner);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i)
      out.values[o * inner + i] = f.values[(o * card + static_cast<std::size_t>(s)) * inner + i];
  return out;
}

/// A target variable together with the state whose probability is of interest.
struct TargetState {
  VarId variable = 0;
  State state = 0;
  friend bool operator==(const TargetState&, const TargetState&) = default;
};

struct QueryResult {
  VarId target = 0;
  std::vector<double> distribution;
  double evidence_probability = 0.0;
  double log_evidence_probability = 0.0;
};

/// Ancestral closure of `seeds` (seeds included).
inline std::vector<bool> ancestral_set(const BayesianNetwork& net, const std::vector<VarId>& seeds) {
  std::vector<bool> in(net.size(), false);
  std::vector<VarId> stack(seeds);
  while (!stack.empty()) {
    VarId v = stack.back();
    stack.pop_back();
    if (in[v]) continue;
    in[v] = true;
    for (VarId p : net.cpt(v).parents())
      if (!in[p]) stack.push_back(p);
  }
  return in;
}

namespace detail {

inline void check_query(const BayesianNetwork& net, const Evidence& evidence, VarId target) {
  require(target < net.size(), "unknown target variable");
  check_evidence(evidence, net.schema());
  require(!evidence.is_set(target), "target '" + net.schema()[target].name + "' is part of the evidence");
}

/// Number of fill edges created by eliminating `v` from the interaction graph.
inline std::size_t fill_in(const std::vector<std::set<VarId>>& adj, VarId v) {
  std::size_t fill = 0;
  const auto& nb = adj[v];
  for (auto i = nb.begin(); i != nb.end(); ++i)
    for (auto j = std::next(i); j != nb.end(); ++j)
      if (!adj[*i].count(*j)) ++fill;
  return fill;
}

}  // namespace detail

/// Exact p(target | evidence) by variable elimination with a greedy min-fill
/// order. Nodes outside the ancestral set of target and evidence are pruned.
inline QueryResult query(const BayesianNetwork& net, const Evidence& evidence, VarId target) {
  detail::check_query(net, evidence, target);
  auto seeds = evidence.variables();
  seeds.push_back(target);
  auto relevant = ancestral_set(net, seeds);

  std::vector<Factor> factors;
  for (VarId v = 0; v < net.size(); ++v) {
    if (!relevant[v]) continue;
    Factor f = cpt_factor(net.cpt(v));
    for (VarId u : std::vector<VarId>(f.scope))
      if (evidence.is_set(u)) f = reduce(f, u, evidence[u]);
    factors.push_back(std::move(f));
  }

  std::vector<VarId> hidden;
  for (VarId v = 0; v < net.size(); ++v)
    if (relevant[v] && v != target && !evidence.is_set(v)) hidden.push_back(v);

  std::vector<std::set<VarId>> adj(net.size());
  for (const auto& f : factors)
    for (VarId a : f.scope)
      for (VarId b : f.scope)
        if (a != b) adj[a].insert(b);

  double log_z = 0.0;
  auto impossible = [&] { fail(ErrorKind::impossible_evidence, "impossible evidence: p(evidence) = 0"); };

  while (!hidden.empty()) {
    auto best = hidden.begin();
    std::size_t best_fill = detail::fill_in(adj, *best);
    for (auto it = std::next(hidden.begin()); it != hidden.end(); ++it) {
      std::size_t fl = detail::fill_in(adj, *it);
      if (fl < best_fill) {
        best = it;
        best_fill = fl;
      }
    }
    const VarId v = *best;
    hidden.erase(best);

    const auto& nb = adj[v];
    for (VarId a : nb) {
      for (VarId b : nb)
        if (a != b) adj[a].insert(b);
      adj[a].erase(v);
    }
    adj[v].clear();

    Factor prod;
    bool have = false;
    std::vector<Factor> rest;
    for (auto& f : factors) {
      if (!f.contains(v)) {
        rest.push_back(std::move(f));
        continue;
      }
      prod = have ? multiply(prod, f) : std::move(f);
      have = true;
    }
    factors = std::move(rest);
    if (!have) continue;
    Factor m = sum_out(prod, v);
    double s = m.sum();
    if (!(s > 0.0)) impossible();
    for (auto& x : m.values) x /= s;
    log_z += std::log(s);
    factors.push_back(std::move(m));
  }

  Factor result{{target}, {net.schema().cardinality(target)}, std::vector<double>(net.schema().cardinality(target), 1.0)};
  for (const auto& f : factors) {
    if (f.scope.empty()) {
      if (!(f.values[0] > 0.0)) impossible();
      log_z += std::log(f.values[0]);
      continue;
    }
    result = multiply(result, f);
  }
  double total = result.sum();
  if (!(total > 0.0)) impossible();
  QueryResult r;
  r.target = target;
  r.distribution.resize(result.values.size());
  for (std::size_t i = 0; i < result.values.size(); ++i) r.distribution[i] = result.values[i] / total;
  r.log_evidence_probability = log_z + std::log(total);
  r.evidence_probability = std::exp(r.log_evidence_probability);
  return r;
}

/// Test oracle: sums joint_probability over every completion of the evidence.
inline QueryResult brute_force_query(const BayesianNetwork& net, const Evidence& evidence, VarId target,
                                     std::uint64_t max_states = std::uint64_t{1} << 25) {
  detail::check_query(net, evidence, target);
  if (net.schema().joint_state_count() > max_states)
    fail(ErrorKind::oracle_infeasible, "oracle infeasible: joint state space exceeds the guard");

  std::vector<VarId> free;
  for (VarId v = 0; v < net.size(); ++v)
    if (!evidence.is_set(v)) free.push_back(v);

  Assignment a = evidence;
  for (VarId v : free) a.set(v, 0);
  std::vector<double> mass(net.schema().cardinality(target), 0.0);
  while (true) {
    mass[static_cast<std::size_t>(a[target])] += joint_probability(net, a);
    bool carry = true;
    for (std::size_t j = free.size(); carry && j-- > 0;) {
      VarId v = free[j];
      if (static_cast<std::size_t>(a[v]) + 1 < net.schema().cardinality(v)) {
        a.set(v, a[v] + 1);
        carry = false;
      } else {
        a.set(v, 0);
      }
    }
    if (carry) break;
  }
  double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  if (!(total > 0.0)) fail(ErrorKind::impossible_evidence, "impossible evidence: p(evidence) = 0");
  QueryResult r;
  r.target = target;
  for (double m : mass) r.distribution.push_back(m / total);
  r.evidence_probability = total;
  r.log_evidence_probability = std::log(total);
  return r;
}

/// Ancestral sampling of `n` complete rows, all tagged with `year`.
inline Dataset forward_sample(const BayesianNetwork& net, std::size_t n, std::uint64_t seed, int year = 0) {
  require(n >= 1, "forward_sample needs n >= 1");
  Rng rng(seed);
  Dataset out(net.schema(), "sample-" + std::to_string(seed));
  out.reserve(n);
  std::vector<State> row(net.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (VarId v : net.topological()) {
      const auto& c = net.cpt(v);
      row[v] = static_cast<State>(rng.categorical(c.row(c.config_index(row))));
    }
    out.add_row(row, year);
  }
  return out;
}

/// Exact draws from p(x | evidence): each unset variable in topological order
/// is drawn from its conditional given the evidence and the states drawn so
/// far. Evidence variables keep their states in every row.
inline Dataset sample_given(const BayesianNetwork& net, const Evidence& evidence, std::size_t n, std::uint64_t seed,
                            int year = 0) {
  require(n >= 1, "sample_given needs n >= 1");
  check_evidence(evidence, net.schema());
  for (VarId v = 0; v < net.size(); ++v)
    if (!evidence.is_set(v)) {
      (void)query(net, evidence, v);  // throws on impossible evidence
      break;
    }
  Rng rng(seed);
  Dataset out(net.schema(), "conditional-" + std::to_string(seed));
  out.reserve(n);
  std::map<std::pair<VarId, std::vector<State>>, std::vector<double>> cache;
  for (std::size_t i = 0; i < n; ++i) {
    Evidence e = evidence;
    for (VarId v : net.topological()) {
      if (e.is_set(v)) continue;
      std::vector<State> key(e.states().begin(), e.states().end());
      auto it = cache.find({v, key});
      if (it == cache.end()) it = cache.emplace(std::pair{v, std::move(key)}, query(net, e, v).distribution).first;
      e.set(v, static_cast<State>(rng.categorical(it->second)));
    }
    out.add_row(e.states(), year);
  }
  return out;
}

/// d-separation by the reachable-trail procedure (active trails from x).
inline bool is_d_separated(const Dag& dag, const std::vector<VarId>& x, const std::vector<VarId>& y,
                           const std::vector<VarId>& z) {
  const std::size_t n = dag.size();
  std::vector<bool> in_z(n, false), in_y(n, false), in_x(n, false);
  for (VarId v : z) in_z.at(v) = true;
  for (VarId v : y) in_y.at(v) = true;
  for (VarId v : x) in_x.at(v) = true;
  for (VarId v = 0; v < n; ++v)
    require(!(in_x[v] && in_y[v]) && !(in_x[v] && in_z[v]) && !(in_y[v] && in_z[v]),
            "d-separation sets must be disjoint");

  auto parents = dag.parent_sets();
  std::vector<std::vector<VarId>> children(n);
  for (VarId v = 0; v < n; ++v)
    for (VarId p : parents[v]) children[p].push_back(v);

  // Z together with its ancestors: colliders there are open.
  std::vector<bool> anc(n, false);
  std::vector<VarId> stack(z);
  while (!stack.empty()) {
    VarId v = stack.back();
    stack.pop_back();
    if (anc[v]) continue;
    anc[v] = true;
    for (VarId p : parents[v]) stack.push_back(p);
  }

  // Direction 0: arrived from a child (moving up); 1: from a parent (down).
  std::vector<std::array<bool, 2>> visited(n, {false, false});
  std::vector<std::pair<VarId, int>> frontier;
  for (VarId v : x) frontier.emplace_back(v, 0);
  while (!frontier.empty()) {
    auto [v, dir] = frontier.back();
    frontier.pop_back();
    if (visited[v][dir]) continue;
    visited[v][dir] = true;
    if (!in_z[v] && in_y[v]) return false;
    if (dir == 0 && !in_z[v]) {
      for (VarId p : parents[v]) frontier.emplace_back(p, 0);
      for (VarId c : children[v]) frontier.emplace_back(c, 1);
    } else if (dir == 1) {
      if (!in_z[v])
        for (VarId c : children[v]) frontier.emplace_back(c, 1);
      if (anc[v])
        for (VarId p : parents[v]) frontier.emplace_back(p, 0);
    }
  }
  return true;
}

inline std::vector<VarId> markov_blanket(const Dag& dag, VarId v) {
  std::set<VarId> mb;
  for (VarId p : dag.parents(v)) mb.insert(p);
  for (VarId c : dag.children(v)) {
    mb.insert(c);
    for (VarId p : dag.parents(c))
      if (p != v) mb.insert(p);
  }
  return {mb.begin(), mb.end()};
}

}  // namespace crcbn
