#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "crcbn/dataset.hpp"
#include "crcbn/model.hpp"
#include "crcbn/rng.hpp"
#include "crcbn/score.hpp"

namespace crcbn {

enum class TieBreak { lexicographic, random };

struct SearchConfig {
  std::size_t max_iterations = 1000;
  TieBreak tie_break = TieBreak::lexicographic;
  std::uint64_t seed = 0;
  /// Moves must improve the score by more than this to be accepted.
  double min_improvement = 1e-9;
};

// Declaration order is the tie-break order.
enum class MoveKind { add, remove, reverse };

inline const char* to_string(MoveKind k) {
  switch (k) {
    case MoveKind::add: return "add";
    case MoveKind::remove: return "delete";
    case MoveKind::reverse: return "reverse";
  }
  return "?";
}

struct Move {
  MoveKind kind;
  VarId parent;  // arc parent before the move
  VarId child;
  double delta = 0.0;
  double score_after = 0.0;
};

struct SearchResult {
  Dag dag;
  double initial_score = 0.0;
  double score = 0.0;
  std::vector<Move> moves;
  std::size_t iterations = 0;
};

/// Memoized family scores keyed by (node, sorted parent set).
class FamilyScoreCache {
 public:
  FamilyScoreCache(const Dataset& data, ScoreConfig cfg) : data_(data), cfg_(cfg) {}

  double operator()(VarId node, const std::vector<VarId>& parents) {
    auto key = std::make_pair(node, parents);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    double s = family_score(node, parents, data_, cfg_);
    cache_.emplace(std::move(key), s);
    return s;
  }

  std::size_t size() const noexcept { return cache_.size(); }

 private:
  const Dataset& data_;
  ScoreConfig cfg_;
  std::map<std::pair<VarId, std::vector<VarId>>, double> cache_;
};

namespace detail {

/// Adjacency-matrix view of a DAG for the search loop.
class SearchGraph {
 public:
  explicit SearchGraph(const Dag& d) : n_(d.size()), adj_(n_ * n_, false) {
    for (const auto& a : d.arcs) adj_[a.parent * n_ + a.child] = true;
  }
  bool arc(VarId p, VarId c) const { return adj_[p * n_ + c]; }
  void set(VarId p, VarId c, bool on) { adj_[p * n_ + c] = on; }

  std::vector<VarId> parents(VarId c) const {
    std::vector<VarId> out;
    for (VarId p = 0; p < n_; ++p)
      if (arc(p, c)) out.push_back(p);
    return out;
  }

  /// Is there a directed path from `from` to `to`, optionally ignoring one arc?
  bool reaches(VarId from, VarId to, Arc skip = {SIZE_MAX, SIZE_MAX}) const {
    std::vector<bool> seen(n_, false);
    std::vector<VarId> stack{from};
    while (!stack.empty()) {
      VarId v = stack.back();
      stack.pop_back();
      if (v == to) return true;
      if (seen[v]) continue;
      seen[v] = true;
      for (VarId w = 0; w < n_; ++w)
        if (arc(v, w) && !(v == skip.parent && w == skip.child) && !seen[w]) stack.push_back(w);
    }
    return false;
  }

  Dag to_dag(const std::vector<std::string>& nodes) const {
    Dag d{nodes, {}};
    for (VarId p = 0; p < n_; ++p)
      for (VarId c = 0; c < n_; ++c)
        if (arc(p, c)) d.arcs.push_back({p, c});
    return d;
  }

 private:
  std::size_t n_;
  std::vector<bool> adj_;
};

inline std::vector<VarId> with(std::vector<VarId> ps, VarId v) {
  ps.insert(std::upper_bound(ps.begin(), ps.end(), v), v);
  return ps;
}

inline std::vector<VarId> without(std::vector<VarId> ps, VarId v) {
  ps.erase(std::remove(ps.begin(), ps.end(), v), ps.end());
  return ps;
}

}  // namespace detail

/// Greedy hill climbing over add / delete / reverse moves. Each iteration
/// applies the best legal move if it strictly improves the score.
inline SearchResult hill_climb(const Dataset& data, const ArcConstraints& constraints, const Dag& initial,
                               const ScoreConfig& score_cfg, const SearchConfig& search_cfg) {
  const NetworkSchema& schema = data.schema();
  check_structure(schema, initial);
  require(search_cfg.max_iterations >= 1, "max_iterations must be at least 1");
  const std::size_t n = schema.size();
  if (auto bad = validate_constraints(constraints, n); !bad.empty())
    fail(ErrorKind::infeasible_start, "infeasible start: " + bad.front());
  for (const auto& a : constraints.required)
    if (!initial.has_arc(a.parent, a.child))
      fail(ErrorKind::infeasible_start, "infeasible start: required arc " + schema[a.parent].name + "->" +
                                            schema[a.child].name + " missing from the initial graph");
  for (const auto& a : constraints.forbidden)
    if (initial.has_arc(a.parent, a.child))
      fail(ErrorKind::infeasible_start, "infeasible start: forbidden arc " + schema[a.parent].name + "->" +
                                            schema[a.child].name + " present in the initial graph");
  if (!data.complete()) fail(ErrorKind::incomplete_data, "incomplete data for family: dataset has missing values");

  FamilyScoreCache score(data, score_cfg);
  detail::SearchGraph g(initial);
  std::vector<std::vector<VarId>> parents(n);
  std::vector<double> fam(n);
  for (VarId v = 0; v < n; ++v) {
    parents[v] = g.parents(v);
    fam[v] = score(v, parents[v]);
  }

  SearchResult result;
  auto total = [&] {
    double s = 0.0;
    for (double f : fam) s += f;
    return s;
  };
  result.initial_score = total();
  double current = result.initial_score;

  auto key = [&](const Move& m) {
    return std::make_tuple(static_cast<int>(m.kind), schema[m.parent].name, schema[m.child].name);
  };

  for (std::size_t it = 0; it < search_cfg.max_iterations; ++it) {
    std::vector<Move> candidates;
    for (VarId p = 0; p < n; ++p) {
      for (VarId c = 0; c < n; ++c) {
        if (p == c) continue;
        if (!g.arc(p, c)) {
          if (g.arc(c, p) || constraints.is_forbidden({p, c}) || g.reaches(c, p)) continue;
          double d = score(c, detail::with(parents[c], p)) - fam[c];
          candidates.push_back({MoveKind::add, p, c, d});
          continue;
        }
        if (constraints.is_required({p, c})) continue;
        double drop = score(c, detail::without(parents[c], p)) - fam[c];
        candidates.push_back({MoveKind::remove, p, c, drop});
        if (constraints.is_forbidden({c, p}) || g.reaches(p, c, {p, c})) continue;
        double d = drop + score(p, detail::with(parents[p], c)) - fam[p];
        candidates.push_back({MoveKind::reverse, p, c, d});
      }
    }
    if (candidates.empty()) break;

    double best_delta = candidates.front().delta;
    for (const auto& m : candidates) best_delta = std::max(best_delta, m.delta);
    if (!(best_delta > search_cfg.min_improvement)) break;

    const double tol = 1e-12 * std::max(1.0, std::abs(best_delta));
    std::vector<Move> tied;
    for (const auto& m : candidates)
      if (best_delta - m.delta <= tol) tied.push_back(m);
    std::sort(tied.begin(), tied.end(), [&](const Move& a, const Move& b) { return key(a) < key(b); });
    Move chosen = tied.front();
    if (search_cfg.tie_break == TieBreak::random && tied.size() > 1) {
      Rng rng(derive_seed(search_cfg.seed, {it}));
      chosen = tied[rng.index(tied.size())];
    }

    const VarId p = chosen.parent, c = chosen.child;
    switch (chosen.kind) {
      case MoveKind::add:
        g.set(p, c, true);
        parents[c] = detail::with(parents[c], p);
        break;
      case MoveKind::remove:
        g.set(p, c, false);
        parents[c] = detail::without(parents[c], p);
        break;
      case MoveKind::reverse:
        g.set(p, c, false);
        g.set(c, p, true);
        parents[c] = detail::without(parents[c], p);
        parents[p] = detail::with(parents[p], c);
        fam[p] = score(p, parents[p]);
        break;
    }
    fam[c] = score(c, parents[c]);
    current = total();
    chosen.score_after = current;
    result.moves.push_back(chosen);
    result.iterations = it + 1;
  }

  result.dag = g.to_dag(schema.names());
  result.score = current;
  return result;
}

/// Replays a move log on `initial`, returning every intermediate graph.
inline std::vector<Dag> replay_moves(const Dag& initial, const std::vector<Move>& moves) {
  std::vector<Dag> out;
  detail::SearchGraph g(initial);
  for (const auto& m : moves) {
    if (m.kind == MoveKind::add) g.set(m.parent, m.child, true);
    if (m.kind == MoveKind::remove) g.set(m.parent, m.child, false);
    if (m.kind == MoveKind::reverse) {
      g.set(m.parent, m.child, false);
      g.set(m.child, m.parent, true);
    }
    out.push_back(g.to_dag(initial.nodes));
  }
  return out;
}

/// Structural Hamming distance: missing, extra and reversed arcs each count 1.
inline std::size_t structural_hamming_distance(const Dag& a, const Dag& b) {
  require(a.size() == b.size(), "SHD needs graphs over the same nodes");
  std::size_t d = 0;
  const std::size_t n = a.size();
  for (VarId i = 0; i < n; ++i)
    for (VarId j = i + 1; j < n; ++j) {
      bool a_ij = a.has_arc(i, j), a_ji = a.has_arc(j, i);
      bool b_ij = b.has_arc(i, j), b_ji = b.has_arc(j, i);
      if (a_ij != b_ij || a_ji != b_ji) ++d;
    }
  return d;
}

/// Undirected edge set {min, max} of a DAG.
inline std::vector<std::pair<VarId, VarId>> skeleton(const Dag& d) {
  std::vector<std::pair<VarId, VarId>> out;
  for (const auto& a : d.arcs) out.emplace_back(std::min(a.parent, a.child), std::max(a.parent, a.child));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace crcbn
