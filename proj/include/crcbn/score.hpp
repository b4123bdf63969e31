#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "crcbn/dataset.hpp"
#include "crcbn/model.hpp"

namespace crcbn {

enum class ScoreKind { bds, bdeu };

struct ScoreConfig {
  double imposed_sample_size = 1.0;
  ScoreKind kind = ScoreKind::bds;
};

/// Sufficient statistics of one family: counts for each parent configuration
/// that occurs in the data. `total_configs` is the full product of parent
/// cardinalities (observed or not).
struct FamilyCounts {
  std::size_t k = 0;
  double total_configs = 1.0;
  std::vector<std::vector<std::int64_t>> observed;
};

inline FamilyCounts family_counts(const Dataset& data, VarId node, std::span<const VarId> parents) {
  FamilyCounts fc;
  fc.k = data.schema().cardinality(node);
  for (VarId p : parents) fc.total_configs *= static_cast<double>(data.schema().cardinality(p));
  std::unordered_map<std::uint64_t, std::size_t> slot;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    std::uint64_t u = 0;
    for (VarId p : parents) u = u * data.schema().cardinality(p) + static_cast<std::uint64_t>(data.at(i, p));
    auto [it, inserted] = slot.try_emplace(u, fc.observed.size());
    if (inserted) fc.observed.emplace_back(fc.k, 0);
    ++fc.observed[it->second][static_cast<std::size_t>(data.at(i, node))];
  }
  return fc;
}

/// Log marginal likelihood of a family under a Dirichlet prior with
/// per-cell hyperparameter iss / (K * Q). BDeu uses every parent
/// configuration for Q; BDs only the configurations observed in the data.
inline double family_score(VarId node, std::span<const VarId> parents, const Dataset& data, const ScoreConfig& cfg) {
  require(cfg.imposed_sample_size > 0.0, "imposed sample size must be positive");
  require(node < data.cols(), "unknown node");
  for (VarId p : parents) {
    require(p < data.cols(), "unknown parent");
    require(p != node, "node cannot be its own parent");
  }
  std::vector<VarId> family(parents.begin(), parents.end());
  family.push_back(node);
  if (!data.complete_on(family))
    fail(ErrorKind::incomplete_data, "incomplete data for family '" + data.schema()[node].name + "'");

  const FamilyCounts fc = family_counts(data, node, parents);
  if (fc.observed.empty()) return 0.0;
  const double q = cfg.kind == ScoreKind::bdeu ? fc.total_configs : static_cast<double>(fc.observed.size());
  const double a_j = cfg.imposed_sample_size / q;
  const double a_jk = a_j / static_cast<double>(fc.k);
  const double lg_aj = std::lgamma(a_j), lg_ajk = std::lgamma(a_jk);

  double score = 0.0;
  for (const auto& counts : fc.observed) {
    std::int64_t n_j = 0;
    for (auto c : counts) {
      n_j += c;
      if (c > 0) score += std::lgamma(a_jk + static_cast<double>(c)) - lg_ajk;
    }
    score += lg_aj - std::lgamma(a_j + static_cast<double>(n_j));
  }
  return score;
}

inline double network_score(const Dag& dag, const Dataset& data, const ScoreConfig& cfg) {
  check_structure(data.schema(), dag);
  double s = 0.0;
  auto ps = dag.parent_sets();
  for (VarId v = 0; v < dag.size(); ++v) s += family_score(v, ps[v], data, cfg);
  return s;
}

}  // namespace crcbn
