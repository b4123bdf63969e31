#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "crcbn/dataset.hpp"
#include "crcbn/model.hpp"
#include "crcbn/rng.hpp"

namespace crcbn {

/// Marginal means are floored here before scaling so no hyperparameter is 0.
inline constexpr double kMarginalFloor = 1e-6;
/// Published marginal tables are rounded; sums within this of 1 are accepted
/// and renormalized.
inline constexpr double kMarginalSumTolerance = 5e-3;

struct PriorSpec {
  double alpha = 1.0;
  std::vector<std::vector<double>> marginal_means;
};

/// The default equivalent sample size: one pseudo-observation per 10,000 rows.
inline double auto_alpha(std::size_t rows) { return static_cast<double>(rows) / 10000.0; }

inline std::vector<double> normalize_marginal(const std::vector<double>& raw, const std::string& name) {
  double s = 0.0;
  for (double p : raw) {
    require(std::isfinite(p) && p >= 0.0, "marginal for '" + name + "' has a negative or non-finite entry");
    s += p;
  }
  require(std::abs(s - 1.0) <= kMarginalSumTolerance, "marginal for '" + name + "' does not sum to 1");
  std::vector<double> out(raw.size());
  double t = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = std::max(raw[i] / s, kMarginalFloor);
    t += out[i];
  }
  for (auto& p : out) p /= t;
  return out;
}

inline PriorSpec build_prior(const NetworkSchema& schema, const std::vector<std::vector<double>>& marginals,
                             double alpha) {
  require(std::isfinite(alpha) && alpha > 0.0, "alpha must be positive");
  require(marginals.size() == schema.size(), "need one marginal per variable");
  PriorSpec spec{alpha, {}};
  for (VarId v = 0; v < schema.size(); ++v) {
    require(marginals[v].size() == schema.cardinality(v), "marginal for '" + schema[v].name + "' has wrong length");
    spec.marginal_means.push_back(normalize_marginal(marginals[v], schema[v].name));
  }
  return spec;
}

/// Per-variable relative frequencies over non-missing cells. Variables with
/// no observed value fall back to uniform.
inline std::vector<std::vector<double>> empirical_marginals(const Dataset& data) {
  std::vector<std::vector<double>> out;
  for (VarId v = 0; v < data.cols(); ++v) {
    std::vector<double> counts(data.schema().cardinality(v), 0.0);
    double n = 0.0;
    for (std::size_t i = 0; i < data.rows(); ++i)
      if (State s = data.at(i, v); s != kUnset) {
        counts[static_cast<std::size_t>(s)] += 1.0;
        n += 1.0;
      }
    for (auto& c : counts) c = n > 0.0 ? c / n : 1.0 / static_cast<double>(counts.size());
    out.push_back(std::move(counts));
  }
  return out;
}

/// Dirichlet posterior over every CPT row. Hyperparameters are kept as the
/// prior part plus exact integer counts so that any split of the data into
/// batches produces bit-identical hyperparameters.
class ParameterPosterior {
 public:
  ParameterPosterior() = default;
  ParameterPosterior(Structure structure, double alpha, std::vector<std::vector<double>> prior,
                     std::vector<std::vector<std::int64_t>> counts, std::vector<std::string> provenance)
      : structure_(std::move(structure)), alpha_(alpha), prior_(std::move(prior)), counts_(std::move(counts)),
        provenance_(std::move(provenance)) {
    check_structure(structure_.schema, structure_.dag);
    parents_ = structure_.dag.parent_sets();
    const auto& schema = structure_.schema;
    require(prior_.size() == schema.size() && counts_.size() == schema.size(), "one hyperparameter table per node");
    for (VarId v = 0; v < schema.size(); ++v) {
      const std::size_t cells = rows(v) * schema.cardinality(v);
      require(prior_[v].size() == cells && counts_[v].size() == cells, "hyperparameter table has wrong shape");
      for (std::size_t i = 0; i < cells; ++i) {
        require(std::isfinite(prior_[v][i]) && prior_[v][i] > 0.0, "prior hyperparameters must be positive");
        require(counts_[v][i] >= 0, "counts must be nonnegative");
      }
    }
  }

  const Structure& structure() const noexcept { return structure_; }
  const NetworkSchema& schema() const noexcept { return structure_.schema; }
  const Dag& dag() const noexcept { return structure_.dag; }
  double alpha() const noexcept { return alpha_; }
  const std::vector<std::string>& provenance() const noexcept { return provenance_; }
  const std::vector<VarId>& parents(VarId v) const { return parents_.at(v); }

  std::size_t rows(VarId v) const { return config_count(structure_.schema, parents_.at(v)); }
  std::size_t cardinality(VarId v) const { return structure_.schema.cardinality(v); }

  const std::vector<double>& prior_table(VarId v) const { return prior_.at(v); }
  const std::vector<std::int64_t>& count_table(VarId v) const { return counts_.at(v); }

  double hyper(VarId v, std::size_t u, State x) const {
    const std::size_t i = u * cardinality(v) + static_cast<std::size_t>(x);
    return prior_[v][i] + static_cast<double>(counts_[v][i]);
  }

  std::vector<double> row_hyper(VarId v, std::size_t u) const {
    std::vector<double> out(cardinality(v));
    for (std::size_t x = 0; x < out.size(); ++x) out[x] = hyper(v, u, static_cast<State>(x));
    return out;
  }

  std::int64_t row_count(VarId v, std::size_t u) const {
    std::int64_t n = 0;
    for (std::size_t x = 0; x < cardinality(v); ++x) n += counts_[v][u * cardinality(v) + x];
    return n;
  }

  /// Row index of parent configuration given as one state per parent.
  std::size_t config_index(VarId v, std::span<const State> parent_states) const {
    const auto& ps = parents_.at(v);
    require(parent_states.size() == ps.size(), "wrong number of parent states");
    std::size_t u = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      require(parent_states[i] >= 0 && static_cast<std::size_t>(parent_states[i]) < cardinality(ps[i]),
              "parent state out of range");
      u = u * cardinality(ps[i]) + static_cast<std::size_t>(parent_states[i]);
    }
    return u;
  }

  /// Row index for the parent states found in a full-width row.
  std::size_t row_config(VarId v, std::span<const State> row) const {
    std::size_t u = 0;
    for (VarId p : parents_[v]) u = u * cardinality(p) + static_cast<std::size_t>(row[p]);
    return u;
  }

  /// Same prior, counts increased by `data`; this object is unchanged.
  ParameterPosterior absorb(const Dataset& data) const {
    if (!(data.schema() == schema())) fail(ErrorKind::schema_mismatch, "dataset schema does not match the model");
    if (!data.complete()) fail(ErrorKind::incomplete_data, "dataset has missing values; fit needs complete rows");
    auto counts = counts_;
    for (std::size_t i = 0; i < data.rows(); ++i) {
      auto row = data.row(i);
      for (VarId v = 0; v < schema().size(); ++v)
        ++counts[v][row_config(v, row) * cardinality(v) + static_cast<std::size_t>(row[v])];
    }
    auto prov = provenance_;
    prov.push_back(data.id().empty() ? "dataset-" + std::to_string(prov.size() + 1) : data.id());
    return ParameterPosterior(structure_, alpha_, prior_, std::move(counts), std::move(prov));
  }

  friend bool operator==(const ParameterPosterior& a, const ParameterPosterior& b) {
    return a.structure_.schema == b.structure_.schema && a.structure_.dag == b.structure_.dag &&
           a.alpha_ == b.alpha_ && a.prior_ == b.prior_ && a.counts_ == b.counts_ && a.provenance_ == b.provenance_;
  }

 private:
  Structure structure_;
  double alpha_ = 0.0;
  std::vector<std::vector<double>> prior_;
  std::vector<std::vector<std::int64_t>> counts_;
  std::vector<std::string> provenance_;
  std::vector<std::vector<VarId>> parents_;
};

/// Every row of every node gets alpha * marginal(node), whatever the parents.
inline ParameterPosterior make_prior(const Structure& structure, const PriorSpec& spec) {
  const auto& schema = structure.schema;
  check_structure(schema, structure.dag);
  require(spec.alpha > 0.0, "alpha must be positive");
  require(spec.marginal_means.size() == schema.size(), "prior needs one marginal per variable");
  auto ps = structure.dag.parent_sets();
  std::vector<std::vector<double>> prior(schema.size());
  std::vector<std::vector<std::int64_t>> counts(schema.size());
  for (VarId v = 0; v < schema.size(); ++v) {
    const auto& m = spec.marginal_means[v];
    require(m.size() == schema.cardinality(v), "marginal length mismatch for '" + schema[v].name + "'");
    const std::size_t q = config_count(schema, ps[v]);
    for (std::size_t u = 0; u < q; ++u)
      for (double p : m) prior[v].push_back(spec.alpha * p);
    counts[v].assign(prior[v].size(), 0);
  }
  return ParameterPosterior(structure, spec.alpha, std::move(prior), std::move(counts), {});
}

inline ParameterPosterior fit(const ParameterPosterior& prior, const Dataset& data) { return prior.absorb(data); }

/// Element 0 is the prior; element t is the posterior after years 1..t.
inline std::vector<ParameterPosterior> sequential_fit(const PriorSpec& prior, const Structure& structure,
                                                      const std::vector<Dataset>& yearly) {
  std::vector<ParameterPosterior> out;
  out.push_back(make_prior(structure, prior));
  for (const auto& d : yearly) out.push_back(fit(out.back(), d));
  return out;
}

inline BayesianNetwork posterior_mean_network(const ParameterPosterior& post) {
  const auto& schema = post.schema();
  std::vector<std::vector<double>> tables(schema.size());
  for (VarId v = 0; v < schema.size(); ++v)
    for (std::size_t u = 0; u < post.rows(v); ++u) {
      auto h = post.row_hyper(v, u);
      double s = 0.0;
      for (double a : h) s += a;
      for (double a : h) tables[v].push_back(a / s);
    }
  return make_network(schema, post.dag(), tables);
}

/// One draw q from the posterior: each CPT row from its own Dirichlet.
inline BayesianNetwork sample_parameters(const ParameterPosterior& post, std::uint64_t seed) {
  const auto& schema = post.schema();
  Rng rng(seed);
  std::vector<std::vector<double>> tables(schema.size());
  for (VarId v = 0; v < schema.size(); ++v) {
    const std::size_t k = schema.cardinality(v);
    tables[v].resize(post.rows(v) * k);
    for (std::size_t u = 0; u < post.rows(v); ++u) {
      auto h = post.row_hyper(v, u);
      rng.dirichlet(h, std::span<double>(tables[v].data() + u * k, k));
    }
  }
  return make_network(schema, post.dag(), tables);
}

struct Interval {
  double lo = 0.0;
  double mean = 0.0;
  double hi = 0.0;
};

/// Equal-tailed interval of Beta(a_x, A - a_x), the marginal of one state's
/// probability under the row's Dirichlet.
inline std::vector<Interval> credible_interval(const ParameterPosterior& post, VarId node, std::size_t config,
                                               double level) {
  require(level > 0.0 && level < 1.0, "level must lie in (0, 1)");
  require(node < post.schema().size() && config < post.rows(node), "node or parent configuration out of range");
  auto h = post.row_hyper(node, config);
  double total = 0.0;
  for (double a : h) total += a;
  const double tail = (1.0 - level) / 2.0;
  std::vector<Interval> out;
  for (double a : h) {
    const double b = total - a;
    Interval iv;
    iv.mean = a / total;
    iv.lo = boost::math::ibeta_inv(a, b, tail);
    iv.hi = boost::math::ibeta_inv(a, b, 1.0 - tail);
    out.push_back(iv);
  }
  return out;
}

}  // namespace crcbn
