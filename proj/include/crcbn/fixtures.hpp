#pragma once

// Published tables and a paper-like synthetic cohort generator.

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "crcbn/inference.hpp"
#include "crcbn/model.hpp"

namespace crcbn {

struct MarginalTable {
  std::vector<std::vector<double>> values;  // schema order, state order

  const std::vector<double>& of(const NetworkSchema& s, std::string_view name) const { return values.at(s.index_of(name)); }
};

struct IntervalFixture {
  double lo = 0.0;
  double hi = 0.0;
};

/// Values of the SD tables for one (sex, age) column; states short, normal, excessive.
struct SdColumn {
  std::array<double, 3> mean{};
  std::array<IntervalFixture, 3> interval{};
};

struct PaperFixtures {
  Structure reference;
  MarginalTable table2;                  // percentages / 100, as printed
  std::array<double, 3> table3_prior{};  // SD prior mean, identical for every column
  double alpha = 0.0;
  std::size_t patients = 0;
  /// Tables 4 and 5, keyed by (sex state, age state) of the reference schema.
  std::map<std::pair<State, State>, SdColumn> sd_2012;
  /// SD evolution for men aged (24,34]: years 2012..2015.
  std::vector<std::pair<int, SdColumn>> sd_evolution;
};

inline PaperFixtures paper_fixtures() {
  PaperFixtures f;
  f.reference = reference_crc_network();
  const auto& s = f.reference.schema;
  f.table2.values.resize(s.size());
  auto put = [&](const char* name, std::vector<double> pct) {
    for (auto& p : pct) p /= 100.0;
    f.table2.values[s.index_of(name)] = std::move(pct);
  };
  put("v_sex", {30.68, 69.32});
  put("v_age", {21.21, 38.02, 29.03, 11.73});
  put("v_SES", {23.93, 61.97, 14.10});
  put("v_BMI", {1.10, 41.27, 40.67, 16.96});
  put("v_PA", {47.21, 52.79});
  put("v_SD", {10.88, 89.01, 0.11});
  put("v_alc", {95.05, 4.95});
  put("v_smok", {49.90, 30.16, 19.94});
  put("v_anx", {2.70, 97.30});
  put("v_dep", {0.47, 99.53});
  put("v_hypten", {15.05, 84.95});
  put("v_hypchol", {51.32, 48.68});
  put("v_diab", {3.63, 96.37});
  put("v_CRC", {0.07, 99.93});

  f.table3_prior = {.1024, .8963, .0011};
  f.patients = 316900;
  f.alpha = 31.69;

  // Columns in table order: (24,34] man, woman, (34,44] man, woman, ...
  const double mean[3][8] = {{.0600, .0711, .0897, .1039, .1211, .1581, .1386, .2256},
                             {.9384, .9264, .9092, .8952, .8778, .8407, .8604, .7737},
                             {.0016, .0025, .0011, .0009, .0012, .0012, .0010, .0007}};
  const double lo[3][8] = {{.0583, .0686, .0881, .1013, .1189, .1543, .1347, .2175},
                           {.9367, .9238, .9076, .8926, .8756, .8369, .8565, .7654},
                           {.0013, .002, .0009, .0007, .0009, .0008, .0007, .0003}};
  const double hi[3][8] = {{.0617, .0737, .0914, .1064, .1232, .1619, .1425, .2338},
                           {.9401, .929, .9108, .8978, .88, .8445, .8643, .7818},
                           {.0019, .003, .0013, .0012, .0014, .0015, .0014, .0013}};
  const State male = s.state_of(s.index_of("v_sex"), "male"), female = s.state_of(s.index_of("v_sex"), "female");
  for (int c = 0; c < 8; ++c) {
    SdColumn col;
    for (int k = 0; k < 3; ++k) {
      col.mean[k] = mean[k][c];
      col.interval[k] = {lo[k][c], hi[k][c]};
    }
    f.sd_2012[{c % 2 == 0 ? male : female, static_cast<State>(c / 2)}] = col;
  }

  const double ev_mean[4][3] = {{.0600, .9384, .0016}, {.0600, .9388, .0015}, {.0595, .9389, .0015}, {.0608, .9378, .0013}};
  const double ev_lo[4][3] = {{.0583, .9367, .0013}, {.0581, .9372, .0013}, {.0579, .9373, .0013}, {.0591, .9360, .0011}};
  const double ev_hi[4][3] = {{.0617, .9401, .0019}, {.0613, .9404, .0018}, {.0612, .9406, .0018}, {.0626, .9396, .0016}};
  for (int y = 0; y < 4; ++y) {
    SdColumn col;
    for (int k = 0; k < 3; ++k) {
      col.mean[k] = ev_mean[y][k];
      col.interval[k] = {ev_lo[y][k], ev_hi[y][k]};
    }
    f.sd_evolution.emplace_back(2012 + y, col);
  }
  return f;
}

// ------------------------------------------------------------ demo generator

/// Generator on the reference structure. Each CPT row is a softmax of
/// per-state intercepts plus additive parent effects along a per-child state
/// direction; intercepts are tuned so the marginals match Table 2.
inline BayesianNetwork demo_generator() {
  const auto fx = paper_fixtures();
  const auto& schema = fx.reference.schema;
  const auto& dag = fx.reference.dag;
  const auto ps = dag.parent_sets();
  const std::size_t n = schema.size();
  auto id = [&](const char* name) { return schema.index_of(name); };

  // Parent-state scores (how much of the "risky" end a parent state carries).
  std::vector<std::vector<double>> score(n);
  score[id("v_sex")] = {0, 1};             // male
  score[id("v_age")] = {0, 1, 2, 3};
  score[id("v_SES")] = {0, 1, 2};
  score[id("v_BMI")] = {0.5, 0, 1, 2};
  score[id("v_PA")] = {1, 0};              // inactivity
  score[id("v_SD")] = {1, 0, 0.5};         // short or excessive sleep
  score[id("v_alc")] = {0, 1};
  score[id("v_smok")] = {0, 1, 0.7};       // ex-smokers carry the long-run effect
  for (const char* yn : {"v_anx", "v_dep", "v_hypten", "v_hypchol", "v_diab", "v_CRC"}) score[id(yn)] = {1, 0};

  // Child state directions.
  std::vector<std::vector<double>> dir(n);
  dir[id("v_SES")] = {0, 1, 2};
  dir[id("v_BMI")] = {0, 1, 2, 3};
  dir[id("v_PA")] = {1, 0};
  dir[id("v_SD")] = {1, 0, 0.3};
  dir[id("v_alc")] = {0, 1};
  dir[id("v_smok")] = {0, 1, 1};
  for (const char* yn : {"v_anx", "v_dep", "v_hypten", "v_hypchol", "v_diab", "v_CRC"}) dir[id(yn)] = {1, 0};

  std::map<std::pair<std::string, std::string>, double> beta{
      {{"v_SES", "v_sex"}, 0.1},    {{"v_SES", "v_age"}, 0.15},
      {{"v_SD", "v_sex"}, -0.25},   {{"v_SD", "v_age"}, 0.0},
      {{"v_PA", "v_sex"}, -0.2},    {{"v_PA", "v_age"}, 0.1},     {{"v_PA", "v_SD"}, 0.1},     {{"v_PA", "v_SES"}, -0.2},
      {{"v_dep", "v_sex"}, -0.4},   {{"v_dep", "v_age"}, 0.1},    {{"v_dep", "v_SES"}, -0.2},
      {{"v_smok", "v_sex"}, 0.3},   {{"v_smok", "v_age"}, 0.05},  {{"v_smok", "v_PA"}, 0.2},
      {{"v_alc", "v_sex"}, 0.8},    {{"v_alc", "v_age"}, 0.1},    {{"v_alc", "v_smok"}, 0.8},
      {{"v_BMI", "v_sex"}, 0.3},    {{"v_BMI", "v_age"}, 0.15},   {{"v_BMI", "v_PA"}, 0.2},    {{"v_BMI", "v_smok"}, 0.05},
      {{"v_anx", "v_sex"}, -0.5},   {{"v_anx", "v_SD"}, 0.4},     {{"v_anx", "v_smok"}, 0.2},  {{"v_anx", "v_dep"}, 2.0},
      {{"v_hypchol", "v_sex"}, 0.2}, {{"v_hypchol", "v_age"}, 0.4}, {{"v_hypchol", "v_PA"}, 0.1},
      {{"v_hypchol", "v_smok"}, 0.1}, {{"v_hypchol", "v_BMI"}, 0.3}, {{"v_hypchol", "v_alc"}, 0.2},
      {{"v_diab", "v_sex"}, 0.3},   {{"v_diab", "v_age"}, 0.5},   {{"v_diab", "v_PA"}, 0.3},   {{"v_diab", "v_BMI"}, 0.6},
      {{"v_hypten", "v_age"}, 0.5}, {{"v_hypten", "v_PA"}, 0.2},  {{"v_hypten", "v_smok"}, 0.05},
      {{"v_hypten", "v_BMI"}, 0.5}, {{"v_hypten", "v_alc"}, 0.4}, {{"v_hypten", "v_diab"}, 0.6},
      {{"v_CRC", "v_sex"}, 0.4},    {{"v_CRC", "v_age"}, 0.8},    {{"v_CRC", "v_alc"}, 0.7},   {{"v_CRC", "v_smok"}, 0.3},
      {{"v_CRC", "v_hypchol"}, 0.1}, {{"v_CRC", "v_hypten"}, 0.3}, {{"v_CRC", "v_diab"}, 0.5},
  };

  std::vector<std::vector<double>> base(n);
  for (VarId v = 0; v < n; ++v) {
    for (double m : fx.table2.values[v]) base[v].push_back(std::log(m));
    if (dir[v].empty()) dir[v].assign(schema.cardinality(v), 0.0);
  }

  auto build = [&] {
    std::vector<std::vector<double>> tables(n);
    for (VarId v = 0; v < n; ++v) {
      const std::size_t k = schema.cardinality(v), q = config_count(schema, ps[v]);
      std::vector<State> cfg(ps[v].size(), 0);
      for (std::size_t u = 0; u < q; ++u) {
        double eta = 0.0;
        for (std::size_t i = 0; i < ps[v].size(); ++i)
          eta += beta.at({schema[v].name, schema[ps[v][i]].name}) * score[ps[v][i]][cfg[i]];
        std::vector<double> row(k);
        double mx = -1e300, sum = 0.0;
        for (std::size_t x = 0; x < k; ++x) mx = std::max(mx, row[x] = base[v][x] + eta * dir[v][x]);
        for (auto& r : row) sum += (r = std::exp(r - mx));
        for (auto& r : row) tables[v].push_back(r / sum);
        for (std::size_t i = cfg.size(); i-- > 0;) {
          if (static_cast<std::size_t>(++cfg[i]) < schema.cardinality(ps[v][i])) break;
          cfg[i] = 0;
        }
      }
    }
    return make_network(schema, dag, tables);
  };

  for (int round = 0; round < 60; ++round) {
    auto net = build();
    for (VarId v = 0; v < n; ++v) {
      auto m = query(net, Evidence(n), v).distribution;
      for (std::size_t x = 0; x < m.size(); ++x) base[v][x] += std::log(fx.table2.values[v][x] / m[x]);
    }
  }
  return build();
}

/// Three binary variables A -> B -> C with strong dependencies.
inline BayesianNetwork chain_generator() {
  NetworkSchema s({{"A", {"0", "1"}}, {"B", {"0", "1"}}, {"C", {"0", "1"}}});
  return make_network(s, Dag::from_names(s, {{"A", "B"}, {"B", "C"}}), {{.6, .4}, {.8, .2, .25, .75}, {.7, .3, .2, .8}});
}

/// Same variables as chain_generator() with no arcs.
inline BayesianNetwork independent_generator() {
  NetworkSchema s({{"A", {"0", "1"}}, {"B", {"0", "1"}}, {"C", {"0", "1"}}});
  return make_network(s, Dag::empty(s), {{.6, .4}, {.5, .5}, {.3, .7}});
}

/// One dataset per year, each from an independent seeded stream.
inline std::vector<Dataset> generate_cohort(const BayesianNetwork& gen, const std::vector<int>& years,
                                            std::size_t rows_per_year, std::uint64_t seed) {
  std::vector<Dataset> out;
  for (std::size_t i = 0; i < years.size(); ++i) {
    auto d = forward_sample(gen, rows_per_year, derive_seed(seed, {static_cast<std::uint64_t>(years[i])}), years[i]);
    d.set_id("synthetic-" + std::to_string(years[i]));
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace crcbn
