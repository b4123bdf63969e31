#include <gtest/gtest.h>

#include <sstream>

#include "crcbn/analytics.hpp"
#include "crcbn/fixtures.hpp"
#include "crcbn/io.hpp"
#include "test_networks.hpp"

using namespace crcbn;
namespace t = crcbn::testing;

namespace {

NetworkSchema small_schema() {
  return NetworkSchema({{"v_sex", {"female", "male"}, {{"woman", "female"}}},
                        {"v_diab", {"yes", "no"}},
                        {"v_age", {"(24,34]", "(34,44]"}}});
}

}  // namespace

TEST(LoadDataset, CountsMissingCells) {
  std::istringstream in("v_sex,v_diab,v_age,year\nfemale,yes,\"(24,34]\",2012\nmale,,\"(34,44]\",2012\nwoman,no,\"(24,34]\",2013\n");
  auto r = load_dataset(in, small_schema());
  EXPECT_EQ(r.data.rows(), 3u);
  EXPECT_EQ(r.report.missing_cells, 1u);
  EXPECT_EQ(r.report.rows_with_missing, 1u);
  EXPECT_EQ(r.data.at(2, 0), 0);
  EXPECT_EQ(r.data.year(2), 2013);
  auto [complete, dropped] = complete_cases(r.data);
  EXPECT_EQ(dropped, 1u);
  EXPECT_EQ(complete.rows(), 2u);
}

TEST(LoadDataset, RejectsUnknownLabelWithLocation) {
  std::istringstream in("v_sex,v_diab,v_age,year\nfemale,maybe,\"(24,34]\",2012\nmale,no,\"(34,44]\",2012\n");
  auto r = load_dataset(in, small_schema());
  EXPECT_EQ(r.data.rows(), 1u);
  EXPECT_EQ(r.report.rejected_rows, 1u);
  ASSERT_EQ(r.report.diagnostics.size(), 1u);
  EXPECT_EQ(r.report.diagnostics[0].line, 2u);
  EXPECT_EQ(r.report.diagnostics[0].column, "v_diab");
}

TEST(LoadDataset, ColumnErrors) {
  auto expect_parse = [](const std::string& text) {
    std::istringstream in(text);
    try {
      load_dataset(in, small_schema());
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::parse);
    }
  };
  expect_parse("v_sex,v_diab,v_age,v_bogus,year\n");
  expect_parse("v_sex,v_diab,year\n");
  expect_parse("v_sex,v_diab,v_age\n");
  expect_parse("v_sex,v_diab,v_age,year\nfemale,yes\n");
  expect_parse("");
}

TEST(LoadDataset, RoundTripsReferenceSamples) {
  auto gen = demo_generator();
  auto d = forward_sample(gen, 500, 3, 2014);
  Dataset with_missing(d.schema());
  for (std::size_t i = 0; i < d.rows(); ++i) {
    std::vector<State> row(d.row(i).begin(), d.row(i).end());
    if (i % 7 == 0) row[i % row.size()] = kUnset;
    with_missing.add_row(row, d.year(i));
  }
  std::stringstream buf;
  save_dataset(buf, with_missing);
  auto back = load_dataset(buf, d.schema());
  EXPECT_TRUE(back.data == with_missing);
  EXPECT_EQ(back.report.rejected_rows, 0u);
}

TEST(LoadDataset, ColumnOrderIsFree) {
  std::istringstream in("year,v_age,v_sex,v_diab\n2012,\"(34,44]\",male,no\n");
  auto r = load_dataset(in, small_schema());
  EXPECT_EQ(r.data.at(0, 0), 1);
  EXPECT_EQ(r.data.at(0, 2), 1);
}

TEST(SplitByYear, AscendingYears) {
  auto gen = t::t2();
  auto a = forward_sample(gen, 10, 1, 2013), b = forward_sample(gen, 5, 2, 2012);
  a.append(b);
  auto parts = split_by_year(a);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].rows(), 5u);
  EXPECT_EQ(parts[0].year(0), 2012);
}

// ------------------------------------------------------------------ cleaning

namespace {

RawRecord base_record(double weight) {
  RawRecord r;
  r.height_cm = 170;
  r.weight_kg = weight;
  r.age_years = 40;
  return r;
}

}  // namespace

TEST(CleanContinuous, ConstantFieldExcludesNothing) {
  std::vector<RawRecord> rs(20, base_record(70));
  auto [kept, rep] = clean_continuous(rs);
  EXPECT_EQ(kept.size(), 20u);
  EXPECT_EQ(rep.excluded, 0u);
}

TEST(CleanContinuous, PlantedOutlierIsExcluded) {
  Rng rng(3);
  std::vector<RawRecord> rs;
  for (int i = 0; i < 200; ++i) rs.push_back(base_record(75 + 10 * (rng.uniform() - 0.5) * 3.4));
  rs.push_back(base_record(342));  // the paper's example
  auto [kept, rep] = clean_continuous(rs);
  EXPECT_EQ(kept.size(), 200u);
  EXPECT_EQ(rep.excluded, 1u);
  for (const auto& [field, n] : rep.per_field) EXPECT_EQ(n, field == "weight" ? 1u : 0u);
}

TEST(CleanContinuous, KeepsRecordsInsideTheBand) {
  Rng rng(4);
  std::vector<RawRecord> rs;
  for (int i = 0; i < 500; ++i) {
    auto r = base_record(60 + 30 * rng.uniform());
    r.glycemia = 80 + 40 * rng.uniform();
    rs.push_back(r);
  }
  auto [kept, rep] = clean_continuous(rs);
  EXPECT_EQ(kept.size(), 500u);  // uniform data never reaches 3 sd
}

TEST(Discretize, AppendixRules) {
  const auto schema = reference_crc_network().schema;
  auto code = [&](RawRecord r) { return discretize(r, SesCuts{-1, 1}, schema); };
  auto idx = [&](const char* n) { return schema.index_of(n); };

  auto r = base_record(72);  // 72 / 1.70^2 = 24.91
  auto c = code(r);
  ASSERT_TRUE(c.ok);
  EXPECT_EQ(c.row[idx("v_BMI")], 1);
  EXPECT_EQ(c.row[idx("v_age")], 1);
  EXPECT_EQ(c.row[idx("v_diab")], kUnset);

  r.glycemia = 125;
  EXPECT_EQ(code(r).row[idx("v_diab")], 0);
  r.glycemia = 124.9;
  EXPECT_EQ(code(r).row[idx("v_diab")], 1);
  r.diabetes_medication = true;
  EXPECT_EQ(code(r).row[idx("v_diab")], 0);

  r.sleep_hours = 6.0;
  EXPECT_EQ(code(r).row[idx("v_SD")], 1);
  r.sleep_hours = 9.0;
  EXPECT_EQ(code(r).row[idx("v_SD")], 1);
  r.sleep_hours = 5.9;
  EXPECT_EQ(code(r).row[idx("v_SD")], 0);
  r.sleep_hours = 9.5;
  EXPECT_EQ(code(r).row[idx("v_SD")], 2);

  r.systolic = 139;
  r.diastolic = 70;
  EXPECT_EQ(code(r).row[idx("v_hypten")], 0);
  r.systolic = 120;
  EXPECT_EQ(code(r).row[idx("v_hypten")], 1);

  r.ldl = 100;
  r.hdl = 40;
  r.triglycerides = 100;
  r.total_cholesterol = 180;
  EXPECT_EQ(code(r).row[idx("v_hypchol")], 0);  // HDL <= 40
  r.hdl = 55;
  EXPECT_EQ(code(r).row[idx("v_hypchol")], 1);

  r.sex = "Woman";
  r.smoking = "ex-smoker";
  r.ses_score = 1.5;
  auto full = code(r);
  EXPECT_EQ(full.row[idx("v_sex")], 0);
  EXPECT_EQ(full.row[idx("v_smok")], 1);
  EXPECT_EQ(full.row[idx("v_SES")], 2);

  for (double age : {24.0, 64.5, 70.0}) {
    r.age_years = age;
    EXPECT_FALSE(code(r).ok);
    EXPECT_FALSE(code(r).reason.empty());
  }
  r.age_years = 64;
  EXPECT_EQ(code(r).row[idx("v_age")], 3);
  r.age_years = 24.5;
  EXPECT_EQ(code(r).row[idx("v_age")], 0);
}

TEST(Discretize, ProducesOnlyValidStates) {
  const auto schema = reference_crc_network().schema;
  Rng rng(9);
  std::vector<RawRecord> rs;
  for (int i = 0; i < 1000; ++i) {
    RawRecord r;
    r.age_years = 24.01 + 39.98 * rng.uniform();
    r.height_cm = 150 + 40 * rng.uniform();
    r.weight_kg = 45 + 70 * rng.uniform();
    r.sleep_hours = 3 + 9 * rng.uniform();
    r.glycemia = 70 + 90 * rng.uniform();
    r.ses_score = rng.uniform();
    r.sex = rng.uniform() < 0.5 ? "male" : "female";
    r.crc = rng.uniform() < 0.01;
    rs.push_back(r);
  }
  const auto cuts = ses_cuts_from(rs);
  EXPECT_LT(cuts.low, cuts.high);
  Dataset d(schema);
  for (const auto& r : rs) {
    auto c = discretize(r, cuts, schema);
    ASSERT_TRUE(c.ok);
    EXPECT_NO_THROW(d.add_row(c.row, c.year));
  }
}

// --------------------------------------------------------------- model files

namespace {

ParameterPosterior reference_posterior() {
  auto gen = demo_generator();
  auto data = forward_sample(gen, 3000, 5, 2012);
  Structure s{gen.schema(), gen.dag()};
  return fit(make_prior(s, build_prior(s.schema, empirical_marginals(data), 0.3169)), data);
}

}  // namespace

TEST(ModelDocument, RoundTripIsExact) {
  auto post = reference_posterior();
  auto back = load_model(save_model(post));
  EXPECT_TRUE(back == post);
  for (VarId v = 0; v < post.schema().size(); ++v) EXPECT_EQ(back.prior_table(v), post.prior_table(v));
  EXPECT_EQ(back.provenance(), post.provenance());
  EXPECT_EQ(back.alpha(), post.alpha());
}

TEST(ModelDocument, TamperingIsDetected) {
  auto doc = nlohmann::json::parse(save_model(reference_posterior()));
  auto& prior = doc["content"]["nodes"][3]["prior"][0];
  prior = -prior.get<double>();
  try {
    load_model(doc.dump());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::checksum);
  }
}

TEST(ModelDocument, MinorVersionsAndUnknownFieldsAreAccepted) {
  auto post = reference_posterior();
  auto doc = nlohmann::json::parse(save_model(post));
  doc["format_version"] = "1.7";
  doc["generator_note"] = "written by a newer release";
  EXPECT_TRUE(load_model(doc.dump()) == post);

  auto content = doc["content"];
  content["future_field"] = {1, 2, 3};
  doc["content"] = content;
  doc["checksum"] = "fnv1a64:" + hex64(fnv1a64(content.dump()));
  EXPECT_TRUE(load_model(doc.dump()) == post);

  doc["format_version"] = "2.0";
  try {
    load_model(doc.dump());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::version);
  }
  EXPECT_THROW(load_model("{not json"), Error);
}

TEST(DagDocument, RoundTripAndErrors) {
  auto [schema, dag] = reference_crc_network();
  auto back = load_dag(nlohmann::json::parse(save_dag(schema, dag)), schema);
  EXPECT_EQ(back.sorted_arcs(), dag.sorted_arcs());
  EXPECT_THROW(load_dag(nlohmann::json::parse(R"({"arcs": [["v_sex", "v_nope"]]})"), schema), Error);
  auto c = load_constraints(nlohmann::json::parse(R"({"required": [["v_sex", "v_SES"]], "forbidden": [["v_hypchol", "v_age"]]})"),
                            schema);
  EXPECT_EQ(c.required.size(), 1u);
  auto c2 = load_constraints(nlohmann::json::parse(save_constraints(schema, c)), schema);
  EXPECT_EQ(c2.forbidden, c.forbidden);
  EXPECT_THROW(load_constraints(nlohmann::json::parse(R"({"required": [["v_sex", "v_SES"]], "forbidden": [["v_sex", "v_SES"]]})"),
                                schema),
               Error);
}

// ------------------------------------------------------------------ fixtures

TEST(PaperFixtures, Table2Marginals) {
  auto f = paper_fixtures();
  const auto& s = f.reference.schema;
  auto expect_marginal = [&](const char* name, std::vector<double> want) {
    const auto& got = f.table2.of(s, name);
    ASSERT_EQ(got.size(), want.size()) << name;
    for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-12) << name << " " << k;
  };
  expect_marginal("v_CRC", {0.0007, 0.9993});
  expect_marginal("v_alc", {0.9505, 0.0495});
  expect_marginal("v_sex", {0.3068, 0.6932});
  expect_marginal("v_SD", {0.1088, 0.8901, 0.0011});
  for (const auto& m : f.table2.values) {
    double total = 0;
    for (double p : m) total += p;
    EXPECT_NEAR(total, 1.0, 5e-4);
  }
  EXPECT_EQ(f.sd_2012.size(), 8u);
  EXPECT_EQ(f.sd_evolution.size(), 4u);
  EXPECT_NEAR(auto_alpha(f.patients), f.alpha, 1e-12);
}

TEST(PaperFixtures, SdTablesAreInternallyConsistent) {
  auto f = paper_fixtures();
  for (const auto& [key, col] : f.sd_2012) {
    double total = 0;
    for (int k = 0; k < 3; ++k) {
      total += col.mean[k];
      EXPECT_LE(col.interval[k].lo, col.mean[k]);
      EXPECT_GE(col.interval[k].hi, col.mean[k]);
    }
    EXPECT_NEAR(total, 1.0, 5e-4);
  }
  // The first evolution column is the 2012 posterior for men aged (24,34].
  const auto& first = f.sd_evolution.front().second;
  const auto& t4 = f.sd_2012.at({1, 0});
  for (int k = 0; k < 3; ++k) EXPECT_EQ(first.mean[k], t4.mean[k]);
}

TEST(DemoGenerator, MatchesTable2Marginals) {
  auto gen = demo_generator();
  auto f = paper_fixtures();
  for (VarId v = 0; v < gen.size(); ++v) {
    auto m = query(gen, Evidence(gen.size()), v).distribution;
    double total = 0;
    for (double p : f.table2.values[v]) total += p;
    for (std::size_t x = 0; x < m.size(); ++x) EXPECT_NEAR(m[x], f.table2.values[v][x] / total, 1e-6);
  }
}

TEST(DemoGenerator, CohortIsSeededPerYear) {
  auto gen = demo_generator();
  auto a = generate_cohort(gen, {2012, 2013}, 100, 7);
  auto b = generate_cohort(gen, {2013}, 100, 7);
  EXPECT_TRUE(a[1] == b[0]);
  EXPECT_EQ(a[0].year(0), 2012);
  EXPECT_FALSE(a[0] == a[1]);
}

// Woman x SD on a posterior fit to paper-sized synthetic data: all three cells
// carry no evidence of a change in CRC risk.
TEST(DemoGenerator, SleepRiskMapForWomenShowsNoEvidence) {
  auto gen = demo_generator();
  const auto& s = gen.schema();
  auto years = generate_cohort(gen, {2012, 2013, 2014, 2015}, 79225, 42);
  auto all = concatenate(years);
  auto spec = build_prior(s, empirical_marginals(all), auto_alpha(all.rows()));
  auto post = sequential_fit(spec, {s, gen.dag()}, years).back();
  RiskMapSpec rs;
  rs.target = {s.index_of("v_CRC"), s.state_of(s.index_of("v_CRC"), "yes")};
  rs.condition = parse_evidence(s, {"v_sex=woman"});
  rs.axes = {s.index_of("v_SD")};
  rs.seed = 2012;
  auto m = risk_map(post, rs);
  ASSERT_EQ(m.cells.size(), 3u);
  for (const auto& c : m.cells) EXPECT_EQ(c.verdict, Verdict::no_evidence);
  // Normal sleep is the largest group, short the next.
  EXPECT_GT(m.cells[1].population_share, m.cells[0].population_share);
  EXPECT_GT(m.cells[0].population_share, m.cells[2].population_share);
  // Smaller groups carry wider intervals.
  EXPECT_GT(m.cells[2].upper - m.cells[2].lower, m.cells[0].upper - m.cells[0].lower);
  EXPECT_GT(m.cells[0].upper - m.cells[0].lower, m.cells[1].upper - m.cells[1].lower);
}
