#include <gtest/gtest.h>

#include <cmath>

#include "crcbn/model.hpp"
#include "test_networks.hpp"

using namespace crcbn;
using crcbn::testing::binary_schema;

TEST(ValidateDag, EmptyGraphIsOk) {
  auto schema = binary_schema({"A", "B", "C"});
  EXPECT_TRUE(validate_dag(Dag::empty(schema), schema).ok());
}

TEST(ValidateDag, ReportsThreeCycleWithWitness) {
  auto schema = binary_schema({"A", "B", "C"});
  auto dag = Dag::from_names(schema, {{"A", "B"}, {"B", "C"}, {"C", "A"}});
  auto r = validate_dag(dag, schema);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].kind, DagViolation::Kind::cycle);
  EXPECT_EQ(r.violations[0].witness, (std::vector<std::string>{"A", "B", "C", "A"}));
  EXPECT_EQ(r.violations[0].message, "cycle A->B->C->A");
}

TEST(ValidateDag, ReportsUnknownNode) {
  auto schema = binary_schema({"A", "C"});
  Dag dag{{"A", "B"}, {{0, 1}}};
  auto r = validate_dag(dag, schema);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.violations[0].kind, DagViolation::Kind::unknown_node);
  EXPECT_NE(r.violations[0].message.find("B"), std::string::npos);
}

TEST(ValidateDag, ReportsDuplicateArcAndSelfLoop) {
  auto schema = binary_schema({"A", "B"});
  Dag dag{{"A", "B"}, {{0, 1}, {0, 1}, {1, 1}}};
  auto r = validate_dag(dag, schema);
  int dup = 0, self = 0;
  for (const auto& v : r.violations) {
    dup += v.kind == DagViolation::Kind::duplicate_arc;
    self += v.kind == DagViolation::Kind::self_loop;
  }
  EXPECT_EQ(dup, 1);
  EXPECT_EQ(self, 1);
}

TEST(JointProbability, T2HandProduct) {
  auto net = crcbn::testing::t2();
  EXPECT_NEAR(joint_probability(net, Assignment({1, 1})), 0.3 * 0.6, 1e-15);
  EXPECT_NEAR(joint_probability(net, Assignment({0, 1})), 0.7 * 0.2, 1e-15);
}

TEST(JointProbability, UniformBinaryIsTwoToMinusN) {
  auto schema = binary_schema({"A", "B", "C", "D", "E"});
  auto dag = Dag::from_names(schema, {{"A", "B"}, {"A", "C"}, {"B", "D"}, {"C", "D"}, {"D", "E"}});
  auto ps = dag.parent_sets();
  std::vector<std::vector<double>> tables;
  for (VarId v = 0; v < schema.size(); ++v) tables.emplace_back(config_count(schema, ps[v]) * 2, 0.5);
  auto net = make_network(schema, dag, tables);
  EXPECT_DOUBLE_EQ(joint_probability(net, Assignment({1, 0, 1, 1, 0})), std::pow(2.0, -5));
}

TEST(JointProbability, PartialAssignmentIsContractViolation) {
  auto net = crcbn::testing::t2();
  Assignment a(2);
  a.set(0, 1);
  try {
    joint_probability(net, a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::contract);
  }
}

namespace {

double total_mass(const BayesianNetwork& net) {
  Assignment a(std::vector<State>(net.size(), 0));
  double total = 0.0;
  while (true) {
    total += joint_probability(net, a);
    std::size_t j = net.size();
    bool carry = true;
    while (carry && j-- > 0) {
      if (static_cast<std::size_t>(a[j]) + 1 < net.schema().cardinality(j)) {
        a.set(j, a[j] + 1);
        carry = false;
      } else {
        a.set(j, 0);
      }
    }
    if (carry) break;
  }
  return total;
}

}  // namespace

TEST(JointProbability, T2Normalizes) { EXPECT_NEAR(total_mass(crcbn::testing::t2()), 1.0, 1e-12); }

TEST(JointProbability, RandomNetworksNormalize) {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    auto net = crcbn::testing::random_network(rng, 2 + rng.index(5), 4);
    EXPECT_NEAR(total_mass(net), 1.0, 1e-12);
  }
}

TEST(JointProbability, IndependentOfNodeIterationOrder) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    auto net = crcbn::testing::random_network(rng, 6, 3);
    Assignment a(net.size());
    for (VarId v = 0; v < net.size(); ++v) a.set(v, static_cast<State>(rng.index(net.schema().cardinality(v))));
    double reversed = 1.0;
    for (VarId v = net.size(); v-- > 0;) {
      const auto& c = net.cpt(v);
      reversed *= c.prob(c.config_index(a.states()), a[v]);
    }
    EXPECT_NEAR(joint_probability(net, a), reversed, 1e-15 + 1e-12 * reversed);
  }
}

TEST(ReferenceNetwork, ParentSetsFollowTheFactorization) {
  auto [schema, dag] = reference_crc_network();
  auto names = [&](VarId v) {
    std::vector<std::string> out;
    for (VarId p : dag.parents(v)) out.push_back(schema[p].name);
    std::sort(out.begin(), out.end());
    return out;
  };
  std::vector<std::string> crc{"v_age", "v_alc", "v_diab", "v_hypchol", "v_hypten", "v_sex", "v_smok"};
  EXPECT_EQ(names(schema.index_of("v_CRC")), crc);
  EXPECT_TRUE(names(schema.index_of("v_sex")).empty());
  EXPECT_TRUE(names(schema.index_of("v_age")).empty());
  std::vector<std::string> anx{"v_SD", "v_dep", "v_sex", "v_smok"};
  EXPECT_EQ(names(schema.index_of("v_anx")), anx);
  std::vector<std::string> hypten{"v_BMI", "v_PA", "v_age", "v_alc", "v_diab", "v_smok"};
  EXPECT_EQ(names(schema.index_of("v_hypten")), hypten);
  EXPECT_EQ(dag.arcs.size(), 2u + 2 + 4 + 3 + 3 + 3 + 4 + 4 + 6 + 4 + 6 + 7);
}

TEST(ReferenceNetwork, FourteenVariablesAndStateSpace) {
  auto [schema, dag] = reference_crc_network();
  EXPECT_EQ(schema.size(), 14u);
  EXPECT_EQ(schema.joint_state_count(), 221184u);
  EXPECT_EQ(schema[schema.index_of("v_age")].states,
            (std::vector<std::string>{"(24,34]", "(34,44]", "(44,54]", "(54,64]"}));
  EXPECT_TRUE(validate_dag(dag, schema).ok());
}

TEST(ReferenceNetwork, AcceptsStateAliases) {
  auto [schema, dag] = reference_crc_network();
  auto e = parse_evidence(schema, {"v_sex=woman", "v_BMI=overw."});
  EXPECT_EQ(e[schema.index_of("v_sex")], 0);
  EXPECT_EQ(e[schema.index_of("v_BMI")], 2);
}

TEST(Schema, RejectsDuplicatesAndSingletons) {
  EXPECT_THROW(NetworkSchema({{"A", {"x", "y"}}, {"A", {"x", "y"}}}), Error);
  EXPECT_THROW(NetworkSchema(std::vector<Variable>{Variable{"A", {"x"}}}), Error);
  EXPECT_THROW(NetworkSchema({{"A", {"x", "x"}}}), Error);
}

TEST(Cpt, RejectsRowsThatDoNotSumToOne) {
  EXPECT_THROW(Cpt(0, 2, {}, {}, {0.5, 0.6}), Error);
  EXPECT_THROW(Cpt(0, 2, {}, {}, {-0.1, 1.1}), Error);
  EXPECT_NO_THROW(Cpt(0, 2, {}, {}, {0.25, 0.75}));
}

TEST(BayesianNetwork, CptParentsMustMatchDag) {
  auto schema = binary_schema({"A", "B"});
  auto dag = Dag::from_names(schema, {{"A", "B"}});
  std::vector<Cpt> cpts{Cpt(0, 2, {}, {}, {0.5, 0.5}), Cpt(1, 2, {}, {}, {0.5, 0.5})};
  EXPECT_THROW(BayesianNetwork(schema, dag, cpts), Error);
}

TEST(TopologicalOrder, ParentsComeFirst) {
  auto [schema, dag] = reference_crc_network();
  auto order = topological_order(dag);
  std::vector<std::size_t> pos(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  for (const auto& a : dag.arcs) EXPECT_LT(pos[a.parent], pos[a.child]);
}

TEST(Constraints, DetectConflicts) {
  ArcConstraints c{{{0, 1}}, {{0, 1}}};
  EXPECT_FALSE(validate_constraints(c, 2).empty());
  ArcConstraints cyc{{{0, 1}, {1, 0}}, {}};
  EXPECT_FALSE(validate_constraints(cyc, 2).empty());
  ArcConstraints fine{{{0, 1}}, {{1, 0}}};
  EXPECT_TRUE(validate_constraints(fine, 2).empty());
}
