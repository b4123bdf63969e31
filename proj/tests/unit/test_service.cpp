#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <thread>

#include "crcbn/cli.hpp"
#include "crcbn/service.hpp"
#include "schema_check.hpp"

using namespace crcbn;
using nlohmann::json;
namespace t = crcbn::testing;

namespace {

/// Reference-structure model fitted to synthetic data; built once.
const std::string& model_document() {
  static const std::string doc = [] {
    auto gen = demo_generator();
    auto data = forward_sample(gen, 20000, 17, 2012);
    data.set_id("synthetic-2012");
    Structure s{gen.schema(), gen.dag()};
    auto post = fit(make_prior(s, build_prior(s.schema, empirical_marginals(data), auto_alpha(data.rows()))), data);
    return save_model(post, {{"note", "test model"}});
  }();
  return doc;
}

std::shared_ptr<const SessionModel> model() {
  static const auto m = SessionModel::from_document(model_document());
  return m;
}

json body(const Response& r) { return json::parse(r.body); }

}  // namespace

TEST(Service, ModelMetadata) {
  Service svc(model());
  auto r = svc.handle("GET", "/model", "");
  ASSERT_EQ(r.status, 200);
  auto j = body(r);
  EXPECT_EQ(j["schema"].size(), 14u);
  EXPECT_EQ(j["model_id"], json::parse(model_document())["checksum"]);
  EXPECT_DOUBLE_EQ(j["alpha"].get<double>(), 2.0);
  EXPECT_EQ(j["training_rows"], 20000);
  EXPECT_EQ(j["metadata"]["note"], "test model");
  EXPECT_EQ(svc.handle("GET", "/model", "").body, r.body);
  EXPECT_TRUE(t::check_against("model-metadata", j).empty());
}

TEST(Service, NoModelAnswers503) {
  Service svc;
  EXPECT_EQ(svc.handle("GET", "/model", "").status, 503);
  EXPECT_EQ(svc.handle("POST", "/query", R"({"target": "v_CRC"})").status, 503);
  auto h = svc.handle("GET", "/healthz", "");
  EXPECT_EQ(h.status, 200);
  EXPECT_EQ(body(h)["model_loaded"], false);
}

TEST(Service, RoutingErrors) {
  Service svc(model());
  EXPECT_EQ(svc.handle("GET", "/nope", "").status, 404);
  EXPECT_EQ(svc.handle("GET", "/query", "").status, 405);
  EXPECT_EQ(svc.handle("POST", "/model", "").status, 405);
  EXPECT_EQ(svc.handle("OPTIONS", "/riskmap", "").status, 204);
  auto r = svc.handle("POST", "/query", "{not json");
  EXPECT_EQ(r.status, 400);
  EXPECT_TRUE(t::check_against("error", body(r)).empty());
}

TEST(Service, QueryMatchesLibrary) {
  Service svc(model());
  auto r = svc.handle("POST", "/query", R"({"target": "v_CRC"})");
  ASSERT_EQ(r.status, 200);
  auto j = body(r);
  const auto q = query(model()->mean, Evidence(14), 13);
  EXPECT_EQ(j["distribution"].get<std::vector<double>>(), q.distribution);
  EXPECT_EQ(j["evidence_probability"].get<double>(), q.evidence_probability);
  EXPECT_NEAR(q.evidence_probability, 1.0, 1e-12);
  EXPECT_TRUE(t::check_against("query-response", j).empty());

  auto e = body(svc.handle("POST", "/query", R"({"target": "v_CRC", "evidence": {"v_sex": "woman", "v_diab": "yes"}})"));
  const auto q2 = query(model()->mean, parse_evidence(model()->mean.schema(), {"v_sex=female", "v_diab=yes"}), 13);
  EXPECT_EQ(e["distribution"].get<std::vector<double>>(), q2.distribution);
  EXPECT_EQ(e["evidence_probability"].get<double>(), q2.evidence_probability);
}

TEST(Service, QueryValidation) {
  Service svc(model());
  EXPECT_EQ(svc.handle("POST", "/query", R"({"target": "v_CRC", "evidence": {"v_CRC": "yes"}})").status, 400);
  EXPECT_EQ(svc.handle("POST", "/query", R"({"target": "v_nope"})").status, 400);
  EXPECT_EQ(svc.handle("POST", "/query", R"({"target": "v_CRC", "evidence": {"v_sex": "maybe"}})").status, 400);
  EXPECT_EQ(svc.handle("POST", "/query", R"({"evidence": {}})").status, 400);
  EXPECT_EQ(svc.handle("POST", "/query", R"([1, 2])").status, 400);
  EXPECT_EQ(svc.handle("POST", "/query", R"({"target": 3})").status, 400);
}

TEST(Service, QueryEqualsCliOutput) {
  const auto dir = std::filesystem::temp_directory_path() / ("crcbn-svc-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const auto model_path = (dir / "model.json").string();
  write_file(model_path, model_document());
  std::vector<std::string> args{"crcbn",    "query",           "--model",  model_path, "--target", "v_CRC",
                                "--evidence", "v_age=(54,64]", "--evidence", "v_alc=high", "--out", (dir / "q").string()};
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  ASSERT_EQ(cli::run(static_cast<int>(argv.size()), argv.data(), out, err), 0) << err.str();
  Service svc(model());
  auto r = svc.handle("POST", "/query", R"({"target": "v_CRC", "evidence": ["v_age=(54,64]", "v_alc=high"]})");
  EXPECT_EQ(r.body, read_file((dir / "q/query.json").string()));
  std::filesystem::remove_all(dir);
}

TEST(Service, RiskmapIsByteIdenticalToAnalytics) {
  Service svc(model());
  const std::string req = R"({"target": "v_CRC=yes", "condition": {"v_sex": "woman"}, "axes": ["v_SD"],
                              "n_param_samples": 300, "seed": 99})";
  auto r = svc.handle("POST", "/riskmap", req);
  ASSERT_EQ(r.status, 200) << r.body;
  auto j = body(r);
  EXPECT_EQ(j["cells"].size(), 3u);
  EXPECT_EQ(svc.handle("POST", "/riskmap", req).body, r.body);

  const auto& s = model()->posterior.schema();
  RiskMapSpec spec;
  spec.target = {13, 0};
  spec.condition = parse_evidence(s, {"v_sex=woman"});
  spec.axes = {s.index_of("v_SD")};
  spec.n_param_samples = 300;
  spec.seed = 99;
  EXPECT_EQ(r.body, to_json(risk_map(model()->posterior, spec)).dump());
  EXPECT_TRUE(t::check_against("riskmap", j).empty());
}

TEST(Service, RiskmapSeedIsDefaultedAndEchoed) {
  Service svc(model());
  auto j = body(svc.handle("POST", "/riskmap", R"({"target": {"variable": "v_CRC", "state": "yes"}, "axes": ["v_sex"],
                                                   "n_param_samples": 20})"));
  EXPECT_EQ(j["seed"], api::kDefaultSeed);
  EXPECT_EQ(j["cells"].size(), 2u);
}

TEST(Service, RiskmapValidation) {
  Service svc(model());
  EXPECT_EQ(svc.handle("POST", "/riskmap", R"({"target": "v_CRC=yes", "axes": []})").status, 400);
  EXPECT_EQ(svc.handle("POST", "/riskmap", R"({"target": "v_CRC=yes", "axes": ["v_CRC"]})").status, 400);
  EXPECT_EQ(svc.handle("POST", "/riskmap", R"({"target": "v_CRC=yes", "axes": ["v_SD"], "level": 1.5})").status, 400);
  EXPECT_EQ(svc.handle("POST", "/riskmap", R"({"target": "v_CRC", "axes": ["v_SD"]})").status, 400);
  EXPECT_EQ(svc.handle("POST", "/riskmap", R"({"target": "v_CRC=yes", "axes": ["v_SD"], "n_param_samples": 0})").status,
            400);
}

TEST(Service, InfluenceCountContract) {
  Service svc(model());
  auto r = svc.handle("POST", "/influence",
                      R"({"target": "v_CRC=yes", "iterations": 5, "seed": 3, "positives": {"synthetic": 10}})");
  ASSERT_EQ(r.status, 200) << r.body;
  auto j = body(r);
  for (const auto& v : j["variables"]) EXPECT_EQ(v["count"], 50);
  EXPECT_TRUE(t::check_against("influence", j).empty());

  // Synthetic positives are all in the target state and reproducible.
  api::InfluenceRequest req;
  req.target = {13, 0};
  req.synthetic = 10;
  req.seed = 3;
  req.iterations = 5;
  const auto rows = api::influence_positives(model()->mean, req);
  for (std::size_t i = 0; i < rows.rows(); ++i) EXPECT_EQ(rows.at(i, 13), 0);
  EXPECT_EQ(r.body, to_json(influential_findings(model()->mean, rows, req.target, 5, 3), rows.schema()).dump());
}

TEST(Service, InfluenceWithExplicitRows) {
  Service svc(model());
  json row = {{"v_sex", "male"},   {"v_age", "(54,64]"}, {"v_SES", "2"},   {"v_BMI", "obese"},
              {"v_PA", "insufficiently active"}, {"v_SD", "short"}, {"v_alc", "high"}, {"v_smok", "smoker"},
              {"v_anx", "no"}, {"v_dep", "no"}, {"v_hypten", "yes"}, {"v_hypchol", "yes"}, {"v_diab", "yes"}};
  json req = {{"target", "v_CRC=yes"}, {"iterations", 4}, {"positives", {row, row}}};
  auto r = svc.handle("POST", "/influence", req.dump());
  ASSERT_EQ(r.status, 200) << r.body;
  EXPECT_EQ(body(r)["rows"], 2);
  row.erase("v_SD");
  req["positives"] = {row};
  EXPECT_EQ(svc.handle("POST", "/influence", req.dump()).status, 400);
  EXPECT_EQ(svc.handle("POST", "/influence", R"({"target": "v_CRC=yes", "positives": []})").status, 400);
}

TEST(Service, LongInfluenceRunsAsJob) {
  ServiceOptions opt;
  opt.influence_budget = 10;
  Service svc(model(), opt);
  const std::string req = R"({"target": "v_CRC=yes", "iterations": 4, "seed": 8, "positives": {"synthetic": 6}})";
  auto r = svc.handle("POST", "/influence", req);
  ASSERT_EQ(r.status, 202);
  auto j = body(r);
  EXPECT_TRUE(t::check_against("job", j).empty());
  Response done;
  for (int i = 0; i < 600; ++i) {
    done = svc.handle("GET", j["poll"].get<std::string>(), "");
    if (done.status != 202) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  ASSERT_EQ(done.status, 200);
  Service inline_svc(model());
  EXPECT_EQ(done.body, inline_svc.handle("POST", "/influence", req).body);
  EXPECT_EQ(svc.handle("GET", "/influence/job-999", "").status, 404);
}

TEST(Service, ConcurrentRequestsAgree) {
  Service svc(model());
  const std::string q = R"({"target": "v_CRC", "evidence": {"v_age": "(44,54]"}})";
  const std::string m = R"({"target": "v_CRC=yes", "axes": ["v_age"], "n_param_samples": 50, "seed": 1})";
  const auto q0 = svc.handle("POST", "/query", q).body, m0 = svc.handle("POST", "/riskmap", m).body;
  std::vector<std::thread> pool;
  std::atomic<int> mismatches{0};
  for (int i = 0; i < 8; ++i)
    pool.emplace_back([&] {
      for (int k = 0; k < 5; ++k) {
        mismatches += svc.handle("POST", "/query", q).body != q0;
        mismatches += svc.handle("POST", "/riskmap", m).body != m0;
      }
    });
  for (auto& th : pool) th.join();
  EXPECT_EQ(mismatches.load(), 0);
}

TEST(Service, HttpRoundTripWithCorsAndStaticFiles) {
  const auto dir = std::filesystem::temp_directory_path() / ("crcbn-static-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  write_file((dir / "index.html").string(), "<html>ui</html>");

  ServiceOptions opt;
  opt.cors_origin = "http://localhost:5173";
  Service svc(model(), opt);
  httplib::Server server;
  svc.attach(server, dir.string());
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto h = client.Get("/healthz");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  EXPECT_EQ(h->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
  auto q = client.Post("/query", R"({"target": "v_CRC"})", "application/json");
  ASSERT_TRUE(q);
  EXPECT_EQ(q->body, svc.handle("POST", "/query", R"({"target": "v_CRC"})").body);
  auto bad = client.Post("/query", R"({"target": "v_CRC", "evidence": {"v_CRC": "no"}})", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  auto pre = client.Options("/riskmap");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_EQ(pre->get_header_value("Access-Control-Allow-Methods"), "GET, POST, OPTIONS");
  auto page = client.Get("/index.html");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->body, "<html>ui</html>");

  server.stop();
  th.join();
  std::filesystem::remove_all(dir);
}
