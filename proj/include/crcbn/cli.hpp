#pragma once

// Batch commands. Each command writes its artifacts plus run.json under --out.
// Exit codes: 0 ok, 1 internal error, 2 usage or validation error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crcbn/api.hpp"
#include "crcbn/fixtures.hpp"
#include "crcbn/search.hpp"
#include "crcbn/service.hpp"

namespace crcbn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

/// Collects the run manifest while a command executes.
class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ts;
    ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    started_at_ = ts.str();
  }

  json config = json::object();
  json seeds = json::object();
  json results = json::object();

  void input(const std::string& path, const json& extra = json::object()) {
    json entry = {{"path", path}, {"checksum", "fnv1a64:" + hex64(fnv1a64(read_file(path)))}};
    entry.update(extra);
    inputs_.push_back(entry);
  }
  void output(const std::string& path) { outputs_.push_back(path); }

  json finish(const std::string& status, const std::string& message = {}) const {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json j = {{"format", "crcbn.run"}, {"version", 1},          {"tool_version", kVersion},
              {"command", command_},   {"config", config},     {"seeds", seeds},
              {"inputs", inputs_},     {"outputs", outputs_},  {"results", results},
              {"status", status},      {"started_at", started_at_}, {"wall_clock_seconds", secs}};
    if (!message.empty()) j["message"] = message;
    return j;
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  std::string started_at_;
  json inputs_ = json::array();
  std::vector<std::string> outputs_;
};

namespace detail {

inline NetworkSchema load_schema(const std::string& path, Manifest& m) {
  if (path.empty()) return reference_crc_network().schema;
  m.input(path);
  const auto j = parse_json_file(path);
  try {
    return schema_from_json(j.is_object() ? j.at("variables") : j);
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, "'" + path + "': malformed schema: " + e.what());
  }
}

inline std::string schema_document(const NetworkSchema& s) { return json{{"variables", schema_to_json(s)}}.dump(1); }

struct LoadedModelFile {
  LoadedModel model;
  std::string id;
};

inline LoadedModelFile load_model_file(const std::string& path, Manifest& m) {
  const auto text = read_file(path);
  auto loaded = load_model_document(text);
  const auto id = api::model_id(text);
  m.input(path, {{"model_id", id}});
  return {std::move(loaded), id};
}

/// Loads a CSV, records its checksum and ingest summary, and drops rows with
/// missing values (the fitting and scoring routines need complete rows).
inline Dataset load_complete(const std::string& path, const NetworkSchema& s, Manifest& m, json& summary) {
  m.input(path);
  auto loaded = load_dataset_file(path, s);
  loaded.data.set_id(fs::path(path).filename().string());
  auto [complete, dropped] = complete_cases(loaded.data);
  json diags = json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(loaded.report.diagnostics.size(), 20); ++i) {
    const auto& d = loaded.report.diagnostics[i];
    diags.push_back({{"line", d.line}, {"column", d.column}, {"message", d.message}});
  }
  summary.push_back({{"path", path},
                     {"total_rows", loaded.report.total_rows},
                     {"rejected_rows", loaded.report.rejected_rows},
                     {"dropped_incomplete", dropped},
                     {"used_rows", complete.rows()},
                     {"diagnostics", diags}});
  return complete;
}

inline std::string write_artifact(const fs::path& dir, const std::string& name, const std::string& text, Manifest& m) {
  const auto path = (dir / name).string();
  write_file(path, text);
  m.output(path);
  return path;
}

inline json move_log(const NetworkSchema& s, const SearchResult& r) {
  json moves = json::array();
  for (const auto& mv : r.moves)
    moves.push_back({{"kind", to_string(mv.kind)},
                     {"parent", s[mv.parent].name},
                     {"child", s[mv.child].name},
                     {"delta", mv.delta},
                     {"score_after", mv.score_after}});
  return {{"initial_score", r.initial_score}, {"score", r.score}, {"iterations", r.iterations}, {"moves", moves}};
}

inline double parse_number(const std::string& flag, const std::string& name) {
  try {
    std::size_t used = 0;
    const double x = std::stod(flag, &used);
    if (used == flag.size() && std::isfinite(x)) return x;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::contract, name + " expects a number, got '" + flag + "'");
}

inline double parse_alpha(const std::string& flag, std::size_t rows, double divisor) {
  if (flag == "auto") {
    require(divisor > 0.0, "--alpha-divisor must be positive");
    require(rows > 0, "--alpha auto needs at least one complete row");
    return static_cast<double>(rows) / divisor;
  }
  const double a = parse_number(flag, "--alpha");
  require(a > 0.0, "--alpha must be positive, got " + flag);
  return a;
}

}  // namespace detail

/// Parses and runs one command line. `out` receives the primary result, `err`
/// diagnostics.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"crcbn: Bayesian-network risk modeling toolkit"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "TOML-style file supplying any flag (command line wins)");
  app.require_subcommand(1);

  std::string out_dir, schema_path;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::function<void(Manifest&)> action;
  std::string command;

  auto common = [&](CLI::App* sub, bool seeded) {
    sub->add_option("--out", out_dir, "Output directory (created if missing)")->required();
    if (seeded) sub->add_option("--seed", seed, "Random seed")->required();
  };

  // ---------------------------------------------------------- learn-structure
  std::vector<std::string> ls_data;
  std::string ls_constraints, ls_initial, ls_score = "bds", ls_tie = "lexicographic";
  double ls_iss = 1.0;
  std::size_t ls_max_iter = 1000;
  std::uint64_t ls_seed = 0;
  auto* ls = app.add_subcommand("learn-structure", "Hill-climbing structure search");
  ls->add_option("--data", ls_data, "CSV files (pooled)")->required();
  ls->add_option("--schema", schema_path, "Schema JSON (default: the 14-variable CRC schema)");
  ls->add_option("--constraints", ls_constraints, "Required/forbidden arcs JSON");
  ls->add_option("--initial", ls_initial, "Starting DAG JSON (default: required arcs only)");
  ls->add_option("--score", ls_score, "bds or bdeu")->check(CLI::IsMember({"bds", "bdeu"}));
  ls->add_option("--iss", ls_iss, "Imposed equivalent sample size");
  ls->add_option("--max-iterations", ls_max_iter, "Move limit");
  ls->add_option("--tie-break", ls_tie, "lexicographic or random")->check(CLI::IsMember({"lexicographic", "random"}));
  ls->add_option("--seed", ls_seed, "Seed for random tie-breaking");
  ls->add_option("--out", out_dir, "Output directory")->required();
  ls->callback([&] {
    command = "learn-structure";
    action = [&](Manifest& m) {
      m.config = {{"data", ls_data},        {"schema", schema_path}, {"constraints", ls_constraints},
                  {"initial", ls_initial},  {"score", ls_score},     {"iss", ls_iss},
                  {"max_iterations", ls_max_iter}, {"tie_break", ls_tie}};
      const auto schema = detail::load_schema(schema_path, m);
      json summary = json::array();
      std::vector<Dataset> parts;
      for (const auto& p : ls_data) parts.push_back(detail::load_complete(p, schema, m, summary));
      const auto data = concatenate(parts, "pooled");
      ArcConstraints c;
      if (!ls_constraints.empty()) {
        m.input(ls_constraints);
        c = load_constraints(parse_json_file(ls_constraints), schema);
      }
      Dag initial = Dag::empty(schema);
      if (!ls_initial.empty()) {
        m.input(ls_initial);
        initial = load_dag(parse_json_file(ls_initial), schema);
      } else {
        initial.arcs = c.required;
      }
      if (ls_tie == "random" && ls->count("--seed") == 0) fail(ErrorKind::contract, "--tie-break random needs --seed");
      ScoreConfig sc{ls_iss, ls_score == "bds" ? ScoreKind::bds : ScoreKind::bdeu};
      SearchConfig cfg{ls_max_iter, ls_tie == "random" ? TieBreak::random : TieBreak::lexicographic, ls_seed};
      if (ls_tie == "random") m.seeds["tie_break"] = ls_seed;
      const auto r = hill_climb(data, c, initial, sc, cfg);
      detail::write_artifact(out_dir, "dag.json", save_dag(schema, r.dag), m);
      detail::write_artifact(out_dir, "search.json", detail::move_log(schema, r).dump(1), m);
      m.results = {{"datasets", summary}, {"rows", data.rows()}, {"score", r.score},
                   {"arcs", r.dag.arcs.size()}, {"moves", r.moves.size()}};
      out << save_dag(schema, r.dag) << "\n";
    };
  });

  // ---------------------------------------------------------------------- fit
  std::vector<std::string> fit_data;
  std::string fit_structure, fit_alpha = "auto", fit_marginals = "data";
  double fit_divisor = 10000.0;
  auto* ft = app.add_subcommand("fit", "Sequential Dirichlet posterior, one step per data file");
  ft->add_option("--data", fit_data, "CSV files, in year order")->required();
  ft->add_option("--schema", schema_path, "Schema JSON (default: the 14-variable CRC schema)");
  ft->add_option("--structure", fit_structure, "DAG JSON (default: the reference CRC network)");
  ft->add_option("--alpha", fit_alpha, "Prior equivalent sample size, or 'auto' (rows / divisor)");
  ft->add_option("--alpha-divisor", fit_divisor, "Divisor used by --alpha auto");
  ft->add_option("--marginals", fit_marginals,
                 "Prior means: 'data' (first file), 'table2' (published marginals) or a JSON file");
  ft->add_option("--out", out_dir, "Output directory")->required();
  ft->callback([&] {
    command = "fit";
    action = [&](Manifest& m) {
      m.config = {{"data", fit_data},          {"schema", schema_path},          {"structure", fit_structure},
                  {"alpha", fit_alpha},        {"alpha_divisor", fit_divisor},   {"marginals", fit_marginals}};
      const auto schema = detail::load_schema(schema_path, m);
      Dag dag = reference_crc_network().dag;
      if (!fit_structure.empty()) {
        m.input(fit_structure);
        dag = load_dag(parse_json_file(fit_structure), schema);
      } else if (!(schema == reference_crc_network().schema)) {
        fail(ErrorKind::contract, "--structure is required with a custom schema");
      }
      json summary = json::array();
      std::vector<Dataset> years;
      std::size_t rows = 0;
      for (const auto& p : fit_data) {
        years.push_back(detail::load_complete(p, schema, m, summary));
        rows += years.back().rows();
      }
      const double alpha = detail::parse_alpha(fit_alpha, rows, fit_divisor);
      std::vector<std::vector<double>> marginals;
      if (fit_marginals == "data") {
        require(!years.front().empty(), "the first data file has no complete rows");
        marginals = empirical_marginals(years.front());
      } else if (fit_marginals == "table2") {
        require(schema == reference_crc_network().schema, "--marginals table2 needs the CRC schema");
        marginals = paper_fixtures().table2.values;
      } else {
        m.input(fit_marginals);
        const auto j = parse_json_file(fit_marginals);
        marginals.resize(schema.size());
        for (VarId v = 0; v < schema.size(); ++v) {
          if (!j.contains(schema[v].name)) fail(ErrorKind::contract, "marginals file lacks " + schema[v].name);
          marginals[v] = j.at(schema[v].name).get<std::vector<double>>();
        }
      }
      const auto posts = sequential_fit(build_prior(schema, marginals, alpha), {schema, dag}, years);
      const json meta = {{"alpha_rule", fit_alpha == "auto" ? "rows/" + std::to_string(fit_divisor) : "fixed"},
                         {"rows", rows}};
      json steps = json::array();
      for (std::size_t i = 1; i < posts.size(); ++i) {
        const auto stem = fs::path(fit_data[i - 1]).stem().string();
        const auto name = "model-" + std::to_string(i) + "-" + stem + ".json";
        detail::write_artifact(out_dir, name, save_model(posts[i], meta), m);
        steps.push_back({{"step", i}, {"data", fit_data[i - 1]}, {"model", name}});
      }
      detail::write_artifact(out_dir, "model.json", save_model(posts.back(), meta), m);
      m.results = {{"alpha", alpha}, {"rows", rows}, {"datasets", summary}, {"steps", steps}};
      out << "alpha " << alpha << ", " << rows << " rows, " << posts.size() - 1 << " step(s)\n";
    };
  });

  // -------------------------------------------------------------------- query
  std::string model_path, target;
  std::vector<std::string> evidence;
  auto* qy = app.add_subcommand("query", "Posterior-mean conditional distribution of one variable");
  qy->add_option("--model", model_path, "Model JSON")->required();
  qy->add_option("--target", target, "Target variable")->required();
  qy->add_option("--evidence", evidence, "name=state findings");
  qy->add_option("--out", out_dir, "Output directory")->required();
  qy->callback([&] {
    command = "query";
    action = [&](Manifest& m) {
      const auto mf = detail::load_model_file(model_path, m);
      const json request = {{"target", target}, {"evidence", evidence}};
      m.config = {{"model", model_path}, {"request", request}};
      const auto body = api::run_query(posterior_mean_network(mf.model.posterior), request).dump();
      detail::write_artifact(out_dir, "query.json", body, m);
      out << body << "\n";
    };
  });

  // ------------------------------------------------------------------ riskmap
  std::vector<std::string> cond, axes;
  std::size_t samples = 1000;
  double level = 0.9;
  std::string format = "svg";
  auto* rm = app.add_subcommand("riskmap", "Interval-annotated risk map");
  rm->add_option("--model", model_path, "Model JSON")->required();
  rm->add_option("--target", target, "Target as name=state")->required();
  rm->add_option("--cond", cond, "Conditioning findings name=state");
  rm->add_option("--axes", axes, "One or two axis variables")->required();
  rm->add_option("--samples", samples, "Parameter draws");
  rm->add_option("--level", level, "Credible level");
  rm->add_option("--format", format, "svg, text or json")->check(CLI::IsMember({"svg", "text", "json"}));
  rm->add_option("--threads", threads, "Worker threads (0 = hardware)");
  common(rm, true);
  rm->callback([&] {
    command = "riskmap";
    action = [&](Manifest& m) {
      const auto mf = detail::load_model_file(model_path, m);
      const json request = {{"target", target}, {"condition", cond},     {"axes", axes},
                            {"n_param_samples", samples}, {"level", level}, {"seed", seed}};
      m.config = {{"model", model_path}, {"request", request}, {"format", format}, {"threads", threads}};
      m.seeds["parameters"] = seed;
      const auto j = api::run_riskmap(mf.model.posterior, request, threads);
      detail::write_artifact(out_dir, "riskmap.json", j.dump(1), m);
      const auto map = risk_map_from_json(j, mf.model.posterior.schema());
      if (format == "svg") detail::write_artifact(out_dir, "riskmap.svg", render_risk_map(map, MapFormat::svg), m);
      if (format == "text") detail::write_artifact(out_dir, "riskmap.txt", render_risk_map(map, MapFormat::text), m);
      m.results = {{"cells", map.cells.size()}, {"baseline", map.baseline}, {"skipped_draws", map.skipped_draws}};
      out << render_risk_map(map, MapFormat::text);
    };
  });

  // ---------------------------------------------------------------- influence
  std::string data_path;
  std::size_t iterations = 50, synthetic = 0;
  auto* in = app.add_subcommand("influence", "Randomized-evidence influence ranking");
  in->add_option("--model", model_path, "Model JSON")->required();
  in->add_option("--target", target, "Target as name=state")->required();
  auto* in_data = in->add_option("--data", data_path, "CSV; rows in the target state are the positives");
  in->add_option("--synthetic", synthetic, "Draw this many positives from the model instead")->excludes(in_data);
  in->add_option("--iterations", iterations, "Random orders per positive");
  in->add_option("--threads", threads, "Worker threads (0 = hardware)");
  common(in, true);
  in->callback([&] {
    command = "influence";
    action = [&](Manifest& m) {
      const auto mf = detail::load_model_file(model_path, m);
      const auto& schema = mf.model.posterior.schema();
      const auto mean = posterior_mean_network(mf.model.posterior);
      api::InfluenceRequest r;
      r.target = api::parse_target_state(schema, target);
      r.iterations = iterations;
      r.seed = seed;
      r.synthetic = synthetic;
      json source = {{"synthetic", synthetic}};
      if (synthetic == 0) {
        require(!data_path.empty(), "give --data or --synthetic");
        m.input(data_path);
        const auto all = load_dataset_file(data_path, schema).data;
        std::vector<VarId> others;
        for (VarId v = 0; v < schema.size(); ++v)
          if (v != r.target.variable) others.push_back(v);
        r.rows = all.filter([&](std::size_t i) {
          if (all.at(i, r.target.variable) != r.target.state) return false;
          for (VarId v : others)
            if (all.at(i, v) == kUnset) return false;
          return true;
        });
        source = {{"data", data_path}, {"rows", all.rows()}, {"positives", r.rows.rows()}};
        require(!r.rows.empty(), "no complete rows in the target state");
      }
      m.config = {{"model", model_path}, {"target", target}, {"iterations", iterations}, {"positives", source},
                  {"threads", threads}};
      m.seeds["orders"] = seed;
      const auto report =
          influential_findings(mean, api::influence_positives(mean, r), r.target, r.iterations, r.seed, threads);
      detail::write_artifact(out_dir, "influence.json", to_json(report, schema).dump(1), m);
      const auto text = render_influence_text(report, schema);
      detail::write_artifact(out_dir, "influence.txt", text, m);
      m.results = {{"positives", report.rows},
                   {"skipped_unit_probability", report.skipped_unit_probability},
                   {"skipped_zero_probability", report.skipped_zero_probability}};
      out << text;
    };
  });

  // ----------------------------------------------------------------- validate
  std::vector<std::string> val_data;
  std::string threshold = "gmean", threshold_data;
  std::size_t bins = 10;
  auto* va = app.add_subcommand("validate", "Classifier metrics for one target state");
  va->add_option("--model", model_path, "Model JSON")->required();
  va->add_option("--data", val_data, "Validation CSV files")->required();
  va->add_option("--target", target, "Positive class as name=state")->required();
  va->add_option("--threshold", threshold, "'gmean' or a number in [0, 1]");
  va->add_option("--threshold-data", threshold_data, "CSV on which the G-mean threshold is optimized");
  va->add_option("--bins", bins, "Calibration bins");
  va->add_option("--out", out_dir, "Output directory")->required();
  va->callback([&] {
    command = "validate";
    action = [&](Manifest& m) {
      const auto mf = detail::load_model_file(model_path, m);
      const auto& schema = mf.model.posterior.schema();
      const auto net = posterior_mean_network(mf.model.posterior);
      const auto t = api::parse_target_state(schema, target);
      json summary = json::array();
      std::vector<Dataset> parts;
      for (const auto& p : val_data) parts.push_back(detail::load_complete(p, schema, m, summary));
      const auto p = score_dataset(net, concatenate(parts, "validation"), t);
      require(bins >= 1, "--bins must be at least 1");
      EvaluationReport rep;
      if (threshold == "gmean" && threshold_data.empty()) {
        rep = evaluate(p, bins);
      } else if (threshold == "gmean") {
        const auto train = score_dataset(net, detail::load_complete(threshold_data, schema, m, summary), t);
        rep = evaluate_at(p, select_threshold_gmean(train).threshold, "gmean-training", bins);
      } else {
        const double x = detail::parse_number(threshold, "--threshold");
        require(x >= 0.0 && x <= 1.0, "--threshold must be 'gmean' or in [0, 1]");
        rep = evaluate_at(p, x, "fixed", bins);
      }
      m.config = {{"model", model_path}, {"data", val_data},  {"target", target},
                  {"threshold", threshold}, {"threshold_data", threshold_data}, {"bins", bins}};
      auto j = to_json(rep);
      j["target"] = target;
      detail::write_artifact(out_dir, "metrics.json", j.dump(1), m);
      detail::write_artifact(out_dir, "metrics.txt", render_evaluation_text(rep), m);
      m.results = {{"datasets", summary}, {"auc", rep.auc}, {"g_mean", rep.choice.g_mean}};
      out << render_evaluation_text(rep);
    };
  });

  // ----------------------------------------------------------------- generate
  std::size_t n = 0;
  std::string generator = "demo";
  std::vector<int> gen_years{2012};
  auto* gn = app.add_subcommand("generate", "Synthetic cohort by forward sampling");
  gn->add_option("--n", n, "Rows per year")->required()->check(CLI::PositiveNumber);
  auto* gn_model = gn->add_option("--model", model_path, "Sample from this model's posterior mean");
  gn->add_option("--generator", generator, "Built-in generator: demo, chain or independent")
      ->check(CLI::IsMember({"demo", "chain", "independent"}))
      ->excludes(gn_model);
  gn->add_option("--years", gen_years, "One file per year");
  common(gn, true);
  gn->callback([&] {
    command = "generate";
    action = [&](Manifest& m) {
      BayesianNetwork net;
      if (!model_path.empty()) {
        net = posterior_mean_network(detail::load_model_file(model_path, m).model.posterior);
      } else if (generator == "demo") {
        net = demo_generator();
      } else {
        net = generator == "chain" ? chain_generator() : independent_generator();
      }
      m.config = {{"n", n}, {"model", model_path}, {"generator", model_path.empty() ? generator : "model"},
                  {"years", gen_years}};
      m.seeds["sampling"] = seed;
      const auto cohort = generate_cohort(net, gen_years, n, seed);
      for (const auto& d : cohort) {
        std::ostringstream csv;
        save_dataset(csv, d);
        const auto name = cohort.size() == 1 ? std::string("data.csv") : "data-" + std::to_string(d.year(0)) + ".csv";
        detail::write_artifact(out_dir, name, csv.str(), m);
      }
      detail::write_artifact(out_dir, "schema.json", detail::schema_document(net.schema()), m);
      m.results = {{"rows", n * gen_years.size()}};
      out << "wrote " << n * gen_years.size() << " rows to " << out_dir << "\n";
    };
  });

  // -------------------------------------------------------------------- serve
  std::string host = "127.0.0.1", static_dir;
  int port = 8080;
  ServiceOptions sopt;
  auto* sv = app.add_subcommand("serve", "HTTP service over one model");
  sv->add_option("--model", model_path, "Model JSON (without it, model routes answer 503)");
  sv->add_option("--host", host, "Bind address");
  sv->add_option("--port", port, "Port");
  sv->add_option("--static", static_dir, "Directory served at /");
  sv->add_option("--influence-budget", sopt.influence_budget, "rows x iterations above which influence runs as a job");
  sv->add_option("--cors-origin", sopt.cors_origin, "Access-Control-Allow-Origin value");
  sv->add_option("--threads", sopt.threads, "Worker threads per request (0 = hardware)");
  sv->callback([&] { command = "serve"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (command == "serve") {
      std::shared_ptr<const SessionModel> model;
      if (!model_path.empty()) model = SessionModel::from_document(read_file(model_path));
      Service service(model, sopt);
      httplib::Server server;
      service.attach(server, static_dir);
      err << "listening on http://" << host << ":" << port << (model ? " model " + model->id : " (no model)") << "\n";
      if (!server.listen(host, port)) fail(ErrorKind::io, "cannot listen on " + host + ":" + std::to_string(port));
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  Manifest manifest(command);
  auto write_manifest = [&](const json& j) {
    try {
      write_file((fs::path(out_dir) / "run.json").string(), j.dump(1));
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
    }
  };
  try {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(ErrorKind::io, "cannot create output directory '" + out_dir + "': " + ec.message());
    action(manifest);
    write_manifest(manifest.finish("ok"));
    return 0;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    if (fs::is_directory(out_dir)) write_manifest(manifest.finish("error", e.what()));
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    if (fs::is_directory(out_dir)) write_manifest(manifest.finish("internal-error", e.what()));
    return 1;
  }
}

}  // namespace crcbn::cli
