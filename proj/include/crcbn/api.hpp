#pragma once

// JSON requests and responses shared by the CLI and the HTTP service. Both
// front ends build the same documents through these functions, so their
// outputs agree byte for byte.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "crcbn/analytics.hpp"
#include "crcbn/evaluation.hpp"
#include "crcbn/io.hpp"

namespace crcbn::api {

using nlohmann::json;

inline constexpr std::uint64_t kDefaultSeed = 20120101;

/// A request that does not fit the published schema.
[[noreturn]] inline void bad_request(const std::string& what) { fail(ErrorKind::parse, what); }

namespace detail {

template <class T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    bad_request(std::string("field '") + key + "' has the wrong type");
  }
}

inline std::string text(const json& j, const char* what) {
  if (!j.is_string()) bad_request(std::string(what) + " must be a string");
  return j.get<std::string>();
}

}  // namespace detail

/// "v_CRC=yes" or {"variable": "v_CRC", "state": "yes"}.
inline TargetState parse_target_state(const NetworkSchema& s, const json& j) {
  std::string var, state;
  if (j.is_string()) {
    const auto t = j.get<std::string>();
    const auto eq = t.find('=');
    if (eq == std::string::npos) bad_request("target must be name=state, got '" + t + "'");
    var = t.substr(0, eq);
    state = t.substr(eq + 1);
  } else if (j.is_object()) {
    var = detail::text(j.value("variable", json()), "target.variable");
    state = detail::text(j.value("state", json()), "target.state");
  } else {
    bad_request("target must be a string or an object");
  }
  const VarId v = s.index_of(var);
  return {v, s.state_of(v, state)};
}

inline std::string target_label(const NetworkSchema& s, TargetState t) {
  return s[t.variable].name + "=" + s[t.variable].states[static_cast<std::size_t>(t.state)];
}

/// {"v_sex": "woman", ...} or ["v_sex=woman", ...]; null means no evidence.
inline Evidence parse_evidence_json(const NetworkSchema& s, const json& j) {
  if (j.is_null()) return Evidence(s.size());
  std::vector<std::string> items;
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) items.push_back(k + "=" + detail::text(v, "evidence state"));
  } else if (j.is_array()) {
    for (const auto& v : j) items.push_back(detail::text(v, "evidence item"));
  } else {
    bad_request("evidence must be an object or an array");
  }
  return parse_evidence(s, items);
}

inline json evidence_to_json(const NetworkSchema& s, const Evidence& e) {
  json out = json::object();
  for (VarId v : e.variables()) out[s[v].name] = s[v].states[static_cast<std::size_t>(e[v])];
  return out;
}

// --------------------------------------------------------------------- query

struct QueryRequest {
  Evidence evidence;
  VarId target = 0;
};

inline QueryRequest parse_query_request(const NetworkSchema& s, const json& j) {
  if (!j.is_object()) bad_request("query request must be an object");
  if (!j.contains("target")) bad_request("query request needs 'target'");
  QueryRequest q;
  q.target = s.index_of(detail::text(j.at("target"), "target"));
  q.evidence = parse_evidence_json(s, j.value("evidence", json()));
  if (q.evidence.is_set(q.target)) bad_request("evidence must not contain the target '" + s[q.target].name + "'");
  return q;
}

inline json query_response(const NetworkSchema& s, const QueryRequest& q, const QueryResult& r) {
  return {{"format", "crcbn.query"},
          {"version", 1},
          {"target", s[q.target].name},
          {"states", s[q.target].states},
          {"evidence", evidence_to_json(s, q.evidence)},
          {"distribution", r.distribution},
          {"evidence_probability", r.evidence_probability},
          {"log_evidence_probability", r.log_evidence_probability}};
}

inline json run_query(const BayesianNetwork& net, const json& request) {
  const auto q = parse_query_request(net.schema(), request);
  return query_response(net.schema(), q, query(net, q.evidence, q.target));
}

// ------------------------------------------------------------------ risk map

inline RiskMapSpec parse_riskmap_request(const NetworkSchema& s, const json& j) {
  if (!j.is_object()) bad_request("riskmap request must be an object");
  if (!j.contains("target")) bad_request("riskmap request needs 'target'");
  RiskMapSpec spec;
  spec.target = parse_target_state(s, j.at("target"));
  spec.condition = parse_evidence_json(s, j.value("condition", json()));
  const auto axes = j.value("axes", json::array());
  if (!axes.is_array()) bad_request("axes must be an array of variable names");
  for (const auto& a : axes) spec.axes.push_back(s.index_of(detail::text(a, "axis")));
  const auto n = detail::field<std::int64_t>(j, "n_param_samples", 1000);
  if (n < 1) bad_request("n_param_samples must be at least 1");
  spec.n_param_samples = static_cast<std::size_t>(n);
  spec.level = detail::field<double>(j, "level", 0.9);
  spec.seed = detail::field<std::uint64_t>(j, "seed", kDefaultSeed);
  check_risk_map_spec(spec, s);
  return spec;
}

inline json run_riskmap(const ParameterPosterior& post, const json& request, std::size_t threads = 0) {
  return to_json(risk_map(post, parse_riskmap_request(post.schema(), request), threads));
}

// ----------------------------------------------------------------- influence

struct InfluenceRequest {
  TargetState target;
  std::size_t iterations = 50;
  std::uint64_t seed = kDefaultSeed;
  std::size_t synthetic = 0;  // > 0: draw this many positives from the model
  Dataset rows;               // explicit positives otherwise
};

inline InfluenceRequest parse_influence_request(const NetworkSchema& s, const json& j) {
  if (!j.is_object()) bad_request("influence request must be an object");
  if (!j.contains("target")) bad_request("influence request needs 'target'");
  InfluenceRequest r;
  r.target = parse_target_state(s, j.at("target"));
  const auto it = detail::field<std::int64_t>(j, "iterations", 50);
  if (it < 1) bad_request("iterations must be at least 1");
  r.iterations = static_cast<std::size_t>(it);
  r.seed = detail::field<std::uint64_t>(j, "seed", kDefaultSeed);
  r.rows = Dataset(s, "request");
  const auto pos = j.value("positives", json());
  if (pos.is_object() && pos.contains("synthetic")) {
    const auto n = detail::field<std::int64_t>(pos, "synthetic", 0);
    if (n < 1) bad_request("positives.synthetic must be at least 1");
    r.synthetic = static_cast<std::size_t>(n);
  } else if (pos.is_array() && !pos.empty()) {
    for (const auto& row : pos) {
      auto e = parse_evidence_json(s, row);
      for (VarId v = 0; v < s.size(); ++v)
        if (v != r.target.variable && !e.is_set(v)) bad_request("positive rows need every variable except the target");
      e.set(r.target.variable, r.target.state);
      r.rows.add_row(e.states());
    }
  } else {
    bad_request("positives must be {\"synthetic\": n} or a non-empty array of rows");
  }
  return r;
}

inline std::size_t influence_cost(const InfluenceRequest& r) {
  return (r.synthetic > 0 ? r.synthetic : r.rows.rows()) * r.iterations;
}

/// Synthetic positives are exact draws from p(x | target) under the posterior
/// mean, seeded from the request seed.
inline Dataset influence_positives(const BayesianNetwork& mean, const InfluenceRequest& r) {
  if (r.synthetic == 0) return r.rows;
  Evidence e(mean.size());
  e.set(r.target.variable, r.target.state);
  return sample_given(mean, e, r.synthetic, derive_seed(r.seed, {0x706f73}));
}

inline json run_influence(const BayesianNetwork& mean, const InfluenceRequest& r, std::size_t threads = 0) {
  const auto rows = influence_positives(mean, r);
  return to_json(influential_findings(mean, rows, r.target, r.iterations, r.seed, threads), mean.schema());
}

// --------------------------------------------------------------------- model

/// Stable identifier of a model document: its content checksum.
inline std::string model_id(const std::string& document) {
  return json::parse(document).at("checksum").get<std::string>();
}

inline json model_metadata(const ParameterPosterior& post, const std::string& id, const json& metadata) {
  const auto& s = post.schema();
  std::int64_t rows = 0;
  for (std::size_t u = 0; u < post.rows(0); ++u) rows += post.row_count(0, u);
  return {{"format", "crcbn.model-metadata"},
          {"version", 1},
          {"model_id", id},
          {"schema", schema_to_json(s)},
          {"arcs", arcs_to_json(s, post.dag().sorted_arcs())},
          {"alpha", post.alpha()},
          {"training_rows", rows},
          {"provenance", post.provenance()},
          {"metadata", metadata}};
}

}  // namespace crcbn::api
