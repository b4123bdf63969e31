#pragma once

// Dataset files, raw-record cleaning and coding, model documents.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crcbn/dataset.hpp"
#include "crcbn/params.hpp"

namespace crcbn {

// ----------------------------------------------------------------------- CSV

namespace detail {

/// Splits one CSV record; quoted fields may contain commas and doubled quotes.
/// Returns false on an unterminated quote.
inline bool split_csv(const std::string& line, std::vector<std::string>& out) {
  out.clear();
  std::string field;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty() && !was_quoted) {
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (c != '\r' || i + 1 != line.size()) {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return !quoted;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::optional<int> parse_int(const std::string& s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

struct IngestDiagnostic {
  std::size_t line = 0;  // 1-based line in the file; the header is line 1
  std::string column;
  std::string message;
};

struct IngestReport {
  std::size_t total_rows = 0;
  std::size_t accepted_rows = 0;
  std::size_t rejected_rows = 0;
  std::size_t missing_cells = 0;
  std::size_t rows_with_missing = 0;
  std::vector<IngestDiagnostic> diagnostics;
};

struct LoadedDataset {
  Dataset data;
  IngestReport report;
};

/// Header names the schema variables (any order) plus `year`. Cells hold
/// state labels or aliases; an empty cell is missing. Rows with unknown
/// labels or a bad year are rejected and reported.
inline LoadedDataset load_dataset(std::istream& in, const NetworkSchema& schema, std::string id = {}) {
  std::string line;
  std::vector<std::string> fields;
  if (!std::getline(in, line)) fail(ErrorKind::parse, "empty dataset file: missing header");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!detail::split_csv(line, fields)) fail(ErrorKind::parse, "line 1: unterminated quote in header");
  std::vector<std::optional<VarId>> column_var;
  std::optional<std::size_t> year_col;
  std::vector<bool> seen(schema.size(), false);
  for (std::size_t c = 0; c < fields.size(); ++c) {
    if (fields[c] == "year") {
      if (year_col) fail(ErrorKind::parse, "line 1: duplicate column 'year'");
      year_col = c;
      column_var.push_back(std::nullopt);
      continue;
    }
    auto v = schema.find(fields[c]);
    if (!v) fail(ErrorKind::parse, "line 1, column " + std::to_string(c + 1) + ": unknown column '" + fields[c] + "'");
    if (seen[*v]) fail(ErrorKind::parse, "line 1: duplicate column '" + fields[c] + "'");
    seen[*v] = true;
    column_var.push_back(*v);
  }
  if (!year_col) fail(ErrorKind::parse, "line 1: missing column 'year'");
  for (VarId v = 0; v < schema.size(); ++v)
    if (!seen[v]) fail(ErrorKind::parse, "line 1: missing column '" + schema[v].name + "'");

  LoadedDataset out{Dataset(schema, std::move(id)), {}};
  auto& rep = out.report;
  std::vector<State> row(schema.size());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    ++rep.total_rows;
    if (!detail::split_csv(line, fields)) fail(ErrorKind::parse, "line " + std::to_string(lineno) + ": unterminated quote");
    if (fields.size() != column_var.size())
      fail(ErrorKind::parse, "line " + std::to_string(lineno) + ": expected " + std::to_string(column_var.size()) +
                                 " fields, found " + std::to_string(fields.size()));
    bool ok = true;
    std::size_t missing = 0;
    int year = 0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!column_var[c]) {
        auto y = detail::parse_int(fields[c]);
        if (!y) {
          rep.diagnostics.push_back({lineno, "year", "invalid year '" + fields[c] + "'"});
          ok = false;
        } else {
          year = *y;
        }
        continue;
      }
      const VarId v = *column_var[c];
      if (fields[c].empty()) {
        row[v] = kUnset;
        ++missing;
        continue;
      }
      auto s = schema[v].state_index(fields[c]);
      if (!s) {
        rep.diagnostics.push_back({lineno, schema[v].name, "unknown label '" + fields[c] + "'"});
        ok = false;
        continue;
      }
      row[v] = *s;
    }
    if (!ok) {
      ++rep.rejected_rows;
      continue;
    }
    rep.missing_cells += missing;
    rep.rows_with_missing += missing > 0;
    out.data.add_row(row, year);
    ++rep.accepted_rows;
  }
  return out;
}

inline LoadedDataset load_dataset_file(const std::string& path, const NetworkSchema& schema) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  return load_dataset(in, schema, path);
}

inline void save_dataset(std::ostream& out, const Dataset& d) {
  const auto& s = d.schema();
  for (VarId v = 0; v < s.size(); ++v) out << detail::csv_field(s[v].name) << ',';
  out << "year\n";
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (VarId v = 0; v < s.size(); ++v) {
      const State x = d.at(i, v);
      if (x != kUnset) out << detail::csv_field(s[v].states[x]);
      out << ',';
    }
    out << d.year(i) << '\n';
  }
}

inline void save_dataset_file(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  save_dataset(out, d);
  if (!out) fail(ErrorKind::io, "write to '" + path + "' failed");
}

/// Keeps rows without missing values.
inline std::pair<Dataset, std::size_t> complete_cases(const Dataset& d) {
  auto kept = d.filter([&](std::size_t i) { return d.row_complete(i); });
  const std::size_t dropped = d.rows() - kept.rows();
  return {std::move(kept), dropped};
}

/// Splits by year, ascending.
inline std::vector<Dataset> split_by_year(const Dataset& d) {
  std::vector<int> years = d.years();
  std::sort(years.begin(), years.end());
  years.erase(std::unique(years.begin(), years.end()), years.end());
  std::vector<Dataset> out;
  for (int y : years) {
    auto part = d.filter([&](std::size_t i) { return d.year(i) == y; });
    part.set_id(d.id() + "@" + std::to_string(y));
    out.push_back(std::move(part));
  }
  return out;
}

// ---------------------------------------------------------------- raw records

struct RawRecord {
  std::optional<double> height_cm, weight_kg, glycemia, ldl, hdl, triglycerides, total_cholesterol, systolic,
      diastolic, sleep_hours, age_years, ses_score;
  bool diabetes_medication = false, cholesterol_medication = false, hypertension_medication = false;
  std::optional<std::string> sex, smoking, alcohol, activity;
  std::optional<bool> anxiety, depression, crc;
  int year = 0;
};

enum class ContinuousField {
  height_cm, weight_kg, glycemia, ldl, hdl, triglycerides, total_cholesterol, systolic, diastolic, sleep_hours, ses_score
};

inline std::string to_string(ContinuousField f) {
  static const char* names[] = {"height",  "weight",          "glycemia",  "ldl",       "hdl",   "triglycerides",
                                "total_cholesterol", "systolic", "diastolic", "sleep", "ses_score"};
  return names[static_cast<int>(f)];
}

inline std::optional<double>& field_ref(RawRecord& r, ContinuousField f) {
  switch (f) {
    case ContinuousField::height_cm: return r.height_cm;
    case ContinuousField::weight_kg: return r.weight_kg;
    case ContinuousField::glycemia: return r.glycemia;
    case ContinuousField::ldl: return r.ldl;
    case ContinuousField::hdl: return r.hdl;
    case ContinuousField::triglycerides: return r.triglycerides;
    case ContinuousField::total_cholesterol: return r.total_cholesterol;
    case ContinuousField::systolic: return r.systolic;
    case ContinuousField::diastolic: return r.diastolic;
    case ContinuousField::sleep_hours: return r.sleep_hours;
    default: return r.ses_score;
  }
}

inline const std::vector<ContinuousField>& default_continuous_fields() {
  static const std::vector<ContinuousField> f{
      ContinuousField::height_cm, ContinuousField::weight_kg,         ContinuousField::glycemia,
      ContinuousField::ldl,       ContinuousField::hdl,               ContinuousField::triglycerides,
      ContinuousField::total_cholesterol, ContinuousField::systolic, ContinuousField::diastolic,
      ContinuousField::sleep_hours};
  return f;
}

struct CleaningReport {
  std::vector<std::pair<std::string, std::size_t>> per_field;  // exclusions attributed to each field
  std::size_t excluded = 0;
};

/// One pass: mean and sd per field over non-missing values, then drop any
/// record with a value outside mean +/- 3 sd.
inline std::pair<std::vector<RawRecord>, CleaningReport> clean_continuous(
    std::vector<RawRecord> records, const std::vector<ContinuousField>& fields = default_continuous_fields(),
    double k = 3.0) {
  struct Band {
    double lo, hi;
  };
  std::vector<Band> bands;
  for (auto f : fields) {
    double n = 0, mean = 0, m2 = 0;
    for (auto& r : records)
      if (auto x = field_ref(r, f)) {
        n += 1;
        const double d = *x - mean;
        mean += d / n;
        m2 += d * (*x - mean);
      }
    const double sd = n > 1 ? std::sqrt(m2 / (n - 1)) : 0.0;
    bands.push_back({mean - k * sd, mean + k * sd});
  }
  CleaningReport rep;
  for (auto f : fields) rep.per_field.emplace_back(to_string(f), 0);
  std::vector<RawRecord> kept;
  for (auto& r : records) {
    bool out = false;
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (auto x = field_ref(r, fields[i]); x && (*x < bands[i].lo || *x > bands[i].hi)) {
        ++rep.per_field[i].second;
        out = true;
      }
    if (out)
      ++rep.excluded;
    else
      kept.push_back(std::move(r));
  }
  return {std::move(kept), rep};
}

/// SES levels: 1 below `low`, 2 in [low, high), 3 at or above `high`.
struct SesCuts {
  double low = 0.0;
  double high = 0.0;
};

/// Default cut points: mean -/+ one sd of the batch's SES scores.
inline SesCuts ses_cuts_from(const std::vector<RawRecord>& records, double k = 1.0) {
  double n = 0, mean = 0, m2 = 0;
  for (const auto& r : records)
    if (r.ses_score) {
      n += 1;
      const double d = *r.ses_score - mean;
      mean += d / n;
      m2 += d * (*r.ses_score - mean);
    }
  const double sd = n > 1 ? std::sqrt(m2 / (n - 1)) : 0.0;
  return {mean - k * sd, mean + k * sd};
}

struct CodedRecord {
  bool ok = false;
  std::string reason;
  std::vector<State> row;
  int year = 0;
};

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

/// Codes one record onto the reference schema. Unknown or absent raw values
/// become missing cells; an age outside (24, 64] rejects the record.
inline CodedRecord discretize(const RawRecord& r, const SesCuts& ses, const NetworkSchema& schema) {
  CodedRecord out;
  out.year = r.year;
  out.row.assign(schema.size(), kUnset);
  auto set = [&](const char* name, std::optional<State> s) {
    if (s) out.row[schema.index_of(name)] = *s;
  };
  auto label = [&](const char* name, const std::optional<std::string>& raw) -> std::optional<State> {
    if (!raw) return std::nullopt;
    return schema[schema.index_of(name)].state_index(detail::lower(*raw));
  };
  auto yes_no = [](std::optional<bool> b) -> std::optional<State> {
    if (!b) return std::nullopt;
    return *b ? 0 : 1;
  };

  if (!r.age_years) {
    out.reason = "missing age";
    return out;
  }
  const double age = *r.age_years;
  if (!(age > 24 && age <= 64)) {
    out.reason = "age " + std::to_string(age) + " outside (24, 64]";
    return out;
  }
  set("v_age", age <= 34 ? 0 : age <= 44 ? 1 : age <= 54 ? 2 : 3);
  set("v_sex", label("v_sex", r.sex));
  if (r.ses_score) set("v_SES", *r.ses_score < ses.low ? 0 : *r.ses_score < ses.high ? 1 : 2);
  if (r.height_cm && r.weight_kg && *r.height_cm > 0) {
    const double m = *r.height_cm / 100.0;
    const double bmi = *r.weight_kg / (m * m);
    set("v_BMI", bmi < 18.5 ? 0 : bmi < 25 ? 1 : bmi < 30 ? 2 : 3);
  }
  set("v_PA", label("v_PA", r.activity));
  // 6 h and 9 h both count as normal.
  if (r.sleep_hours) set("v_SD", *r.sleep_hours < 6 ? 0 : *r.sleep_hours <= 9 ? 1 : 2);
  set("v_alc", label("v_alc", r.alcohol));
  set("v_smok", label("v_smok", r.smoking));
  set("v_anx", yes_no(r.anxiety));
  set("v_dep", yes_no(r.depression));

  auto any = [](std::initializer_list<std::optional<bool>> xs) -> std::optional<bool> {
    bool unknown = false;
    for (auto x : xs) {
      if (x && *x) return true;
      if (!x) unknown = true;
    }
    if (unknown) return std::nullopt;
    return false;
  };
  auto ge = [](const std::optional<double>& x, double t) -> std::optional<bool> {
    if (!x) return std::nullopt;
    return *x >= t;
  };
  auto le = [](const std::optional<double>& x, double t) -> std::optional<bool> {
    if (!x) return std::nullopt;
    return *x <= t;
  };
  set("v_diab", yes_no(any({r.diabetes_medication, ge(r.glycemia, 125)})));
  set("v_hypchol", yes_no(any({r.cholesterol_medication, ge(r.ldl, 130), le(r.hdl, 40), ge(r.triglycerides, 150),
                               ge(r.total_cholesterol, 200)})));
  set("v_hypten", yes_no(any({r.hypertension_medication, ge(r.systolic, 139), ge(r.diastolic, 90)})));
  set("v_CRC", yes_no(r.crc));
  out.ok = true;
  return out;
}

// ------------------------------------------------------------ model documents

inline constexpr int kModelFormatMajor = 1;
inline constexpr int kModelFormatMinor = 0;

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

inline nlohmann::json schema_to_json(const NetworkSchema& s) {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : s.variables()) {
    nlohmann::json aliases = nlohmann::json::object();
    for (const auto& [a, c] : v.aliases) aliases[a] = c;
    vars.push_back({{"name", v.name}, {"states", v.states}, {"aliases", aliases}});
  }
  return vars;
}

inline NetworkSchema schema_from_json(const nlohmann::json& j) {
  std::vector<Variable> vars;
  for (const auto& v : j) {
    Variable var{v.at("name").get<std::string>(), v.at("states").get<std::vector<std::string>>(), {}};
    if (v.contains("aliases"))
      for (const auto& [a, c] : v.at("aliases").items()) var.aliases.emplace_back(a, c.get<std::string>());
    vars.push_back(std::move(var));
  }
  return NetworkSchema(std::move(vars));
}

inline nlohmann::json arcs_to_json(const NetworkSchema& s, const std::vector<Arc>& arcs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& a : arcs) out.push_back({s[a.parent].name, s[a.child].name});
  return out;
}

inline std::vector<Arc> arcs_from_json(const NetworkSchema& s, const nlohmann::json& j) {
  std::vector<Arc> out;
  for (const auto& a : j) {
    require(a.is_array() && a.size() == 2, "an arc is a [parent, child] pair");
    out.push_back({s.index_of(a[0].get<std::string>()), s.index_of(a[1].get<std::string>())});
  }
  return out;
}

/// The checksum covers the canonical dump of `content` (object keys sorted).
inline std::string save_model(const ParameterPosterior& post, const nlohmann::json& metadata = nlohmann::json::object()) {
  const auto& s = post.schema();
  nlohmann::json nodes = nlohmann::json::array();
  for (VarId v = 0; v < s.size(); ++v) {
    std::vector<std::string> parents;
    for (VarId p : post.parents(v)) parents.push_back(s[p].name);
    nodes.push_back({{"name", s[v].name},
                     {"parents", parents},
                     {"prior", post.prior_table(v)},
                     {"counts", post.count_table(v)}});
  }
  nlohmann::json content = {{"schema", schema_to_json(s)},
                            {"arcs", arcs_to_json(s, post.dag().sorted_arcs())},
                            {"alpha", post.alpha()},
                            {"provenance", post.provenance()},
                            {"nodes", nodes},
                            {"metadata", metadata}};
  nlohmann::json doc = {
      {"format", "crcbn.model"},
      {"format_version", std::to_string(kModelFormatMajor) + "." + std::to_string(kModelFormatMinor)},
      {"checksum", "fnv1a64:" + hex64(fnv1a64(content.dump()))},
      {"content", content}};
  return doc.dump(1);
}

struct LoadedModel {
  ParameterPosterior posterior;
  nlohmann::json metadata;
};

/// Accepts any 1.x document; fields it does not know are ignored.
inline LoadedModel load_model_document(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("model document is not valid JSON: ") + e.what());
  }
  try {
    if (doc.value("format", "") != "crcbn.model") fail(ErrorKind::parse, "not a crcbn model document");
    const auto version = doc.at("format_version").get<std::string>();
    const auto dot = version.find('.');
    const auto major = detail::parse_int(version.substr(0, dot));
    if (!major || *major != kModelFormatMajor)
      fail(ErrorKind::version, "unsupported model format version " + version);
    const auto& content = doc.at("content");
    const std::string expected = "fnv1a64:" + hex64(fnv1a64(content.dump()));
    if (doc.at("checksum").get<std::string>() != expected)
      fail(ErrorKind::checksum, "model checksum mismatch: document was modified");

    auto schema = schema_from_json(content.at("schema"));
    Dag dag = Dag::empty(schema);
    dag.arcs = arcs_from_json(schema, content.at("arcs"));
    std::vector<std::vector<double>> prior(schema.size());
    std::vector<std::vector<std::int64_t>> counts(schema.size());
    for (const auto& n : content.at("nodes")) {
      const VarId v = schema.index_of(n.at("name").get<std::string>());
      prior[v] = n.at("prior").get<std::vector<double>>();
      counts[v] = n.at("counts").get<std::vector<std::int64_t>>();
    }
    ParameterPosterior post({schema, dag}, content.at("alpha").get<double>(), std::move(prior), std::move(counts),
                            content.value("provenance", std::vector<std::string>{}));
    return {std::move(post), content.value("metadata", nlohmann::json::object())};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("malformed model document: ") + e.what());
  }
}

inline ParameterPosterior load_model(const std::string& text) { return load_model_document(text).posterior; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  out << text;
  if (!out) fail(ErrorKind::io, "write to '" + path + "' failed");
}

inline nlohmann::json parse_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, "'" + path + "': " + e.what());
  }
}

// DAG file: {"nodes": [...], "arcs": [["parent", "child"], ...]}. Node order
// must follow the schema.
inline std::string save_dag(const NetworkSchema& s, const Dag& dag) {
  return nlohmann::json{{"nodes", dag.nodes}, {"arcs", arcs_to_json(s, dag.sorted_arcs())}}.dump(1);
}

inline Dag load_dag(const nlohmann::json& j, const NetworkSchema& s) {
  try {
    Dag dag = Dag::empty(s);
    if (j.contains("nodes")) {
      auto nodes = j.at("nodes").get<std::vector<std::string>>();
      for (const auto& n : nodes)
        if (!s.find(n)) fail(ErrorKind::contract, "unknown node " + n);
      require(nodes == dag.nodes, "DAG nodes must list the schema variables in schema order");
    }
    dag.arcs = arcs_from_json(s, j.at("arcs"));
    return dag;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("malformed DAG document: ") + e.what());
  }
}

// Constraints file: {"required": [[p, c], ...], "forbidden": [[p, c], ...]}.
inline ArcConstraints load_constraints(const nlohmann::json& j, const NetworkSchema& s) {
  try {
    ArcConstraints c;
    if (j.contains("required")) c.required = arcs_from_json(s, j.at("required"));
    if (j.contains("forbidden")) c.forbidden = arcs_from_json(s, j.at("forbidden"));
    auto problems = validate_constraints(c, s.size());
    if (!problems.empty()) fail(ErrorKind::contract, "inconsistent constraints: " + problems.front());
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("malformed constraints document: ") + e.what());
  }
}

inline std::string save_constraints(const NetworkSchema& s, const ArcConstraints& c) {
  return nlohmann::json{{"required", arcs_to_json(s, c.required)}, {"forbidden", arcs_to_json(s, c.forbidden)}}.dump(1);
}

}  // namespace crcbn
