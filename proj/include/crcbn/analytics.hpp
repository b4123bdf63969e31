#pragma once

// Risk maps and influential findings.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crcbn/inference.hpp"
#include "crcbn/params.hpp"
#include "crcbn/parallel.hpp"

namespace crcbn {

/// Log differences smaller than this are numerical noise from elimination
/// order and are reported as exactly zero.
inline constexpr double kLogNoise = 1e-12;

struct RiskMapSpec {
  TargetState target;
  Evidence condition;
  std::vector<VarId> axes;
  std::size_t n_param_samples = 1000;
  double level = 0.9;
  std::uint64_t seed = 0;
  friend bool operator==(const RiskMapSpec&, const RiskMapSpec&) = default;
};

enum class Verdict { no_evidence, increase, decrease };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::increase: return "increase";
    case Verdict::decrease: return "decrease";
    default: return "no-evidence";
  }
}

inline Verdict parse_verdict(const std::string& s) {
  if (s == "increase") return Verdict::increase;
  if (s == "decrease") return Verdict::decrease;
  if (s == "no-evidence") return Verdict::no_evidence;
  fail(ErrorKind::parse, "unknown verdict '" + s + "'");
}

/// The three display rules: 0 inside the interval, entirely above, entirely below.
inline Verdict verdict_for(double lo, double hi) {
  if (lo > 0.0) return Verdict::increase;
  if (hi < 0.0) return Verdict::decrease;
  return Verdict::no_evidence;
}

struct RiskCell {
  std::vector<State> b;
  double r_hat = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double median = 0.0;
  Verdict verdict = Verdict::no_evidence;
  double population_share = 0.0;
  /// r_hat is computed at the posterior mean and may fall outside a skewed
  /// Monte-Carlo interval; flagged for display, not an error.
  bool r_hat_outside() const { return r_hat < lower || r_hat > upper; }
  friend bool operator==(const RiskCell&, const RiskCell&) = default;
};

/// Cells are ordered with the first axis most significant.
struct RiskMap {
  NetworkSchema schema;
  RiskMapSpec spec;
  double baseline = 0.0;  // p(target | c) at the posterior mean
  std::size_t skipped_draws = 0;
  std::vector<RiskCell> cells;

  std::vector<std::size_t> shape() const {
    std::vector<std::size_t> s;
    for (VarId a : spec.axes) s.push_back(schema.cardinality(a));
    return s;
  }
  friend bool operator==(const RiskMap&, const RiskMap&) = default;
};

inline void check_risk_map_spec(const RiskMapSpec& spec, const NetworkSchema& schema) {
  require(spec.target.variable < schema.size(), "unknown target variable");
  require(spec.target.state >= 0 && static_cast<std::size_t>(spec.target.state) < schema.cardinality(spec.target.variable),
          "target state out of range");
  require(spec.condition.size() == schema.size(), "condition does not match the schema");
  check_evidence(spec.condition, schema);
  require(!spec.condition.is_set(spec.target.variable), "target may not be part of the condition");
  require(!spec.axes.empty() && spec.axes.size() <= 2, "a risk map needs one or two axes");
  for (VarId a : spec.axes) {
    require(a < schema.size(), "unknown axis variable");
    require(a != spec.target.variable, "target may not be an axis");
    require(!spec.condition.is_set(a), "axis '" + schema[a].name + "' is already fixed by the condition");
  }
  require(spec.axes.size() == 1 || spec.axes[0] != spec.axes[1], "axes must be distinct");
  require(spec.n_param_samples >= 1, "need at least one parameter draw");
  require(spec.level > 0.0 && spec.level < 1.0, "level must lie in (0, 1)");
}

namespace detail {

inline double snap(double r) { return std::abs(r) < kLogNoise ? 0.0 : r; }

/// Empirical quantile with linear interpolation between order statistics;
/// `sorted` must be ascending.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

inline std::vector<std::vector<State>> state_product(const NetworkSchema& schema, const std::vector<VarId>& axes) {
  std::vector<std::vector<State>> out{{}};
  for (VarId a : axes) {
    std::vector<std::vector<State>> next;
    for (const auto& prefix : out)
      for (State s = 0; s < static_cast<State>(schema.cardinality(a)); ++s) {
        auto b = prefix;
        b.push_back(s);
        next.push_back(std::move(b));
      }
    out = std::move(next);
  }
  return out;
}

inline Evidence with(const Evidence& base, const std::vector<VarId>& vars, const std::vector<State>& states) {
  Evidence e = base;
  for (std::size_t i = 0; i < vars.size(); ++i) e.set(vars[i], states[i]);
  return e;
}

inline double log_target(const BayesianNetwork& net, const Evidence& e, const TargetState& t) {
  return std::log(query(net, e, t.variable).distribution[static_cast<std::size_t>(t.state)]);
}

/// r(b, q) for every cell of the grid; empty if the draw is degenerate.
inline std::vector<double> log_risk_differences(const BayesianNetwork& net, const RiskMapSpec& spec,
                                                const std::vector<std::vector<State>>& grid) {
  std::vector<double> r;
  try {
    const double base = log_target(net, spec.condition, spec.target);
    if (!std::isfinite(base)) return {};
    for (const auto& b : grid) {
      double v = log_target(net, with(spec.condition, spec.axes, b), spec.target) - base;
      if (!std::isfinite(v)) return {};
      r.push_back(snap(v));
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::impossible_evidence) return {};
    throw;
  }
  return r;
}

}  // namespace detail

inline RiskMap risk_map(const ParameterPosterior& post, const RiskMapSpec& spec, std::size_t threads = 0) {
  const auto& schema = post.schema();
  check_risk_map_spec(spec, schema);
  const auto grid = detail::state_product(schema, spec.axes);
  const auto mean = posterior_mean_network(post);

  RiskMap map{schema, spec, 0.0, 0, {}};
  const double p0 = query(mean, spec.condition, spec.target.variable).distribution[spec.target.state];
  if (!(p0 > 0.0))
    fail(ErrorKind::degenerate_baseline, "degenerate baseline: target state has probability 0 given the condition");
  map.baseline = p0;

  for (const auto& b : grid) {
    RiskCell cell;
    cell.b = b;
    const auto e = detail::with(spec.condition, spec.axes, b);
    const double lp = detail::log_target(mean, e, spec.target);
    if (!std::isfinite(lp))
      fail(ErrorKind::degenerate_baseline, "degenerate baseline: target state has probability 0 in a map cell");
    cell.r_hat = detail::snap(lp - std::log(p0));
    // p(b | c) as a chain p(b1 | c) p(b2 | c, b1).
    double share = 1.0;
    Evidence partial = spec.condition;
    for (std::size_t i = 0; i < spec.axes.size(); ++i) {
      share *= query(mean, partial, spec.axes[i]).distribution[static_cast<std::size_t>(b[i])];
      partial.set(spec.axes[i], b[i]);
    }
    cell.population_share = share;
    map.cells.push_back(std::move(cell));
  }

  std::vector<std::vector<double>> draws(spec.n_param_samples);
  parallel_for(
      spec.n_param_samples,
      [&](std::size_t s) {
        draws[s] = detail::log_risk_differences(sample_parameters(post, derive_seed(spec.seed, {s})), spec, grid);
      },
      threads);

  std::vector<std::vector<double>> per_cell(grid.size());
  for (const auto& d : draws) {
    if (d.empty()) {
      ++map.skipped_draws;
      continue;
    }
    for (std::size_t c = 0; c < grid.size(); ++c) per_cell[c].push_back(d[c]);
  }
  if (map.skipped_draws == draws.size()) fail(ErrorKind::degenerate_baseline, "every parameter draw was degenerate");

  const double tail = (1.0 - spec.level) / 2.0;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    auto& xs = per_cell[c];
    std::sort(xs.begin(), xs.end());
    auto& cell = map.cells[c];
    cell.lower = detail::quantile_sorted(xs, tail);
    cell.upper = detail::quantile_sorted(xs, 1.0 - tail);
    cell.median = detail::quantile_sorted(xs, 0.5);
    cell.verdict = verdict_for(cell.lower, cell.upper);
  }
  return map;
}

// ---------------------------------------------------------------- rendering

enum class MapFormat { text, svg, json };

inline MapFormat parse_map_format(const std::string& s) {
  if (s == "text") return MapFormat::text;
  if (s == "svg") return MapFormat::svg;
  if (s == "json") return MapFormat::json;
  fail(ErrorKind::contract, "unknown risk map format '" + s + "'");
}

struct Rgb {
  int r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kRampLow{33, 102, 172};     // blue, decrease
inline constexpr Rgb kRampMid{190, 190, 190};    // gray, no change
inline constexpr Rgb kRampHigh{230, 97, 1};      // orange, increase

/// Diverging ramp anchored at 0; `scale` is the |r| mapped to the ends.
inline Rgb ramp_color(double r, double scale) {
  if (r == 0.0 || !(scale > 0.0)) return kRampMid;
  const double t = std::clamp(std::abs(r) / scale, 0.0, 1.0);
  const Rgb& end = r > 0 ? kRampHigh : kRampLow;
  auto mix = [t](int a, int b) { return static_cast<int>(std::lround(a + t * (b - a))); };
  return {mix(kRampMid.r, end.r), mix(kRampMid.g, end.g), mix(kRampMid.b, end.b)};
}

inline std::string hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

/// Border width in px; strictly increasing in the population share.
inline double border_width(double share) { return 1.0 + 9.0 * std::clamp(share, 0.0, 1.0); }

namespace detail {

inline std::string fmt(double x, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.*f", digits, x);
  return buf;
}

inline const char* glyph(Verdict v) {
  switch (v) {
    case Verdict::increase: return "^";
    case Verdict::decrease: return "v";
    default: return "o";
  }
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline std::string condition_label(const RiskMap& m) {
  std::string s;
  for (VarId v : m.spec.condition.variables()) {
    if (!s.empty()) s += ", ";
    s += m.schema[v].name + "=" + m.schema[v].states[m.spec.condition[v]];
  }
  return s.empty() ? "(none)" : s;
}

inline std::size_t cell_index(const RiskMap& m, std::size_t col, std::size_t row) {
  return m.spec.axes.size() == 1 ? col : col * m.schema.cardinality(m.spec.axes[1]) + row;
}

}  // namespace detail

inline nlohmann::json to_json(const RiskMap& m) {
  using nlohmann::json;
  const auto& s = m.schema;
  json cond = json::object();
  for (VarId v : m.spec.condition.variables()) cond[s[v].name] = s[v].states[m.spec.condition[v]];
  json axes = json::array(), states = json::array();
  for (VarId a : m.spec.axes) {
    axes.push_back(s[a].name);
    states.push_back(s[a].states);
  }
  json cells = json::array();
  for (const auto& c : m.cells) {
    json b = json::array();
    for (std::size_t i = 0; i < c.b.size(); ++i) b.push_back(s[m.spec.axes[i]].states[c.b[i]]);
    cells.push_back({{"b", b},
                     {"r_hat", c.r_hat},
                     {"lower", c.lower},
                     {"upper", c.upper},
                     {"median", c.median},
                     {"verdict", to_string(c.verdict)},
                     {"population_share", c.population_share},
                     {"r_hat_outside", c.r_hat_outside()}});
  }
  return {{"format", "crcbn.riskmap"},
          {"version", 1},
          {"target", {{"variable", s[m.spec.target.variable].name},
                      {"state", s[m.spec.target.variable].states[m.spec.target.state]}}},
          {"condition", cond},
          {"axes", axes},
          {"axis_states", states},
          {"n_param_samples", m.spec.n_param_samples},
          {"level", m.spec.level},
          {"seed", m.spec.seed},
          {"baseline", m.baseline},
          {"skipped_draws", m.skipped_draws},
          {"cells", cells}};
}

inline RiskMap risk_map_from_json(const nlohmann::json& j, const NetworkSchema& schema) {
  try {
    require(j.at("format") == "crcbn.riskmap", "not a risk map document");
    RiskMap m;
    m.schema = schema;
    const VarId t = schema.index_of(j.at("target").at("variable").get<std::string>());
    m.spec.target = {t, schema.state_of(t, j.at("target").at("state").get<std::string>())};
    m.spec.condition = Evidence(schema.size());
    for (const auto& [k, v] : j.at("condition").items()) {
      const VarId id = schema.index_of(k);
      m.spec.condition.set(id, schema.state_of(id, v.get<std::string>()));
    }
    for (const auto& a : j.at("axes")) m.spec.axes.push_back(schema.index_of(a.get<std::string>()));
    m.spec.n_param_samples = j.at("n_param_samples").get<std::size_t>();
    m.spec.level = j.at("level").get<double>();
    m.spec.seed = j.at("seed").get<std::uint64_t>();
    m.baseline = j.at("baseline").get<double>();
    m.skipped_draws = j.at("skipped_draws").get<std::size_t>();
    check_risk_map_spec(m.spec, schema);
    for (const auto& c : j.at("cells")) {
      RiskCell cell;
      const auto& b = c.at("b");
      require(b.size() == m.spec.axes.size(), "cell coordinates do not match the axes");
      for (std::size_t i = 0; i < b.size(); ++i) cell.b.push_back(schema.state_of(m.spec.axes[i], b[i].get<std::string>()));
      cell.r_hat = c.at("r_hat").get<double>();
      cell.lower = c.at("lower").get<double>();
      cell.upper = c.at("upper").get<double>();
      cell.median = c.at("median").get<double>();
      cell.verdict = parse_verdict(c.at("verdict").get<std::string>());
      cell.population_share = c.at("population_share").get<double>();
      m.cells.push_back(std::move(cell));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("malformed risk map: ") + e.what());
  }
}

inline std::string render_risk_map(const RiskMap& m, MapFormat format) {
  const auto& s = m.schema;
  const auto shape = m.shape();
  const std::size_t cols = shape[0];
  const std::size_t rows = shape.size() > 1 ? shape[1] : 1;
  const VarId x = m.spec.axes[0];
  const std::string target = s[m.spec.target.variable].name + "=" + s[m.spec.target.variable].states[m.spec.target.state];

  if (format == MapFormat::json) return to_json(m).dump(2);

  if (format == MapFormat::text) {
    std::ostringstream out;
    out << "risk map for " << target << " | " << detail::condition_label(m) << "\n";
    out << "baseline p = " << m.baseline << ", level " << m.spec.level << ", " << m.spec.n_param_samples
        << " draws\n";
    out << "cell: r_hat [lower, upper] verdict share   (^ increase, v decrease, o no evidence, * r_hat outside)\n";
    std::size_t label_w = 0;
    if (rows > 1)
      for (const auto& st : s[m.spec.axes[1]].states) label_w = std::max(label_w, st.size());
    const int cell_w = 36;
    auto pad = [](std::string str, std::size_t w) {
      if (str.size() < w) str.append(w - str.size(), ' ');
      return str;
    };
    out << pad(rows > 1 ? "" : "", label_w) << (label_w ? "  " : "");
    for (std::size_t c = 0; c < cols; ++c) out << pad(s[x].name + "=" + s[x].states[c], cell_w);
    out << "\n";
    for (std::size_t r = 0; r < rows; ++r) {
      if (rows > 1) out << pad(s[m.spec.axes[1]].states[r], label_w) << "  ";
      for (std::size_t c = 0; c < cols; ++c) {
        const auto& cell = m.cells[detail::cell_index(m, c, r)];
        std::string txt = detail::fmt(cell.r_hat) + " [" + detail::fmt(cell.lower) + ", " + detail::fmt(cell.upper) +
                          "] " + detail::glyph(cell.verdict) + (cell.r_hat_outside() ? "*" : " ") + " " +
                          std::to_string(static_cast<int>(std::lround(cell.population_share * 100))) + "%";
        out << pad(txt, cell_w);
      }
      out << "\n";
    }
    return out.str();
  }

  // svg
  double scale = 0.0;
  for (const auto& c : m.cells) scale = std::max(scale, std::abs(c.r_hat));
  const int cw = 170, ch = 96, left = rows > 1 ? 110 : 20, top = 60;
  const int width = left + static_cast<int>(cols) * cw + 20;
  const int height = top + static_cast<int>(rows) * ch + 40;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << detail::xml_escape(target) << " | "
      << detail::xml_escape(detail::condition_label(m)) << "</text>\n";
  for (std::size_t c = 0; c < cols; ++c)
    out << "<text x=\"" << left + static_cast<int>(c) * cw + cw / 2 << "\" y=\"" << top - 8
        << "\" text-anchor=\"middle\">" << detail::xml_escape(s[x].states[c]) << "</text>\n";
  for (std::size_t r = 0; r < rows; ++r) {
    if (rows > 1)
      out << "<text x=\"" << left - 8 << "\" y=\"" << top + static_cast<int>(r) * ch + ch / 2
          << "\" text-anchor=\"end\">" << detail::xml_escape(s[m.spec.axes[1]].states[r]) << "</text>\n";
    for (std::size_t c = 0; c < cols; ++c) {
      const auto& cell = m.cells[detail::cell_index(m, c, r)];
      const int px = left + static_cast<int>(c) * cw, py = top + static_cast<int>(r) * ch;
      const double bw = border_width(cell.population_share);
      out << "<g class=\"cell" << (cell.r_hat_outside() ? " flagged" : "") << "\" data-verdict=\""
          << to_string(cell.verdict) << "\">\n";
      out << "  <rect x=\"" << px + bw / 2 << "\" y=\"" << py + bw / 2 << "\" width=\"" << cw - bw << "\" height=\""
          << ch - bw << "\" fill=\"" << hex(ramp_color(cell.r_hat, scale)) << "\" stroke=\"#202020\" stroke-width=\""
          << bw << "\"/>\n";
      out << "  <text x=\"" << px + cw / 2 << "\" y=\"" << py + 36 << "\" text-anchor=\"middle\" font-size=\"15\">"
          << detail::fmt(cell.r_hat) << (cell.r_hat_outside() ? "*" : "") << "</text>\n";
      out << "  <text x=\"" << px + cw / 2 << "\" y=\"" << py + 56 << "\" text-anchor=\"middle\">["
          << detail::fmt(cell.lower) << ", " << detail::fmt(cell.upper) << "]</text>\n";
      out << "  <text x=\"" << px + cw / 2 << "\" y=\"" << py + 74 << "\" text-anchor=\"middle\" font-size=\"10\">"
          << to_string(cell.verdict) << "</text>\n";
      out << "</g>\n";
    }
  }
  out << "<text x=\"" << left << "\" y=\"" << height - 14 << "\" font-size=\"10\">" << detail::xml_escape(s[x].name)
      << (rows > 1 ? " (columns) x " + detail::xml_escape(s[m.spec.axes[1]].name) + " (rows)" : std::string())
      << "; blue = lower risk, orange = higher risk; border width = population share</text>\n";
  out << "</svg>\n";
  return out.str();
}

// ------------------------------------------------------- influential findings

struct StateInfluence {
  State state = 0;
  double mean = 0.0;
  std::size_t count = 0;
  friend bool operator==(const StateInfluence&, const StateInfluence&) = default;
};

struct VariableInfluence {
  VarId variable = 0;
  double mean = 0.0;       // signed RRV, percent
  double mean_abs = 0.0;
  double sd = 0.0;         // over every recorded RRV
  double standard_error = 0.0;  // of `mean`, from the spread of iteration means
  std::size_t count = 0;
  std::vector<double> iteration_means;
  std::vector<StateInfluence> states;
  friend bool operator==(const VariableInfluence&, const VariableInfluence&) = default;
};

struct InfluenceReport {
  TargetState target;
  std::size_t rows = 0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::size_t skipped_unit_probability = 0;  // log p(target | ev) = 0: RRV undefined
  std::size_t skipped_zero_probability = 0;  // log p(target | ev) = -inf
  std::vector<VariableInfluence> variables;

  const VariableInfluence& of(VarId v) const {
    for (const auto& x : variables)
      if (x.variable == v) return x;
    fail(ErrorKind::contract, "variable not part of the influence report");
  }
  friend bool operator==(const InfluenceReport&, const InfluenceReport&) = default;
};

/// Relative risk variation in percent. The denominator is |log p_prev| so the
/// sign follows the direction of the probability change.
inline double relative_risk_variation(double log_p, double log_p_prev) {
  return 100.0 * detail::snap(log_p - log_p_prev) / std::abs(log_p_prev);
}

enum class RrvSkip { none = 0, unit_probability = 1, zero_probability = 2 };

struct RrvStep {
  VarId variable = 0;
  double log_p = 0.0;  // log p(target | evidence up to and including this step)
  double rrv = 0.0;    // NaN when skipped
  RrvSkip skip = RrvSkip::none;
};

/// One pass of the inner loop: adds `row`'s values for `order` one at a time.
/// `lp_empty` is log p(target) with no evidence.
inline std::vector<RrvStep> rrv_path(const BayesianNetwork& net, std::span<const State> row, TargetState target,
                                     const std::vector<VarId>& order, double lp_empty) {
  std::vector<RrvStep> out;
  Evidence ev(net.size());
  double prev = lp_empty;
  for (VarId v : order) {
    ev.set(v, row[v]);
    RrvStep step{v, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::quiet_NaN(),
                 RrvSkip::none};
    try {
      step.log_p = detail::log_target(net, ev, target);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::impossible_evidence) throw;
    }
    if (!std::isfinite(prev) || !std::isfinite(step.log_p))
      step.skip = RrvSkip::zero_probability;
    else if (std::abs(prev) < kLogNoise)
      step.skip = RrvSkip::unit_probability;
    else
      step.rrv = relative_risk_variation(step.log_p, prev);
    prev = step.log_p;
    out.push_back(step);
  }
  return out;
}

inline InfluenceReport influential_findings(const BayesianNetwork& net, const Dataset& positives, TargetState target,
                                            std::size_t iterations, std::uint64_t seed, std::size_t threads = 0) {
  const auto& schema = net.schema();
  require(positives.schema() == schema, "positives do not match the model schema");
  require(iterations >= 1, "iterations must be at least 1");
  require(target.variable < schema.size() && target.state >= 0 &&
              static_cast<std::size_t>(target.state) < schema.cardinality(target.variable),
          "target out of range");
  std::vector<VarId> evars;
  for (VarId v = 0; v < schema.size(); ++v)
    if (v != target.variable) evars.push_back(v);
  if (!positives.complete_on(evars)) fail(ErrorKind::incomplete_data, "positive rows have missing values");

  const std::size_t n = positives.rows(), k = evars.size();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  // rrv[(it * n + i) * k + slot of variable]; NaN marks a skipped term.
  std::vector<double> rrv(iterations * n * k, nan);
  std::vector<unsigned char> skip_kind(iterations * n * k, 0);
  const double lp_empty = detail::log_target(net, Evidence(schema.size()), target);

  parallel_for(
      iterations * n,
      [&](std::size_t unit) {
        const std::size_t it = unit / n, i = unit % n;
        std::vector<VarId> order = evars;
        Rng rng(derive_seed(seed, {it, i}));
        rng.shuffle(order);
        const auto path = rrv_path(net, positives.row(i), target, order, lp_empty);
        for (const auto& step : path) {
          const std::size_t slot = step.variable < target.variable ? step.variable : step.variable - 1;
          rrv[unit * k + slot] = step.rrv;
          skip_kind[unit * k + slot] = static_cast<unsigned char>(step.skip);
        }
      },
      threads);

  InfluenceReport rep{target, n, iterations, seed, 0, 0, {}};
  for (auto s : skip_kind) {
    rep.skipped_unit_probability += s == 1;
    rep.skipped_zero_probability += s == 2;
  }
  for (std::size_t slot = 0; slot < k; ++slot) {
    const VarId v = evars[slot];
    VariableInfluence vi;
    vi.variable = v;
    std::vector<CompensatedSum> state_sum(schema.cardinality(v));
    std::vector<std::size_t> state_count(schema.cardinality(v), 0);
    CompensatedSum all, all_abs, all_sq, it_sum, it_abs_sum;
    std::size_t used_iterations = 0;
    for (std::size_t it = 0; it < iterations; ++it) {
      CompensatedSum row_sum, row_abs;
      std::size_t cnt = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double x = rrv[(it * n + i) * k + slot];
        if (std::isnan(x)) continue;
        row_sum.add(x);
        row_abs.add(std::abs(x));
        all.add(x);
        all_sq.add(x * x);
        const auto st = static_cast<std::size_t>(positives.at(i, v));
        state_sum[st].add(x);
        ++state_count[st];
        ++cnt;
      }
      vi.count += cnt;
      if (cnt == 0) continue;
      const double m = row_sum.value() / static_cast<double>(cnt);
      vi.iteration_means.push_back(m);
      it_sum.add(m);
      it_abs_sum.add(row_abs.value() / static_cast<double>(cnt));
      ++used_iterations;
    }
    if (used_iterations > 0) {
      vi.mean = it_sum.value() / static_cast<double>(used_iterations);
      vi.mean_abs = it_abs_sum.value() / static_cast<double>(used_iterations);
    }
    if (vi.count > 1) {
      const double c = static_cast<double>(vi.count);
      const double mu = all.value() / c;
      vi.sd = std::sqrt(std::max(0.0, (all_sq.value() - c * mu * mu) / (c - 1.0)));
    }
    if (used_iterations > 1) {
      CompensatedSum dev;
      for (double m : vi.iteration_means) dev.add((m - vi.mean) * (m - vi.mean));
      const double u = static_cast<double>(used_iterations);
      vi.standard_error = std::sqrt(dev.value() / (u - 1.0)) / std::sqrt(u);
    } else if (vi.count > 0) {
      vi.standard_error = vi.sd / std::sqrt(static_cast<double>(vi.count));
    }
    for (std::size_t st = 0; st < state_sum.size(); ++st)
      if (state_count[st] > 0)
        vi.states.push_back({static_cast<State>(st), state_sum[st].value() / static_cast<double>(state_count[st]),
                             state_count[st]});
    rep.variables.push_back(std::move(vi));
  }
  return rep;
}

inline InfluenceReport influential_findings(const ParameterPosterior& post, const Dataset& positives,
                                            TargetState target, std::size_t iterations, std::uint64_t seed,
                                            std::size_t threads = 0) {
  return influential_findings(posterior_mean_network(post), positives, target, iterations, seed, threads);
}

/// Variables ordered by signed mean RRV, largest first.
inline std::vector<VariableInfluence> ranked(const InfluenceReport& r) {
  auto v = r.variables;
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.mean > b.mean; });
  return v;
}

inline nlohmann::json to_json(const InfluenceReport& r, const NetworkSchema& schema) {
  using nlohmann::json;
  json vars = json::array();
  for (const auto& v : ranked(r)) {
    json states = json::array();
    for (const auto& s : v.states)
      states.push_back({{"state", schema[v.variable].states[s.state]}, {"mean_rrv", s.mean}, {"count", s.count}});
    vars.push_back({{"variable", schema[v.variable].name},
                    {"mean_rrv", v.mean},
                    {"mean_abs_rrv", v.mean_abs},
                    {"sd_rrv", v.sd},
                    {"standard_error", v.standard_error},
                    {"count", v.count},
                    {"iteration_means", v.iteration_means},
                    {"states", states}});
  }
  return {{"format", "crcbn.influence"},
          {"version", 1},
          {"target", {{"variable", schema[r.target.variable].name},
                      {"state", schema[r.target.variable].states[r.target.state]}}},
          {"rows", r.rows},
          {"iterations", r.iterations},
          {"seed", r.seed},
          {"diagnostics", {{"skipped_unit_probability", r.skipped_unit_probability},
                           {"skipped_zero_probability", r.skipped_zero_probability}}},
          {"variables", vars}};
}

inline std::string render_influence_text(const InfluenceReport& r, const NetworkSchema& schema) {
  std::ostringstream out;
  out << "influential findings for " << schema[r.target.variable].name << "="
      << schema[r.target.variable].states[r.target.state] << ": " << r.rows << " rows x " << r.iterations
      << " iterations, seed " << r.seed << "\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-14s %12s %12s %12s %8s\n", "variable", "mean RRV %", "mean |RRV|", "sd", "n");
  out << buf;
  for (const auto& v : ranked(r)) {
    std::snprintf(buf, sizeof buf, "%-14s %12.4f %12.4f %12.4f %8zu\n", schema[v.variable].name.c_str(), v.mean,
                  v.mean_abs, v.sd, v.count);
    out << buf;
  }
  if (r.skipped_unit_probability + r.skipped_zero_probability > 0)
    out << "skipped terms: " << r.skipped_unit_probability << " (p = 1), " << r.skipped_zero_probability
        << " (p = 0)\n";
  return out.str();
}

}  // namespace crcbn
