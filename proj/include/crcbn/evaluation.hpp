#pragma once

// The network as a classifier: scores, thresholds, confusion tables, AUC and
// calibration.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crcbn/inference.hpp"

namespace crcbn {

struct ScoredPredictions {
  std::vector<int> labels;        // 1 when the row is in the target state
  std::vector<double> scores;     // p(target state | rest of the row)
  std::vector<std::size_t> rows;  // source row of each prediction
  std::vector<std::size_t> excluded;  // rows whose evidence had probability 0

  std::size_t size() const noexcept { return scores.size(); }
  std::size_t positives() const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1)); }
};

inline ScoredPredictions make_predictions(std::vector<int> labels, std::vector<double> scores) {
  require(labels.size() == scores.size(), "labels and scores differ in length");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, "labels must be 0 or 1");
    require(scores[i] >= 0.0 && scores[i] <= 1.0, "scores must lie in [0, 1]");
  }
  ScoredPredictions p;
  p.labels = std::move(labels);
  p.scores = std::move(scores);
  p.rows.resize(p.scores.size());
  std::iota(p.rows.begin(), p.rows.end(), std::size_t{0});
  return p;
}

/// Rows sharing the same non-target values share one query.
inline ScoredPredictions score_dataset(const BayesianNetwork& net, const Dataset& data, TargetState target) {
  require(data.schema() == net.schema(), "dataset does not match the model schema");
  require(target.variable < net.size(), "unknown target variable");
  require(target.state >= 0 && static_cast<std::size_t>(target.state) < net.schema().cardinality(target.variable),
          "target state out of range");
  if (!data.complete()) fail(ErrorKind::incomplete_data, "scoring needs complete rows");
  ScoredPredictions out;
  std::map<std::vector<State>, double> cache;  // NaN marks impossible evidence
  for (std::size_t i = 0; i < data.rows(); ++i) {
    auto row = data.row(i);
    std::vector<State> key(row.begin(), row.end());
    key[target.variable] = kUnset;
    auto it = cache.find(key);
    if (it == cache.end()) {
      double s = std::numeric_limits<double>::quiet_NaN();
      try {
        s = query(net, Evidence(key), target.variable).distribution[static_cast<std::size_t>(target.state)];
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::impossible_evidence) throw;
      }
      it = cache.emplace(std::move(key), s).first;
    }
    if (std::isnan(it->second)) {
      out.excluded.push_back(i);
      continue;
    }
    out.labels.push_back(row[target.variable] == target.state ? 1 : 0);
    out.scores.push_back(std::clamp(it->second, 0.0, 1.0));
    out.rows.push_back(i);
  }
  return out;
}

struct ConfusionMatrix {
  std::size_t tn = 0, fp = 0, fn = 0, tp = 0;

  std::size_t total() const { return tn + fp + fn + tp; }
  double sensitivity() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
  double specificity() const { return tn + fp ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 0.0; }
  double g_mean() const { return std::sqrt(sensitivity() * specificity()); }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Predicted positive when score >= threshold.
inline ConfusionMatrix confusion_at(const ScoredPredictions& p, double threshold) {
  require(threshold >= 0.0 && threshold <= 1.0, "threshold must lie in [0, 1]");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool pred = p.scores[i] >= threshold;
    if (p.labels[i] == 1)
      (pred ? m.tp : m.fn)++;
    else
      (pred ? m.fp : m.tn)++;
  }
  return m;
}

namespace detail {

inline void require_both_classes(const ScoredPredictions& p) {
  const auto pos = p.positives();
  if (pos == 0 || pos == p.size()) fail(ErrorKind::degenerate_labels, "degenerate labels: need both classes");
}

}  // namespace detail

/// 0, 1 and the midpoints between consecutive distinct scores.
inline std::vector<double> candidate_thresholds(const ScoredPredictions& p) {
  std::vector<double> s = p.scores;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  std::vector<double> out{0.0};
  for (std::size_t i = 0; i + 1 < s.size(); ++i) out.push_back(s[i] + (s[i + 1] - s[i]) / 2.0);
  out.push_back(1.0);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct ThresholdChoice {
  double threshold = 0.0;
  ConfusionMatrix confusion;
  double g_mean = 0.0;
  bool degenerate = false;  // no candidate achieves a positive G-mean
};

/// Maximizes G-mean over the candidate set; ties go to higher specificity,
/// then to the higher threshold.
inline ThresholdChoice select_threshold_gmean(const ScoredPredictions& p) {
  detail::require_both_classes(p);
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < p.size(); ++i) (p.labels[i] ? pos : neg).push_back(p.scores[i]);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  auto at_or_above = [](const std::vector<double>& v, double t) {
    return static_cast<std::size_t>(v.end() - std::lower_bound(v.begin(), v.end(), t));
  };
  ThresholdChoice best;
  bool first = true;
  for (double t : candidate_thresholds(p)) {
    ConfusionMatrix m;
    m.tp = at_or_above(pos, t);
    m.fn = pos.size() - m.tp;
    m.fp = at_or_above(neg, t);
    m.tn = neg.size() - m.fp;
    const double g = m.g_mean();
    const bool better = first || g > best.g_mean ||
                        (g == best.g_mean && (m.specificity() > best.confusion.specificity() ||
                                              (m.specificity() == best.confusion.specificity() && t > best.threshold)));
    if (better) best = {t, m, g, false};
    first = false;
  }
  best.degenerate = best.g_mean == 0.0;
  return best;
}

/// Mann-Whitney AUC with midranks for ties.
inline double auc(const ScoredPredictions& p) {
  detail::require_both_classes(p);
  const std::size_t n = p.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p.scores[a] < p.scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && p.scores[idx[j]] == p.scores[idx[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (p.labels[idx[k]]) rank_sum += mid;
    i = j;
  }
  const double np = static_cast<double>(p.positives()), nn = static_cast<double>(n) - np;
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

struct CalibrationBin {
  double mean_score = 0.0;
  double frequency = 0.0;
  std::size_t count = 0;
};

/// Equal-count bins over rows sorted by score (ties keep input order); the
/// remainder goes one row each to the lowest bins.
inline std::vector<CalibrationBin> calibration_curve(const ScoredPredictions& p, std::size_t n_bins) {
  require(n_bins >= 2, "need at least two bins");
  require(n_bins <= p.size(), "more bins than rows");
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p.scores[a] < p.scores[b]; });
  const std::size_t base = p.size() / n_bins, extra = p.size() % n_bins;
  std::vector<CalibrationBin> out;
  std::size_t at = 0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    CalibrationBin bin;
    bin.count = base + (b < extra ? 1 : 0);
    double s = 0.0, y = 0.0;
    for (std::size_t k = 0; k < bin.count; ++k, ++at) {
      s += p.scores[idx[at]];
      y += p.labels[idx[at]];
    }
    bin.mean_score = s / static_cast<double>(bin.count);
    bin.frequency = y / static_cast<double>(bin.count);
    out.push_back(bin);
  }
  return out;
}

struct EvaluationReport {
  /// Where the threshold came from: "gmean-validation", "gmean-training" or "fixed".
  std::string threshold_source = "gmean-validation";
  std::size_t scored = 0;
  std::size_t excluded = 0;
  std::size_t positives = 0;
  ThresholdChoice choice;
  double auc = 0.0;
  std::vector<CalibrationBin> calibration;
};

inline EvaluationReport evaluate(const ScoredPredictions& p, std::size_t n_bins = 10) {
  EvaluationReport r;
  r.scored = p.size();
  r.excluded = p.excluded.size();
  r.positives = p.positives();
  r.choice = select_threshold_gmean(p);
  r.auc = auc(p);
  r.calibration = calibration_curve(p, std::min(n_bins, p.size()));
  return r;
}

/// Evaluates at a threshold chosen elsewhere (a fixed value or one optimized
/// on training data).
inline EvaluationReport evaluate_at(const ScoredPredictions& p, double threshold, std::string source,
                                    std::size_t n_bins = 10) {
  detail::require_both_classes(p);
  EvaluationReport r;
  r.threshold_source = std::move(source);
  r.scored = p.size();
  r.excluded = p.excluded.size();
  r.positives = p.positives();
  const auto m = confusion_at(p, threshold);
  r.choice = {threshold, m, m.g_mean(), m.g_mean() == 0.0};
  r.auc = auc(p);
  r.calibration = calibration_curve(p, std::min(n_bins, p.size()));
  return r;
}

inline nlohmann::json to_json(const ConfusionMatrix& m) {
  return {{"tn", m.tn},
          {"fp", m.fp},
          {"fn", m.fn},
          {"tp", m.tp},
          {"sensitivity", m.sensitivity()},
          {"specificity", m.specificity()},
          {"g_mean", m.g_mean()}};
}

inline nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : r.calibration)
    bins.push_back({{"mean_score", b.mean_score}, {"frequency", b.frequency}, {"count", b.count}});
  return {{"format", "crcbn.evaluation"},
          {"version", 1},
          {"scored_rows", r.scored},
          {"excluded_rows", r.excluded},
          {"positives", r.positives},
          {"threshold", r.choice.threshold},
          {"threshold_source", r.threshold_source},
          {"degenerate_threshold", r.choice.degenerate},
          {"confusion", to_json(r.choice.confusion)},
          {"auc", r.auc},
          {"calibration", bins}};
}

inline std::string render_evaluation_text(const EvaluationReport& r) {
  const auto& m = r.choice.confusion;
  std::ostringstream out;
  out << "scored rows " << r.scored << " (excluded " << r.excluded << "), positives " << r.positives << "\n";
  out << "threshold " << r.choice.threshold << " [" << r.threshold_source << "]"
      << (r.choice.degenerate ? " (degenerate)" : "") << "\n";
  out << "            pred 0      pred 1\n";
  out << "true 0  " << std::string(10 - std::min<std::size_t>(10, std::to_string(m.tn).size()), ' ') << m.tn
      << "  " << std::string(10 - std::min<std::size_t>(10, std::to_string(m.fp).size()), ' ') << m.fp << "\n";
  out << "true 1  " << std::string(10 - std::min<std::size_t>(10, std::to_string(m.fn).size()), ' ') << m.fn
      << "  " << std::string(10 - std::min<std::size_t>(10, std::to_string(m.tp).size()), ' ') << m.tp << "\n";
  out << "sensitivity " << m.sensitivity() << "  specificity " << m.specificity() << "  g-mean " << m.g_mean()
      << "\nAUC " << r.auc << "\ncalibration (mean score, frequency, n):\n";
  for (const auto& b : r.calibration) out << "  " << b.mean_score << "  " << b.frequency << "  " << b.count << "\n";
  return out.str();
}

}  // namespace crcbn
