#include "gbs/thresholds.hpp"

#include "gbs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gbs {

std::string_view to_string(ThresholdMode mode) {
  switch (mode) {
    case ThresholdMode::fixed:
      return "fixed";
    case ThresholdMode::gbt:
      return "gbt";
    case ThresholdMode::score:
      return "score";
    case ThresholdMode::combined:
      return "combined";
  }
  return "?";
}

ThresholdMode parse_threshold_mode(std::string_view name) {
  if (name == "fixed") return ThresholdMode::fixed;
  if (name == "gbt") return ThresholdMode::gbt;
  if (name == "score") return ThresholdMode::score;
  if (name == "combined") return ThresholdMode::combined;
  throw InputError("unknown threshold mode '" + std::string(name) + "' (fixed|gbt|score|combined)");
}

ThresholdTable ThresholdTable::fixed(std::size_t num_foreground, double theta_base) {
  ThresholdTable t;
  t.theta_base = theta_base;
  t.theta_p = Vector::Constant(static_cast<Eigen::Index>(num_foreground), theta_base);
  t.theta = t.theta_p;
  return t;
}

Vector gbt_thresholds(const Vector& foreground_weights, double theta_base, double theta_min) {
  if (!(theta_base > 0.0 && theta_base < 1.0)) throw InputError("gbt_thresholds: theta_base must lie in (0, 1)");
  Vector out(foreground_weights.size());
  for (Eigen::Index i = 0; i < foreground_weights.size(); ++i) {
    const double w = foreground_weights[i];
    if (!(w > 0.0)) throw InputError("gbt_thresholds: weight of class " + std::to_string(i) + " is not positive");
    out[i] = std::max(theta_min, std::min(theta_base, theta_base / w));
  }
  return out;
}

ScoreHistory::ScoreHistory(std::size_t num_foreground, std::size_t window)
    : window_(window), per_class_(num_foreground) {
  if (window == 0) throw InputError("ScoreHistory: window must be positive");
}

void ScoreHistory::push(ClassIndex cls, double score) {
  if (cls < 0 || static_cast<std::size_t>(cls) >= per_class_.size()) {
    throw InputError("ScoreHistory: class " + std::to_string(cls) + " out of range");
  }
  auto& q = per_class_[static_cast<std::size_t>(cls)];
  q.push_back(score);
  if (q.size() > window_) q.pop_front();
}

const std::deque<double>& ScoreHistory::scores(ClassIndex cls) const {
  return per_class_.at(static_cast<std::size_t>(cls));
}

double sample_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("sample_quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InputError("sample_quantile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Vector score_thresholds(const ScoreHistory& history, const ThresholdOptions& opts) {
  Vector out(static_cast<Eigen::Index>(history.num_classes()));
  for (std::size_t i = 0; i < history.num_classes(); ++i) {
    const auto& s = history.scores(static_cast<ClassIndex>(i));
    double theta = opts.theta_base;
    if (!s.empty() && s.size() >= opts.min_samples) {
      theta = sample_quantile(std::vector<double>(s.begin(), s.end()), opts.quantile);
      theta = std::clamp(theta, opts.theta_min, opts.theta_base);
    }
    out[static_cast<Eigen::Index>(i)] = theta;
  }
  return out;
}

Vector combine(const Vector& theta_p, const std::optional<Vector>& theta_c) {
  if (!theta_c) return theta_p;
  if (theta_c->size() != theta_p.size()) throw InputError("combine: threshold vectors differ in length");
  return theta_p.cwiseMin(*theta_c);
}

ThresholdTable make_threshold_table(ThresholdMode mode, const Vector& foreground_weights, const ScoreHistory& history,
                                    const ThresholdOptions& opts) {
  const auto n = static_cast<std::size_t>(foreground_weights.size());
  ThresholdTable t = ThresholdTable::fixed(n, opts.theta_base);
  switch (mode) {
    case ThresholdMode::fixed:
      break;
    case ThresholdMode::gbt:
      t.theta_p = gbt_thresholds(foreground_weights, opts.theta_base, opts.theta_min);
      break;
    case ThresholdMode::score:
      t.theta_c = score_thresholds(history, opts);
      break;
    case ThresholdMode::combined:
      t.theta_p = gbt_thresholds(foreground_weights, opts.theta_base, opts.theta_min);
      t.theta_c = score_thresholds(history, opts);
      break;
  }
  t.theta = combine(t.theta_p, t.theta_c);
  return t;
}

std::vector<PseudoLabel> filter_pseudo_labels(std::span<const Prediction> predictions, const ThresholdTable& table) {
  const auto n = static_cast<ClassIndex>(table.size());
  std::vector<PseudoLabel> kept;
  for (std::size_t j = 0; j < predictions.size(); ++j) {
    const Prediction& p = predictions[j];
    if (p.cls < 0 || p.cls > n) throw InputError("filter_pseudo_labels: class " + std::to_string(p.cls) + " unknown");
    if (p.cls == n) continue;  // background
    if (p.score >= table.theta[p.cls]) kept.push_back({p.cls, p.score, p.box, j});
  }
  return kept;
}

PseudoLabelSet filter_pseudo_labels(const std::vector<std::vector<Prediction>>& per_image, const ThresholdTable& table) {
  PseudoLabelSet out;
  out.reserve(per_image.size());
  for (const auto& preds : per_image) out.push_back(filter_pseudo_labels(std::span<const Prediction>(preds), table));
  return out;
}

}  // namespace gbs
