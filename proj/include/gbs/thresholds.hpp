#pragma once

#include "gbs/types.hpp"

#include <array>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace gbs {

enum class ThresholdMode { fixed, gbt, score, combined };

std::string_view to_string(ThresholdMode mode);
ThresholdMode parse_threshold_mode(std::string_view name);

struct ThresholdOptions {
  double theta_base = 0.9;
  double theta_min = 0.05;
  double quantile = 0.95;
  std::size_t window = 10000;
  std::size_t min_samples = 20;
};

// Per-class pseudo-label thresholds over the n foreground classes.
struct ThresholdTable {
  double theta_base = 0.9;
  Vector theta_p;
  std::optional<Vector> theta_c;
  Vector theta;

  std::size_t size() const { return static_cast<std::size_t>(theta.size()); }
  static ThresholdTable fixed(std::size_t num_foreground, double theta_base);
};

// theta_p_i = max(theta_min, min(theta_base, theta_base / w_i)).
Vector gbt_thresholds(const Vector& foreground_weights, double theta_base, double theta_min = 0.05);

// Rolling window of recent teacher scores per foreground class.
class ScoreHistory {
public:
  ScoreHistory(std::size_t num_foreground, std::size_t window);

  void push(ClassIndex cls, double score);
  const std::deque<double>& scores(ClassIndex cls) const;
  std::size_t num_classes() const { return per_class_.size(); }

private:
  std::size_t window_;
  std::vector<std::deque<double>> per_class_;
};

// Linear-interpolated quantile of an unsorted sample.
double sample_quantile(std::vector<double> values, double q);

// theta_c_i = quantile of class i's history clamped to [theta_min, theta_base];
// theta_base when the class has fewer than min_samples scores.
Vector score_thresholds(const ScoreHistory& history, const ThresholdOptions& opts);

// Elementwise minimum; returns theta_p when theta_c is absent.
Vector combine(const Vector& theta_p, const std::optional<Vector>& theta_c);

// Builds the table for a mode. `foreground_weights` feeds the gradient-based
// component and `history` the score-based one.
ThresholdTable make_threshold_table(ThresholdMode mode, const Vector& foreground_weights, const ScoreHistory& history,
                                    const ThresholdOptions& opts);

using Box = std::array<double, 4>;

// Teacher output for one proposal: a class (n means background) and the
// softmax score of that class.
struct Prediction {
  ClassIndex cls = 0;
  double score = 0.0;
  Box box{};
  double background_score = 0.0;  // teacher probability of the background class
};

struct PseudoLabel {
  ClassIndex cls = 0;
  double score = 0.0;
  Box box{};
  std::size_t proposal = 0;  // index of the source prediction within its image
};

// Per image, the pseudo labels kept for it.
using PseudoLabelSet = std::vector<std::vector<PseudoLabel>>;

// Keeps exactly the foreground predictions with score >= theta[cls].
std::vector<PseudoLabel> filter_pseudo_labels(std::span<const Prediction> predictions, const ThresholdTable& table);
PseudoLabelSet filter_pseudo_labels(const std::vector<std::vector<Prediction>>& per_image, const ThresholdTable& table);

}  // namespace gbs
