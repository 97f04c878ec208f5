#pragma once

#include "gbs/sim/model.hpp"
#include "gbs/sim/task.hpp"
#include "gbs/thresholds.hpp"

#include <optional>
#include <vector>

namespace gbs::sim {

// Per-class pseudo-label quality against the hidden ground truth. An entry is
// nullopt when its denominator is zero.
struct PseudoLabelQuality {
  std::vector<std::optional<double>> precision;
  std::vector<std::optional<double>> recall;
  std::vector<std::size_t> count;    // pseudo labels emitted per class
  std::vector<std::size_t> correct;  // of which match the hidden class
  std::vector<std::size_t> truth;    // true instances per class in the pool
};

PseudoLabelQuality pseudo_label_pr(const PseudoLabelSet& pseudo, const ImageSet& pool, std::size_t num_foreground);

struct AccuracyReport {
  double overall = 0.0;  // mean of per-class accuracy
  std::vector<double> per_class;
  double majority_mean = 0.0;
  double minority_mean = 0.0;
};

// Per-class accuracy of argmax predictions over n+1 classes; majority are the
// first n_majority classes. Throws InputError if a class has no eval sample.
AccuracyReport accuracy_from_predictions(std::span<const ClassIndex> predicted, std::span<const ClassIndex> truth,
                                         std::size_t num_foreground, std::size_t n_majority);

AccuracyReport eval_balanced_accuracy(const LinearClassifier& model, const EvalSet& eval, std::size_t num_foreground,
                                      std::size_t n_majority);

// Mean of the defined entries over [begin, end); nullopt if none is defined.
std::optional<double> mean_defined(const std::vector<std::optional<double>>& v, std::size_t begin, std::size_t end);

}  // namespace gbs::sim
