#include "gbs/sim/metrics.hpp"

#include "gbs/errors.hpp"

#include <string>

namespace gbs::sim {

PseudoLabelQuality pseudo_label_pr(const PseudoLabelSet& pseudo, const ImageSet& pool, std::size_t num_foreground) {
  if (pseudo.size() != pool.num_images()) throw InputError("pseudo_label_pr: pseudo-label set does not match the pool");
  PseudoLabelQuality q;
  q.count.assign(num_foreground, 0);
  q.correct.assign(num_foreground, 0);
  q.truth = instance_counts(pool, num_foreground);
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    for (const auto& pl : pseudo[i]) {
      const auto c = static_cast<std::size_t>(pl.cls);
      ++q.count[c];
      if (pool.labels[static_cast<std::size_t>(pool.row(i, pl.proposal))] == pl.cls) ++q.correct[c];
    }
  }
  q.precision.resize(num_foreground);
  q.recall.resize(num_foreground);
  for (std::size_t c = 0; c < num_foreground; ++c) {
    if (q.count[c]) q.precision[c] = static_cast<double>(q.correct[c]) / static_cast<double>(q.count[c]);
    if (q.truth[c]) q.recall[c] = static_cast<double>(q.correct[c]) / static_cast<double>(q.truth[c]);
  }
  return q;
}

AccuracyReport accuracy_from_predictions(std::span<const ClassIndex> predicted, std::span<const ClassIndex> truth,
                                         std::size_t num_foreground, std::size_t n_majority) {
  if (predicted.size() != truth.size()) throw InputError("accuracy: prediction and truth lengths differ");
  if (n_majority == 0 || n_majority >= num_foreground) throw InputError("accuracy: need majority and minority classes");
  std::vector<std::size_t> total(num_foreground, 0), hit(num_foreground, 0);
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const auto c = static_cast<std::size_t>(truth[j]);
    if (c >= num_foreground) throw InputError("accuracy: eval labels must be foreground classes");
    ++total[c];
    if (predicted[j] == truth[j]) ++hit[c];
  }
  AccuracyReport r;
  r.per_class.resize(num_foreground);
  for (std::size_t c = 0; c < num_foreground; ++c) {
    if (total[c] == 0) throw InputError("accuracy: class " + std::to_string(c) + " has no eval samples");
    r.per_class[c] = static_cast<double>(hit[c]) / static_cast<double>(total[c]);
  }
  double all = 0.0, maj = 0.0, min = 0.0;
  for (std::size_t c = 0; c < num_foreground; ++c) {
    all += r.per_class[c];
    (c < n_majority ? maj : min) += r.per_class[c];
  }
  r.overall = all / static_cast<double>(num_foreground);
  r.majority_mean = maj / static_cast<double>(n_majority);
  r.minority_mean = min / static_cast<double>(num_foreground - n_majority);
  return r;
}

AccuracyReport eval_balanced_accuracy(const LinearClassifier& model, const EvalSet& eval, std::size_t num_foreground,
                                      std::size_t n_majority) {
  const auto predicted = classify(model, eval.features);
  return accuracy_from_predictions(predicted, eval.labels, num_foreground, n_majority);
}

std::optional<double> mean_defined(const std::vector<std::optional<double>>& v, std::size_t begin, std::size_t end) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = begin; i < end && i < v.size(); ++i) {
    if (v[i]) {
      sum += *v[i];
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace gbs::sim
