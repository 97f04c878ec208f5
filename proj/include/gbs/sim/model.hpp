#pragma once

#include "gbs/grad_ledger.hpp"
#include "gbs/loss.hpp"
#include "gbs/thresholds.hpp"
#include "gbs/types.hpp"

#include <random>

namespace gbs::sim {

struct SgdOptions {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

// Linear proposal classifier, logits = W x + b, trained with momentum SGD.
class LinearClassifier {
public:
  LinearClassifier() = default;
  LinearClassifier(std::size_t num_classes, std::size_t feature_dim);

  void init_random(std::mt19937_64& rng, double scale);

  Matrix logits(const Matrix& features) const;  // one row per feature row
  Vector logits_one(const Eigen::Ref<const Vector>& x) const;

  const Matrix& weight() const { return weight_; }
  const Vector& bias() const { return bias_; }
  Matrix& weight() { return weight_; }
  Vector& bias() { return bias_; }

  // p <- p - lr * buf, buf <- momentum * buf + grad + weight_decay * p.
  void sgd_step(const Matrix& grad_weight, const Vector& grad_bias, const SgdOptions& opts);

private:
  Matrix weight_;
  Vector bias_;
  Matrix momentum_weight_;
  Vector momentum_bias_;
};

// Teacher parameters track the student by an exponential moving average.
struct TeacherState {
  LinearClassifier model;
  double eta_p = 0.9995;
};

void teacher_ema_update(TeacherState& teacher, const LinearClassifier& student);

// Per-class loss weights for one step. Labeled proposals of class c are
// weighted by labeled[c] and unlabeled ones by unlabeled[c].
struct StepWeights {
  Vector labeled;
  Vector unlabeled;
};

// Proposals of one optimizer step: features plus (pseudo) labels and their
// origin.
struct TrainingBatch {
  Matrix features;
  std::vector<ClassIndex> labels;
  std::vector<ProposalSource> source;
  std::size_t num_images = 0;  // loss normalizer; 0 means one per proposal

  std::size_t size() const { return labels.size(); }
};

struct StepResult {
  double labeled_loss = 0.0;    // weighted, per image
  double unlabeled_loss = 0.0;  // weighted, per image
  double total_loss = 0.0;
  ProposalBatch proposals;      // logits the step was computed from
  BatchGrads raw;               // unweighted per-proposal loss and gradient
  Matrix grad_weight;
  Vector grad_bias;
};

// Weighted classification loss of the batch and its parameter gradient:
// sum_j weight(c_j, source_j) f(x_j) / num_images.
StepResult weighted_loss_and_grad(const LinearClassifier& model, const TrainingBatch& batch, const StepWeights& weights,
                                  const LossSpec& loss);

// weighted_loss_and_grad followed by one optimizer step. Throws NumericError
// when the loss is not finite.
StepResult student_step(LinearClassifier& model, const TrainingBatch& batch, const StepWeights& weights,
                        const LossSpec& loss, const SgdOptions& sgd);

// Teacher predictions for proposals: the highest-scoring foreground class and
// its softmax probability over all n+1 classes. Boxes are inert payload.
std::vector<Prediction> predict(const LinearClassifier& model, const Matrix& features);

// Argmax over all n+1 classes (background included).
std::vector<ClassIndex> classify(const LinearClassifier& model, const Matrix& features);

}  // namespace gbs::sim
