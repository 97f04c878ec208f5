#include "gbs/sim/model.hpp"

#include "gbs/errors.hpp"

#include <cmath>
#include <string>

namespace gbs::sim {

LinearClassifier::LinearClassifier(std::size_t num_classes, std::size_t feature_dim)
    : weight_(Matrix::Zero(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(feature_dim))),
      bias_(Vector::Zero(static_cast<Eigen::Index>(num_classes))),
      momentum_weight_(weight_),
      momentum_bias_(bias_) {}

void LinearClassifier::init_random(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < weight_.rows(); ++i)
    for (Eigen::Index k = 0; k < weight_.cols(); ++k) weight_(i, k) = scale * normal(rng);
  bias_.setZero();
  momentum_weight_.setZero();
  momentum_bias_.setZero();
}

Matrix LinearClassifier::logits(const Matrix& features) const {
  Matrix out = features * weight_.transpose();
  out.rowwise() += bias_.transpose();
  return out;
}

Vector LinearClassifier::logits_one(const Eigen::Ref<const Vector>& x) const { return weight_ * x + bias_; }

void LinearClassifier::sgd_step(const Matrix& grad_weight, const Vector& grad_bias, const SgdOptions& opts) {
  momentum_weight_ = opts.momentum * momentum_weight_ + grad_weight + opts.weight_decay * weight_;
  momentum_bias_ = opts.momentum * momentum_bias_ + grad_bias + opts.weight_decay * bias_;
  weight_ -= opts.lr * momentum_weight_;
  bias_ -= opts.lr * momentum_bias_;
}

void teacher_ema_update(TeacherState& teacher, const LinearClassifier& student) {
  auto& t = teacher.model;
  if (t.weight().rows() != student.weight().rows() || t.weight().cols() != student.weight().cols()) {
    throw ContractError("teacher_ema_update: teacher and student shapes differ");
  }
  const double eta = teacher.eta_p;
  t.weight() = eta * t.weight() + (1.0 - eta) * student.weight();
  t.bias() = eta * t.bias() + (1.0 - eta) * student.bias();
}

StepResult weighted_loss_and_grad(const LinearClassifier& model, const TrainingBatch& batch, const StepWeights& weights,
                                  const LossSpec& loss) {
  const auto rows = static_cast<Eigen::Index>(batch.size());
  if (batch.features.rows() != rows || batch.source.size() != batch.size()) {
    throw InputError("student_step: batch features, labels and source disagree");
  }
  const auto n1 = model.bias().size();
  if (weights.labeled.size() != n1 || weights.unlabeled.size() != n1) {
    throw InputError("student_step: weight vectors must have n+1 entries");
  }

  StepResult r;
  r.proposals.logits = model.logits(batch.features);
  r.proposals.labels = batch.labels;
  r.proposals.source = batch.source;
  r.raw = batch_loss_and_grad(r.proposals, loss);

  const std::size_t denom = batch.num_images ? batch.num_images : batch.size();
  const double norm = denom > 0 ? 1.0 / static_cast<double>(denom) : 0.0;
  Matrix scaled = r.raw.grads;
  for (Eigen::Index j = 0; j < rows; ++j) {
    const auto idx = static_cast<std::size_t>(j);
    const ClassIndex c = batch.labels[idx];
    const bool labeled = batch.source[idx] == ProposalSource::labeled;
    const double wt = labeled ? weights.labeled[c] : weights.unlabeled[c];
    const double term = wt * r.raw.losses[j] * norm;
    (labeled ? r.labeled_loss : r.unlabeled_loss) += term;
    scaled.row(j) *= wt * norm;
  }
  r.total_loss = r.labeled_loss + r.unlabeled_loss;
  r.grad_weight = scaled.transpose() * batch.features;
  r.grad_bias = scaled.colwise().sum().transpose();
  return r;
}

StepResult student_step(LinearClassifier& model, const TrainingBatch& batch, const StepWeights& weights,
                        const LossSpec& loss, const SgdOptions& sgd) {
  StepResult r = weighted_loss_and_grad(model, batch, weights, loss);
  if (!std::isfinite(r.total_loss) || !r.grad_weight.allFinite()) {
    throw NumericError("student_step: non-finite loss (" + std::to_string(r.total_loss) + ")");
  }
  model.sgd_step(r.grad_weight, r.grad_bias, sgd);
  return r;
}

std::vector<Prediction> predict(const LinearClassifier& model, const Matrix& features) {
  const Matrix logits = model.logits(features);
  std::vector<Prediction> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index j = 0; j < logits.rows(); ++j) {
    const Vector p = softmax(logits.row(j).transpose());
    Eigen::Index best = 0;
    p.head(p.size() - 1).maxCoeff(&best);
    out[static_cast<std::size_t>(j)].cls = static_cast<ClassIndex>(best);
    out[static_cast<std::size_t>(j)].score = p[best];
    out[static_cast<std::size_t>(j)].background_score = p[p.size() - 1];
  }
  return out;
}

std::vector<ClassIndex> classify(const LinearClassifier& model, const Matrix& features) {
  const Matrix logits = model.logits(features);
  std::vector<ClassIndex> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index j = 0; j < logits.rows(); ++j) {
    Eigen::Index best = 0;
    logits.row(j).maxCoeff(&best);
    out[static_cast<std::size_t>(j)] = static_cast<ClassIndex>(best);
  }
  return out;
}

}  // namespace gbs::sim
