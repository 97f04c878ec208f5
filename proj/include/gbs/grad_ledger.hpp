#pragma once

#include "gbs/loss.hpp"
#include "gbs/types.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace gbs {

enum class ProposalSource : unsigned char { labeled, unlabeled };

// Classifier outputs for one training batch. Row j of `logits` belongs to
// proposal j, whose (pseudo) ground-truth class is labels[j].
struct ProposalBatch {
  Matrix logits;
  std::vector<ClassIndex> labels;
  std::vector<ProposalSource> source;

  std::size_t size() const { return labels.size(); }
  std::size_t num_classes() const { return static_cast<std::size_t>(logits.cols()); }

  // Throws InputError when shapes disagree, a label is out of range or a
  // logit is non-finite.
  void validate() const;
};

struct BatchGrads {
  Vector losses;  // per proposal, unweighted
  Matrix grads;   // row j = d f(x_j) / d x_j
};

BatchGrads batch_loss_and_grad(const ProposalBatch& batch, const LossSpec& spec);

// Class-wise positive/negative gradient statistics.
//
// raw(i, k) sums d f / d x^i over the proposals labelled k in the current
// batch. The diagonal holds the positive gradients of each class and the
// off-diagonal entries of row i the negative gradients class i receives from
// the other classes. ema() is the moving average across batches.
class GradientLedger {
public:
  GradientLedger(std::size_t num_classes, double eta_g);

  std::size_t num_classes() const { return static_cast<std::size_t>(raw_.rows()); }
  double eta_g() const { return eta_g_; }

  const Matrix& raw() const { return raw_; }
  const Matrix& ema() const { return ema_; }

  // Adds one proposal's gradient to column `label`.
  void add(ClassIndex label, const Vector& grad);

  // Accumulates every proposal of the batch in batch order. `grads` must
  // hold one row per proposal with num_classes() columns.
  void accumulate(std::span<const ClassIndex> labels, const Matrix& grads);

  // ema <- eta_g * ema + (1 - eta_g) * raw, then raw is cleared.
  void ema_update();

  void set_ema(Matrix ema);
  void reset();

private:
  double eta_g_;
  Matrix raw_;
  Matrix ema_;
};

// Plain-text matrix dump: one row per line, space separated, 17 significant
// digits so values round-trip exactly.
void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);

}  // namespace gbs
