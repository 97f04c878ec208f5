#pragma once

#include "gbs/types.hpp"

#include <string_view>

namespace gbs {

enum class LossKind { softmax_cross_entropy, softmax_focal };

struct LossSpec {
  LossKind kind = LossKind::softmax_focal;
  double gamma_focal = 2.0;

  static LossSpec cross_entropy() { return {LossKind::softmax_cross_entropy, 0.0}; }
  static LossSpec focal(double gamma) { return {LossKind::softmax_focal, gamma}; }
};

struct LossGrad {
  double loss = 0.0;
  Vector grad;  // d loss / d logits
};

// Classification loss over n+1 logits (background last) and its exact
// derivative with respect to every logit.
//
// Cross-entropy: -log p_c, gradient softmax(x) - onehot(c).
// Focal:         -(1 - p_c)^gamma log p_c.
//
// Throws InputError on non-finite logits or a label outside [0, n].
LossGrad loss_and_grad(const Vector& logits, ClassIndex label, const LossSpec& spec);

// Numerically stable softmax.
Vector softmax(const Vector& logits);

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

}  // namespace gbs
