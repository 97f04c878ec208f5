#include "gbs/loss.hpp"

#include "gbs/errors.hpp"

#include <cmath>
#include <string>

namespace gbs {

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

LossGrad loss_and_grad(const Vector& logits, ClassIndex label, const LossSpec& spec) {
  const auto n1 = logits.size();
  if (n1 < 2) throw InputError("loss_and_grad: need at least two logits");
  if (label < 0 || label >= n1) {
    throw InputError("loss_and_grad: label " + std::to_string(label) + " outside [0, " + std::to_string(n1 - 1) + "]");
  }
  if (!logits.allFinite()) throw InputError("loss_and_grad: non-finite logits");

  const double m = logits.maxCoeff();
  const Vector shifted = logits.array() - m;
  const Vector e = shifted.array().exp().matrix();
  const double z = e.sum();
  const Vector p = e / z;
  const double log_q = shifted[label] - std::log(z);

  LossGrad out;
  out.grad = p;
  out.grad[label] -= 1.0;

  if (spec.kind == LossKind::softmax_cross_entropy || spec.gamma_focal == 0.0) {
    out.loss = -log_q;
    return out;
  }
  if (!(spec.gamma_focal > 0.0)) throw InputError("loss_and_grad: gamma_focal must be nonnegative");

  // 1 - p_c summed from the other classes keeps precision when p_c -> 1.
  const double one_minus_q = p.sum() - p[label];
  const double q = p[label];
  const double g = spec.gamma_focal;
  const double mod = std::pow(one_minus_q, g);
  out.loss = -mod * log_q;

  // d f / d x_i = [g (1-q)^(g-1) q log q - (1-q)^g] (delta_ic - p_i)
  //            = [(1-q)^g - g (1-q)^(g-1) q log q] (p_i - delta_ic)
  double tail = 0.0;
  if (one_minus_q > 0.0) tail = g * std::pow(one_minus_q, g - 1.0) * q * log_q;
  out.grad *= (mod - tail);
  return out;
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::softmax_cross_entropy:
      return "softmax-cross-entropy";
    case LossKind::softmax_focal:
      return "softmax-focal";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "softmax-cross-entropy" || name == "ce") return LossKind::softmax_cross_entropy;
  if (name == "softmax-focal" || name == "focal") return LossKind::softmax_focal;
  throw InputError("unknown loss kind '" + std::string(name) + "'");
}

}  // namespace gbs
