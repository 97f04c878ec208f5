#include "gbs/weight_solver.hpp"

#include "gbs/errors.hpp"

#include <algorithm>
#include <cmath>

namespace gbs {

Vector weights_from_logits(const Vector& a) {
  const double n1 = static_cast<double>(a.size());
  const Vector e = (a.array() - a.maxCoeff()).exp().matrix();
  return n1 * e / e.sum();
}

Vector smooth_labeled_weights(const Vector& w, double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw InputError("smooth_labeled_weights: beta must lie in (0, 1]");
  if ((w.array() <= 0.0).any()) throw InputError("smooth_labeled_weights: weights must be positive");
  return w.array().pow(beta).matrix();
}

ClassWeights ClassWeights::from_logits(Vector a, double beta) {
  if (!a.allFinite()) throw NumericError("ClassWeights: non-finite logits");
  ClassWeights cw;
  cw.beta = beta;
  cw.w = weights_from_logits(a);
  cw.w_labeled = smooth_labeled_weights(cw.w, beta);
  cw.a = std::move(a);
  return cw;
}

ClassWeights ClassWeights::uniform(std::size_t num_classes, double beta) {
  return from_logits(Vector::Zero(static_cast<Eigen::Index>(num_classes)), beta);
}

JacobiTarget jacobi_target(const Matrix& ema, const Vector& w, const SolverOptions& opts) {
  const auto n1 = ema.rows();
  if (ema.cols() != n1 || w.size() != n1) throw InputError("jacobi_target: shape mismatch");
  if (n1 < 2) throw InputError("jacobi_target: need at least two classes");
  if (!ema.allFinite()) throw NumericError("jacobi_target: non-finite gradient matrix");

  JacobiTarget t;
  t.unclamped.resize(n1);
  double fg_sum = 0.0;
  for (Eigen::Index i = 0; i + 1 < n1; ++i) {
    const double diag = ema(i, i);
    if (std::abs(diag) <= opts.diag_floor) {
      t.unclamped[i] = w[i];
    } else {
      const double off = ema.row(i).dot(w) - diag * w[i];
      t.unclamped[i] = -off / diag;
    }
    fg_sum += t.unclamped[i];
  }
  t.unclamped[n1 - 1] = static_cast<double>(n1) - fg_sum;

  const double hi = static_cast<double>(n1) * opts.w_max_fraction;
  t.w_hat = t.unclamped.cwiseMax(opts.w_min).cwiseMin(hi);
  return t;
}

double align_loss(const Vector& a, const JacobiTarget& target) {
  if (a.size() != target.w_hat.size()) throw InputError("align_loss: shape mismatch");
  return (target.w_hat.array().log() - a.array()).square().mean();
}

ClassWeights align_step(const ClassWeights& cw, const JacobiTarget& target, double lr_align) {
  if (cw.a.size() != target.w_hat.size()) throw InputError("align_step: shape mismatch");
  if ((target.w_hat.array() <= 0.0).any()) throw ContractError("align_step: nonpositive clamped target");
  const double n1 = static_cast<double>(cw.a.size());
  const Vector grad = (2.0 / n1) * (cw.a - target.w_hat.array().log().matrix());
  return ClassWeights::from_logits(cw.a - lr_align * grad, cw.beta);
}

Vector solve_direct(const Matrix& ema) {
  const auto n1 = ema.rows();
  if (ema.cols() != n1 || n1 < 2) throw InputError("solve_direct: matrix must be square with at least 2 rows");
  if (!ema.allFinite()) throw NumericError("solve_direct: non-finite gradient matrix");
  Matrix a = ema;
  a.row(n1 - 1).setOnes();
  Vector b = Vector::Zero(n1);
  b[n1 - 1] = static_cast<double>(n1);
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw SolverError("solve_direct: balance system is singular");
  return lu.solve(b);
}

Vector balance_residuals(const Matrix& ema, const Vector& w) {
  const auto n1 = ema.rows();
  if (ema.cols() != n1 || w.size() != n1) throw InputError("balance_residuals: shape mismatch");
  Vector r(n1);
  for (Eigen::Index i = 0; i + 1 < n1; ++i) r[i] = ema.row(i).dot(w);
  r[n1 - 1] = w.sum() - static_cast<double>(n1);
  return r;
}

IterativeSolution solve_iterative(const Matrix& ema, std::size_t max_steps, const SolverOptions& opts, double tol) {
  IterativeSolution sol;
  const auto n1 = ema.rows();
  sol.weights = ClassWeights::uniform(static_cast<std::size_t>(n1), opts.beta);
  sol.cold_start = true;
  for (Eigen::Index i = 0; i + 1 < n1; ++i) {
    if (std::abs(ema(i, i)) > opts.diag_floor) sol.cold_start = false;
  }
  for (; sol.steps < max_steps; ++sol.steps) {
    const JacobiTarget target = jacobi_target(ema, sol.weights.w, opts);
    const double gap = (sol.weights.a - target.w_hat.array().log().matrix()).cwiseAbs().maxCoeff();
    if (gap <= tol) {
      sol.converged = true;
      break;
    }
    sol.weights = align_step(sol.weights, target, opts.lr_align);
  }
  return sol;
}

}  // namespace gbs
