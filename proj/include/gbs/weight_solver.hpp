#pragma once

#include "gbs/types.hpp"

#include <cstddef>

namespace gbs {

struct SolverOptions {
  // |G~_ii| at or below this means class i has produced no positive
  // gradient yet; its target holds the current weight.
  double diag_floor = 1e-8;
  // Targets are clamped to [w_min, (n+1) * w_max_fraction] before the log.
  double w_min = 1e-3;
  double w_max_fraction = 0.999;
  double lr_align = 0.01;
  double beta = 0.5;
};

// Learnable class weights. w = (n+1) * softmax(a) and w_labeled = w^beta.
struct ClassWeights {
  Vector a;
  Vector w;
  Vector w_labeled;
  double beta = 0.5;

  static ClassWeights uniform(std::size_t num_classes, double beta);
  static ClassWeights from_logits(Vector a, double beta);

  std::size_t size() const { return static_cast<std::size_t>(a.size()); }
};

struct JacobiTarget {
  Vector w_hat;      // clamped, used by the alignment loss
  Vector unclamped;  // raw Jacobi sweep; background = (n+1) - sum(foreground)
};

// w_i = (n+1) exp(a_i) / sum_j exp(a_j), max-subtracted.
Vector weights_from_logits(const Vector& a);

// One Jacobi sweep over the foreground rows of the averaged gradient matrix,
// w_hat_i = -sum_{k != i} w_k G~_ik / G~_ii, with the background entry fixed
// by the scale constraint sum(w_hat) = n+1.
JacobiTarget jacobi_target(const Matrix& ema, const Vector& w, const SolverOptions& opts = {});

// (1/(n+1)) sum_i (log w_hat_i - a_i)^2
double align_loss(const Vector& a, const JacobiTarget& target);

// One gradient-descent step of the alignment loss on the logits a, then w and
// w_labeled are recomputed.
ClassWeights align_step(const ClassWeights& cw, const JacobiTarget& target, double lr_align);

Vector smooth_labeled_weights(const Vector& w, double beta);

// Direct solution of the balance system: foreground rows w . G~_i = 0 and the
// background row replaced by sum(w) = n+1. Throws SolverError when singular.
Vector solve_direct(const Matrix& ema);

// Foreground entries: w . G~_i (zero when row i is balanced).
// Background entry: sum(w) - (n+1).
Vector balance_residuals(const Matrix& ema, const Vector& w);

struct IterativeSolution {
  ClassWeights weights;
  std::size_t steps = 0;
  bool converged = false;
  // Every diagonal is at or below the floor, so nothing was learned.
  bool cold_start = false;
};

// Repeats jacobi_target + align_step from a = 0 for at most max_steps, stopping
// early once max_i |a_i - log w_hat_i| <= tol.
IterativeSolution solve_iterative(const Matrix& ema, std::size_t max_steps, const SolverOptions& opts = {},
                                  double tol = 0.0);

}  // namespace gbs
