#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace gbs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Class indices are zero-based. For a problem with n foreground classes the
// foreground classes are 0..n-1 and the background class is n, so every
// per-class vector that includes the background has n+1 entries.
using ClassIndex = int;

inline ClassIndex background_index(std::size_t num_foreground) {
  return static_cast<ClassIndex>(num_foreground);
}

}  // namespace gbs
