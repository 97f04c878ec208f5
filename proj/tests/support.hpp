#pragma once

#include "gbs/types.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

namespace gbs::test {

inline std::filesystem::path data_dir() { return GBS_TEST_DATA_DIR; }

// Fresh empty directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::path(GBS_TEST_SCRATCH_DIR) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// Central difference of f along each coordinate of x.
inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    g[i] = (f(up) - f(dn)) / (2.0 * h);
  }
  return g;
}

// |a - b| <= rel * max(|a|, |b|) + abs.
inline bool close(double a, double b, double rel, double abs = 0.0) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs;
}

// Diagonally dominant balance system with a strictly positive solution:
// off-diagonals in [0.5, 1], diagonal = -(row off-diagonal sum) * U(1.05, 1.5).
inline Matrix dominant_system(std::mt19937_64& rng, Eigen::Index n1) {
  std::uniform_real_distribution<double> off(0.5, 1.0), boost(1.05, 1.5);
  Matrix g(n1, n1);
  for (Eigen::Index i = 0; i < n1; ++i) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < n1; ++k) {
      if (k == i) continue;
      g(i, k) = off(rng);
      s += g(i, k);
    }
    g(i, i) = -s * boost(rng);
  }
  return g;
}

}  // namespace gbs::test
