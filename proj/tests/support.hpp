#pragma once

// Shared test helpers: a deterministic RNG, random expression generation, and
// a central finite-difference gradient oracle that only uses double eval.

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "polarred/expr.hpp"

namespace polarred::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_); }
  bool coin() { return index(2) == 0; }

 private:
  std::mt19937_64 gen_;
};

/// Random expression over `vars` that stays in-domain on bounded inputs:
/// no log/sqrt/division, so every point is admissible.
inline std::string random_smooth_expr(Rng& rng, const std::vector<std::string>& vars, int depth) {
  if (depth <= 0 || rng.index(4) == 0) {
    if (rng.coin()) return vars[rng.index(vars.size())];
    return std::to_string(rng.index(5) + 1);
  }
  switch (rng.index(8)) {
    case 0: return "(" + random_smooth_expr(rng, vars, depth - 1) + " + " + random_smooth_expr(rng, vars, depth - 1) + ")";
    case 1: return "(" + random_smooth_expr(rng, vars, depth - 1) + " - " + random_smooth_expr(rng, vars, depth - 1) + ")";
    case 2: return "(" + random_smooth_expr(rng, vars, depth - 1) + "*" + random_smooth_expr(rng, vars, depth - 1) + ")";
    case 3: return "sin(" + random_smooth_expr(rng, vars, depth - 1) + ")";
    case 4: return "cos(" + random_smooth_expr(rng, vars, depth - 1) + ")";
    case 5: return "exp(" + random_smooth_expr(rng, vars, depth - 1) + "/4)";
    case 6: return "(" + random_smooth_expr(rng, vars, depth - 1) + ")^2";
    default: return "-" + random_smooth_expr(rng, vars, depth - 1);
  }
}

/// Central differences with step h, double evaluation only.
inline Eigen::VectorXd fd_gradient(const ScalarField& f, const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fp = f(std::span<const double>(xp.data(), static_cast<std::size_t>(xp.size())));
    const double fm = f(std::span<const double>(xm.data(), static_cast<std::size_t>(xm.size())));
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

}  // namespace polarred::testing
