#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sofim/problems.hpp"

namespace sofim::problems {

/// Central differences (f(w + h e_i) - f(w - h e_i)) / 2h for every coordinate.
GradientVector finite_difference_gradient(const Problem& problem, const Vector& w, Batch batch,
                                          double step = 1e-5);

/// |a - b| / max(|a|, |b|), with a floor of 1e-12 on the denominator.
double relative_error(const Vector& a, const Vector& b);

struct GradCheckResult {
  std::string problem;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  int points = 0;

  bool passed() const noexcept { return max_relative_error <= tolerance; }
};

/// Finite-difference suite over the built-in problems (quadratic, logistic,
/// softmax, MLP-tanh, MLP-ReLU) at `points` random parameter vectors each.
/// ReLU points are redrawn until no hidden pre-activation lies within 1e-3 of
/// the kink.
std::vector<GradCheckResult> run_gradient_checks(std::uint64_t seed, int points = 20);

}  // namespace sofim::problems
