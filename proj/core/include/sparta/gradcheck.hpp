#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sparta/autograd.hpp"

namespace sparta {

/// Builds a scalar loss inside the given graph, reading parameters through
/// `graph.param(...)`. Must be deterministic.
using LossBuilder = std::function<ad::Var(ad::Graph&)>;

struct ParameterGradCheck {
  std::string name;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  double worst_analytic = 0.0;  // pair at the largest relative error
  double worst_numeric = 0.0;
};

struct GradCheckReport {
  std::vector<ParameterGradCheck> parameters;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
};

/// Compares reverse-mode gradients of every trainable parameter with central
/// differences (f(x+e) - f(x-e)) / 2e. Relative error per coordinate is
/// |a - n| / max(|a|, |n|, 1e-12). `params` is restored bitwise afterwards.
GradCheckReport finite_difference_check(ParameterStore& params, const LossBuilder& loss,
                                        double epsilon = 1e-5, double tolerance = 1e-4);

}  // namespace sparta
