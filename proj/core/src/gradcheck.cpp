#include "sparta/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "sparta/error.hpp"

namespace sparta {
namespace {

double evaluate(const ParameterStore& params, const LossBuilder& loss) {
  ad::Graph g(&params);
  ad::Var root = loss(g);
  if (root.size() != 1) throw ShapeError("loss must be a scalar");
  const double v = root.value()[0];
  if (!std::isfinite(v)) throw Error("gradient check: non-finite loss");
  return v;
}

}  // namespace

GradCheckReport finite_difference_check(ParameterStore& params, const LossBuilder& loss,
                                        double epsilon, double tolerance) {
  if (!(epsilon > 0.0)) throw Error("gradient check: epsilon must be positive");
  GradientStore analytic(params);
  {
    ad::Graph g(&params);
    ad::Var root = loss(g);
    if (root.size() != 1) throw ShapeError("loss must be a scalar");
    if (!std::isfinite(root.value()[0])) throw Error("gradient check: non-finite loss");
    g.backward(root);
    g.accumulate_gradients(analytic);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params.at(i);
    if (!p.trainable) continue;
    ParameterGradCheck entry{p.name, p.tensor.size(), 0.0, 0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < p.tensor.size(); ++j) {
      const double saved = p.tensor[j];
      p.tensor[j] = saved + epsilon;
      const double up = evaluate(params, loss);
      p.tensor[j] = saved - epsilon;
      const double down = evaluate(params, loss);
      p.tensor[j] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[i][j];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), 1e-12});
      if (rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_analytic = a;
        entry.worst_numeric = numeric;
      }
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.parameters.push_back(std::move(entry));
  }
  return report;
}

}  // namespace sparta
