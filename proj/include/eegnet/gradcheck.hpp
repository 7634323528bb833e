#pragma once

#include <functional>

#include "eegnet/graph.hpp"
#include "eegnet/ops.hpp"
#include "eegnet/params.hpp"

namespace eegnet {

struct GradCheckResult {
  Real max_rel_error = 0;
  std::string worst_param;
  long worst_index = -1;
  Real analytic = 0;
  Real numeric = 0;
};

/// Central-difference check of the analytic gradients of a deterministic
/// scalar map over every parameter coordinate. Relative error per coordinate
/// is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
inline GradCheckResult finite_diff_check(
    const std::function<Value(Graph&)>& f, ParamStore& params, Real epsilon) {
  if (!(epsilon > 0)) throw ConfigError("finite_diff_check epsilon must be > 0");

  params.zero_grad();
  {
    Graph g;
    Value loss = f(g);
    if (!std::isfinite(scalar_value(g, loss)))
      throw NumericError("finite_diff_check: non-finite base loss");
    g.backward(loss);
  }
  std::vector<std::vector<Real>> analytic;
  for (const auto& e : params.entries()) analytic.push_back(e.tensor.grad);

  auto eval = [&]() {
    Graph g;
    Value loss = f(g);
    return scalar_value(g, loss);
  };

  GradCheckResult result;
  size_t pi = 0;
  for (auto& e : params.entries()) {
    for (size_t i = 0; i < e.tensor.data.size(); ++i) {
      const Real saved = e.tensor.data[i];
      e.tensor.data[i] = saved + epsilon;
      const Real lp = eval();
      e.tensor.data[i] = saved - epsilon;
      const Real lm = eval();
      e.tensor.data[i] = saved;
      if (!std::isfinite(lp) || !std::isfinite(lm))
        throw NumericError("finite_diff_check: non-finite loss at parameter '" +
                           e.name + "' coordinate " + std::to_string(i));
      const Real numeric = (lp - lm) / (2 * epsilon);
      const Real ana = analytic[pi][i];
      const Real denom =
          std::max({std::abs(ana), std::abs(numeric), Real(1e-8)});
      const Real rel = std::abs(ana - numeric) / denom;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = e.name;
        result.worst_index = static_cast<long>(i);
        result.analytic = ana;
        result.numeric = numeric;
      }
    }
    ++pi;
  }
  return result;
}

}  // namespace eegnet
