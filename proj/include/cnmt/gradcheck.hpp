#pragma once

#include <functional>
#include <span>

namespace cnmt {

/// Compares an analytic gradient against central differences of `loss`
/// taken with respect to every coordinate of `theta` (perturbed in place and
/// restored). Returns max |a - n| / max(|a|, |n|, 1e-8) over coordinates.
/// Throws EvaluationError if the loss is ever non-finite.
double grad_check(const std::function<double()>& loss, std::span<double> theta, std::span<const double> analytic,
                  double step = 1e-5);

}  // namespace cnmt
