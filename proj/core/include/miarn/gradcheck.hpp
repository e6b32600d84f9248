#pragma once

#include <functional>
#include <span>

#include "miarn/tensor.hpp"

namespace miarn::num {

/// Builds a scalar loss on the supplied graph from the current parameter values.
using LossFn = std::function<Tensor<double>(Graph<double>&)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;  // index into the params span
  std::size_t worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

/**
 * Compares reverse-mode gradients against central differences
 * (f(x + eps) - f(x - eps)) / (2 eps) for every entry of every tensor in
 * `params`. The relative error per entry is
 * |g_a - g_n| / max(|g_a|, |g_n|, 1e-8); the maximum is reported.
 *
 * `loss` must be deterministic. Parameters are restored afterwards and their
 * gradients are left holding the analytic values. Throws ContractError when
 * eps is not positive.
 */
GradCheckReport grad_check_report(const LossFn& loss, std::span<Tensor<double>> params,
                                  double eps);

inline double grad_check(const LossFn& loss, std::span<Tensor<double>> params,
                         double eps) {
  return grad_check_report(loss, params, eps).max_relative_error;
}

}  // namespace miarn::num
