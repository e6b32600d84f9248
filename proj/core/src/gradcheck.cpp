#include "miarn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace miarn::num {

GradCheckReport grad_check_report(const LossFn& loss, std::span<Tensor<double>> params,
                                  double eps) {
  if (!(eps > 0.0)) throw ContractError("grad_check: eps must be positive");

  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  {
    Graph<double> g;
    Tensor<double> out = loss(g);
    g.backward(out);
  }

  auto evaluate = [&loss] {
    Graph<double> g(false);
    return loss(g).item();
  };

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].data();
    auto grads = params[pi].grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = evaluate();
      values[i] = saved - eps;
      const double down = evaluate();
      values[i] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = grads[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double err = std::abs(analytic - numeric) / denom;
      ++report.entries_checked;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_param = pi;
        report.worst_entry = i;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace miarn::num
