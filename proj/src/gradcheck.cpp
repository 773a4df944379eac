#include "causerl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "causerl/error.hpp"

namespace causerl {

GradCheckResult finite_difference_check(const std::function<Tensor()>& loss_fn,
                                        std::vector<Tensor> params, double step) {
  if (!(step >= 1e-7 && step <= 1e-3)) {
    throw Error(ErrorKind::kInvalidConfig, "finite-difference step must lie in [1e-7, 1e-3]");
  }
  std::vector<std::vector<double>> analytic;
  double base = 0.0;
  {
    for (auto& p : params) p.zero_grad();
    Tape tape;
    const Tensor loss = loss_fn();
    base = loss.item();
    tape.backward(loss);
    for (const auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());
  }

  auto evaluate = [&]() {
    NoGradGuard no_grad;
    return loss_fn().item();
  };
  if (evaluate() != base) {
    throw Error(ErrorKind::kNonDeterministic, "loss differs between identical evaluations");
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_data();
    double diff_sq = 0.0, analytic_sq = 0.0, numeric_sq = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double plus = evaluate();
      values[i] = saved - step;
      const double minus = evaluate();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[k][i];
      diff_sq += (a - numeric) * (a - numeric);
      analytic_sq += a * a;
      numeric_sq += numeric * numeric;
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      result.max_entry_error = std::max(result.max_entry_error, std::abs(a - numeric) / denom);
      ++result.checked;
    }
    const double denom =
        std::max({std::sqrt(analytic_sq), std::sqrt(numeric_sq), kGradCheckFloor});
    result.max_relative_error = std::max(result.max_relative_error, std::sqrt(diff_sq) / denom);
  }
  for (auto& p : params) p.zero_grad();
  return result;
}

}  // namespace causerl
