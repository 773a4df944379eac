#pragma once

#include <functional>
#include <vector>

#include "causerl/tensor.hpp"

namespace causerl {

inline constexpr double kGradCheckFloor = 1e-8;

struct GradCheckResult {
  /// max over parameter tensors of ‖a − cd‖ / max(‖a‖, ‖cd‖, 1e-8).
  double max_relative_error = 0.0;
  /// The same ratio per scalar entry. Entries far below the resolution of a
  /// central difference (about 1e-10 absolute at h = 1e-5) inflate it, so it
  /// is reported but not used as the pass criterion.
  double max_entry_error = 0.0;
  std::size_t checked = 0;  // number of scalar parameters perturbed
};

/// Compares reverse-mode gradients of `loss_fn` against central differences.
///
/// `loss_fn` must build its scalar loss from `params` (read at call time).
/// Each parameter tensor is compared as a whole:
/// ‖analytic − cd‖₂ / max(‖analytic‖₂, ‖cd‖₂, 1e-8); the maximum over the
/// tensors is returned. Throws NonDeterministic if
/// two evaluations at the unperturbed point disagree.
GradCheckResult finite_difference_check(const std::function<Tensor()>& loss_fn,
                                        std::vector<Tensor> params, double step = 1e-5);

}  // namespace causerl
