#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "causerl/tensor.hpp"

namespace causerl {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// Moment buffers are allocated lazily on the first step and must keep the
/// same layout afterwards.
struct AdamWState {
  AdamWConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::size_t step = 0;
};

/// One AdamW update with decoupled weight decay:
///   p ← p − lr·wd·p,  p ← p − lr·m̂/(√v̂ + ε).
/// Reads each parameter's gradient slot. Throws ShapeMismatch when the
/// parameter list disagrees with the state's buffers.
void adamw_step(AdamWState& state, std::span<Tensor> params);

/// Raw-buffer variant for a single parameter vector.
void adamw_step(AdamWState& state, std::span<double> param, std::span<const double> grad);

/// Owns the parameter handles it updates.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig config);

  void step();
  void zero_grad();
  bool owns(const Tensor& t) const;

  const std::vector<Tensor>& params() const { return params_; }
  const AdamWState& state() const { return state_; }

 private:
  std::vector<Tensor> params_;
  AdamWState state_;
};

}  // namespace causerl
