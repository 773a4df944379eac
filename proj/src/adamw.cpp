#include "causerl/adamw.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "causerl/error.hpp"

namespace causerl {

namespace {

void ensure_layout(AdamWState& state, std::size_t index, std::size_t size) {
  if (state.first_moment.size() <= index) {
    state.first_moment.resize(index + 1);
    state.second_moment.resize(index + 1);
  }
  auto& m = state.first_moment[index];
  if (m.empty()) {
    if (state.step != 0) {
      throw Error(ErrorKind::kShapeMismatch, "parameter " + std::to_string(index) +
                                                 " joined after optimisation started");
    }
    m.assign(size, 0.0);
    state.second_moment[index].assign(size, 0.0);
  } else if (m.size() != size) {
    throw Error(ErrorKind::kShapeMismatch, "parameter " + std::to_string(index) + " has " +
                                               std::to_string(size) + " values, moments hold " +
                                               std::to_string(m.size()));
  }
}

void update(const AdamWConfig& c, std::size_t step, std::span<double> p, std::span<const double> g,
            std::vector<double>& m, std::vector<double>& v) {
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] -= c.learning_rate * c.weight_decay * p[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    p[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace

void adamw_step(AdamWState& state, std::span<Tensor> params) {
  if (state.step > 0 && params.size() != state.first_moment.size()) {
    throw Error(ErrorKind::kShapeMismatch, "parameter count changed between steps");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].requires_grad() || params[k].grad().size() != params[k].numel()) {
      throw Error(ErrorKind::kShapeMismatch, "parameter " + std::to_string(k) + " has no gradient");
    }
    ensure_layout(state, k, params[k].numel());
  }
  ++state.step;
  for (std::size_t k = 0; k < params.size(); ++k) {
    update(state.config, state.step, params[k].mutable_data(), params[k].grad(),
           state.first_moment[k], state.second_moment[k]);
  }
}

void adamw_step(AdamWState& state, std::span<double> param, std::span<const double> grad) {
  if (param.size() != grad.size()) {
    throw Error(ErrorKind::kShapeMismatch, "gradient size differs from parameter size");
  }
  ensure_layout(state, 0, param.size());
  ++state.step;
  update(state.config, state.step, param, grad, state.first_moment[0], state.second_moment[0]);
}

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig config) : params_(std::move(params)) {
  state_.config = config;
}

void AdamW::step() { adamw_step(state_, params_); }

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

bool AdamW::owns(const Tensor& t) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const Tensor& p) { return p.id() == t.id(); });
}

}  // namespace causerl
