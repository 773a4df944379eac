#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "causerl/tensor.hpp"

namespace causerl {

/// Differentiable operations. Each records its backward rule on the active
/// Tape when any input requires grad; otherwise it runs forward-only.
namespace ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

/// Blocks gradient flow: same values, never requires grad.
Tensor stop_gradient(const Tensor& a);

/// x·Wᵀ + b for x of shape (in) or (n, in); W is (out, in), b is (out).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Concatenates rank-1 tensors.
Tensor concat(std::span<const Tensor> parts);
/// Concatenates two rank-2 tensors with equal row counts along columns.
Tensor concat_cols(const Tensor& left, const Tensor& right);
/// Stacks equally sized rank-1 tensors into an (n, d) matrix.
Tensor stack(std::span<const Tensor> rows);
Tensor select_rows(const Tensor& x, std::span<const std::size_t> indices);

/// Column-wise mean over rows [begin, end) of a rank-2 tensor.
Tensor mean_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor mean_rows(const Tensor& x);

/// Rows of `table` picked by `indices`; shape (len(indices), cols).
Tensor gather_rows(const Tensor& table, std::span<const int> indices);

/// One LSTM direction over the rows of `x` (len, d_in), gate order i,f,g,o.
/// `input_weight` is (4h, d_in), `recurrent_weight` (4h, h), `bias` (4h).
/// Returns (len, h); with `reverse` the sequence is read right to left and
/// row t still holds the state at position t.
Tensor lstm_sequence(const Tensor& x, const Tensor& input_weight, const Tensor& recurrent_weight,
                     const Tensor& bias, bool reverse);

/// Row-wise ℓ2 normalisation. Throws ZeroNorm when a row norm is <= 1e-12.
Tensor l2_normalize(const Tensor& x);

/// Euclidean distance of every row of `x` (n, d) to `anchor` (d); shape (n).
Tensor row_distances(const Tensor& x, const Tensor& anchor);

/// Stabilised log Σ exp over a rank-1 tensor.
Tensor logsumexp(const Tensor& v);

}  // namespace ops

inline constexpr double kNormEpsilon = 1e-12;

/// ‖ȳ − z̄‖² between ℓ2-normalised rows, averaged over rows. The target `z`
/// is detached, so gradient reaches `y` only. Range [0, 4].
Tensor normalized_mse(const Tensor& y, const Tensor& z);

/// Mean negative log-likelihood of binary labels under sigmoid(logits).
/// `logits` may have any shape holding one value per label.
Tensor binary_cross_entropy(const Tensor& logits, std::span<const double> labels);

/// Deliberate backward-rule faults, used to prove the gradient checker
/// detects broken derivatives. Thread-local; never set outside checks.
enum class Fault { kNone, kRowDistanceSign };
void set_fault(Fault fault);
Fault current_fault();

}  // namespace causerl
