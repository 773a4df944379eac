#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace causerl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty unless requires_grad
  bool requires_grad = false;
};

/// Dense row-major float64 array with an optional gradient slot.
///
/// A Tensor is a shared handle: copies alias the same storage. Rank 0 is a
/// scalar, rank 1 a vector, rank 2 a row-major matrix. Nothing above rank 2
/// is needed by the models in this library.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() const { return node_->data; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() const { return node_->grad; }
  double item() const;
  double at(std::size_t i) const { return node_->data[i]; }
  double at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  void zero_grad();

  /// Deep copy with fresh storage (gradient slot reset).
  Tensor clone() const;

  const TensorNode* id() const noexcept { return node_.get(); }
  TensorNode& node() const { return *node_; }
  std::shared_ptr<TensorNode> shared_node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

/// Records differentiable operations executed on the current thread.
///
/// Constructing a Tape makes it the active tape for this thread until it is
/// destroyed; tapes nest. Operations executed while no tape is active run
/// forward-only and produce tensors that do not require grad. `backward`
/// replays the recorded rules in reverse execution order, so every use of a
/// tensor contributes its gradient exactly once.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() noexcept;

  void record(std::function<void()> backward_rule);
  std::size_t size() const noexcept { return entries_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and accumulates into every reachable
  /// requires_grad tensor. Throws NotScalar if `loss` is not rank 0.
  /// The tape is consumed.
  void backward(const Tensor& loss);

 private:
  std::vector<std::function<void()>> entries_;
  Tape* previous_;
};

/// Suspends recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* saved_;
};

/// FNV-1a over the raw bytes of the values of every tensor, in order.
std::uint64_t checksum(std::span<const Tensor> tensors);

}  // namespace causerl
