#include "causerl/tensor.hpp"

#include <cstring>
#include <numeric>
#include <string>

#include "causerl/error.hpp"

namespace causerl {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kZeroNorm: return "ZeroNorm";
    case ErrorKind::kNotScalar: return "NotScalar";
    case ErrorKind::kNonDeterministic: return "NonDeterministic";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kNonFinite: return "NonFinite";
    case ErrorKind::kOutOfVocab: return "OutOfVocab";
    case ErrorKind::kEmptySequence: return "EmptySequence";
    case ErrorKind::kSpanOutOfRange: return "SpanOutOfRange";
    case ErrorKind::kBatchTooSmall: return "BatchTooSmall";
    case ErrorKind::kEmptyCorpus: return "EmptyCorpus";
    case ErrorKind::kEmptyBatch: return "EmptyBatch";
    case ErrorKind::kNoPositives: return "NoPositives";
    case ErrorKind::kMarkerNotFound: return "MarkerNotFound";
    case ErrorKind::kMultipleMarkers: return "MultipleMarkers";
    case ErrorKind::kInvalidSpec: return "InvalidSpec";
    case ErrorKind::kInvalidConfig: return "InvalidConfig";
    case ErrorKind::kTooFewDocuments: return "TooFewDocuments";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kMissingArtifact: return "MissingArtifact";
    case ErrorKind::kUnknownVariant: return "UnknownVariant";
  }
  return "Unknown";
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<TensorNode>()) {
  for (auto d : shape) {
    if (d == 0) throw Error(ErrorKind::kShapeMismatch, "zero-sized dimension");
  }
  if (shape_numel(shape) != data.size()) {
    throw Error(ErrorKind::kShapeMismatch,
                "shape holds " + std::to_string(shape_numel(shape)) + " values, got " +
                    std::to_string(data.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  set_requires_grad(requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const auto n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

std::size_t Tensor::rows() const {
  if (rank() == 2) return node_->shape[0];
  return 1;
}

std::size_t Tensor::cols() const {
  if (rank() == 0) return 1;
  return node_->shape.back();
}

double Tensor::item() const {
  if (numel() != 1) throw Error(ErrorKind::kNotScalar, "item() on a non-scalar tensor");
  return node_->data[0];
}

void Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (on) {
    node_->grad.assign(node_->data.size(), 0.0);
  } else {
    node_->grad.clear();
  }
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  return Tensor(node_->shape, node_->data, node_->requires_grad);
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() noexcept { return g_active_tape; }

void Tape::record(std::function<void()> backward_rule) {
  entries_.push_back(std::move(backward_rule));
}

void Tape::backward(const Tensor& loss) {
  if (loss.rank() != 0) {
    throw Error(ErrorKind::kNotScalar, "backward() needs a rank-0 loss");
  }
  if (!loss.requires_grad()) {
    entries_.clear();
    return;
  }
  loss.node().grad[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  entries_.clear();
}

NoGradGuard::NoGradGuard() : saved_(g_active_tape) { g_active_tape = nullptr; }

NoGradGuard::~NoGradGuard() { g_active_tape = saved_; }

std::uint64_t checksum(std::span<const Tensor> tensors) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (const auto& t : tensors) {
    for (double v : t.data()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char b : bytes) {
        hash ^= b;
        hash *= 1099511628211ULL;
      }
    }
  }
  return hash;
}

}  // namespace causerl
