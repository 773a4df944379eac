#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "causerl/params.hpp"
#include "causerl/tensor.hpp"

namespace causerl {

/// Splits on whitespace and detaches trailing or leading , . ; : ! ? marks.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> tokens);

  int add(const std::string& token);
  /// Unknown tokens map to kUnk.
  int index_of(const std::string& token) const;
  const std::string& token(int index) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(std::span<const std::string> tokens) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Fixed Gaussian embedding table standing in for a pretrained featurizer.
/// Its table never requires grad.
struct FrozenEmbeddingProvider {
  Tensor table;  // (vocab, dim)

  static FrozenEmbeddingProvider random(std::size_t vocab_size, std::size_t dim,
                                        std::uint64_t seed, double sigma = 0.1);
  std::size_t dim() const { return table.cols(); }
  Tensor embed(std::span<const int> tokens) const;
  std::uint64_t checksum() const;
};

/// Embedding lookup against any (vocab, dim) table. Throws EmptySequence or
/// OutOfVocab.
Tensor embed(const Tensor& table, std::span<const int> tokens);

/// One-layer bidirectional LSTM; row t of the output is
/// [forward state at t ; backward state at t].
struct BiLSTMEncoder {
  Tensor fwd_input, fwd_recurrent, fwd_bias;
  Tensor bwd_input, bwd_recurrent, bwd_bias;

  /// Weights uniform in ±1/sqrt(hidden), zero biases.
  static BiLSTMEncoder random(std::size_t input_dim, std::size_t hidden, Rng& rng,
                              bool trainable);
  static BiLSTMEncoder zeros(std::size_t input_dim, std::size_t hidden, bool trainable);

  std::size_t input_dim() const { return fwd_input.cols(); }
  std::size_t hidden() const { return fwd_recurrent.cols(); }
  std::size_t output_dim() const { return 2 * hidden(); }

  ParamList params(const std::string& prefix) const;
  BiLSTMEncoder clone(bool trainable) const;
};

Tensor encode_sequence(const Tensor& embeddings, const BiLSTMEncoder& encoder);

/// affine → tanh → affine. Used for projector, predictor, classifier and the
/// transfer-space mappings.
struct MLPHead {
  Tensor hidden_weight, hidden_bias;
  Tensor out_weight, out_bias;

  /// Weights uniform in ±1/sqrt(fan_in) per layer, zero biases.
  static MLPHead random(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng,
                        bool trainable);
  static MLPHead zeros(std::size_t in, std::size_t hidden, std::size_t out, bool trainable);

  std::size_t input_dim() const { return hidden_weight.cols(); }
  std::size_t output_dim() const { return out_weight.rows(); }

  ParamList params(const std::string& prefix) const;
  MLPHead clone(bool trainable) const;
};

Tensor apply_head(const Tensor& x, const MLPHead& head);

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const Span&) const = default;
};

/// Mean over the token axis.
Tensor pool_statement(const Tensor& per_token);
/// Mean over rows [span.begin, span.end). Throws SpanOutOfRange.
Tensor pool_event_span(const Tensor& per_token, Span span);

}  // namespace causerl
