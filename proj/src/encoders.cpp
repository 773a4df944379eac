#include "causerl/encoders.hpp"

#include <cctype>
#include <cmath>

#include "causerl/error.hpp"
#include "causerl/ops.hpp"

namespace causerl {

namespace {

bool is_edge_punct(char c) {
  return c == ',' || c == '.' || c == ';' || c == ':' || c == '!' || c == '?';
}

Tensor copy_param(const Tensor& t, bool trainable) {
  return Tensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), trainable);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view word = text.substr(i, j - i);
    i = j;
    if (word.empty()) continue;
    std::vector<std::string> trailing;
    while (!word.empty() && is_edge_punct(word.front())) {
      out.emplace_back(1, word.front());
      word.remove_prefix(1);
    }
    while (!word.empty() && is_edge_punct(word.back())) {
      trailing.emplace_back(1, word.back());
      word.remove_suffix(1);
    }
    if (!word.empty()) out.emplace_back(word);
    out.insert(out.end(), trailing.rbegin(), trailing.rend());
  }
  return out;
}

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  for (auto& t : tokens) add(t);
}

int Vocabulary::add(const std::string& token) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  const int idx = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, idx);
  return idx;
}

int Vocabulary::index_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size()) {
    throw Error(ErrorKind::kOutOfVocab, "index " + std::to_string(index));
  }
  return tokens_[static_cast<std::size_t>(index)];
}

std::vector<int> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(index_of(t));
  return out;
}

FrozenEmbeddingProvider FrozenEmbeddingProvider::random(std::size_t vocab_size, std::size_t dim,
                                                        std::uint64_t seed, double sigma) {
  Rng rng(seed);
  return {gaussian_tensor({vocab_size, dim}, sigma, rng, false)};
}

Tensor FrozenEmbeddingProvider::embed(std::span<const int> tokens) const {
  return causerl::embed(table, tokens);
}

std::uint64_t FrozenEmbeddingProvider::checksum() const {
  return causerl::checksum(std::span<const Tensor>(&table, 1));
}

Tensor embed(const Tensor& table, std::span<const int> tokens) {
  if (tokens.empty()) throw Error(ErrorKind::kEmptySequence, "cannot embed an empty sequence");
  return ops::gather_rows(table, tokens);
}

BiLSTMEncoder BiLSTMEncoder::random(std::size_t input_dim, std::size_t hidden, Rng& rng,
                                    bool trainable) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  BiLSTMEncoder e;
  e.fwd_input = uniform_tensor({4 * hidden, input_dim}, bound, rng, trainable);
  e.fwd_recurrent = uniform_tensor({4 * hidden, hidden}, bound, rng, trainable);
  e.fwd_bias = Tensor::zeros({4 * hidden}, trainable);
  e.bwd_input = uniform_tensor({4 * hidden, input_dim}, bound, rng, trainable);
  e.bwd_recurrent = uniform_tensor({4 * hidden, hidden}, bound, rng, trainable);
  e.bwd_bias = Tensor::zeros({4 * hidden}, trainable);
  return e;
}

BiLSTMEncoder BiLSTMEncoder::zeros(std::size_t input_dim, std::size_t hidden, bool trainable) {
  BiLSTMEncoder e;
  e.fwd_input = Tensor::zeros({4 * hidden, input_dim}, trainable);
  e.fwd_recurrent = Tensor::zeros({4 * hidden, hidden}, trainable);
  e.fwd_bias = Tensor::zeros({4 * hidden}, trainable);
  e.bwd_input = Tensor::zeros({4 * hidden, input_dim}, trainable);
  e.bwd_recurrent = Tensor::zeros({4 * hidden, hidden}, trainable);
  e.bwd_bias = Tensor::zeros({4 * hidden}, trainable);
  return e;
}

ParamList BiLSTMEncoder::params(const std::string& prefix) const {
  return {{prefix + ".fwd.input", fwd_input},         {prefix + ".fwd.recurrent", fwd_recurrent},
          {prefix + ".fwd.bias", fwd_bias},           {prefix + ".bwd.input", bwd_input},
          {prefix + ".bwd.recurrent", bwd_recurrent}, {prefix + ".bwd.bias", bwd_bias}};
}

BiLSTMEncoder BiLSTMEncoder::clone(bool trainable) const {
  return {copy_param(fwd_input, trainable), copy_param(fwd_recurrent, trainable),
          copy_param(fwd_bias, trainable),  copy_param(bwd_input, trainable),
          copy_param(bwd_recurrent, trainable), copy_param(bwd_bias, trainable)};
}

Tensor encode_sequence(const Tensor& embeddings, const BiLSTMEncoder& encoder) {
  if (embeddings.rank() != 2 || embeddings.cols() != encoder.input_dim()) {
    throw Error(ErrorKind::kShapeMismatch, "embedding width " + std::to_string(embeddings.cols()) +
                                               " vs encoder input " +
                                               std::to_string(encoder.input_dim()));
  }
  const Tensor forward = ops::lstm_sequence(embeddings, encoder.fwd_input, encoder.fwd_recurrent,
                                            encoder.fwd_bias, false);
  const Tensor backward = ops::lstm_sequence(embeddings, encoder.bwd_input, encoder.bwd_recurrent,
                                             encoder.bwd_bias, true);
  return ops::concat_cols(forward, backward);
}

MLPHead MLPHead::random(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng,
                        bool trainable) {
  const double b1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  MLPHead h;
  h.hidden_weight = uniform_tensor({hidden, in}, b1, rng, trainable);
  h.hidden_bias = Tensor::zeros({hidden}, trainable);
  h.out_weight = uniform_tensor({out, hidden}, b2, rng, trainable);
  h.out_bias = Tensor::zeros({out}, trainable);
  return h;
}

MLPHead MLPHead::zeros(std::size_t in, std::size_t hidden, std::size_t out, bool trainable) {
  return {Tensor::zeros({hidden, in}, trainable), Tensor::zeros({hidden}, trainable),
          Tensor::zeros({out, hidden}, trainable), Tensor::zeros({out}, trainable)};
}

ParamList MLPHead::params(const std::string& prefix) const {
  return {{prefix + ".hidden.weight", hidden_weight},
          {prefix + ".hidden.bias", hidden_bias},
          {prefix + ".out.weight", out_weight},
          {prefix + ".out.bias", out_bias}};
}

MLPHead MLPHead::clone(bool trainable) const {
  return {copy_param(hidden_weight, trainable), copy_param(hidden_bias, trainable),
          copy_param(out_weight, trainable), copy_param(out_bias, trainable)};
}

Tensor apply_head(const Tensor& x, const MLPHead& head) {
  if (x.cols() != head.input_dim()) {
    throw Error(ErrorKind::kShapeMismatch, "head expects width " +
                                               std::to_string(head.input_dim()) + ", got " +
                                               std::to_string(x.cols()));
  }
  const Tensor hidden = ops::tanh(ops::linear(x, head.hidden_weight, head.hidden_bias));
  return ops::linear(hidden, head.out_weight, head.out_bias);
}

Tensor pool_statement(const Tensor& per_token) {
  if (per_token.rank() != 2) throw Error(ErrorKind::kEmptySequence, "no tokens to pool");
  return ops::mean_rows(per_token);
}

Tensor pool_event_span(const Tensor& per_token, Span span) {
  return ops::mean_rows(per_token, span.begin, span.end);
}

}  // namespace causerl
