#include <doctest.h>

#include <cmath>

#include "causerl/encoders.hpp"
#include "causerl/error.hpp"
#include "test_util.hpp"
#include "causerl/gradcheck.hpp"
#include "causerl/ops.hpp"

using namespace causerl;
using causerl::testing::kind_of;

namespace {

void copy_into(const Tensor& from, const Tensor& to) {
  std::copy(from.data().begin(), from.data().end(), to.mutable_data().begin());
}

}  // namespace

TEST_CASE("tokenize splits edge punctuation") {
  const auto t = tokenize("Billy finds it, billy gives it.");
  const std::vector<std::string> expected = {"Billy", "finds", "it",    ",",
                                             "billy", "gives", "it", "."};
  CHECK(t == expected);
  CHECK(tokenize("  ").empty());
  CHECK(tokenize("Someone_A's car!") == std::vector<std::string>{"Someone_A's", "car", "!"});
}

TEST_CASE("vocabulary reserves PAD and UNK") {
  Vocabulary v;
  CHECK(v.size() == 2);
  CHECK(v.token(Vocabulary::kPad) == "<pad>");
  const int cat = v.add("cat");
  CHECK(v.add("cat") == cat);
  CHECK(v.index_of("cat") == cat);
  CHECK(v.token(cat) == "cat");
  CHECK(v.index_of("dog") == Vocabulary::kUnk);
  const std::vector<std::string> words = {"cat", "dog"};
  CHECK(v.encode(words) == std::vector<int>{cat, Vocabulary::kUnk});
}

TEST_CASE("embed") {
  const auto provider = FrozenEmbeddingProvider::random(5, 4, 3);
  const std::vector<int> pad = {Vocabulary::kPad};
  const auto row = provider.embed(pad);
  CHECK(row.rows() == 1);
  for (std::size_t c = 0; c < 4; ++c) CHECK(row.at(0, c) == provider.table.at(0, c));
  const std::vector<int> seq = {2, 4, 2};
  const auto a = provider.embed(seq);
  const auto b = provider.embed(seq);
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  CHECK(kind_of([&] { provider.embed(std::vector<int>{}); }) == ErrorKind::kEmptySequence);
  CHECK(kind_of([&] { provider.embed(std::vector<int>{5}); }) == ErrorKind::kOutOfVocab);
  CHECK_FALSE(provider.table.requires_grad());
}

TEST_CASE("provider embeddings are seeded Gaussians") {
  const auto a = FrozenEmbeddingProvider::random(200, 32, 9);
  const auto b = FrozenEmbeddingProvider::random(200, 32, 9);
  CHECK(a.checksum() == b.checksum());
  double sum = 0.0, sq = 0.0;
  for (double v : a.table.data()) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(a.table.numel());
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  CHECK(sd == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("encode_sequence shapes and fixed points") {
  Rng rng(4);
  const auto enc = BiLSTMEncoder::random(6, 5, rng, false);
  const auto x = gaussian_tensor({1, 6}, 1.0, rng, false);
  const auto out = encode_sequence(x, enc);
  CHECK(out.rows() == 1);
  CHECK(out.cols() == 10);

  const auto zero = BiLSTMEncoder::zeros(6, 5, false);
  const auto z = encode_sequence(gaussian_tensor({4, 6}, 1.0, rng, false), zero);
  for (double v : z.data()) CHECK(v == 0.0);

  CHECK(kind_of([&] { encode_sequence(gaussian_tensor({2, 5}, 1.0, rng, false), enc); }) ==
        ErrorKind::kShapeMismatch);
}

TEST_CASE("reversing the input mirrors the two directions") {
  // With tied direction weights, reading a reversed sequence swaps the
  // forward and backward halves at mirrored positions.
  Rng rng(8);
  const auto enc = BiLSTMEncoder::random(3, 4, rng, false);
  copy_into(enc.fwd_input, enc.bwd_input);
  copy_into(enc.fwd_recurrent, enc.bwd_recurrent);
  copy_into(enc.fwd_bias, enc.bwd_bias);
  const auto x = gaussian_tensor({3, 3}, 1.0, rng, false);
  std::vector<double> rev;
  for (std::size_t t = 3; t-- > 0;) {
    for (std::size_t c = 0; c < 3; ++c) rev.push_back(x.at(t, c));
  }
  const auto out = encode_sequence(x, enc);
  const auto out_rev = encode_sequence(Tensor::matrix(3, 3, rev), enc);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(out.at(t, c) == doctest::Approx(out_rev.at(2 - t, 4 + c)).epsilon(1e-14));
      CHECK(out.at(t, 4 + c) == doctest::Approx(out_rev.at(2 - t, c)).epsilon(1e-14));
    }
  }
}

TEST_CASE("the encoder is order sensitive") {
  Rng rng(12);
  const auto enc = BiLSTMEncoder::random(4, 3, rng, false);
  const auto x = gaussian_tensor({3, 4}, 1.0, rng, false);
  std::vector<double> swapped(x.data().begin(), x.data().end());
  std::swap_ranges(swapped.begin(), swapped.begin() + 4, swapped.begin() + 4);
  const auto a = pool_statement(encode_sequence(x, enc));
  const auto b = pool_statement(encode_sequence(Tensor::matrix(3, 4, swapped), enc));
  double diff = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) diff += std::abs(a.at(i) - b.at(i));
  CHECK(diff > 1e-6);
}

TEST_CASE("pooling") {
  const auto single = Tensor::matrix(1, 2, {0.5, -1.0});
  CHECK(pool_statement(single).at(0) == 0.5);
  const auto same = Tensor::matrix(2, 2, {1.5, 2.5, 1.5, 2.5});
  CHECK(pool_statement(same).at(1) == 2.5);
  const auto rows = Tensor::matrix(2, 2, {1, 3, 3, 1});
  CHECK(pool_statement(rows).at(0) == 2.0);
  CHECK(pool_statement(rows).at(1) == 2.0);

  const auto seq = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  const auto whole = pool_event_span(seq, {0, 3});
  const auto mean = pool_statement(seq);
  CHECK(whole.at(0) == mean.at(0));
  CHECK(whole.at(1) == mean.at(1));
  const auto one = pool_event_span(seq, {1, 2});
  CHECK(one.at(0) == 3.0);
  CHECK(one.at(1) == 4.0);
  CHECK(kind_of([&] { pool_event_span(seq, {0, 0}); }) == ErrorKind::kSpanOutOfRange);
  CHECK(kind_of([&] { pool_event_span(seq, {2, 4}); }) == ErrorKind::kSpanOutOfRange);
}

TEST_CASE("apply_head") {
  const auto zero = MLPHead::zeros(3, 4, 2, false);
  const auto zero_out = apply_head(Tensor::vector({1, -2, 3}), zero);
  for (double v : zero_out.data()) CHECK(v == 0.0);

  // Identity paths through both layers expose the nonlinearity itself.
  auto id = MLPHead::zeros(3, 3, 3, false);
  for (std::size_t i = 0; i < 3; ++i) {
    id.hidden_weight.mutable_data()[i * 3 + i] = 1.0;
    id.out_weight.mutable_data()[i * 3 + i] = 1.0;
  }
  const std::vector<double> x = {0.2, -1.1, 2.5};
  const auto y = apply_head(Tensor::vector(x), id);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y.at(i) == std::tanh(x[i]));

  Rng rng(2);
  const auto head = MLPHead::random(5, 4, 3, rng, true);
  CHECK(kind_of([&] { apply_head(Tensor::vector({1, 2}), head); }) == ErrorKind::kShapeMismatch);

  const auto input = gaussian_tensor({2, 5}, 1.0, rng, false);
  auto loss = [&] {
    const auto out = apply_head(input, head);
    return ops::sum(ops::mul(out, out));
  };
  const auto r = finite_difference_check(loss, tensors_of(head.params("h")));
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("cloning detaches storage") {
  Rng rng(6);
  const auto enc = BiLSTMEncoder::random(3, 2, rng, true);
  const auto copy = enc.clone(false);
  CHECK_FALSE(copy.fwd_input.requires_grad());
  copy.fwd_input.mutable_data()[0] += 1.0;
  CHECK(copy.fwd_input.at(0) != enc.fwd_input.at(0));
}
