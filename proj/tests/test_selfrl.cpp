#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "causerl/corpus.hpp"
#include "causerl/error.hpp"
#include "test_util.hpp"
#include "causerl/gradcheck.hpp"
#include "causerl/ops.hpp"
#include "causerl/selfrl.hpp"

using namespace causerl;
using causerl::testing::kind_of;

namespace {

SelfRLConfig toy_config(std::uint64_t seed = 1) {
  SelfRLConfig c;
  c.seed = seed;
  c.embedding_dim = 6;
  c.hidden = 4;
  c.head_hidden = 5;
  c.head_dim = 4;
  c.learning_rate = 1e-3;
  return c;
}

std::vector<TokenSeq> random_statements(Rng& rng, std::size_t n, int vocab) {
  std::uniform_int_distribution<int> tok(2, vocab - 1);
  std::uniform_int_distribution<int> len(3, 8);
  std::vector<TokenSeq> out(n);
  for (auto& s : out) {
    const int l = len(rng);
    for (int i = 0; i < l; ++i) s.push_back(tok(rng));
  }
  return out;
}

}  // namespace

TEST_CASE("pair_statements") {
  Rng rng(1);
  CHECK(pair_statements(2, rng).size() == 1);
  const auto pairs = pair_statements(48, rng);
  CHECK(pairs.size() == 24);
  std::set<std::size_t> seen;
  for (const auto& [a, b] : pairs) {
    seen.insert(a);
    seen.insert(b);
  }
  CHECK(seen.size() == 48);
  const auto odd = pair_statements(3, rng);
  CHECK(odd.size() == 1);
  CHECK(odd[0].first != odd[0].second);
  CHECK(kind_of([&] { pair_statements(1, rng); }) == ErrorKind::kBatchTooSmall);
}

TEST_CASE("config validation") {
  auto c = toy_config();
  c.tau = 1.5;
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::kInvalidConfig);
  c = toy_config();
  c.batch_size = 1;
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::kInvalidConfig);
}

TEST_CASE("selfrl_loss reaches zero when both branches agree") {
  const auto state = init_selfrl(10, toy_config());
  OnlineNetwork online = state.online;
  online.encoder = BiLSTMEncoder::zeros(6, 4, true);
  online.projector = MLPHead::zeros(8, 5, 4, true);
  online.predictor = MLPHead::zeros(4, 5, 4, true);
  const std::vector<double> b = {0.3, -0.1, 0.7, 0.2};
  std::copy(b.begin(), b.end(), online.projector.out_bias.mutable_data().begin());
  std::copy(b.begin(), b.end(), online.predictor.out_bias.mutable_data().begin());
  const TargetNetwork target = copy_as_target(online);
  const TokenSeq s1 = {2, 3, 4};
  const TokenSeq s2 = {5, 6};
  CHECK(selfrl_loss(s1, s2, state.provider, online, target).item() ==
        doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("selfrl_loss is swap symmetric and bounded") {
  Rng rng(3);
  const auto state = init_selfrl(12, toy_config(5));
  const auto statements = random_statements(rng, 200, 12);
  for (std::size_t i = 0; i < 200; i += 2) {
    const double ab =
        selfrl_loss(statements[i], statements[i + 1], state.provider, state.online, state.target)
            .item();
    const double ba =
        selfrl_loss(statements[i + 1], statements[i], state.provider, state.online, state.target)
            .item();
    CHECK(ab == ba);
    CHECK(ab >= 0.0);
    CHECK(ab <= 8.0);
  }
}

TEST_CASE("no gradient reaches the target network or the provider") {
  auto config = toy_config();
  config.copy_target_at_init = false;
  auto state = init_selfrl(10, config);
  // Gradient slots on δ make a leak visible as nonzero grads.
  for (auto& p : state.target.params()) p.tensor.set_requires_grad(true);
  Tape tape;
  tape.backward(selfrl_loss({2, 3, 4, 5}, {6, 7, 8}, state.provider, state.online, state.target));
  for (const auto& p : state.target.params()) {
    for (double g : p.tensor.grad()) CHECK(g == 0.0);
  }
  CHECK_FALSE(state.provider.table.requires_grad());
  double online_grad = 0.0;
  for (const auto& p : state.online.params()) {
    for (double g : p.tensor.grad()) online_grad += std::abs(g);
  }
  CHECK(online_grad > 0.0);
}

TEST_CASE("selfrl gradients pass the finite-difference oracle") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto config = toy_config(seed);
    config.copy_target_at_init = false;
    auto state = init_selfrl(10, config);
    auto loss = [&] {
      return selfrl_loss({2, 3, 4, 9}, {5, 6, 7}, state.provider, state.online, state.target);
    };
    CHECK(finite_difference_check(loss, tensors_of(state.online.params())).max_relative_error <
          1e-4);
  }
}

TEST_CASE("ema_update") {
  SUBCASE("scalar arithmetic") {
    auto state = init_selfrl(10, toy_config());
    auto& online = state.online;
    auto& target = state.target;
    for (const auto& p : online.params()) {
      for (auto& v : p.tensor.mutable_data()) v = 1.5;
    }
    for (const auto& p : target.params()) {
      for (auto& v : p.tensor.mutable_data()) v = 0.5;
    }
    ema_update(target, online, 0.996);
    // 0.996·0.5 + 0.004·1.5
    const double expected = 0.996 * 0.5 + (1.0 - 0.996) * 1.5;
    CHECK(expected == doctest::Approx(0.504).epsilon(1e-14));
    for (const auto& p : target.params()) {
      for (double v : p.tensor.data()) CHECK(v == doctest::Approx(expected).epsilon(1e-15));
    }
  }
  SUBCASE("edge rates are exact") {
    auto config = toy_config();
    config.copy_target_at_init = false;
    auto state = init_selfrl(10, config);
    const auto before = checksum(state.target.params());
    ema_update(state.target, state.online, 1.0);
    CHECK(checksum(state.target.params()) == before);
    ema_update(state.target, state.online, 0.0);
    const auto t = state.target.params();
    const auto o = state.online.params();
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(std::equal(t[i].tensor.data().begin(), t[i].tensor.data().end(),
                       o[i].tensor.data().begin()));
    }
  }
  SUBCASE("contraction with a fixed online network") {
    auto config = toy_config();
    config.copy_target_at_init = false;
    auto state = init_selfrl(10, config);
    const double d0 = parameter_distance(state.online, state.target);
    CHECK(d0 > 0.0);
    for (int k = 1; k <= 100; ++k) {
      ema_update(state.target, state.online, 0.996);
      const double expected = std::pow(0.996, k) * d0;
      CHECK(std::abs(parameter_distance(state.online, state.target) - expected) / expected <
            1e-10);
    }
  }
  SUBCASE("shape mismatch") {
    auto state = init_selfrl(10, toy_config());
    auto other = init_selfrl(10, [] {
      auto c = toy_config();
      c.hidden = 3;
      return c;
    }());
    CHECK(kind_of([&] { ema_update(other.target, state.online, 0.5); }) ==
          ErrorKind::kShapeMismatch);
  }
}

TEST_CASE("collapse_diagnostic") {
  CHECK(collapse_diagnostic(Tensor::matrix(3, 2, {1, 2, 1, 2, 1, 2})) ==
        doctest::Approx(0.0).epsilon(1e-15));
  CHECK(collapse_diagnostic(Tensor::matrix(2, 2, {1, 0, 0, 1})) == doctest::Approx(0.5));
  Rng rng(17);
  CHECK(collapse_diagnostic(gaussian_tensor({48, 50}, 1.0, rng, false)) > 0.0);
  CHECK(kind_of([] { collapse_diagnostic(Tensor::matrix(1, 2, {1, 0})); }) ==
        ErrorKind::kBatchTooSmall);
}

TEST_CASE("selfrl_step keeps the target out of the optimizer") {
  auto state = init_selfrl(12, toy_config());
  for (const auto& p : state.target.params()) CHECK_FALSE(state.optimizer.owns(p.tensor));
  for (const auto& p : state.online.params()) CHECK(state.optimizer.owns(p.tensor));
  CHECK_FALSE(state.optimizer.owns(state.provider.table));
  Rng rng(2);
  const auto batch = random_statements(rng, 8, 12);
  const auto provider_before = state.provider.checksum();
  const auto record = selfrl_step(state, batch, rng);
  CHECK(record.step == 1);
  CHECK(record.loss >= 0.0);
  CHECK(state.provider.checksum() == provider_before);
}

TEST_CASE("train_selfrl lowers the loss without collapsing") {
  SyntheticSpec spec;
  spec.vocab_size = 50;
  spec.n_external_statements = 200;
  auto corpus = generate_synthetic(spec);
  const auto vocab = build_vocabulary(corpus.external, corpus.examples);
  assign_ids(corpus.external, vocab);
  const auto statements = statement_tokens(corpus.external);

  double initial = 0.0, final = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SelfRLConfig config;
    config.seed = seed;
    config.learning_rate = 1e-3;
    config.max_steps = 200;
    double min_std = 1.0;
    auto result = train_selfrl(statements, vocab.size(), config,
                               [&](const SelfRLState&, const SelfRLStepRecord& r) {
                                 min_std = std::min(min_std, r.proj_std);
                               });
    CHECK(result.stats.steps.size() == 200);
    CHECK(min_std > 1e-3);
    initial += result.stats.steps.front().loss;
    final += result.stats.steps.back().loss;
    const auto fresh = init_selfrl(vocab.size(), config);
    CHECK(result.state.provider.checksum() == fresh.provider.checksum());
  }
  CHECK(final < initial);
}

TEST_CASE("train_selfrl rejects an empty corpus") {
  CHECK(kind_of([] { train_selfrl({}, 10, toy_config()); }) == ErrorKind::kEmptyCorpus);
}

TEST_CASE("stats serialise one record per step") {
  SelfRLStats stats;
  stats.steps = {{1, 2.5, 0.1, 0.3}, {2, 2.0, 0.1, 0.35}};
  const auto text = stats.to_jsonl();
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("step"));
    CHECK(j.contains("loss"));
    CHECK(j.contains("proj_std"));
    CHECK(j.contains("theta_delta_dist"));
    ++n;
  }
  CHECK(n == 2);
}
