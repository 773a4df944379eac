#include <doctest.h>

#include <cmath>
#include <random>

#include "causerl/adamw.hpp"
#include "causerl/error.hpp"
#include "test_util.hpp"
#include "causerl/gradcheck.hpp"
#include "causerl/ops.hpp"
#include "causerl/params.hpp"

using namespace causerl;
using causerl::testing::kind_of;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("tensor shape and data stay consistent") {
  const auto t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}, true);
  CHECK(t.numel() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.grad().size() == t.numel());
  CHECK(t.at(1, 2) == 6.0);
  CHECK(kind_of([] { Tensor({2, 2}, {1.0, 2.0, 3.0}); }) == ErrorKind::kShapeMismatch);
  CHECK(kind_of([] { Tensor({0}, {}); }) == ErrorKind::kShapeMismatch);
  const auto plain = Tensor::vector({1, 2});
  CHECK(plain.grad().empty());
}

TEST_CASE("l2_normalize") {
  CHECK(values(ops::l2_normalize(Tensor::vector({1, 0, 0}))) == std::vector<double>{1, 0, 0});
  const auto n = ops::l2_normalize(Tensor::vector({3, 4}));
  CHECK(n.at(0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n.at(1) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(kind_of([] { ops::l2_normalize(Tensor::vector({0, 0})); }) == ErrorKind::kZeroNorm);
  CHECK(kind_of([] { ops::l2_normalize(Tensor::matrix(2, 2, {1, 0, 0, 0})); }) ==
        ErrorKind::kZeroNorm);

  Rng rng(3);
  const auto rows = gaussian_tensor({5, 7}, 1.0, rng, false);
  const auto unit = ops::l2_normalize(rows);
  for (std::size_t r = 0; r < 5; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < 7; ++c) sq += unit.at(r, c) * unit.at(r, c);
    CHECK(sq == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("normalized_mse examples") {
  CHECK(normalized_mse(Tensor::vector({1, 2}), Tensor::vector({2, 4})).item() ==
        doctest::Approx(0.0).epsilon(1e-15));
  CHECK(normalized_mse(Tensor::vector({1, 0}), Tensor::vector({0, 1})).item() ==
        doctest::Approx(2.0));
  CHECK(normalized_mse(Tensor::vector({1, 0}), Tensor::vector({-1, 0})).item() ==
        doctest::Approx(4.0));
}

TEST_CASE("normalized_mse equals two minus twice the cosine") {
  Rng rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> y(6), z(6);
    for (auto& v : y) v = g(rng);
    for (auto& v : z) v = g(rng);
    double dot = 0, ny = 0, nz = 0;
    for (int i = 0; i < 6; ++i) {
      dot += y[i] * z[i];
      ny += y[i] * y[i];
      nz += z[i] * z[i];
    }
    const double expected = 2.0 - 2.0 * dot / std::sqrt(ny * nz);
    const double got = normalized_mse(Tensor::vector(y), Tensor::vector(z)).item();
    CHECK(std::abs(got - expected) < 1e-12);
    CHECK(got >= 0.0);
    CHECK(got <= 4.0);
  }
}

TEST_CASE("normalized_mse sends gradient to y only") {
  const auto y = Tensor::vector({0.3, -1.2, 0.5}, true);
  const auto z = Tensor::vector({1.0, 0.4, -0.7}, true);
  Tape tape;
  tape.backward(normalized_mse(y, z));
  double gy = 0.0;
  for (double g : y.grad()) gy += std::abs(g);
  CHECK(gy > 0.0);
  for (double g : z.grad()) CHECK(g == 0.0);
}

TEST_CASE("binary_cross_entropy") {
  const std::vector<double> one = {1.0};
  CHECK(binary_cross_entropy(Tensor::vector({0.0}), one).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(binary_cross_entropy(Tensor::vector({40.0}), one).item() < 1e-15);
  // p = 0.25 with label 1 and p = 0.75 with label 0 each cost −ln 0.25.
  const double logit_quarter = std::log(0.25 / 0.75);
  const double logit_three_quarters = std::log(0.75 / 0.25);
  const double expected = -0.5 * (std::log(0.25) + std::log(0.25));
  CHECK(expected == doctest::Approx(1.3862943611198906));
  const auto loss =
      binary_cross_entropy(Tensor::vector({logit_quarter, logit_three_quarters}), {{1.0, 0.0}});
  CHECK(loss.item() == doctest::Approx(expected).epsilon(1e-14));
  CHECK(kind_of([] {
          binary_cross_entropy(Tensor::vector({std::nan("")}), std::vector<double>{1.0});
        }) == ErrorKind::kNonFinite);
  CHECK(kind_of([] { binary_cross_entropy(Tensor::vector({0.0}), std::vector<double>{0.5}); }) ==
        ErrorKind::kInvalidSpec);
  CHECK(binary_cross_entropy(Tensor::vector({-800.0, 800.0}), {{1.0, 0.0}}).item() ==
        doctest::Approx(800.0));
}

TEST_CASE("backward basics") {
  const auto x = Tensor::vector({1, 2, 3}, true);
  {
    Tape tape;
    tape.backward(ops::sum(x));
  }
  for (double g : x.grad()) CHECK(g == 1.0);

  const auto v = Tensor::vector({1, 2}, true);
  {
    Tape tape;
    tape.backward(ops::sum(ops::mul(v, v)));
  }
  CHECK(v.grad()[0] == 2.0);
  CHECK(v.grad()[1] == 4.0);

  Tape tape;
  CHECK(kind_of([&] { tape.backward(ops::mul(v, v)); }) == ErrorKind::kNotScalar);
}

TEST_CASE("reused tensors accumulate once per use") {
  const auto x = Tensor::vector({2.0}, true);
  Tape tape;
  const auto y = ops::add(ops::mul(x, x), x);  // x² + x
  tape.backward(ops::sum(y));
  CHECK(x.grad()[0] == 5.0);
}

TEST_CASE("stop_gradient blocks the upstream path") {
  const auto w = Tensor::vector({0.5, -0.25}, true);
  const auto u = Tensor::vector({1.5, 2.0}, true);
  Tape tape;
  const auto blocked = ops::stop_gradient(ops::mul(w, w));
  tape.backward(ops::sum(ops::mul(blocked, u)));
  for (double g : w.grad()) CHECK(g == 0.0);
  CHECK(u.grad()[0] == 0.25);
}

TEST_CASE("operations run forward-only without a tape") {
  const auto x = Tensor::vector({1, 2}, true);
  const auto y = ops::tanh(x);
  CHECK_FALSE(y.requires_grad());
  {
    NoGradGuard guard;
    Tape* active = Tape::active();
    CHECK(active == nullptr);
  }
}

TEST_CASE("logsumexp is stable and matches the naive form") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(5);
    double naive = 0.0;
    for (auto& x : v) {
      x = u(rng);
      naive += std::exp(x);
    }
    CHECK(std::abs(ops::logsumexp(Tensor::vector(v)).item() - std::log(naive)) < 1e-9);
  }
  CHECK(ops::logsumexp(Tensor::vector({1000.0, 1000.0})).item() ==
        doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("row_distances gives Euclidean distances") {
  const auto x = Tensor::matrix(2, 2, {3, 4, 0, 0});
  const auto d = ops::row_distances(x, Tensor::vector({0, 0}));
  CHECK(d.at(0) == 5.0);
  CHECK(d.at(1) == 0.0);
}

TEST_CASE("finite_difference_check") {
  SUBCASE("quadratic form is exact up to roundoff") {
    const auto x = Tensor::vector({0.7, -1.3, 2.1}, true);
    const auto a = Tensor::matrix(3, 3, {2, 0.5, 0, 0.5, 1, 0.2, 0, 0.2, 3});
    auto loss = [&] {
      const auto ax = ops::linear(x, a, Tensor::zeros({3}));
      return ops::sum(ops::mul(x, ax));
    };
    const auto r = finite_difference_check(loss, {x});
    CHECK(r.max_relative_error < 1e-8);
    CHECK(r.checked == 3);
  }
  SUBCASE("wrong backward rule is detected") {
    const auto x = Tensor::matrix(3, 2, {0.3, 0.1, -0.5, 0.8, 1.2, -0.4}, true);
    const auto anchor = Tensor::vector({0.2, 0.2});
    auto loss = [&] { return ops::sum(ops::row_distances(x, anchor)); };
    CHECK(finite_difference_check(loss, {x}).max_relative_error < 1e-6);
    set_fault(Fault::kRowDistanceSign);
    const double broken = finite_difference_check(loss, {x}).max_relative_error;
    set_fault(Fault::kNone);
    CHECK(broken > 1e-2);
  }
  SUBCASE("step outside the allowed range") {
    const auto x = Tensor::vector({1.0}, true);
    auto loss = [&] { return ops::sum(x); };
    CHECK(kind_of([&] { finite_difference_check(loss, {x}, 1e-2); }) ==
          ErrorKind::kInvalidConfig);
  }
  SUBCASE("non-deterministic function") {
    const auto x = Tensor::vector({1.0}, true);
    int calls = 0;
    auto loss = [&] {
      ++calls;
      return ops::scale(ops::sum(x), 1.0 + calls * 1e-3);
    };
    CHECK(kind_of([&] { finite_difference_check(loss, {x}); }) == ErrorKind::kNonDeterministic);
  }
}

TEST_CASE("lstm and linear gradients pass the oracle") {
  Rng rng(21);
  const auto x = gaussian_tensor({4, 3}, 1.0, rng, true);
  const auto wih = uniform_tensor({8, 3}, 0.5, rng, true);
  const auto whh = uniform_tensor({8, 2}, 0.5, rng, true);
  const auto b = uniform_tensor({8}, 0.5, rng, true);
  for (bool reverse : {false, true}) {
    auto loss = [&] {
      const auto h = ops::lstm_sequence(x, wih, whh, b, reverse);
      return ops::sum(ops::mul(h, h));
    };
    CHECK(finite_difference_check(loss, {x, wih, whh, b}).max_relative_error < 1e-6);
  }
}

TEST_CASE("adamw_step") {
  SUBCASE("zero gradient and no decay leave parameters unchanged") {
    AdamWState state;
    state.config = {0.1, 0.9, 0.999, 1e-8, 0.0};
    std::vector<double> p = {1.0, -2.0};
    const std::vector<double> g = {0.0, 0.0};
    adamw_step(state, p, g);
    CHECK(p == std::vector<double>{1.0, -2.0});
  }
  SUBCASE("first step with unit gradient moves by the learning rate") {
    AdamWState state;
    state.config = {0.1, 0.9, 0.999, 1e-8, 0.0};
    std::vector<double> p = {0.0};
    const std::vector<double> g = {1.0};
    adamw_step(state, p, g);
    // m̂ = 1, √v̂ = 1, so Δ = −0.1·1/(1 + 1e-8).
    CHECK(p[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-15));
    CHECK(state.step == 1);
  }
  SUBCASE("decoupled decay shrinks parameters geometrically") {
    AdamWState state;
    state.config = {0.1, 0.9, 0.999, 1e-8, 0.01};
    std::vector<double> p = {2.0, -4.0};
    const std::vector<double> g = {0.0, 0.0};
    adamw_step(state, p, g);
    CHECK(p[0] == doctest::Approx(2.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(-4.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-15));
  }
  SUBCASE("step counter increments and buffers keep their layout") {
    AdamW opt({Tensor::vector({1.0, 2.0}, true), Tensor::vector({3.0}, true)}, AdamWConfig{});
    for (int i = 1; i <= 3; ++i) {
      opt.step();
      CHECK(opt.state().step == static_cast<std::size_t>(i));
      CHECK(opt.state().first_moment.size() == 2);
      CHECK(opt.state().first_moment[0].size() == 2);
    }
  }
  SUBCASE("shape mismatch") {
    AdamWState state;
    std::vector<double> p = {0.0, 1.0};
    const std::vector<double> g = {1.0};
    CHECK(kind_of([&] { adamw_step(state, p, g); }) == ErrorKind::kShapeMismatch);
  }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  Rng rng(9);
  ParamList params = {{"a", gaussian_tensor({3, 4}, 1.0, rng, true)},
                      {"b", gaussian_tensor({5}, 1e-7, rng, false)}};
  const auto doc = params_to_json(params);
  ParamList restored = {{"a", Tensor::zeros({3, 4})}, {"b", Tensor::zeros({5})}};
  params_from_json(nlohmann::json::parse(doc.dump()), restored);
  CHECK(checksum(restored) == checksum(params));
  ParamList wrong = {{"a", Tensor::zeros({4, 3})}, {"b", Tensor::zeros({5})}};
  CHECK(kind_of([&] { params_from_json(doc, wrong); }) == ErrorKind::kShapeMismatch);
}

TEST_CASE("identical seeds give bit-identical losses") {
  auto run = [] {
    Rng rng(77);
    const auto x = gaussian_tensor({3, 4}, 1.0, rng, true);
    const auto w = gaussian_tensor({2, 4}, 1.0, rng, true);
    return ops::sum(ops::tanh(ops::linear(x, w, Tensor::zeros({2})))).item();
  };
  CHECK(run() == run());
}
