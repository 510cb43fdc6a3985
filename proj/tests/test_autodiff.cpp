#include <doctest.h>

#include <cmath>

#include "ecanet/autodiff.hpp"
#include "ecanet/errors.hpp"
#include "ecanet/grad_suite.hpp"
#include "ecanet/random.hpp"
#include "oracles.hpp"

using namespace ecanet;

TEST_SUITE("autodiff") {

TEST_CASE("gradient of a sum is ones") {
  Tape tape;
  SplitMix64 rng(1);
  const Var x = tape.leaf(random_tensor({3, 4}, rng));
  const Gradients g = tape.backward(tape.sum(x));
  CHECK(g.of(x) == Tensor({3, 4}, 1.0));
}

TEST_CASE("sum of a product") {
  Tape tape;
  SplitMix64 rng(2);
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  const Var va = tape.leaf(a), vb = tape.leaf(b);
  const Gradients g = tape.backward(tape.sum(tape.matmul(va, vb)));
  // d/dA sum(AB) = ones * B^T: every row is the row sums of B.
  Tensor expect({3, 4});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) expect.at(i, k) = b.at(k, 0) + b.at(k, 1);
  CHECK(oracle::max_abs_diff(g.of(va), expect) < 1e-15);
}

TEST_CASE("disconnected leaf gets zeros") {
  Tape tape;
  const Var x = tape.leaf(Tensor({2, 2}, 1.0));
  const Var y = tape.leaf(Tensor({5}, 3.0));
  const Gradients g = tape.backward(tape.sum(x));
  CHECK(g.of(y) == Tensor({5}));
}

TEST_CASE("non-scalar loss is rejected") {
  Tape tape;
  const Var x = tape.leaf(Tensor({2, 2}, 1.0));
  CHECK_THROWS_AS(tape.backward(x), ContractError);
}

TEST_CASE("concat routes slices back to their segments") {
  Tape tape;
  SplitMix64 rng(4);
  const Var f = tape.leaf(random_tensor({2, 6, 3}, rng));
  const auto parts = tape.split_h(f, 3);
  const std::vector<Var> kept{parts[1]};
  // Only segment 1 reaches the loss.
  Tensor weights({2, 2, 3});
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = static_cast<double>(i + 1);
  const Gradients g = tape.backward(tape.weighted_sum(tape.concat_h(kept), weights));
  const Tensor& d = g.of(f);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t h = 0; h < 6; ++h)
      for (std::size_t w = 0; w < 3; ++w) {
        const double expect = (h >= 2 && h < 4) ? weights.at(c, h - 2, w) : 0.0;
        CHECK(d.at(c, h, w) == expect);
      }
}

TEST_CASE("half squared norm") {
  SplitMix64 rng(6);
  const std::vector<NamedTensor> point{{"x", random_tensor({7}, rng)}};
  const auto reports = grad_check(
      [](Tape& t, std::span<const Var> v) { return t.scale(t.sum(t.mul(v[0], v[0])), 0.5); }, point);
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].passed);
  CHECK(reports[0].max_relative_error < 1e-6);
  CHECK(reports[0].parameter == "x");
}

TEST_CASE("softmax first entry matches the closed-form Jacobian row") {
  const Tensor x = Tensor::from_rows({{0.3, -1.2, 0.8}});
  Tape tape;
  const Var v = tape.leaf(x);
  const Var p0 = tape.pick(tape.softmax_rows(v), 0);
  const Gradients grads = tape.backward(p0);
  const Tensor& g = grads.of(v);
  double z = 0.0;
  for (double e : x.data()) z += std::exp(e);
  const double s0 = std::exp(0.3) / z;
  for (std::size_t j = 0; j < 3; ++j) {
    const double sj = std::exp(x[j]) / z;
    const double expect = j == 0 ? s0 * (1.0 - s0) : -s0 * sj;
    CHECK(std::abs(g[j] - expect) < 1e-15);
  }
  const std::vector<NamedTensor> point{{"x", x}};
  const auto reports =
      grad_check([](Tape& t, std::span<const Var> l) { return t.pick(t.softmax_rows(l[0]), 0); }, point);
  CHECK(reports[0].passed);
}

TEST_CASE("constant function") {
  const std::vector<NamedTensor> point{{"x", Tensor({3}, 2.0)}};
  const auto reports = grad_check(
      [](Tape& t, std::span<const Var> l) { return t.sum(t.scale(l[0], 0.0)); }, point);
  CHECK(reports[0].passed);
  CHECK(reports[0].max_relative_error == 0.0);
}

TEST_CASE("non-finite evaluations name the coordinate") {
  const std::vector<NamedTensor> point{{"w", Tensor({2}, 1.0)}};
  auto f = [](Tape& t, std::span<const Var> l) {
    const Var s = t.sum(l[0]);
    // A huge factor overflows once the step perturbs the input.
    return t.scale(t.mul(s, t.scale(s, 1e300)), 1e300);
  };
  CHECK_THROWS_WITH_AS(grad_check(f, point), doctest::Contains("perturbing w[0]"), NumericError);
}

TEST_CASE("pass flag follows the tolerance") {
  SplitMix64 rng(7);
  const std::vector<NamedTensor> point{{"x", random_tensor({4}, rng)}};
  auto f = [](Tape& t, std::span<const Var> l) { return t.sum(t.mul(t.mul(l[0], l[0]), l[0])); };
  const auto loose = grad_check(f, point, 1e-5, 1e-4);
  const auto tight = grad_check(f, point, 1e-5, 1e-14);
  CHECK(loose[0].passed);
  CHECK_FALSE(tight[0].passed);
  CHECK(loose[0].max_relative_error == tight[0].max_relative_error);
}

TEST_CASE("suite on one seed") {
  GradSuiteOptions opts;
  opts.seeds = 1;
  for (const auto& check : run_grad_suite(opts)) {
    INFO(check.op);
    CHECK(check.passed());
  }
  opts.ops = {"softmax"};
  const auto only = run_grad_suite(opts);
  REQUIRE(only.size() == 1);
  CHECK(only[0].op == "softmax");
  opts.ops = {"nope"};
  CHECK_THROWS_AS(run_grad_suite(opts), ContractError);
}

}
