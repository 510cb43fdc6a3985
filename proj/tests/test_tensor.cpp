#include <doctest.h>

#include <cmath>

#include "ecanet/errors.hpp"
#include "ecanet/ledger.hpp"
#include "ecanet/random.hpp"
#include "ecanet/tensor.hpp"
#include "oracles.hpp"

using namespace ecanet;

TEST_SUITE("tensor") {

TEST_CASE("row-major offsets") {
  Tensor t({2, 3, 4});
  t.at(1, 2, 3) = 7.0;
  t.at(0, 1, 0) = 5.0;
  CHECK(t[1 * 12 + 2 * 4 + 3] == 7.0);
  CHECK(t[4] == 5.0);
  CHECK_THROWS_AS(Tensor({0, 2}), DimensionError);
  CHECK_THROWS_AS(Tensor({1, 1, 1, 1, 1}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST_CASE("matmul") {
  const Tensor b = Tensor::from_rows({{1, 2}, {3, 4}});
  CHECK(matmul(Tensor::identity(2), b) == b);
  CHECK(matmul(Tensor::from_rows({{1, 2}}), Tensor::from_rows({{3}, {4}})) == Tensor::from_rows({{11}}));
  SplitMix64 rng(3);
  CHECK(matmul(Tensor({3, 4}), random_tensor({4, 5}, rng)) == Tensor({3, 5}));
  CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
}

TEST_CASE("matmul feeds the ledger") {
  AffinityLedger ledger;
  {
    LedgerScope scope(ledger);
    matmul(Tensor({3, 4}), Tensor({4, 5}));
  }
  CHECK(ledger.attention_macs == 60);
  matmul(Tensor({3, 4}), Tensor({4, 5}));
  CHECK(ledger.attention_macs == 60);
}

TEST_CASE("softmax rows") {
  const Tensor u = softmax_rows(Tensor({1, 3}));
  for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const Tensor p = softmax_rows(Tensor::from_rows({{0.0, std::log(3.0)}}));
  CHECK(std::abs(p.at(0, 0) - 0.25) < 1e-15);
  CHECK(std::abs(p.at(0, 1) - 0.75) < 1e-15);

  const Tensor shifted = softmax_rows(Tensor::from_rows({{4.0, 4.5, 3.0}}));
  const Tensor base = softmax_rows(Tensor::from_rows({{0.0, 0.5, -1.0}}));
  CHECK(oracle::max_abs_diff(shifted, base) < 1e-15);

  SplitMix64 rng(11);
  const Tensor r = softmax_rows(random_tensor({20, 30}, rng, -100, 100));
  for (std::size_t i = 0; i < 20; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 30; ++j) {
      CHECK(r.at(i, j) >= 0.0);
      s += r.at(i, j);
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
  CHECK_THROWS_AS(softmax_rows(Tensor::from_rows({{0.0, NAN}})), NumericError);
  CHECK_THROWS_AS(softmax_rows(Tensor::from_rows({{INFINITY, 0.0}})), NumericError);
}

TEST_CASE("adaptive average pooling") {
  SplitMix64 rng(5);
  const FeatureMap f(random_tensor({3, 4, 4}, rng));
  CHECK(adaptive_avg_pool(f, 4, 4) == f);

  const FeatureMap c(2, 5, 7, 1.25);
  const FeatureMap pc = adaptive_avg_pool(c, 3, 2);
  for (double v : pc.tensor().data()) CHECK(v == doctest::Approx(1.25).epsilon(1e-15));

  const FeatureMap small(Tensor({1, 2, 2}, {1, 2, 3, 4}));
  CHECK(adaptive_avg_pool(small, 1, 1).at(0, 0, 0) == 2.5);

  CHECK(pool_bin(1, 5, 3).begin == 1);
  CHECK(pool_bin(1, 5, 3).end == 4);
  CHECK(pool_bin(2, 5, 3).begin == 3);
  CHECK(pool_bin(2, 5, 3).end == 5);

  const FeatureMap g(random_tensor({2, 8, 12}, rng));
  const FeatureMap pg = adaptive_avg_pool(g, 4, 3);
  for (std::size_t ch = 0; ch < 2; ++ch) {
    double a = 0.0, b = 0.0;
    for (std::size_t h = 0; h < 8; ++h)
      for (std::size_t w = 0; w < 12; ++w) a += g.at(ch, h, w) / 96.0;
    for (std::size_t h = 0; h < 4; ++h)
      for (std::size_t w = 0; w < 3; ++w) b += pg.at(ch, h, w) / 12.0;
    CHECK(std::abs(a - b) < 1e-12);
  }
  CHECK_THROWS_AS(adaptive_avg_pool(g, 9, 3), DimensionError);
  CHECK_THROWS_AS(adaptive_avg_pool(g, 0, 3), DimensionError);
}

TEST_CASE("1x1 projection") {
  SplitMix64 rng(8);
  const FeatureMap f(random_tensor({3, 2, 5}, rng));
  CHECK(project_1x1(f, Tensor::identity(3)) == f);
  CHECK(project_1x1(f, Tensor({4, 3})) == FeatureMap(4, 2, 5));
  const FeatureMap px(Tensor({2, 1, 1}, {3, 4}));
  CHECK(project_1x1(px, Tensor::from_rows({{1, 1}})).at(0, 0, 0) == 7.0);
  CHECK_THROWS_AS(project_1x1(f, Tensor({2, 2})), DimensionError);
}

TEST_CASE("split and concat along height") {
  SplitMix64 rng(9);
  const FeatureMap f(random_tensor({3, 8, 5}, rng));
  const auto parts = split_h(f, 4);
  REQUIRE(parts.size() == 4);
  for (const auto& p : parts) CHECK(p.tensor().shape() == Shape{3, 2, 5});
  CHECK(parts[2].at(1, 1, 4) == f.at(1, 5, 4));
  CHECK(concat_h(parts) == f);
  const auto one = split_h(f, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == f);
  CHECK_THROWS_AS(split_h(f, 3), GeometryError);

  const std::vector<FeatureMap> mismatched{FeatureMap(3, 2, 5), FeatureMap(2, 2, 5)};
  CHECK_THROWS_AS(concat_h(mismatched), DimensionError);
}

TEST_CASE("concat along channels") {
  const std::vector<FeatureMap> parts{FeatureMap(2, 3, 4, 1.0), FeatureMap(1, 3, 4, 2.0)};
  const FeatureMap c = concat_c(parts);
  CHECK(c.channels() == 3);
  CHECK(c.at(1, 2, 3) == 1.0);
  CHECK(c.at(2, 0, 0) == 2.0);
}

}
