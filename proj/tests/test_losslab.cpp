// Copyright (c) 2026 the shardcast authors.
// Distributed under the Apache License, Version 2.0.
// See LICENSE or http://www.apache.org/licenses/LICENSE-2.0.html

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "shardcast/losslab.hpp"

using namespace shardcast;

TEST_CASE("sample_rate matches the 80/20 training distribution") {
  MaskDistribution dist;
  Rng rng(1234);
  const int draws = 1000000;
  int zeros = 0;
  std::map<int, int> rate_counts;
  for (int i = 0; i < draws; ++i) {
    double r = sample_rate(dist, rng);
    if (r == 0.0) {
      ++zeros;
    } else {
      ++rate_counts[static_cast<int>(std::lround(r * 10))];
    }
  }
  double zero_freq = static_cast<double>(zeros) / draws;
  CHECK(zero_freq >= 0.798);
  CHECK(zero_freq <= 0.802);
  REQUIRE(rate_counts.size() == 6);
  for (const auto& [rate10, count] : rate_counts) {
    CHECK(rate10 >= 1);
    CHECK(rate10 <= 6);
    double freq = static_cast<double>(count) / draws;
    CHECK(freq >= 0.0323);
    CHECK(freq <= 0.0343);
  }
}

TEST_CASE("sample_rate is deterministic under a fixed seed") {
  MaskDistribution dist;
  Rng a(77), b(77);
  for (int i = 0; i < 1000; ++i) CHECK(sample_rate(dist, a) == sample_rate(dist, b));
}

TEST_CASE("draw_mask edge rates") {
  Rng rng(5);
  auto all = draw_mask(40, 0.0, rng);
  for (auto b : all) CHECK(b == 1);
  auto none = draw_mask(40, 1.0, rng);
  for (auto b : none) CHECK(b == 0);
}

TEST_CASE("draw_mask zero count is exact: m=9 rate 1/3 gives 3 zeros") {
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    auto mask = draw_mask(9, 1.0 / 3.0, rng);
    int zeros = 0;
    for (auto b : mask) zeros += b == 0;
    CHECK(zeros == 3);
  }
}

TEST_CASE("draw_mask count is deterministic in (m, rate)") {
  Rng rng(7);
  for (size_t m : {5, 16, 100, 1001}) {
    for (double rate : {0.1, 0.25, 0.5, 0.77}) {
      auto expect = static_cast<size_t>(std::lround(rate * static_cast<double>(m)));
      for (int i = 0; i < 10; ++i) {
        auto mask = draw_mask(m, rate, rng);
        size_t zeros = 0;
        for (auto b : mask) zeros += b == 0;
        CHECK(zeros == expect);
      }
    }
  }
}

namespace {

ToyLinearCodec make_toy(int k, int d, uint64_t seed) {
  Rng rng(seed);
  return ToyLinearCodec::random(k, d, rng);
}

Eigen::VectorXd make_x(int d, uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x(i) = 2.0 * rng.next_unit() - 1.0;
  return x;
}

}  // namespace

TEST_CASE("expected loss at rate 0 is the unmasked loss") {
  auto toy = make_toy(6, 5, 11);
  auto x = make_x(5, 12);
  double direct = (toy.decode * (toy.encode * x) - x).squaredNorm();
  CHECK(exact_expected_loss(toy, x, 0.0) == doctest::Approx(direct).epsilon(1e-12));
  CHECK(exact_expected_loss(toy, x, 0.0, ExpectationMode::kBernoulli) ==
        doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("expected loss at rate 1 is ||x||^2") {
  auto toy = make_toy(6, 5, 21);
  auto x = make_x(5, 22);
  CHECK(exact_expected_loss(toy, x, 1.0) == doctest::Approx(x.squaredNorm()).epsilon(1e-12));
  CHECK(exact_expected_loss(toy, x, 1.0, ExpectationMode::kBernoulli) ==
        doctest::Approx(x.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("enumeration agrees with Monte-Carlo within 3 sigma (k=6, rate 1/3)") {
  auto toy = make_toy(6, 5, 31);
  auto x = make_x(5, 32);
  double rate = 1.0 / 3.0;
  double exact = exact_expected_loss(toy, x, rate);

  Rng rng(33);
  const int n = 100000;
  double sum = 0, sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    double loss = masked_loss(toy, x, draw_mask(6, rate, rng));
    sum += loss;
    sum_sq += loss * loss;
  }
  double mean = sum / n;
  double var = (sum_sq / n - mean * mean) / n;
  CHECK(std::abs(mean - exact) <= 3.0 * std::sqrt(var));
}

TEST_CASE("enumeration rejects k > 12 and points to the Bernoulli mode") {
  auto toy = make_toy(14, 5, 41);
  auto x = make_x(5, 42);
  CHECK_THROWS_WITH_AS(exact_expected_loss(toy, x, 0.5), doctest::Contains("Bernoulli"),
                       ValidationError);
  CHECK_NOTHROW(exact_expected_loss(toy, x, 0.5, ExpectationMode::kBernoulli));
}

TEST_CASE("rate 0 gradient estimate is exact with no variance") {
  auto toy = make_toy(6, 4, 51);
  auto x = make_x(4, 52);
  Rng rng(53);
  auto est1 = grad_estimate(toy, x, 0.0, 1, rng);
  auto est2 = grad_estimate(toy, x, 0.0, 7, rng);
  CHECK((est1 - est2).norm() == doctest::Approx(0.0));
  auto fd = finite_difference_gradient(toy, x, 0.0);
  CHECK((est1 - fd).norm() / fd.norm() < 1e-6);
}

TEST_CASE("exact_gradient equals finite differences of the enumerated expectation") {
  auto toy = make_toy(8, 6, 61);
  auto x = make_x(6, 62);
  auto g = exact_gradient(toy, x, 0.25);
  auto fd = finite_difference_gradient(toy, x, 0.25);
  CHECK((g - fd).norm() / fd.norm() < 1e-6);
}

TEST_CASE("k=8 rate 0.25 N=1e5 estimator lands within 5% of finite differences") {
  auto toy = make_toy(8, 6, 71);
  auto x = make_x(6, 72);
  auto fd = finite_difference_gradient(toy, x, 0.25);
  Rng rng(73);
  auto est = grad_estimate(toy, x, 0.25, 100000, rng);
  CHECK((est - fd).norm() / fd.norm() <= 0.05);
}

TEST_CASE("estimator is unbiased: mean of 50 runs within 3.5 sigma per entry") {
  auto toy = make_toy(8, 5, 81);
  auto x = make_x(5, 82);
  auto exact = exact_gradient(toy, x, 0.25);

  const int runs = 50, n = 2000;
  std::vector<Eigen::MatrixXd> estimates;
  Rng root(83);
  for (int r = 0; r < runs; ++r) {
    Rng rng = root.child(static_cast<uint64_t>(r));
    estimates.push_back(grad_estimate(toy, x, 0.25, n, rng));
  }
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(8, 5);
  for (const auto& e : estimates) mean += e;
  mean /= runs;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 5; ++j) {
      double var = 0;
      for (const auto& e : estimates) {
        var += (e(i, j) - mean(i, j)) * (e(i, j) - mean(i, j));
      }
      var /= (runs - 1);
      double sigma_of_mean = std::sqrt(var / runs);
      CHECK(std::abs(mean(i, j) - exact(i, j)) <= 3.5 * sigma_of_mean + 1e-12);
    }
  }
}

TEST_CASE("grad-check report: error under 5%, slope -0.5 +- 0.1") {
  auto report = run_grad_check(7);
  CHECK(report.relative_error <= 0.05);
  CHECK(std::abs(report.slope + 0.5) <= 0.1);
  CHECK(report.pass);
}
