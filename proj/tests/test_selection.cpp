// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "daquant/errors.hpp"
#include "daquant/problems.hpp"
#include "daquant/random.hpp"
#include "daquant/selection.hpp"

using namespace daquant;

TEST_CASE("gate semantics: strict inequality, zero threshold, rejects bad loss") {
  ThresholdPolicy p;
  p.kind = SelectionKind::TheorySchedule;
  p.current = 0.0;
  CHECK(should_transmit(1e-9, p));   // every positive-loss sample transmits
  CHECK_FALSE(should_transmit(0.0, p));

  p.current = 0.3;
  CHECK_FALSE(should_transmit(0.3, p));  // tie skips
  CHECK(should_transmit(0.5, p));

  CHECK_THROWS_AS(should_transmit(-0.1, p), DomainError);
  CHECK_THROWS_AS(should_transmit(std::nan(""), p), DomainError);

  p.kind = SelectionKind::Disabled;
  p.current = 0.0;
  CHECK(should_transmit(0.0, p));  // disabled gate transmits everything
}

TEST_CASE("theory schedule values and feasibility") {
  CHECK(theory_threshold(1, 0.25) == 0.25);
  CHECK(theory_threshold(4, 0.25) == doctest::Approx(0.0625));
  CHECK(theory_threshold(10, 0.0) == 0.0);
  CHECK_THROWS_AS(theory_threshold(0, 0.25), DomainError);

  // sum_{i=1}^{100} sqrt(c/i) with c=1/4 is ~9.2948, under sqrt(100) = 10
  double s = 0;
  for (int i = 1; i <= 100; ++i) s += std::sqrt(theory_threshold(i, 0.25));
  CHECK(s == doctest::Approx(9.2948).epsilon(1e-3));
  CHECK(s <= 10.0);

  for (const std::int64_t n : {100ll, 10000ll}) {
    double total = 0;
    for (std::int64_t i = 1; i <= n; ++i)
      total += std::sqrt(theory_threshold(i, 0.25));
    CHECK(total <= std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("adaptive threshold rule") {
  EpochStats prev;
  prev.transmitted = 10;
  prev.transmitted_loss_sum = 20.0;  // mean 2.0
  CHECK(adaptive_threshold(prev, 0.2) == doctest::Approx(0.4));

  prev.transmitted = 0;  // all-skipped epoch reopens the gate
  prev.skipped = 40;
  CHECK(adaptive_threshold(prev, 0.2) == 0.0);

  prev.transmitted = 5;
  prev.transmitted_loss_sum = 0.0;
  CHECK(adaptive_threshold(prev, 1.0) == 0.0);
}

TEST_CASE("policy validation") {
  ThresholdPolicy p;
  p.kind = SelectionKind::TheorySchedule;
  p.c = 0.3;  // > 1/4 breaks the feasibility proof
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.c = 0.25;
  CHECK_NOTHROW(p.validate());

  p.kind = SelectionKind::AdaptiveEpoch;
  p.alpha = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.alpha = 0.2;
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("gated gradient expectation matches the clipped-risk gradient") {
  // 1-D least squares; the gate keeps only losses above tau, so the mean
  // gated gradient must equal the finite-difference gradient of
  // (1/N) sum max{tau, loss_i} away from the tie set.
  TaskConfig tc;
  tc.kind = TaskKind::LeastSquares;
  tc.dx = 1;
  tc.n_samples = 64;
  tc.noise = 0.5;
  tc.seed = 9;
  const auto task = make_task(tc);

  const std::vector<double> w{0.3, -0.1};
  const double tau = 0.05;

  // analytic gradient of the clipped risk via its exact dataset form
  std::vector<double> exact(2, 0.0);
  for (std::size_t i = 0; i < task->dataset_size(); ++i) {
    if (task->sample_loss(i, w) > tau) {
      const auto g = task->sample_grad(i, w);
      exact[0] += g[0];
      exact[1] += g[1];
    }
  }
  exact[0] /= static_cast<double>(task->dataset_size());
  exact[1] /= static_cast<double>(task->dataset_size());

  // independent route: central differences of the clipped risk
  auto clipped_risk = [&](const std::vector<double>& wv) {
    double s = 0;
    for (std::size_t i = 0; i < task->dataset_size(); ++i)
      s += std::max(tau, task->sample_loss(i, wv));
    return s / static_cast<double>(task->dataset_size());
  };
  for (int j = 0; j < 2; ++j) {
    auto wp = w, wm = w;
    wp[static_cast<std::size_t>(j)] += 1e-6;
    wm[static_cast<std::size_t>(j)] -= 1e-6;
    const double fd = (clipped_risk(wp) - clipped_risk(wm)) / 2e-6;
    CHECK(std::abs(fd - exact[static_cast<std::size_t>(j)]) <= 1e-6);
  }

  // Monte-Carlo mean of gated gradients over uniform draws
  ThresholdPolicy p;
  p.kind = SelectionKind::AdaptiveEpoch;
  p.current = tau;
  RandomStream rng(21);
  const int n = 100000;
  std::vector<double> sum(2, 0.0), sumsq(2, 0.0);
  for (int t = 0; t < n; ++t) {
    const std::size_t i = rng.uniform_int(task->dataset_size());
    std::vector<double> g(2, 0.0);
    if (should_transmit(task->sample_loss(i, w), p)) g = task->sample_grad(i, w);
    for (int j = 0; j < 2; ++j) {
      sum[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(j)];
      sumsq[static_cast<std::size_t>(j)] +=
          g[static_cast<std::size_t>(j)] * g[static_cast<std::size_t>(j)];
    }
  }
  for (int j = 0; j < 2; ++j) {
    const double mean = sum[static_cast<std::size_t>(j)] / n;
    const double var =
        sumsq[static_cast<std::size_t>(j)] / n - mean * mean;
    const double tol = 5.0 * std::sqrt(std::max(var, 1e-12) / n);
    CHECK(std::abs(mean - exact[static_cast<std::size_t>(j)]) <= tol);
  }
}
