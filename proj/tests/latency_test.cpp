/* Copyright 2026 The sloscale Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "sloscale/latency.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <random>
#include <vector>

#include <gtest/gtest.h>

namespace sloscale {
namespace {

// Erlang C from its closed form, summing a^n / n! directly.
double erlang_c_closed_form(int c, double a) {
  double term = 1.0;
  double head = 0.0;
  for (int n = 0; n < c; ++n) {
    head += term;
    term *= a / (n + 1);
  }
  const double tail = term / (1.0 - a / c);
  return tail / (head + tail);
}

TEST(ErlangCTest, Examples) {
  EXPECT_DOUBLE_EQ(erlang_c(1, 0.5), 0.5);
  EXPECT_NEAR(erlang_c(2, 1.0), 1.0 / 3.0, 1e-15);
  EXPECT_LT(erlang_c(8, 1e-9), 1e-60);
  EXPECT_EQ(erlang_c(8, 0.0), 0.0);
}

TEST(ErlangCTest, MatchesClosedForm) {
  for (int c : {1, 2, 3, 5, 8, 13, 40}) {
    for (double rho : {0.1, 0.5, 0.8, 0.95, 0.999}) {
      const double a = rho * c;
      EXPECT_NEAR(erlang_c(c, a), erlang_c_closed_form(c, a), 1e-10)
          << "c=" << c << " rho=" << rho;
    }
  }
}

TEST(ErlangCTest, Errors) {
  EXPECT_THROW(erlang_c(2, 2.0), std::domain_error);
  EXPECT_THROW(erlang_c(0, 0.1), std::invalid_argument);
  EXPECT_THROW(erlang_c(1, -1.0), std::invalid_argument);
}

TEST(ErlangCTest, FractionalInterpolates) {
  EXPECT_DOUBLE_EQ(erlang_c_fractional(3.0, 1.5), erlang_c(3, 1.5));
  EXPECT_NEAR(erlang_c_fractional(3.25, 1.5),
              0.75 * erlang_c(3, 1.5) + 0.25 * erlang_c(4, 1.5), 1e-15);
  // Saturated floor contributes C = 1.
  EXPECT_NEAR(erlang_c_fractional(2.5, 2.2),
              0.5 * 1.0 + 0.5 * erlang_c(3, 2.2), 1e-15);
}

TEST(WaitQuantileTest, Examples) {
  EXPECT_EQ(mmc_wait_quantile({0.2, 0.0, 3.0, 0.99}), 0.0);
  // C(8, 0.4) is far below 1 - k.
  EXPECT_EQ(mmc_wait_quantile({0.1, 4.0, 8.0, 0.99}), 0.0);
  // Reference values from the closed form evaluated independently.
  const double c = erlang_c(8, 6.0);
  EXPECT_NEAR(c, 0.35698108587868027, 1e-12);
  const double t = mmc_wait_quantile({0.15, 40.0, 8.0, 0.9999});
  EXPECT_NEAR(t, std::log(c / 1e-4) / (8.0 / 0.15 - 40.0), 1e-12);
  EXPECT_NEAR(t, 0.6135200919478625, 1e-12);
  EXPECT_THROW(mmc_wait_quantile({0.15, 60.0, 8.0, 0.99}), std::domain_error);
}

TEST(MdcLatencyTest, SizingExample) {
  EXPECT_EQ(min_replicas_mdc(40.0, 0.15, 0.6, 0.9999), 8);
  EXPECT_GT(mdc_latency({0.15, 40.0, 7.0, 0.9999}), 0.6);
  EXPECT_LE(mdc_latency({0.15, 40.0, 8.0, 0.9999}), 0.6);
  EXPECT_EQ(upper_bound_replicas(40.0, 0.15, 0.6), 10);
}

TEST(MdcLatencyTest, UnstableAndLimits) {
  EXPECT_EQ(mdc_latency({0.15, 40.0, 6.0, 0.99}), kInfinity);
  EXPECT_EQ(mdc_latency({0.15, 50.0, 6.0, 0.99}), kInfinity);
  EXPECT_NEAR(mdc_latency({0.15, 40.0, 500.0, 0.99}), 0.15, 1e-12);
}

TEST(MdcLatencyTest, Monotone) {
  for (double lambda = 1.0; lambda < 60.0; lambda += 1.7) {
    double prev = kInfinity;
    for (double n = 1.0; n <= 30.0; n += 0.25) {
      const double l = mdc_latency({0.15, lambda, n, 0.99});
      EXPECT_LE(l, prev);
      prev = l;
    }
  }
  for (double n : {1.0, 2.5, 8.0}) {
    double prev = 0.0;
    for (double lambda = 0.0; lambda < 100.0; lambda += 0.5) {
      const double l = mdc_latency({0.15, lambda, n, 0.99});
      EXPECT_GE(l, prev);
      prev = l;
    }
  }
}

TEST(UpperBoundTest, Examples) {
  EXPECT_EQ(upper_bound_replicas(0.0, 0.15, 0.6), 1);
  EXPECT_EQ(upper_bound_replicas(3.2, 0.5, 0.5), 4);
  EXPECT_EQ(upper_bound_replicas(4.0, 0.5, 0.5), 4);
  EXPECT_DOUBLE_EQ(upper_bound_latency({0.15, 40.0, 10.0, 0.99}), 0.6);
  EXPECT_DOUBLE_EQ(upper_bound_latency({0.15, 1.0, 10.0, 0.99}), 0.15);
}

// One second of arrivals completing within s bounds the queue only when
// s <= 1 s, and at a single replica the k-quantile queueing delay can exceed
// the batch estimate. From ten replicas on, pooling makes M/D/c cheaper.
TEST(UpperBoundTest, MdcNeedsNoMoreOncePooled) {
  for (double p : {0.05, 0.15, 0.18, 0.3}) {
    for (double lambda = 0.0; lambda <= 400.0; lambda += 3.3) {
      for (double s_mult : {1.5, 2.0, 4.0}) {
        const double s = p * s_mult;
        if (s > 1.0 || upper_bound_replicas(lambda, p, s) < 10) continue;
        EXPECT_LE(min_replicas_mdc(lambda, p, s, 0.9999),
                  upper_bound_replicas(lambda, p, s))
            << "p=" << p << " lambda=" << lambda << " s=" << s;
      }
    }
  }
}

TEST(UpperBoundTest, NotConservativeAtLowLoad) {
  // 3.3 req/s at 180 ms on one replica: the batch estimate says 0.59 s, but
  // the 99.99th percentile queueing delay alone is several seconds.
  EXPECT_EQ(upper_bound_replicas(3.3, 0.18, 0.72), 1);
  EXPECT_GT(min_replicas_mdc(3.3, 0.18, 0.72, 0.9999), 1);
}

TEST(RelaxedLatencyTest, Examples) {
  const QueueInput below{0.15, 0.5 * 8.0 / 0.15, 8.0, 0.99};
  EXPECT_EQ(relaxed_mdc_latency(below), mdc_latency(below));
  const double knee_rate = 0.95 * 8.0 / 0.15;
  const double knee = mdc_latency({0.15, knee_rate, 8.0, 0.99});
  EXPECT_DOUBLE_EQ(relaxed_mdc_latency({0.15, knee_rate, 8.0, 0.99}), knee);
  EXPECT_NEAR(relaxed_mdc_latency({0.15, 2.0 * knee_rate, 8.0, 0.99}),
              2.0 * knee, 1e-12);
}

TEST(RelaxedLatencyTest, FiniteAndStrictlyIncreasingPastKnee) {
  for (double n : {1.0, 3.0, 7.5, 16.0}) {
    const double knee_rate = 0.95 * n / 0.18;
    double prev = relaxed_mdc_latency({0.18, knee_rate, n, 0.99});
    for (double lambda = knee_rate * 1.01; lambda < knee_rate * 10.0;
         lambda *= 1.05) {
      const double l = relaxed_mdc_latency({0.18, lambda, n, 0.99});
      EXPECT_TRUE(std::isfinite(l));
      EXPECT_GT(l, prev);
      prev = l;
    }
  }
}

TEST(RelaxedLatencyTest, ContinuousAtKnee) {
  const double knee_rate = 0.95 * 4.0 / 0.18;
  const double lo = relaxed_mdc_latency({0.18, knee_rate * (1 - 1e-9), 4.0, 0.99});
  const double hi = relaxed_mdc_latency({0.18, knee_rate * (1 + 1e-9), 4.0, 0.99});
  EXPECT_NEAR(lo, hi, 1e-6);
}

// FIFO M/M/c queue simulated by the Kiefer-Wolfowitz recursion: each arrival
// takes the earliest-free server.
double simulated_wait_quantile(int c, double rho, double k, int arrivals,
                               unsigned seed) {
  const double mu = 1.0;
  const double lambda = rho * c * mu;
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> inter(lambda);
  std::exponential_distribution<double> service(mu);
  std::priority_queue<double, std::vector<double>, std::greater<>> free_at;
  for (int i = 0; i < c; ++i) free_at.push(0.0);
  std::vector<double> waits;
  waits.reserve(arrivals);
  double t = 0.0;
  for (int i = 0; i < arrivals; ++i) {
    t += inter(rng);
    const double start = std::max(t, free_at.top());
    free_at.pop();
    free_at.push(start + service(rng));
    waits.push_back(start - t);
  }
  const auto idx = static_cast<std::size_t>(std::ceil(k * arrivals)) - 1;
  std::nth_element(waits.begin(), waits.begin() + idx, waits.end());
  return waits[idx];
}

TEST(WaitQuantileTest, AgreesWithSimulation) {
  for (int c : {1, 4}) {
    for (double rho : {0.5, 0.75}) {
      const double k = 0.99;
      const double analytic = mmc_wait_quantile({1.0, rho * c, double(c), k});
      const double simulated = simulated_wait_quantile(c, rho, k, 400000, 7);
      EXPECT_NEAR(simulated, analytic, 0.08 * analytic)
          << "c=" << c << " rho=" << rho;
    }
  }
}

}  // namespace
}  // namespace sloscale
