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

#include "sloscale/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace sloscale {
namespace {

RateSeries constant_trace(double per_minute, std::size_t minutes) {
  RateSeries s;
  s.values.assign(minutes, per_minute);
  return s;
}

JobSpec make_job(const std::string& id, double p = 0.18, double slo = 0.72) {
  JobSpec j;
  j.id = id;
  j.service_time = p;
  j.slo.target_latency = slo;
  return j;
}

// Holds one allocation for the whole run.
class FixedPolicy final : public Policy {
 public:
  explicit FixedPolicy(AllocationPlan plan) : plan_(std::move(plan)) {}
  std::string name() const override { return "fixed"; }
  AllocationPlan initial_plan(const ClusterState&) override { return plan_; }
  std::optional<AllocationPlan> on_tick(const ClusterState&) override {
    return std::nullopt;
  }

 private:
  AllocationPlan plan_;
};

TEST(GenerateArrivalsTest, ZeroRateHasNoArrivals) {
  EXPECT_TRUE(generate_arrivals(constant_trace(0, 100), 1).empty());
}

TEST(GenerateArrivalsTest, CountMatchesRate) {
  const auto a = generate_arrivals(constant_trace(600, 1000), 3);
  EXPECT_NEAR(static_cast<double>(a.size()), 600000.0, 6000.0);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_GE(a.front(), 0.0);
  EXPECT_LT(a.back(), 60000.0);
}

TEST(GenerateArrivalsTest, SameSeedSameArrivals) {
  const auto t = constant_trace(50, 30);
  EXPECT_EQ(generate_arrivals(t, 8), generate_arrivals(t, 8));
  EXPECT_NE(generate_arrivals(t, 8), generate_arrivals(t, 9));
}

TEST(TailWithInfiniteTest, NearestRank) {
  std::vector<double> v = {3, 1, 2};
  EXPECT_EQ(detail::tail_with_infinite(v, 0, 0.5), 2.0);
  EXPECT_EQ(detail::tail_with_infinite(v, 0, 0.99), 3.0);
  EXPECT_EQ(detail::tail_with_infinite(v, 1, 0.99), kInfinity);
  std::vector<double> none;
  EXPECT_EQ(detail::tail_with_infinite(none, 0, 0.99), 0.0);
}

TEST(JobEngineTest, LoneRequestTakesServiceTime) {
  const auto r = simulate_fixed_pool(0.5, 0.001, 1, 20, false, 4);
  ASSERT_FALSE(r.latencies.empty());
  EXPECT_DOUBLE_EQ(r.latencies.front(), 0.5);
  EXPECT_EQ(r.waits.front(), 0.0);
}

TEST(JobEngineTest, TailDropPastThreshold) {
  SimConfig config;
  // One replica busy for far longer than the burst: it holds one request,
  // the queue holds 50, everything else is dropped.
  JobEngine e(make_job("a", 1000.0, 2000.0), {120.0}, 60.0, config, 5);
  e.set_target(1, 0.0, true);
  e.advance(60.0);
  ASSERT_GT(e.arrivals(), 51u);
  EXPECT_EQ(e.tail_drops(), e.arrivals() - 51);
  EXPECT_EQ(e.max_queue_length(), 50u);
  EXPECT_EQ(e.in_flight(), 51u);
}

TEST(JobEngineTest, ColdStartDelaysNewReplicas) {
  SimConfig config;
  JobEngine e(make_job("a"), {0.0, 0.0}, 60.0, config, 1);
  e.set_target(1, 0.0, true);
  e.set_target(3, 0.0, false);
  EXPECT_EQ(e.planned(), 3.0);
  EXPECT_EQ(e.ready(), 1.0);
  e.advance(59.9);
  EXPECT_EQ(e.ready(), 1.0);
  e.advance(60.0);
  EXPECT_EQ(e.ready(), 3.0);
  // Shrinking removes idle replicas at once.
  e.set_target(1, 60.0, false);
  EXPECT_EQ(e.planned(), 1.0);
  // Targets round and never go below one replica.
  e.set_target(0.2, 60.0, true);
  EXPECT_EQ(e.planned(), 1.0);
}

TEST(JobEngineTest, ExplicitDropFraction) {
  SimConfig config;
  JobEngine e(make_job("a"), std::vector<double>(20, 600.0), 60.0, config, 2);
  e.set_target(10, 0.0, true);
  e.set_drop_rate(0.3);
  e.advance(1200.0);
  const double frac = static_cast<double>(e.explicit_drops()) /
                      static_cast<double>(e.arrivals());
  EXPECT_NEAR(frac, 0.3, 0.02);
  e.set_drop_rate(2.0);
  EXPECT_EQ(e.drop_rate(), 1.0);
}

TEST(SimulationTest, ZeroTrafficHasNoViolations) {
  const std::vector<JobSpec> jobs = {make_job("a"), make_job("b")};
  FixedPolicy policy(AllocationPlan({1, 1}));
  SimConfig config;
  const auto r = run_scenario({constant_trace(0, 10), constant_trace(0, 10)},
                              jobs, policy, config);
  EXPECT_EQ(r.violation_rate, 0.0);
  EXPECT_DOUBLE_EQ(r.mean_cluster_utility, 2.0);
  EXPECT_DOUBLE_EQ(r.mean_lost_cluster_utility, 0.0);
  ASSERT_EQ(r.cluster_utility.size(), 10u);
}

TEST(SimulationTest, ConservationAndQueueBound) {
  std::vector<JobSpec> jobs;
  std::vector<RateSeries> traces;
  for (int i = 0; i < 3; ++i) {
    jobs.push_back(make_job("j" + std::to_string(i)));
    traces.push_back(constant_trace(300.0 + 900.0 * i, 20));
  }
  FixedPolicy policy(AllocationPlan({2, 2, 2}, {0.0, 0.1, 0.0}));
  SimConfig config;
  config.seed = 4;
  Simulation sim(jobs, traces, {}, config);
  const auto r = sim.run(policy);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& j = r.jobs[i];
    EXPECT_EQ(j.arrivals,
              j.completions + j.tail_drops + j.explicit_drops + j.in_flight);
    EXPECT_LE(sim.engines()[i].max_queue_length(), config.tail_drop_threshold);
    std::size_t per_minute = 0;
    for (const auto& m : j.minutes) per_minute += m.arrivals;
    EXPECT_EQ(per_minute, j.arrivals);
  }
  // The overloaded job tail-drops; the light one does not.
  EXPECT_GT(r.jobs[2].tail_drops, 0u);
  EXPECT_EQ(r.jobs[0].tail_drops, 0u);
  EXPECT_GT(r.jobs[1].explicit_drops, 0u);
}

TEST(SimulationTest, FairShareStaysStatic) {
  std::vector<JobSpec> jobs;
  std::vector<RateSeries> traces;
  for (int i = 0; i < 10; ++i) {
    jobs.push_back(make_job("j" + std::to_string(i)));
    traces.push_back(constant_trace(100.0 * (i + 1), 15));
  }
  SimConfig config;
  config.limits = ResourceLimits::replicas(32);
  FairSharePolicy policy(jobs, config.limits);
  const auto r = run_scenario(traces, jobs, policy, config);
  for (const auto& j : r.jobs) {
    for (const auto& m : j.minutes) {
      EXPECT_EQ(m.planned, 3.0);
      EXPECT_EQ(m.ready, 3.0);
    }
  }
}

TEST(SimulationTest, SameSeedIsDeterministic) {
  const std::vector<JobSpec> jobs = {make_job("a"), make_job("b")};
  const std::vector<RateSeries> traces = {constant_trace(700, 20),
                                          constant_trace(200, 20)};
  SimConfig config;
  config.seed = 11;
  config.limits = ResourceLimits::replicas(6);
  AutoscalerConfig ac;
  ReactivePolicy p1(ReactivePolicy::Rule::kAiad, jobs, config.limits, ac);
  ReactivePolicy p2(ReactivePolicy::Rule::kAiad, jobs, config.limits, ac);
  const auto a = run_scenario(traces, jobs, p1, config);
  const auto b = run_scenario(traces, jobs, p2, config);
  EXPECT_EQ(a.cluster_utility, b.cluster_utility);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    EXPECT_EQ(a.jobs[i].arrivals, b.jobs[i].arrivals);
    EXPECT_EQ(a.jobs[i].violations, b.jobs[i].violations);
  }
  config.seed = 12;
  ReactivePolicy p3(ReactivePolicy::Rule::kAiad, jobs, config.limits, ac);
  EXPECT_NE(run_scenario(traces, jobs, p3, config).jobs[0].arrivals,
            a.jobs[0].arrivals);
}

TEST(SimulationTest, RejectsMismatchedInputs) {
  const std::vector<JobSpec> jobs = {make_job("a"), make_job("b")};
  SimConfig config;
  EXPECT_THROW(Simulation(jobs, {constant_trace(1, 5)}, {}, config),
               std::invalid_argument);
  EXPECT_THROW(Simulation(jobs, {constant_trace(1, 5), constant_trace(1, 5)},
                          {{1.0}}, config),
               std::invalid_argument);
  config.tick = 7.0;
  EXPECT_THROW(Simulation(jobs, {constant_trace(1, 5), constant_trace(1, 5)},
                          {}, config),
               std::invalid_argument);
}

TEST(SimulationTest, InfeasiblePlanIsAnError) {
  const std::vector<JobSpec> jobs = {make_job("a")};
  SimConfig config;
  config.limits = ResourceLimits::replicas(2);
  FixedPolicy policy(AllocationPlan({5}));
  EXPECT_THROW(run_scenario({constant_trace(1, 2)}, jobs, policy, config),
               std::logic_error);
}

// Minute metrics obey the satisfaction bound: the relaxed utility of the
// tail can only exceed the served fraction when the tail is within the SLO.
TEST(SimulationTest, MinuteUtilityTracksSatisfaction) {
  const std::vector<JobSpec> jobs = {make_job("a")};
  SimConfig config;
  config.seed = 3;
  config.limits = ResourceLimits::replicas(4);
  for (double x : {1.0, 2.0, 3.0}) {
    FixedPolicy policy(AllocationPlan({x}));
    const auto r = run_scenario({constant_trace(600, 20)}, jobs, policy, config);
    for (const auto& m : r.jobs[0].minutes) {
      if (m.tail_latency > jobs[0].slo.target_latency) {
        EXPECT_LE(m.utility, m.satisfaction + 0.02);
      }
    }
  }
}

}  // namespace
}  // namespace sloscale
