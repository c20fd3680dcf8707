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

#include "sloscale/solver.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

namespace sloscale {
namespace {

JobSpec make_job(const std::string& id, double p = 0.18, double s = 0.72) {
  JobSpec job;
  job.id = id;
  job.service_time = p;
  job.slo = {s, 0.99};
  return job;
}

ClusterObjectiveSpec spec_of(ObjectiveKind kind,
                             ObjectiveForm form = ObjectiveForm::kRelaxed) {
  ClusterObjectiveSpec spec;
  spec.kind = kind;
  spec.form = form;
  return spec;
}

// Best precise objective over every integer allocation with x_i >= 1 within
// the cpu limit, and every drop fraction on `drop_grid` for penalty kinds.
double brute_force(const std::vector<JobSpec>& jobs,
                   const std::vector<JobLoad>& loads, int limit,
                   const ClusterObjectiveSpec& spec,
                   const std::vector<double>& drop_grid) {
  auto precise = spec;
  precise.form = ObjectiveForm::kPrecise;
  const ClusterObjective obj(jobs, loads, precise);
  const std::size_t n = jobs.size();
  const std::vector<double> no_drops{0.0};
  const auto& drops = obj.uses_drops() ? drop_grid : no_drops;
  double best = -kInfinity;
  AllocationPlan plan(std::vector<double>(n, 1.0));
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
    if (i == n) {
      std::function<void(std::size_t)> drec = [&](std::size_t j) {
        if (j == n) {
          best = std::max(best, obj(plan));
          return;
        }
        for (double d : drops) {
          plan.drop_rates[j] = d;
          drec(j + 1);
        }
      };
      drec(0);
      return;
    }
    const int reserve = static_cast<int>(n - i - 1);
    for (int x = 1; x <= left - reserve; ++x) {
      plan.replicas[i] = x;
      rec(i + 1, left - x);
    }
  };
  rec(0, limit);
  return best;
}

AllocationPlan solve_and_round(const std::vector<JobSpec>& jobs,
                               const std::vector<JobLoad>& loads,
                               const ResourceLimits& limits,
                               const ClusterObjectiveSpec& spec,
                               const SolverConfig& config) {
  const ClusterObjective obj(jobs, loads, spec);
  const auto solved = solve_allocation(
      obj, limits, AllocationPlan(std::vector<double>(jobs.size(), 1.0)),
      config);
  return integerize(solved.plan, obj, limits);
}

TEST(SolveTest, SingleJobFindsSmallestSufficientCount) {
  const auto job = make_job("a");
  // Pick a rate at which exactly 5 replicas meet the SLO.
  double rate = 0.0;
  for (double r = 1.0; r < 40.0; r += 0.05) {
    if (min_replicas_mdc(r, 0.18, 0.72, 0.99) == 5) {
      rate = r;
      break;
    }
  }
  ASSERT_GT(rate, 0.0);
  const std::vector<JobSpec> jobs{job};
  const std::vector<JobLoad> loads{JobLoad::constant(rate)};
  const ClusterObjective obj(jobs, loads, spec_of(ObjectiveKind::kSum));
  // Scan of the same objective: 5 is the first whole count with U = 1.
  for (int x = 1; x <= 20; ++x) {
    EXPECT_EQ(obj(AllocationPlan({double(x)})) == 1.0, x >= 5) << x;
  }
  const auto limits = ResourceLimits::replicas(1000);
  const auto solved =
      solve_allocation(obj, limits, AllocationPlan({1.0}), SolverConfig{});
  EXPECT_GE(solved.plan.replicas[0], 4.999);
  const auto rounded = shrink(integerize(solved.plan, obj, limits), obj);
  EXPECT_EQ(rounded.replicas[0], 5.0);
}

TEST(SolveTest, NoHeadroomReturnsInitial) {
  const std::vector<JobSpec> jobs{make_job("a"), make_job("b"), make_job("c")};
  const std::vector<JobLoad> loads{JobLoad::constant(30.0),
                                   JobLoad::constant(10.0),
                                   JobLoad::constant(50.0)};
  const ClusterObjective obj(jobs, loads, spec_of(ObjectiveKind::kSum));
  const auto limits = ResourceLimits::replicas(3);
  const AllocationPlan initial(std::vector<double>(3, 1.0));
  const auto solved = solve_allocation(obj, limits, initial, SolverConfig{});
  for (double x : solved.plan.replicas) EXPECT_NEAR(x, 1.0, 1e-5);
  EXPECT_EQ(integerize(solved.plan, obj, limits), initial);
}

TEST(SolveTest, Deterministic) {
  const std::vector<JobSpec> jobs{make_job("a"), make_job("b", 0.1, 0.4)};
  const std::vector<JobLoad> loads{JobLoad::from_rates({20.0, 25.0, 31.0}),
                                   JobLoad::from_rates({40.0, 45.0})};
  const auto limits = ResourceLimits::replicas(12);
  for (auto kind : {ObjectiveKind::kFairSum, ObjectiveKind::kPenaltySum}) {
    const ClusterObjective obj(jobs, loads, spec_of(kind));
    const auto a = solve_allocation(obj, limits, AllocationPlan({1.0, 1.0}), {});
    const auto b = solve_allocation(obj, limits, AllocationPlan({1.0, 1.0}), {});
    EXPECT_EQ(a.plan, b.plan);
    EXPECT_EQ(a.objective, b.objective);
  }
}

TEST(SolveTest, BudgetExhaustionFlagsDegraded) {
  const std::vector<JobSpec> jobs(4, make_job("a"));
  const std::vector<JobLoad> loads(4, JobLoad::constant(30.0));
  const ClusterObjective obj(jobs, loads, spec_of(ObjectiveKind::kSum));
  SolverConfig config;
  config.max_iterations = 8;
  const auto solved = solve_allocation(obj, ResourceLimits::replicas(20),
                                       AllocationPlan(std::vector<double>(4, 1.0)),
                                       config);
  EXPECT_TRUE(solved.degraded);
  EXPECT_TRUE(is_feasible(solved.plan, jobs, ResourceLimits::replicas(20), 1e-6));
}

TEST(SolveTest, ThreeJobsMatchEnumeration) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> rate(2.0, 30.0);
  std::uniform_real_distribution<double> service(0.05, 0.3);
  const std::vector<ObjectiveKind> kinds{
      ObjectiveKind::kSum, ObjectiveKind::kFairSum, ObjectiveKind::kPenaltySum};
  const std::vector<double> drop_grid{0.0, 0.01, 0.05, 0.10, 1.0};
  for (int trial = 0; trial < 9; ++trial) {
    std::vector<JobSpec> jobs;
    std::vector<JobLoad> loads;
    for (int j = 0; j < 3; ++j) {
      const double p = service(rng);
      jobs.push_back(make_job("j" + std::to_string(j), p, 4.0 * p));
      loads.push_back(JobLoad::from_rates({rate(rng), rate(rng), rate(rng)}));
    }
    const auto spec = spec_of(kinds[trial % kinds.size()]);
    const auto limits = ResourceLimits::replicas(12);
    const auto plan = solve_and_round(jobs, loads, limits, spec, {});
    EXPECT_TRUE(is_feasible(plan, jobs, limits));
    auto precise = spec;
    precise.form = ObjectiveForm::kPrecise;
    const double got = cluster_objective(plan, jobs, loads, precise);
    const double best = brute_force(jobs, loads, 12, spec, drop_grid);
    EXPECT_LE((best - got) / std::max(std::fabs(best), 1.0), 0.05)
        << "trial " << trial << " best " << best << " got " << got;
  }
}

TEST(IntegerizeTest, IntegralFeasiblePlanUnchanged) {
  const std::vector<JobSpec> jobs{make_job("a"), make_job("b")};
  const std::vector<JobLoad> loads{JobLoad::constant(100.0),
                                   JobLoad::constant(100.0)};
  const ClusterObjective obj(jobs, loads, spec_of(ObjectiveKind::kSum));
  const AllocationPlan plan({3.0, 2.0});
  EXPECT_EQ(integerize(plan, obj, ResourceLimits::replicas(5)), plan);
}

TEST(IntegerizeTest, TieGoesToLowestId) {
  const std::vector<JobSpec> jobs{make_job("a"), make_job("b")};
  const std::vector<JobLoad> loads{JobLoad::constant(100.0),
                                   JobLoad::constant(100.0)};
  const ClusterObjective obj(jobs, loads, spec_of(ObjectiveKind::kSum));
  const auto plan =
      integerize(AllocationPlan({2.6, 2.6}), obj, ResourceLimits::replicas(5));
  EXPECT_EQ(plan.replicas, (std::vector<double>{3.0, 2.0}));
}

TEST(IntegerizeTest, TrimsLargestFractionFirst) {
  const std::vector<JobSpec> jobs{make_job("a"), make_job("b"), make_job("c")};
  const std::vector<JobLoad> loads(3, JobLoad::constant(0.0));
  const ClusterObjective obj(jobs, loads, spec_of(ObjectiveKind::kSum));
  // Floors {3, 4, 2} = 9 exceed 8; job b had the largest fraction.
  const auto plan = integerize(AllocationPlan({3.2, 4.9, 2.5}), obj,
                               ResourceLimits::replicas(8));
  EXPECT_EQ(plan.replicas, (std::vector<double>{3.0, 3.0, 2.0}));
  EXPECT_THROW(integerize(AllocationPlan({1.0, 1.0, 1.0}), obj,
                          ResourceLimits::replicas(2)),
               std::invalid_argument);
}

TEST(IntegerizeTest, NeverWorseThanFloorAndAlwaysFeasible) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> rate(0.0, 40.0);
  std::uniform_real_distribution<double> reps(0.5, 9.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<JobSpec> jobs;
    std::vector<JobLoad> loads;
    AllocationPlan cont;
    for (int j = 0; j < 5; ++j) {
      jobs.push_back(make_job("j" + std::to_string(j)));
      loads.push_back(JobLoad::from_rates({rate(rng), rate(rng)}));
      cont.replicas.push_back(reps(rng));
      cont.drop_rates.push_back(0.0);
    }
    const auto kind = trial % 2 ? ObjectiveKind::kSum : ObjectiveKind::kFairSum;
    const ClusterObjective obj(jobs, loads, spec_of(kind));
    const ClusterObjective precise = obj.with_form(ObjectiveForm::kPrecise);
    const auto limits = ResourceLimits::replicas(20);
    const auto plan = integerize(cont, obj, limits);
    EXPECT_TRUE(is_feasible(plan, jobs, limits));
    AllocationPlan floored = cont;
    for (auto& x : floored.replicas) x = std::max(1.0, std::floor(x));
    if (is_feasible(floored, jobs, limits)) {
      // Ranked by the precise value first, then the relaxed one.
      const double gain = precise(plan) - precise(floored);
      EXPECT_GE(gain, -1e-9);
      if (std::fabs(gain) <= 1e-9) EXPECT_GE(obj(plan), obj(floored) - 1e-12);
    }
    for (double x : plan.replicas) EXPECT_EQ(x, std::floor(x));
  }
}

TEST(HierarchicalTest, GroupsPartitionJobs) {
  const auto groups = random_groups(23, 10, 4);
  ASSERT_EQ(groups.size(), 10u);
  std::vector<int> seen(23, 0);
  for (const auto& g : groups) {
    EXPECT_GE(g.size(), 2u);
    EXPECT_LE(g.size(), 3u);
    for (auto i : g) ++seen[i];
  }
  for (int c : seen) EXPECT_EQ(c, 1);
  EXPECT_EQ(random_groups(23, 10, 4), groups);
  EXPECT_NE(random_groups(23, 10, 5), groups);
  EXPECT_EQ(random_groups(3, 10, 0).size(), 3u);
}

TEST(HierarchicalTest, DistributeByWork) {
  const auto split = distribute_budget(10.0, {1.0, 3.0});
  EXPECT_DOUBLE_EQ(split[0], 1.0 + 8.0 * 0.25);
  EXPECT_DOUBLE_EQ(split[1], 1.0 + 8.0 * 0.75);
  const auto even = distribute_budget(6.0, {0.0, 0.0, 0.0});
  for (double x : even) EXPECT_DOUBLE_EQ(x, 2.0);
  const auto floor = distribute_budget(2.0, {5.0, 1.0, 1.0});
  for (double x : floor) EXPECT_DOUBLE_EQ(x, 1.0);
}

TEST(HierarchicalTest, ManyGroupsIsPerJobSolve) {
  const std::vector<JobSpec> jobs{make_job("a"), make_job("b"), make_job("c")};
  const std::vector<JobLoad> loads{JobLoad::constant(10.0),
                                   JobLoad::constant(20.0),
                                   JobLoad::constant(5.0)};
  const auto limits = ResourceLimits::replicas(10);
  const auto spec = spec_of(ObjectiveKind::kSum);
  SolverConfig config;
  config.group_count = 3;
  const auto h = hierarchical_solve(jobs, loads, limits, spec, config);
  const auto flat = solve_allocation(ClusterObjective(jobs, loads, spec), limits,
                                     AllocationPlan(std::vector<double>(3, 1.0)),
                                     config);
  EXPECT_EQ(h.plan, flat.plan);
}

TEST(HierarchicalTest, IdenticalJobsGetUniformShare) {
  const std::size_t n = 100;
  const std::vector<JobSpec> jobs(n, make_job("x"));
  // A rate at which each job needs exactly 3 replicas; capacity is 3 each.
  double rate = 0.0;
  for (double r = 1.0; r < 40.0; r += 0.05) {
    if (min_replicas_mdc(r, 0.18, 0.72, 0.99) == 3) rate = r;
  }
  ASSERT_GT(rate, 0.0);
  const std::vector<JobLoad> loads(n, JobLoad::constant(rate));
  const auto limits = ResourceLimits::replicas(3.0 * n);
  SolverConfig config;
  config.group_count = 10;
  const auto spec = spec_of(ObjectiveKind::kSum);
  const auto result = hierarchical_solve(jobs, loads, limits, spec, config);
  EXPECT_TRUE(is_feasible(result.plan, jobs, limits, 1e-6));
  // Pooled group queues need fewer replicas than their members, so group
  // budgets have slack; the whole-replica plan is where each job's share is
  // pinned down.
  const auto plan = integerize(result.plan, ClusterObjective(jobs, loads, spec),
                               limits);
  EXPECT_TRUE(is_feasible(plan, jobs, limits));
  for (double x : plan.replicas) EXPECT_LE(std::fabs(x - 3.0), 1.0);
}

TEST(ShrinkTest, RemovesOnlyUselessReplicas) {
  const std::vector<JobSpec> jobs{make_job("a"), make_job("b")};
  const std::vector<JobLoad> loads{JobLoad::constant(10.0),
                                   JobLoad::constant(60.0)};
  const ClusterObjective obj(jobs, loads, spec_of(ObjectiveKind::kSum));
  const auto plan = shrink(AllocationPlan({9.0, 3.0}), obj);
  EXPECT_EQ(plan.replicas[0],
            double(min_replicas_mdc(10.0, 0.18, 0.72, 0.99)));
  EXPECT_EQ(plan.replicas[1], 3.0);
  EXPECT_EQ(shrink(plan, obj), plan);
}

TEST(ShrinkTest, IdempotentAndMinimal) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> rate(0.0, 30.0);
  std::uniform_int_distribution<int> reps(1, 12);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<JobSpec> jobs;
    std::vector<JobLoad> loads;
    AllocationPlan plan;
    for (int j = 0; j < 6; ++j) {
      jobs.push_back(make_job("j" + std::to_string(j)));
      loads.push_back(JobLoad::from_rates({rate(rng), rate(rng), rate(rng)}));
      plan.replicas.push_back(reps(rng));
      plan.drop_rates.push_back(0.0);
    }
    const auto kind = static_cast<ObjectiveKind>(trial % 3);
    const ClusterObjective obj(jobs, loads, spec_of(kind));
    const auto once = shrink(plan, obj);
    EXPECT_EQ(shrink(once, obj), once);
    const double value = obj(once);
    for (std::size_t i = 0; i < once.size(); ++i) {
      EXPECT_LE(once.replicas[i], plan.replicas[i]);
      if (obj.job_utility(i, once.replicas[i], 0.0) < 1.0 ||
          once.replicas[i] <= 1.0) {
        continue;
      }
      AllocationPlan less = once;
      less.replicas[i] -= 1.0;
      EXPECT_GT(std::fabs(obj(less) - value), 1e-9);
    }
  }
}

}  // namespace
}  // namespace sloscale
