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

// Allocation solver: continuous local search over replica counts and drop
// fractions, random job grouping for large clusters, and the integer
// post-processing (integerize, shrink) applied to the continuous answer.

#ifndef SLOSCALE_SOLVER_HPP_
#define SLOSCALE_SOLVER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "sloscale/cobyla.hpp"
#include "sloscale/objectives.hpp"

namespace sloscale {

struct SolverConfig {
  int max_iterations = 1000;   // objective evaluations
  double initial_step = 2.0;   // replicas
  double final_step = 0.01;    // replicas
  int group_count = 10;
  std::uint64_t seed = 0;
  /// Drop fractions are searched as drop_scale * d so one step of size
  /// initial_step moves d by initial_step / drop_scale.
  double drop_scale = 10.0;
  /// Allowed constraint violation, relative to each limit.
  double tolerance = 1e-6;
  /// Also solve from the plan that shares all capacity by work and keep the
  /// better of the two answers.
  bool work_share_start = true;

  void validate() const {
    if (max_iterations < 1) {
      throw std::invalid_argument("max_iterations must be >= 1");
    }
    if (!(initial_step > 0.0)) {
      throw std::invalid_argument("initial_step must be > 0");
    }
    if (!(final_step > 0.0) || final_step > initial_step) {
      throw std::invalid_argument("need 0 < final_step <= initial_step");
    }
    if (group_count < 1) throw std::invalid_argument("group_count must be >= 1");
    if (!(drop_scale > 0.0)) throw std::invalid_argument("drop_scale must be > 0");
    if (!(tolerance >= 0.0)) throw std::invalid_argument("tolerance must be >= 0");
  }
};

struct SolveResult {
  AllocationPlan plan;
  double objective = 0.0;  // value being maximized, at `plan`
  int evaluations = 0;
  /// Budget ran out or no iterate met the constraints.
  bool degraded = false;
};

using PlanObjective = std::function<double(const AllocationPlan&)>;
/// Residuals that are >= 0 when feasible. Each is compared against
/// -tolerances[k] when judging feasibility.
using PlanConstraints = std::function<std::vector<double>(const AllocationPlan&)>;

/// Maximize `objective` from `initial` with the COBYLA trust-region method.
/// Drop fractions are free variables only when `optimize_drops` is set.
/// Returns the best iterate that met every constraint within its tolerance.
inline SolveResult solve_relaxed(const PlanObjective& objective,
                                 const PlanConstraints& constraints,
                                 const std::vector<double>& tolerances,
                                 const AllocationPlan& initial,
                                 bool optimize_drops,
                                 const SolverConfig& config) {
  config.validate();
  const std::size_t n = initial.size();
  if (n == 0) return {initial, objective(initial), 0, false};

  const std::size_t vars = optimize_drops ? 2 * n : n;
  std::vector<double> x0(vars);
  for (std::size_t i = 0; i < n; ++i) {
    x0[i] = initial.replicas[i];
    if (optimize_drops) x0[n + i] = initial.drop_rates[i] * config.drop_scale;
  }
  const int m = static_cast<int>(constraints(initial).size());
  if (tolerances.size() != static_cast<std::size_t>(m)) {
    throw std::invalid_argument("one tolerance per constraint is required");
  }

  AllocationPlan trial = initial;
  SolveResult best{initial, 0.0, 0, true};
  bool found = false;
  auto unpack = [&](std::span<const double> x) {
    for (std::size_t i = 0; i < n; ++i) {
      trial.replicas[i] = x[i];
      if (optimize_drops) trial.drop_rates[i] = x[n + i] / config.drop_scale;
    }
  };
  auto calcfc = [&](std::span<const double> x, std::span<double> con) {
    unpack(x);
    const auto residuals = constraints(trial);
    bool feasible = true;
    for (int k = 0; k < m; ++k) {
      con[k] = residuals[k];
      if (residuals[k] < -tolerances[k]) feasible = false;
    }
    const double value = objective(trial);
    if (feasible && (!found || value > best.objective)) {
      found = true;
      best.plan = trial;
      best.objective = value;
    }
    return -value;
  };

  const int budget = std::max(config.max_iterations, static_cast<int>(vars) + 2);
  const auto result = cobyla::minimize(
      calcfc, x0, m, {config.initial_step, config.final_step, budget});
  best.evaluations = result.evaluations;
  if (!found) {
    unpack(result.x);
    best.plan = trial;
    best.objective = objective(trial);
    best.degraded = true;
    return best;
  }
  best.degraded = result.status != cobyla::Status::kConverged;
  return best;
}

namespace detail {

inline double mean_of(const std::vector<JobSpec>& jobs,
                      double JobSpec::*field) {
  double sum = 0.0;
  for (const auto& j : jobs) sum += j.*field;
  return sum / static_cast<double>(jobs.size());
}

// Capacity residuals in replica units of the average job, then x_i >= floor_i,
// then the drop box constraints when drops are optimized.
struct ResidualScaling {
  double cpu_unit = 1.0;
  double mem_unit = 1.0;
};

inline PlanConstraints allocation_constraints(
    const std::vector<JobSpec>& jobs, const ResourceLimits& limits,
    std::vector<double> floors, bool with_drops, ResidualScaling scale) {
  return [&jobs, limits, floors = std::move(floors), with_drops,
          scale](const AllocationPlan& plan) {
    const std::size_t n = jobs.size();
    std::vector<double> r;
    r.reserve(2 + (with_drops ? 3 : 1) * n);
    double cpu = 0.0;
    double mem = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cpu += jobs[i].cpu_per_replica * plan.replicas[i];
      mem += jobs[i].mem_per_replica * plan.replicas[i];
    }
    r.push_back((limits.max_cpu - cpu) / scale.cpu_unit);
    r.push_back((limits.max_mem - mem) / scale.mem_unit);
    for (std::size_t i = 0; i < n; ++i) r.push_back(plan.replicas[i] - floors[i]);
    if (with_drops) {
      for (std::size_t i = 0; i < n; ++i) r.push_back(plan.drop_rates[i]);
      for (std::size_t i = 0; i < n; ++i) r.push_back(1.0 - plan.drop_rates[i]);
    }
    return r;
  };
}

inline std::vector<double> allocation_tolerances(std::size_t n,
                                                 const ResourceLimits& limits,
                                                 bool with_drops,
                                                 ResidualScaling scale,
                                                 double tolerance) {
  std::vector<double> t;
  t.push_back(tolerance * limits.max_cpu / scale.cpu_unit);
  t.push_back(tolerance * limits.max_mem / scale.mem_unit);
  t.insert(t.end(), (with_drops ? 3 : 1) * n, 1e-9);
  return t;
}

}  // namespace detail

/// Solve the allocation problem with one variable per job (and one drop
/// fraction per job for the penalty objectives).
inline SolveResult solve_allocation(const ClusterObjective& objective,
                                    const ResourceLimits& limits,
                                    const AllocationPlan& initial,
                                    const SolverConfig& config,
                                    std::vector<double> floors = {}) {
  limits.validate();
  const auto& jobs = objective.jobs();
  const std::size_t n = jobs.size();
  if (initial.size() != n) {
    throw std::invalid_argument("initial plan does not match the job list");
  }
  if (floors.empty()) floors.assign(n, 1.0);
  const bool drops = objective.uses_drops();
  const detail::ResidualScaling scale{
      detail::mean_of(jobs, &JobSpec::cpu_per_replica),
      detail::mean_of(jobs, &JobSpec::mem_per_replica)};
  auto constraints =
      detail::allocation_constraints(jobs, limits, floors, drops, scale);
  auto tolerances = detail::allocation_tolerances(n, limits, drops, scale,
                                                  config.tolerance);
  AllocationPlan start = initial;
  for (std::size_t i = 0; i < n; ++i) {
    start.replicas[i] = std::max(start.replicas[i], floors[i]);
    start.drop_rates[i] = drops ? std::clamp(start.drop_rates[i], 0.0, 1.0) : 0.0;
  }
  auto value = [&objective](const AllocationPlan& p) { return objective(p); };
  SolveResult best =
      solve_relaxed(value, constraints, tolerances, start, drops, config);
  if (!config.work_share_start) return best;

  // Spare capacity shared in proportion to mean work lambda * p.
  std::vector<double> work(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    work[i] = objective.loads()[i].mean_rate() * jobs[i].service_time;
    total += work[i];
  }
  for (auto& w : work) w = total > 0.0 ? w / total : 1.0 / static_cast<double>(n);
  double used_cpu = 0.0, used_mem = 0.0, per_cpu = 0.0, per_mem = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    used_cpu += jobs[i].cpu_per_replica * floors[i];
    used_mem += jobs[i].mem_per_replica * floors[i];
    per_cpu += jobs[i].cpu_per_replica * work[i];
    per_mem += jobs[i].mem_per_replica * work[i];
  }
  const double spare = std::max(
      0.0, std::min((limits.max_cpu - used_cpu) / per_cpu,
                    (limits.max_mem - used_mem) / per_mem));
  AllocationPlan shared = start;
  for (std::size_t i = 0; i < n; ++i) {
    shared.replicas[i] = floors[i] + spare * work[i];
  }
  SolveResult other =
      solve_relaxed(value, constraints, tolerances, shared, drops, config);
  const int evaluations = best.evaluations + other.evaluations;
  if ((best.degraded && !other.degraded) ||
      (best.degraded == other.degraded && other.objective > best.objective)) {
    best = std::move(other);
  }
  best.evaluations = evaluations;
  return best;
}

/// Deal jobs uniformly at random into `groups` groups of near-equal size.
inline std::vector<std::vector<std::size_t>> random_groups(std::size_t jobs,
                                                           std::size_t groups,
                                                           std::uint64_t seed) {
  groups = std::clamp<std::size_t>(groups, 1, std::max<std::size_t>(jobs, 1));
  std::vector<std::size_t> order(jobs);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out(groups);
  for (std::size_t k = 0; k < jobs; ++k) out[k % groups].push_back(order[k]);
  for (auto& g : out) std::sort(g.begin(), g.end());
  return out;
}

/// Split a group's replica budget over its members: each keeps one replica
/// and the rest is shared in proportion to work lambda * p (evenly when the
/// group carries no load).
inline std::vector<double> distribute_budget(double group_replicas,
                                             const std::vector<double>& work) {
  const double members = static_cast<double>(work.size());
  const double spare = std::max(0.0, group_replicas - members);
  const double total = std::accumulate(work.begin(), work.end(), 0.0);
  std::vector<double> out(work.size());
  for (std::size_t i = 0; i < work.size(); ++i) {
    const double share = total > 0.0 ? work[i] / total : 1.0 / members;
    out[i] = 1.0 + spare * share;
  }
  return out;
}

/// Solve per random group of jobs, then map each group's answer back to its
/// members. With at least as many groups as jobs this is the per-job solve.
inline SolveResult hierarchical_solve(const std::vector<JobSpec>& jobs,
                                      const std::vector<JobLoad>& loads,
                                      const ResourceLimits& limits,
                                      const ClusterObjectiveSpec& spec,
                                      const SolverConfig& config,
                                      const AllocationPlan* initial = nullptr) {
  config.validate();
  const std::size_t n = jobs.size();
  if (loads.size() != n) {
    throw std::invalid_argument("one load per job is required");
  }
  AllocationPlan start =
      initial ? *initial : AllocationPlan(std::vector<double>(n, 1.0));
  if (start.size() != n) {
    throw std::invalid_argument("initial plan does not match the job list");
  }
  if (static_cast<std::size_t>(config.group_count) >= n) {
    return solve_allocation(ClusterObjective(jobs, loads, spec), limits, start,
                            config);
  }

  const auto groups = random_groups(n, config.group_count, config.seed);
  std::vector<JobSpec> group_jobs;
  std::vector<JobLoad> group_loads;
  std::vector<double> floors;
  AllocationPlan group_start;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& members = groups[g];
    JobSpec agg;
    agg.id = "group-" + std::to_string(g);
    agg.service_time = 0.0;
    agg.priority = 0.0;
    agg.cpu_per_replica = 0.0;
    agg.mem_per_replica = 0.0;
    agg.slo = {0.0, 0.0};
    std::vector<double> summed;
    std::size_t steps = 0;
    std::size_t capped_steps = 0;
    double capped = 0.0;
    double x = 0.0;
    double d = 0.0;
    for (std::size_t i : members) {
      const auto& job = jobs[i];
      agg.service_time += job.service_time;
      agg.priority += job.priority;
      agg.cpu_per_replica += job.cpu_per_replica;
      agg.mem_per_replica += job.mem_per_replica;
      agg.slo.target_latency += job.slo.target_latency;
      agg.slo.percentile += job.slo.percentile;
      const auto& samples = loads[i].samples();
      if (summed.empty()) {
        summed.assign(samples.size(), 0.0);
        steps = loads[i].steps();
      } else if (samples.size() != summed.size() || loads[i].steps() != steps) {
        throw std::invalid_argument("grouped loads must share one sample shape");
      }
      for (std::size_t s = 0; s < samples.size(); ++s) summed[s] += samples[s];
      capped_steps = std::max(capped_steps, loads[i].capped_steps());
      capped += loads[i].capped_steps() > 0 ? loads[i].capped_replicas()
                                            : start.replicas[i];
      x += start.replicas[i];
      d += start.drop_rates[i];
    }
    const double k = static_cast<double>(members.size());
    agg.service_time /= k;
    agg.cpu_per_replica /= k;
    agg.mem_per_replica /= k;
    agg.slo.target_latency /= k;
    agg.slo.percentile /= k;
    group_jobs.push_back(agg);
    group_loads.emplace_back(std::move(summed), steps, capped_steps, capped);
    floors.push_back(k);
    group_start.replicas.push_back(std::max(x, k));
    group_start.drop_rates.push_back(d / k);
  }

  ClusterObjectiveSpec group_spec = spec;
  group_spec.gamma = spec.gamma_for(n);
  const ClusterObjective group_objective(group_jobs, group_loads, group_spec);
  SolveResult grouped =
      solve_allocation(group_objective, limits, group_start, config, floors);

  AllocationPlan plan(std::vector<double>(n, 1.0));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<double> work;
    for (std::size_t i : groups[g]) {
      work.push_back(loads[i].mean_rate() * jobs[i].service_time);
    }
    const auto share = distribute_budget(grouped.plan.replicas[g], work);
    for (std::size_t k = 0; k < groups[g].size(); ++k) {
      plan.replicas[groups[g][k]] = share[k];
      plan.drop_rates[groups[g][k]] =
          uses_drops(spec.kind) ? std::clamp(grouped.plan.drop_rates[g], 0.0, 1.0)
                                : 0.0;
    }
  }
  const ClusterObjective full(jobs, loads, spec);
  return {plan, full(plan), grouped.evaluations, grouped.degraded};
}

namespace detail {

inline bool fits(const std::vector<JobSpec>& jobs, const AllocationPlan& plan,
                 const ResourceLimits& limits) {
  double cpu = 0.0;
  double mem = 0.0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    cpu += jobs[i].cpu_per_replica * plan.replicas[i];
    mem += jobs[i].mem_per_replica * plan.replicas[i];
  }
  return cpu <= limits.max_cpu && mem <= limits.max_mem;
}

}  // namespace detail

/// Move each job's drop fraction to the penalty band edge that scores best,
/// job by job in id order. Under the step schedule a band's largest drop
/// fraction carries the same credit as the rest of the band with less load,
/// so the edges are the only drop fractions worth keeping.
inline void snap_drop_rates(AllocationPlan& plan,
                            const ClusterObjective& objective) {
  if (!objective.uses_drops()) return;
  std::vector<double> edges{0.0};
  for (const auto& bp : objective.spec().penalty.breakpoints()) {
    edges.push_back(1.0 - bp.availability);
  }
  std::vector<double> values = objective.job_values(plan);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    double best_d = plan.drop_rates[i];
    double best_total = -kInfinity;
    for (double d : edges) {
      values[i] = objective.job_value(i, plan.replicas[i], d);
      const double total = objective.combine(values);
      if (total > best_total + 1e-12) {
        best_total = total;
        best_d = d;
      }
    }
    plan.drop_rates[i] = best_d;
    values[i] = objective.job_value(i, plan.replicas[i], best_d);
  }
}

namespace detail {

// Integer plans are ranked by the precise objective, with the relaxed one
// breaking ties; at whole replica counts the precise value is what the
// relaxation stands in for.
struct PlanScore {
  double precise = 0.0;
  double relaxed = 0.0;

  bool better_than(const PlanScore& other) const {
    if (precise > other.precise + 1e-9) return true;
    if (precise < other.precise - 1e-9) return false;
    return relaxed > other.relaxed + 1e-12;
  }
};

class IntegerSearch {
 public:
  IntegerSearch(const ClusterObjective& objective, const ResourceLimits& limits)
      : objective_(objective),
        precise_(objective.spec().form == ObjectiveForm::kPrecise
                     ? objective
                     : objective.with_form(ObjectiveForm::kPrecise)),
        limits_(limits) {
    edges_.push_back(0.0);
    for (const auto& bp : objective.spec().penalty.breakpoints()) {
      edges_.push_back(1.0 - bp.availability);
    }
    spread_matters_ =
        precise_.combine_summary(0.0, 1.0) != precise_.combine_summary(0.0, 0.0);
    cache_.resize(objective.size());
  }

  // Trim to capacity: largest fractional parts first, then largest counts.
  void trim(AllocationPlan& plan, const std::vector<double>& fraction) const {
    const auto& jobs = objective_.jobs();
    const std::size_t n = jobs.size();
    if (fits(jobs, plan, limits_)) return;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return fraction[a] > fraction[b];
                     });
    for (std::size_t i : order) {
      if (fits(jobs, plan, limits_)) return;
      if (plan.replicas[i] > 1.0) plan.replicas[i] -= 1.0;
    }
    while (!fits(jobs, plan, limits_)) {
      std::size_t largest = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (plan.replicas[i] > 1.0 &&
            (largest == n || plan.replicas[i] > plan.replicas[largest])) {
          largest = i;
        }
      }
      if (largest == n) {
        throw std::invalid_argument(
            "limits cannot hold one replica of every job");
      }
      plan.replicas[largest] -= 1.0;
    }
  }

  PlanScore score(const AllocationPlan& plan) const {
    return {precise_(plan), objective_(plan)};
  }

  // Greedy additions by gain per vCPU, transfers of up to kMaxTransfer
  // replicas between two jobs or back to the pool, and drop-fraction moves, repeated until none
  // strictly raises the precise value. Every replica count a move touches is
  // tried at each penalty band edge. Job `hold`, if given, takes no
  // additions in the first greedy pass.
  void improve(AllocationPlan& plan,
               std::size_t hold = static_cast<std::size_t>(-1)) const {
    constexpr int kMaxTransfer = 3;
    const auto& jobs = objective_.jobs();
    const std::size_t n = jobs.size();
    std::vector<double> vp(n), vr(n);
    for (std::size_t i = 0; i < n; ++i) {
      vp[i] = precise_.job_value(i, plan.replicas[i], plan.drop_rates[i]);
      vr[i] = objective_.job_value(i, plan.replicas[i], plan.drop_rates[i]);
    }
    Summary sp(objective_.priorities()), sr(objective_.priorities());
    sp.reset(vp);
    sr.reset(vr);

    auto total = [&](std::size_t i, const Point& x, std::size_t j,
                     const Point& y) {
      const auto p = sp.with(i, x.precise, j, y.precise);
      const auto r = sr.with(i, x.relaxed, j, y.relaxed);
      return PlanScore{precise_.combine_summary(p.first, p.second),
                       objective_.combine_summary(r.first, r.second)};
    };
    auto apply = [&](std::size_t i, double x, const Point& point) {
      plan.replicas[i] = x;
      plan.drop_rates[i] = point.drop;
      vp[i] = point.precise;
      vr[i] = point.relaxed;
    };
    auto refresh = [&] {
      sp.reset(vp);
      sr.reset(vr);
    };
    auto fits_after = [&](std::size_t from, std::size_t to, double k) {
      if (from < n) plan.replicas[from] -= k;
      plan.replicas[to] += k;
      const bool ok = fits(jobs, plan, limits_);
      plan.replicas[to] -= k;
      if (from < n) plan.replicas[from] += k;
      return ok;
    };
    auto strictly_better = [](const PlanScore& a, const PlanScore& b) {
      return a.precise > b.precise + 1e-9 && a.better_than(b);
    };

    PlanScore current = total(n, {}, n, {});
    const int max_rounds = 4 * static_cast<int>(n) + 16;
    for (int round = 0; round < max_rounds; ++round) {
      bool changed = false;
      for (;;) {
        std::size_t best = n;
        PlanScore best_gain;
        PlanScore best_total;
        Point best_point;
        for (std::size_t i = 0; i < n; ++i) {
          if ((round == 0 && i == hold) || !fits_after(n, i, 1.0)) continue;
          const double cpu = jobs[i].cpu_per_replica;
          for (const auto& point :
               points(i, plan.replicas[i] + 1.0)) {
            const PlanScore t = total(i, point, n, point);
            const PlanScore gain{(t.precise - current.precise) / cpu,
                                 (t.relaxed - current.relaxed) / cpu};
            if (gain.better_than(best_gain)) {
              best = i;
              best_gain = gain;
              best_total = t;
              best_point = point;
            }
          }
        }
        if (best == n) break;
        apply(best, plan.replicas[best] + 1.0, best_point);
        refresh();
        current = best_total;
        changed = true;
      }

      std::vector<std::vector<std::vector<Point>>> down(n), up(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (int k = 1; k <= kMaxTransfer; ++k) {
          if (plan.replicas[i] - k >= 1.0) {
            down[i].push_back(
                points(i, plan.replicas[i] - k));
          }
          up[i].push_back(points(i, plan.replicas[i] + k));
        }
      }
      std::size_t from = n;
      std::size_t to = n;
      int moved = 0;
      Point from_point, to_point;
      PlanScore best_total = current;
      // A destination of n releases the replicas instead.
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= n; ++j) {
          if (i == j) continue;
          for (std::size_t k = 0; k < down[i].size(); ++k) {
            if (j < n && !fits_after(i, j, static_cast<double>(k + 1))) break;
            for (const auto& a : down[i][k]) {
              for (const auto& b : j < n ? up[j][k] : down[i][k]) {
                const PlanScore t = total(i, a, j, b);
                if (strictly_better(t, best_total)) {
                  best_total = t;
                  from = i;
                  to = j;
                  moved = static_cast<int>(k + 1);
                  from_point = a;
                  to_point = b;
                }
              }
            }
          }
        }
      }
      if (from < n) {
        apply(from, plan.replicas[from] - moved, from_point);
        if (to < n) apply(to, plan.replicas[to] + moved, to_point);
        refresh();
        current = best_total;
        changed = true;
      }

      if (objective_.uses_drops()) {
        for (std::size_t i = 0; i < n; ++i) {
          for (const auto& point :
               points(i, plan.replicas[i])) {
            const PlanScore t = total(i, point, n, point);
            if (strictly_better(t, current)) {
              apply(i, plan.replicas[i], point);
              refresh();
              current = t;
              changed = true;
            }
          }
        }
      }

      // Levelling: under a common cap on job values, every job takes its
      // best option at or below its current replica count. Only reductions,
      // so always feasible; it reaches the low-spread plans the fairness
      // term can prefer, which no single-job move does.
      if (spread_matters_) {
        std::vector<std::vector<std::pair<double, Point>>> options(n);
        std::vector<double> caps;
        for (std::size_t i = 0; i < n; ++i) {
          for (double x = 1.0; x <= plan.replicas[i]; x += 1.0) {
            for (const auto& point : points(i, x)) {
              options[i].emplace_back(x, point);
              caps.push_back(point.precise);
            }
          }
        }
        std::sort(caps.begin(), caps.end());
        caps.erase(std::unique(caps.begin(), caps.end()), caps.end());
        // Sorted by (precise, relaxed), the best option under a cap is the
        // last one at or below it, so raising the cap only moves forward.
        for (auto& opts : options) {
          std::stable_sort(opts.begin(), opts.end(),
                           [](const auto& x, const auto& y) {
                             return PlanScore{y.second.precise,
                                              y.second.relaxed}
                                 .better_than(PlanScore{x.second.precise,
                                                        x.second.relaxed});
                           });
        }
        std::vector<std::size_t> next(n, 0), best_choice;
        std::vector<double> cp(n), cr(n);
        PlanScore best_level = current;
        for (double cap : caps) {
          for (std::size_t i = 0; i < n; ++i) {
            const auto& opts = options[i];
            while (next[i] < opts.size() &&
                   opts[next[i]].second.precise <= cap + 1e-12) {
              ++next[i];
            }
            const bool keep = next[i] == 0;
            cp[i] = keep ? vp[i] : opts[next[i] - 1].second.precise;
            cr[i] = keep ? vr[i] : opts[next[i] - 1].second.relaxed;
          }
          const PlanScore t{precise_.combine(cp), objective_.combine(cr)};
          if (strictly_better(t, best_level)) {
            best_level = t;
            best_choice.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
              best_choice[i] = next[i] == 0 ? options[i].size() : next[i] - 1;
            }
          }
        }
        if (!best_choice.empty()) {
          for (std::size_t i = 0; i < n; ++i) {
            if (best_choice[i] < options[i].size()) {
              const auto& [x, point] = options[i][best_choice[i]];
              apply(i, x, point);
            }
          }
          refresh();
          current = best_level;
          changed = true;
        }
      }
      if (!changed) break;
    }
  }

  // Ruin and recreate: take up to three replicas from one job, let improve()
  // refill the freed capacity, keep the result when it strictly raises the
  // precise value. Repeats until a full pass finds nothing.
  void perturb(AllocationPlan& plan, PlanScore& score) const {
    constexpr int kMaxRuin = 3;
    const std::size_t n = objective_.size();
    for (bool found = true; found;) {
      found = false;
      for (std::size_t i = 0; i < n && !found; ++i) {
        for (int k = 1; k <= kMaxRuin && !found; ++k) {
          if (plan.replicas[i] - k < 1.0) break;
          AllocationPlan trial = plan;
          trial.replicas[i] -= k;
          improve(trial, i);
          const auto s = this->score(trial);
          if (s.precise > score.precise + 1e-9) {
            plan = std::move(trial);
            score = s;
            found = true;
          }
        }
      }
    }
  }

 private:
  // Job values at one replica count and drop fraction, in both forms.
  struct Point {
    double precise = 0.0;
    double relaxed = 0.0;
    double drop = 0.0;
  };

  // Weighted sum and spread of a value vector, with the three largest and
  // smallest entries kept so that replacing up to two entries is O(1).
  class Summary {
   public:
    explicit Summary(const std::vector<double>& priorities)
        : priorities_(priorities) {}

    void reset(const std::vector<double>& values) {
      values_ = &values;
      weighted_ = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i) {
        weighted_ += priorities_[i] * values[i];
      }
      std::vector<std::size_t> order(values.size());
      std::iota(order.begin(), order.end(), 0);
      const std::size_t k = std::min<std::size_t>(3, order.size());
      std::partial_sort(order.begin(), order.begin() + k, order.end(),
                        [&](std::size_t a, std::size_t b) {
                          return values[a] > values[b];
                        });
      top_.assign(order.begin(), order.begin() + k);
      std::partial_sort(order.begin(), order.begin() + k, order.end(),
                        [&](std::size_t a, std::size_t b) {
                          return values[a] < values[b];
                        });
      bottom_.assign(order.begin(), order.begin() + k);
    }

    // (weighted sum, spread) with entry i set to a and entry j set to b;
    // an index past the end leaves that slot alone.
    std::pair<double, double> with(std::size_t i, double a, std::size_t j,
                                   double b) const {
      const auto& v = *values_;
      const std::size_t n = v.size();
      double weighted = weighted_;
      double hi = -kInfinity;
      double lo = kInfinity;
      if (i < n) {
        weighted += priorities_[i] * (a - v[i]);
        hi = std::max(hi, a);
        lo = std::min(lo, a);
      }
      if (j < n) {
        weighted += priorities_[j] * (b - v[j]);
        hi = std::max(hi, b);
        lo = std::min(lo, b);
      }
      for (std::size_t t : top_) {
        if (t != i && t != j) {
          hi = std::max(hi, v[t]);
          break;
        }
      }
      for (std::size_t t : bottom_) {
        if (t != i && t != j) {
          lo = std::min(lo, v[t]);
          break;
        }
      }
      return {weighted, n == 0 ? 0.0 : hi - lo};
    }

   private:
    const std::vector<double>& priorities_;
    const std::vector<double>* values_ = nullptr;
    double weighted_ = 0.0;
    std::vector<std::size_t> top_;
    std::vector<std::size_t> bottom_;
  };

  // Job i at x replicas under each penalty band edge, or at drop 0 when the
  // objective ignores drops. Memoized: the searches revisit the same counts.
  const std::vector<Point>& points(std::size_t i, double x) const {
    auto& slot = cache_[i][static_cast<long>(x)];
    if (!slot.empty()) return slot;
    if (!objective_.uses_drops()) {
      slot.push_back(
          {precise_.job_value(i, x, 0.0), objective_.job_value(i, x, 0.0), 0.0});
      return slot;
    }
    for (double d : edges_) {
      slot.push_back(
          {precise_.job_value(i, x, d), objective_.job_value(i, x, d), d});
    }
    return slot;
  }

  const ClusterObjective& objective_;
  ClusterObjective precise_;
  ResourceLimits limits_;
  std::vector<double> edges_;
  bool spread_matters_ = false;
  mutable std::vector<std::unordered_map<long, std::vector<Point>>> cache_;
};

}  // namespace detail

/// Round a continuous plan to whole replicas that fit the limits. Starting
/// from the floored plan (one replica minimum, trimmed by largest fractional
/// part if over capacity) and from the nearest-rounded plan, replicas are
/// added one at a time to the job with the best gain per vCPU while the gain
/// is positive and capacity remains, alternating with single-replica moves
/// between jobs that strictly raise the precise value; the better result is
/// kept. Candidates are compared on the
/// precise form of the objective, ties broken by the relaxed form. Drop
/// fractions, when the objective uses them, end on penalty band edges.
inline AllocationPlan integerize(const AllocationPlan& continuous,
                                 const ClusterObjective& objective,
                                 const ResourceLimits& limits) {
  const std::size_t n = objective.size();
  if (continuous.size() != n) {
    throw std::invalid_argument("plan does not match the job list");
  }
  const detail::IntegerSearch search(objective, limits);
  std::vector<double> fraction(n);
  AllocationPlan floored = continuous;
  AllocationPlan nearest = continuous;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = continuous.replicas[i];
    floored.replicas[i] = std::max(1.0, std::floor(x + 1e-9));
    nearest.replicas[i] = std::max(1.0, std::round(x));
    fraction[i] = x - std::floor(x);
    const double d = objective.uses_drops()
                         ? std::clamp(continuous.drop_rates[i], 0.0, 1.0)
                         : 0.0;
    floored.drop_rates[i] = d;
    nearest.drop_rates[i] = d;
  }

  AllocationPlan best;
  detail::PlanScore best_score;
  bool have = false;
  for (AllocationPlan* plan : {&floored, &nearest}) {
    search.trim(*plan, fraction);
    snap_drop_rates(*plan, objective);
    search.improve(*plan);
    snap_drop_rates(*plan, objective);
    const auto score = search.score(*plan);
    if (!have || score.better_than(best_score)) {
      best = *plan;
      best_score = score;
      have = true;
    }
  }
  search.perturb(best, best_score);
  return best;
}

/// Take back replicas that buy nothing: for jobs predicted to fully meet
/// their SLO, in id order, remove replicas while the objective is unchanged.
inline AllocationPlan shrink(const AllocationPlan& plan,
                             const ClusterObjective& objective) {
  const std::size_t n = objective.size();
  if (plan.size() != n) {
    throw std::invalid_argument("plan does not match the job list");
  }
  constexpr double kSame = 1e-9;
  AllocationPlan out = plan;
  std::vector<double> values = objective.job_values(out);
  const double reference = objective.combine(values);
  for (std::size_t i = 0; i < n; ++i) {
    if (objective.job_utility(i, out.replicas[i], out.drop_rates[i]) <
        1.0 - 1e-12) {
      continue;
    }
    while (out.replicas[i] > 1.0) {
      const double before = values[i];
      values[i] = objective.job_value(i, out.replicas[i] - 1.0,
                                      out.drop_rates[i]);
      if (std::fabs(objective.combine(values) - reference) > kSame) {
        values[i] = before;
        break;
      }
      out.replicas[i] -= 1.0;
    }
  }
  return out;
}

}  // namespace sloscale

#endif  // SLOSCALE_SOLVER_HPP_
