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

// Autoscaling policies. The SLO-aware planner forecasts each job's load,
// solves the relaxed cluster objective, integerizes and shrinks the answer,
// and between planning cycles adds replicas to jobs that keep missing their
// SLO. Four single-job baselines share the same interface.

#ifndef SLOSCALE_AUTOSCALER_HPP_
#define SLOSCALE_AUTOSCALER_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sloscale/objectives.hpp"
#include "sloscale/predictor.hpp"
#include "sloscale/solver.hpp"

namespace sloscale {

struct AutoscalerConfig {
  double long_period = 300.0;           // seconds between planning cycles
  double short_period = 10.0;           // seconds between reactive checks
  std::size_t horizon = 7;              // forecast steps
  double cold_start_delay = 60.0;       // seconds until a new replica serves
  double upscale_trigger = 30.0;        // seconds of sustained violation
  double downscale_trigger = 300.0;     // seconds of sustained satisfaction
  std::size_t sample_count = 100;       // forecast trajectories
  double short_term_step = 1.0;         // replicas added per reactive trigger

  void validate() const {
    if (!(short_period > 0.0) || !(long_period > short_period)) {
      throw std::invalid_argument("need 0 < short_period < long_period");
    }
    if (!(cold_start_delay >= 0.0) || !(long_period > cold_start_delay)) {
      throw std::invalid_argument("long_period must exceed cold_start_delay");
    }
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (sample_count < 1) throw std::invalid_argument("sample_count must be >= 1");
    if (!(upscale_trigger >= 0.0) || !(downscale_trigger >= 0.0)) {
      throw std::invalid_argument("trigger durations must be >= 0");
    }
    if (!(short_term_step >= 1.0)) {
      throw std::invalid_argument("short_term_step must be >= 1");
    }
  }
};

/// What the autoscaler sees of one job.
struct JobState {
  double planned = 1.0;  // ready + pending replicas
  double ready = 1.0;
  std::vector<double> pending_ready_at;
  double drop_rate = 0.0;
  /// Arrivals per history interval, oldest first, including any history
  /// from before the run.
  std::vector<double> arrivals;
  /// Latency seen over the last short period: the higher of the completed
  /// requests' tail and the age of the oldest queued request plus service.
  double tick_latency = 0.0;
  std::size_t tick_tail_drops = 0;
};

struct ClusterState {
  double now = 0.0;         // seconds
  double interval = 60.0;   // history interval, seconds
  std::vector<JobState> jobs;

  AllocationPlan current_plan() const {
    AllocationPlan plan(std::vector<double>(jobs.size()));
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      plan.replicas[i] = jobs[i].planned;
      plan.drop_rates[i] = jobs[i].drop_rate;
    }
    return plan;
  }
};

struct PolicyCounters {
  std::size_t long_term_cycles = 0;
  std::size_t flagged_cycles = 0;  // planning failed or hit its budget
  std::size_t short_term_upscales = 0;
  std::size_t starvation_events = 0;  // wanted to scale up, no headroom
};

/// A policy turns observations into replica targets and drop rates.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  /// Allocation deployed before the first request arrives.
  virtual AllocationPlan initial_plan(const ClusterState& state) = 0;
  /// Called every short period after the start; nullopt keeps the plan.
  virtual std::optional<AllocationPlan> on_tick(const ClusterState& state) = 0;
  const PolicyCounters& counters() const { return counters_; }

 protected:
  PolicyCounters counters_;
};

namespace detail {

inline bool headroom_for(const std::vector<JobSpec>& jobs,
                         const std::vector<double>& replicas,
                         const ResourceLimits& limits, std::size_t j,
                         double extra) {
  double cpu = jobs[j].cpu_per_replica * extra;
  double mem = jobs[j].mem_per_replica * extra;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    cpu += jobs[i].cpu_per_replica * replicas[i];
    mem += jobs[i].mem_per_replica * replicas[i];
  }
  constexpr double kSlack = 1e-9;
  return cpu <= limits.max_cpu * (1.0 + kSlack) &&
         mem <= limits.max_mem * (1.0 + kSlack);
}

inline bool is_multiple(double t, double period) {
  const double k = std::round(t / period);
  return std::fabs(t - k * period) < 1e-6;
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Grow each job toward its demand in ascending id order, every job keeping
/// at least one replica; later jobs get whatever capacity remains.
inline AllocationPlan clip_in_id_order(const std::vector<double>& demands,
                                       const std::vector<JobSpec>& jobs,
                                       const ResourceLimits& limits) {
  const std::size_t n = jobs.size();
  std::vector<double> x(n, 1.0);
  if (!detail::headroom_for(jobs, x, limits, 0, 0.0)) {
    throw std::invalid_argument("limits do not admit one replica per job");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double want = std::max(1.0, std::ceil(demands[i] - 1e-9));
    while (x[i] < want && detail::headroom_for(jobs, x, limits, i, 1.0)) {
      x[i] += 1.0;
    }
  }
  return AllocationPlan(std::move(x));
}

/// Tracks how long a job has continuously violated or met its SLO. An
/// observation covers the short period that just ended.
class TriggerTracker {
 public:
  void observe(bool violating, double now, double period) {
    if (violating) {
      if (over_since_ < 0.0) over_since_ = now - period;
      under_since_ = -1.0;
    } else {
      if (under_since_ < 0.0) under_since_ = now - period;
      over_since_ = -1.0;
    }
  }

  bool overloaded_for(double now, double duration) const {
    return over_since_ >= 0.0 && now - over_since_ >= duration - 1e-9;
  }
  bool underloaded_for(double now, double duration) const {
    return under_since_ >= 0.0 && now - under_since_ >= duration - 1e-9;
  }

  /// Start a new trigger window after acting on this one.
  void rearm(double now) {
    if (over_since_ >= 0.0) over_since_ = now;
    if (under_since_ >= 0.0) under_since_ = now;
  }

 private:
  double over_since_ = -1.0;
  double under_since_ = -1.0;
};

inline bool tick_violates(const JobState& job, const JobSpec& spec) {
  return job.tick_tail_drops > 0 || job.tick_latency > spec.slo.target_latency;
}

inline void observe_all(const ClusterState& state,
                        const std::vector<JobSpec>& jobs,
                        const AutoscalerConfig& config,
                        std::vector<TriggerTracker>& trackers) {
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    trackers[i].observe(tick_violates(state.jobs[i], jobs[i]), state.now,
                        config.short_period);
  }
}

/// Static equal split: the largest per-job count k such that k replicas of
/// every job fit.
inline AllocationPlan baseline_fair_share(const std::vector<JobSpec>& jobs,
                                          const ResourceLimits& limits) {
  if (jobs.empty()) throw std::invalid_argument("no jobs");
  double cpu = 0.0;
  double mem = 0.0;
  for (const auto& job : jobs) {
    cpu += job.cpu_per_replica;
    mem += job.mem_per_replica;
  }
  const double k =
      std::floor(std::min(limits.max_cpu / cpu, limits.max_mem / mem) + 1e-9);
  if (k < 1.0) throw std::invalid_argument("infeasible fair share");
  return AllocationPlan(std::vector<double>(jobs.size(), k));
}

/// Latency-proportional reaction: after sustained overload the job asks for
/// ceil(x * latency / slo) replicas (at least one more), granted in id order
/// as capacity allows; after sustained underload it drops to that ratio.
inline AllocationPlan baseline_oneshot(const ClusterState& state,
                                       const std::vector<JobSpec>& jobs,
                                       const ResourceLimits& limits,
                                       const AutoscalerConfig& config,
                                       std::vector<TriggerTracker>& trackers,
                                       PolicyCounters* counters = nullptr) {
  AllocationPlan plan = state.current_plan();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const double x = plan.replicas[i];
    const double ratio =
        state.jobs[i].tick_latency / jobs[i].slo.target_latency;
    if (trackers[i].overloaded_for(state.now, config.upscale_trigger)) {
      const double want = std::max(x + 1.0, std::ceil(x * ratio - 1e-9));
      double granted = x;
      while (granted < want &&
             detail::headroom_for(jobs, plan.replicas, limits, i, 1.0)) {
        granted += 1.0;
        plan.replicas[i] = granted;
      }
      if (granted == x && counters) ++counters->starvation_events;
      trackers[i].rearm(state.now);
    } else if (trackers[i].underloaded_for(state.now,
                                           config.downscale_trigger)) {
      plan.replicas[i] = std::clamp(std::ceil(x * ratio - 1e-9), 1.0, x);
      trackers[i].rearm(state.now);
    }
  }
  return plan;
}

/// Additive steps: +1 after sustained violation, -1 after sustained
/// satisfaction, never below one replica.
inline AllocationPlan baseline_aiad(const ClusterState& state,
                                    const std::vector<JobSpec>& jobs,
                                    const ResourceLimits& limits,
                                    const AutoscalerConfig& config,
                                    std::vector<TriggerTracker>& trackers,
                                    PolicyCounters* counters = nullptr) {
  AllocationPlan plan = state.current_plan();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (trackers[i].overloaded_for(state.now, config.upscale_trigger)) {
      if (detail::headroom_for(jobs, plan.replicas, limits, i, 1.0)) {
        plan.replicas[i] += 1.0;
      } else if (counters) {
        ++counters->starvation_events;
      }
      trackers[i].rearm(state.now);
    } else if (trackers[i].underloaded_for(state.now,
                                           config.downscale_trigger)) {
      plan.replicas[i] = std::max(1.0, plan.replicas[i] - 1.0);
      trackers[i].rearm(state.now);
    }
  }
  return plan;
}

/// Throughput sizing per job: ceil(peak forecast mean rate * p), since a
/// replica serves at most 1/p requests per second. Clipped in id order.
inline AllocationPlan baseline_mark(
    const ClusterState& state, const std::vector<JobSpec>& jobs,
    const ResourceLimits& limits,
    const std::vector<std::shared_ptr<const Predictor>>& predictors,
    const AutoscalerConfig& config) {
  std::vector<double> demand(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto f = predictors[i]->forecast(
        {state.interval, state.jobs[i].arrivals}, config.horizon);
    const double peak = *std::max_element(f.mean.begin(), f.mean.end());
    demand[i] = std::max(
        1.0, std::ceil(peak / state.interval * jobs[i].service_time - 1e-9));
  }
  return clip_in_id_order(demand, jobs, limits);
}

/// Reactive step between planning cycles: +short_term_step for each job
/// violating its SLO for the trigger duration, while capacity allows. Never
/// removes replicas. Returns the per-job increments.
inline std::vector<double> short_term_react(
    const ClusterState& state, const std::vector<JobSpec>& jobs,
    const ResourceLimits& limits, const AutoscalerConfig& config,
    std::vector<TriggerTracker>& trackers, PolicyCounters* counters = nullptr) {
  std::vector<double> delta(jobs.size(), 0.0);
  std::vector<double> x(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) x[i] = state.jobs[i].planned;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!trackers[i].overloaded_for(state.now, config.upscale_trigger)) continue;
    trackers[i].rearm(state.now);
    if (detail::headroom_for(jobs, x, limits, i, config.short_term_step)) {
      x[i] += config.short_term_step;
      delta[i] = config.short_term_step;
      if (counters) ++counters->short_term_upscales;
    } else if (counters) {
      ++counters->starvation_events;
    }
  }
  return delta;
}

/// Component switches of the SLO-aware planner.
struct PlannerOptions {
  bool prediction = true;     // forecast; otherwise hold the last rate
  bool probabilistic = true;  // sample trajectories; otherwise the mean path
  bool hybrid = true;         // reactive upscaling between cycles
  bool shrink = true;         // take back replicas that buy nothing
};

struct LongTermResult {
  AllocationPlan plan;
  bool flagged = false;
  std::vector<JobLoad> loads;
};

/// Forecast loads for every job in requests per second, shaped
/// trajectories x horizon. During the first cold_start_delay seconds only
/// the ready replicas serve.
inline std::vector<JobLoad> forecast_loads(
    const ClusterState& state, const std::vector<JobSpec>& jobs,
    const std::vector<std::shared_ptr<const Predictor>>& predictors,
    const AutoscalerConfig& config, const PlannerOptions& options,
    std::uint64_t seed, bool cold_start_cap = true) {
  const std::size_t w = config.horizon;
  const auto capped_steps = static_cast<std::size_t>(
      std::ceil(config.cold_start_delay / state.interval - 1e-9));
  std::vector<JobLoad> loads;
  loads.reserve(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& observed = state.jobs[i].arrivals;
    ProbabilisticForecast f;
    if (options.prediction) {
      f = predictors[i]->forecast({state.interval, observed}, w);
    } else {
      const double last = observed.empty() ? 0.0 : observed.back();
      f = {std::vector<double>(w, last), std::vector<double>(w, 0.0)};
    }
    std::vector<double> samples =
        options.probabilistic
            ? sample_trajectories(
                  f, config.sample_count,
                  detail::mix_seed(seed, i * 1000003ULL +
                                             static_cast<std::uint64_t>(
                                                 state.now)))
            : f.mean;
    for (double& r : samples) r /= state.interval;
    loads.emplace_back(std::move(samples), w,
                       cold_start_cap ? capped_steps : 0,
                       state.jobs[i].ready);
  }
  return loads;
}

/// One planning cycle: forecast, solve the relaxed multi-tenant problem,
/// integerize, shrink. On failure the current allocation is kept and the
/// cycle flagged.
inline LongTermResult plan_long_term(
    const ClusterState& state, const std::vector<JobSpec>& jobs,
    const ResourceLimits& limits, const ClusterObjectiveSpec& spec,
    const AutoscalerConfig& config, const SolverConfig& solver_config,
    const std::vector<std::shared_ptr<const Predictor>>& predictors,
    const PlannerOptions& options = {}, std::uint64_t seed = 0,
    bool cold_start_cap = true) {
  LongTermResult out;
  out.plan = state.current_plan();
  try {
    out.loads = forecast_loads(state, jobs, predictors, config, options, seed,
                               cold_start_cap);
    AllocationPlan start = out.plan;
    for (auto& x : start.replicas) x = std::max(1.0, x);
    if (!uses_drops(spec.kind)) {
      std::fill(start.drop_rates.begin(), start.drop_rates.end(), 0.0);
    }
    // Groups are redrawn every cycle.
    SolverConfig cycle_config = solver_config;
    cycle_config.seed = detail::mix_seed(solver_config.seed,
                                         static_cast<std::uint64_t>(state.now));
    const SolveResult solved =
        hierarchical_solve(jobs, out.loads, limits, spec, cycle_config, &start);
    const ClusterObjective objective(jobs, out.loads, spec);
    AllocationPlan plan = integerize(solved.plan, objective, limits);
    if (options.shrink) plan = shrink(plan, objective);
    if (!uses_drops(spec.kind)) {
      std::fill(plan.drop_rates.begin(), plan.drop_rates.end(), 0.0);
    }
    out.plan = std::move(plan);
    out.flagged = solved.degraded;
  } catch (const std::exception&) {
    out.flagged = true;
  }
  return out;
}

/// The SLO-aware hybrid autoscaler: planning every long period, additive
/// reactive upscaling every short period in between.
class PlannerPolicy final : public Policy {
 public:
  PlannerPolicy(std::string name, std::vector<JobSpec> jobs,
                ResourceLimits limits, ClusterObjectiveSpec spec,
                AutoscalerConfig config, SolverConfig solver_config,
                std::vector<std::shared_ptr<const Predictor>> predictors,
                PlannerOptions options, std::uint64_t seed)
      : name_(std::move(name)), jobs_(std::move(jobs)), limits_(limits),
        spec_(std::move(spec)), config_(config),
        solver_config_(solver_config), predictors_(std::move(predictors)),
        options_(options), seed_(seed), trackers_(jobs_.size()) {
    config_.validate();
    if (predictors_.size() != jobs_.size()) {
      throw std::invalid_argument("one predictor per job is required");
    }
  }

  std::string name() const override { return name_; }

  AllocationPlan initial_plan(const ClusterState& state) override {
    return cycle(state, false);
  }

  std::optional<AllocationPlan> on_tick(const ClusterState& state) override {
    observe_all(state, jobs_, config_, trackers_);
    if (detail::is_multiple(state.now, config_.long_period)) {
      return cycle(state, true);
    }
    if (!options_.hybrid) return std::nullopt;
    const auto delta = short_term_react(state, jobs_, limits_, config_,
                                        trackers_, &counters_);
    if (std::all_of(delta.begin(), delta.end(),
                    [](double d) { return d == 0.0; })) {
      return std::nullopt;
    }
    AllocationPlan plan = state.current_plan();
    for (std::size_t i = 0; i < delta.size(); ++i) plan.replicas[i] += delta[i];
    return plan;
  }

 private:
  AllocationPlan cycle(const ClusterState& state, bool cold_start_cap) {
    ++counters_.long_term_cycles;
    const auto result =
        plan_long_term(state, jobs_, limits_, spec_, config_, solver_config_,
                       predictors_, options_, seed_, cold_start_cap);
    if (result.flagged) ++counters_.flagged_cycles;
    return result.plan;
  }

  std::string name_;
  std::vector<JobSpec> jobs_;
  ResourceLimits limits_;
  ClusterObjectiveSpec spec_;
  AutoscalerConfig config_;
  SolverConfig solver_config_;
  std::vector<std::shared_ptr<const Predictor>> predictors_;
  PlannerOptions options_;
  std::uint64_t seed_;
  std::vector<TriggerTracker> trackers_;
};

class FairSharePolicy final : public Policy {
 public:
  FairSharePolicy(std::vector<JobSpec> jobs, ResourceLimits limits)
      : plan_(baseline_fair_share(jobs, limits)) {}

  std::string name() const override { return "fairshare"; }
  AllocationPlan initial_plan(const ClusterState&) override { return plan_; }
  std::optional<AllocationPlan> on_tick(const ClusterState&) override {
    return std::nullopt;
  }

 private:
  AllocationPlan plan_;
};

/// Reactive baselines start from the fair share and adjust on triggers.
class ReactivePolicy final : public Policy {
 public:
  enum class Rule { kOneshot, kAiad };

  ReactivePolicy(Rule rule, std::vector<JobSpec> jobs, ResourceLimits limits,
                 AutoscalerConfig config)
      : rule_(rule), jobs_(std::move(jobs)), limits_(limits), config_(config),
        trackers_(jobs_.size()) {
    config_.validate();
  }

  std::string name() const override {
    return rule_ == Rule::kOneshot ? "oneshot" : "aiad";
  }

  AllocationPlan initial_plan(const ClusterState&) override {
    return baseline_fair_share(jobs_, limits_);
  }

  std::optional<AllocationPlan> on_tick(const ClusterState& state) override {
    observe_all(state, jobs_, config_, trackers_);
    AllocationPlan plan =
        rule_ == Rule::kOneshot
            ? baseline_oneshot(state, jobs_, limits_, config_, trackers_,
                               &counters_)
            : baseline_aiad(state, jobs_, limits_, config_, trackers_,
                            &counters_);
    if (plan == state.current_plan()) return std::nullopt;
    return plan;
  }

 private:
  Rule rule_;
  std::vector<JobSpec> jobs_;
  ResourceLimits limits_;
  AutoscalerConfig config_;
  std::vector<TriggerTracker> trackers_;
};

/// Proactive throughput sizing, re-planned every long period, with reactive
/// upscaling on sustained SLO violation in between.
class MarkPolicy final : public Policy {
 public:
  MarkPolicy(std::vector<JobSpec> jobs, ResourceLimits limits,
             AutoscalerConfig config,
             std::vector<std::shared_ptr<const Predictor>> predictors)
      : jobs_(std::move(jobs)), limits_(limits), config_(config),
        predictors_(std::move(predictors)), trackers_(jobs_.size()) {
    config_.validate();
    if (predictors_.size() != jobs_.size()) {
      throw std::invalid_argument("one predictor per job is required");
    }
  }

  std::string name() const override { return "mark"; }

  AllocationPlan initial_plan(const ClusterState& state) override {
    ++counters_.long_term_cycles;
    return baseline_mark(state, jobs_, limits_, predictors_, config_);
  }

  std::optional<AllocationPlan> on_tick(const ClusterState& state) override {
    observe_all(state, jobs_, config_, trackers_);
    if (detail::is_multiple(state.now, config_.long_period)) {
      ++counters_.long_term_cycles;
      return baseline_mark(state, jobs_, limits_, predictors_, config_);
    }
    const auto delta = short_term_react(state, jobs_, limits_, config_,
                                        trackers_, &counters_);
    if (std::all_of(delta.begin(), delta.end(),
                    [](double d) { return d == 0.0; })) {
      return std::nullopt;
    }
    AllocationPlan plan = state.current_plan();
    for (std::size_t i = 0; i < delta.size(); ++i) plan.replicas[i] += delta[i];
    return plan;
  }

 private:
  std::vector<JobSpec> jobs_;
  ResourceLimits limits_;
  AutoscalerConfig config_;
  std::vector<std::shared_ptr<const Predictor>> predictors_;
  std::vector<TriggerTracker> trackers_;
};

}  // namespace sloscale

#endif  // SLOSCALE_AUTOSCALER_HPP_
