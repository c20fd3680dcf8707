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

// Discrete-event simulation of the serving stack. Each job has a router with
// one FIFO queue and tail drop, and a pool of deterministic-service replicas
// that pull from it and take a fixed delay to start. A policy is consulted
// every short period and per-minute metrics are collected.

#ifndef SLOSCALE_SIMULATOR_HPP_
#define SLOSCALE_SIMULATOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sloscale/autoscaler.hpp"
#include "sloscale/objectives.hpp"
#include "sloscale/traces.hpp"
#include "sloscale/utility.hpp"

namespace sloscale {

struct SimConfig {
  double duration = 0.0;  // seconds; 0 runs to the end of the longest trace
  std::uint64_t seed = 0;
  std::size_t tail_drop_threshold = 50;  // waiting requests per router
  double cold_start_delay = 60.0;        // seconds
  double measurement_interval = 60.0;    // seconds
  double tick = 10.0;                    // policy cadence, seconds
  ResourceLimits limits;
  /// Exponential instead of deterministic service; for queueing checks.
  bool exponential_service = false;

  void validate() const {
    if (!(duration >= 0.0)) throw std::invalid_argument("duration must be >= 0");
    if (tail_drop_threshold < 1) {
      throw std::invalid_argument("tail drop threshold must be >= 1");
    }
    if (!(cold_start_delay >= 0.0)) {
      throw std::invalid_argument("cold start delay must be >= 0");
    }
    if (!(tick > 0.0) || !(measurement_interval > 0.0)) {
      throw std::invalid_argument("tick and measurement interval must be > 0");
    }
    const double ratio = measurement_interval / tick;
    if (std::fabs(ratio - std::round(ratio)) > 1e-9) {
      throw std::invalid_argument("tick must divide the measurement interval");
    }
    limits.validate();
  }
};

/// One job over one measurement interval. Requests are counted in the
/// interval where they resolve: completion or drop.
struct MinuteStats {
  std::size_t arrivals = 0;
  std::size_t completions = 0;
  std::size_t tail_drops = 0;
  std::size_t explicit_drops = 0;
  std::size_t violations = 0;  // late completions plus all drops
  double tail_latency = 0.0;   // SLO percentile, drops counted as infinite
  double served_tail_latency = 0.0;  // same, explicit drops left out
  double satisfaction = 1.0;   // fraction of resolved requests within SLO
  double utility = 1.0;        // relaxed utility of tail_latency
  double effective_utility = 1.0;
  double planned = 0.0;        // replicas at the end of the interval
  double ready = 0.0;
  double drop_rate = 0.0;
};

struct JobReport {
  std::string id;
  std::vector<MinuteStats> minutes;
  std::size_t arrivals = 0;
  std::size_t completions = 0;
  std::size_t tail_drops = 0;
  std::size_t explicit_drops = 0;
  std::size_t in_flight = 0;
  std::size_t violations = 0;
  double violation_rate = 0.0;  // violations / arrivals
  double mean_utility = 1.0;
  double mean_effective_utility = 1.0;
};

struct MetricsReport {
  std::string policy;
  std::uint64_t seed = 0;
  std::vector<JobReport> jobs;
  std::vector<double> cluster_utility;       // per interval, sum over jobs
  std::vector<double> lost_cluster_utility;  // job count minus the above
  double violation_rate = 0.0;               // mean over jobs
  double mean_cluster_utility = 0.0;
  double mean_lost_cluster_utility = 0.0;
  double mean_effective_cluster_utility = 0.0;
  double mean_lost_effective_cluster_utility = 0.0;
  PolicyCounters counters;
};

namespace detail {

// Nearest-rank quantile over `values` plus `infinite` extra samples that
// rank above everything. Reorders `values`.
inline double tail_with_infinite(std::vector<double>& values,
                                 std::size_t infinite, double q) {
  const std::size_t n = values.size() + infinite;
  if (n == 0) return 0.0;
  const auto rank = static_cast<std::size_t>(
      std::max(1.0, std::ceil(q * static_cast<double>(n) - 1e-9)));
  if (rank > values.size()) return kInfinity;
  std::nth_element(values.begin(), values.begin() + (rank - 1), values.end());
  return values[rank - 1];
}

}  // namespace detail

/// Router, queue and replica pool of one job.
class JobEngine {
 public:
  JobEngine(JobSpec job, std::vector<double> rates, double rate_interval,
            const SimConfig& config, std::uint64_t seed)
      : job_(std::move(job)), rates_(std::move(rates)),
        rate_interval_(rate_interval), threshold_(config.tail_drop_threshold),
        cold_start_(config.cold_start_delay),
        exponential_(config.exponential_service),
        arrival_rng_(detail::mix_seed(seed, 1)),
        drop_rng_(detail::mix_seed(seed, 2)),
        service_rng_(detail::mix_seed(seed, 3)) {
    job_.validate();
  }

  const JobSpec& job() const { return job_; }

  double ready() const {
    return static_cast<double>(idle_ + busy_.size() - retiring_);
  }
  double planned() const {
    return ready() + static_cast<double>(pending_.size());
  }
  double drop_rate() const { return drop_rate_; }
  std::vector<double> pending_ready_at() const {
    return {pending_.begin(), pending_.end()};
  }
  std::size_t queue_length() const { return queue_.size(); }
  std::size_t max_queue_length() const { return max_queue_; }

  std::size_t arrivals() const { return total_arrivals_; }
  std::size_t completions() const { return total_completions_; }
  std::size_t tail_drops() const { return total_tail_drops_; }
  std::size_t explicit_drops() const { return total_explicit_drops_; }
  std::size_t violations() const { return total_violations_; }
  std::size_t in_flight() const { return queue_.size() + busy_.size(); }

  /// Record every served request's queueing delay (start - arrival).
  void record_waits(bool on) { record_waits_ = on; }
  const std::vector<double>& waits() const { return waits_; }
  /// Record every completed request's latency.
  void record_latencies(bool on) { record_latencies_ = on; }
  const std::vector<double>& latencies() const { return all_latencies_; }

  /// Move toward `target` replicas. Growth first re-enlists draining
  /// replicas, then starts new ones that serve after the cold start (or at
  /// once when `immediate`). Shrinking cancels pending starts, then removes
  /// idle replicas, then lets busy ones finish their request and leave.
  void set_target(double target, double now, bool immediate) {
    const auto want = static_cast<std::size_t>(std::max(1.0, std::round(target)));
    std::size_t have = static_cast<std::size_t>(planned());
    if (want > have) {
      std::size_t k = want - have;
      const std::size_t back = std::min(k, retiring_);
      retiring_ -= back;
      k -= back;
      if (immediate) {
        idle_ += k;
        dispatch(now);
      } else {
        for (std::size_t i = 0; i < k; ++i) pending_.push_back(now + cold_start_);
      }
    } else if (want < have) {
      std::size_t k = have - want;
      const std::size_t cancel = std::min(k, pending_.size());
      for (std::size_t i = 0; i < cancel; ++i) pending_.pop_back();
      k -= cancel;
      const std::size_t idle = std::min(k, idle_);
      idle_ -= idle;
      k -= idle;
      retiring_ += k;
    }
  }

  void set_drop_rate(double d) { drop_rate_ = std::clamp(d, 0.0, 1.0); }

  /// Process every event with time <= until. At equal times completions
  /// go first, then replicas becoming ready, then arrivals.
  void advance(double until) {
    while (true) {
      const double tc = busy_.empty() ? kInfinity : busy_.top().finish;
      const double tr = pending_.empty() ? kInfinity : pending_.front();
      const double ta = peek_arrival(until);
      const double t = std::min({tc, tr, ta});
      if (t > until || t == kInfinity) break;
      if (tc == t) {
        complete();
      } else if (tr == t) {
        pending_.pop_front();
        ++idle_;
        dispatch(t);
      } else {
        arrive(arrivals_[next_arrival_++]);
      }
    }
  }

  /// Close the current short period and report what it looked like.
  void close_tick(double now, double& latency, std::size_t& tail_drops) {
    const double tail = detail::tail_with_infinite(tick_latencies_, 0,
                                                   job_.slo.percentile);
    const double head = queue_.empty()
                            ? 0.0
                            : now - queue_.front() + job_.service_time;
    latency = std::max(tail, head);
    tail_drops = tick_tail_drops_;
    tick_latencies_.clear();
    tick_tail_drops_ = 0;
  }

  /// Close the current measurement interval.
  MinuteStats close_minute(const PenaltySchedule& penalty,
                           const UtilityParams& params) {
    MinuteStats m;
    m.arrivals = minute_arrivals_;
    m.completions = minute_latencies_.size();
    m.tail_drops = minute_tail_drops_;
    m.explicit_drops = minute_explicit_drops_;
    m.violations = minute_late_ + m.tail_drops + m.explicit_drops;
    const std::size_t resolved = m.completions + m.tail_drops + m.explicit_drops;
    m.satisfaction = resolved == 0
                         ? 1.0
                         : 1.0 - static_cast<double>(m.violations) /
                                     static_cast<double>(resolved);
    const double q = job_.slo.percentile;
    m.tail_latency = detail::tail_with_infinite(
        minute_latencies_, m.tail_drops + m.explicit_drops, q);
    m.served_tail_latency =
        detail::tail_with_infinite(minute_latencies_, m.tail_drops, q);
    m.utility = utility_relaxed(m.tail_latency, job_.slo, params);
    const double dropped =
        m.arrivals == 0 ? 0.0
                        : static_cast<double>(m.explicit_drops) /
                              static_cast<double>(m.arrivals);
    m.effective_utility = effective_utility(
        utility_relaxed(m.served_tail_latency, job_.slo, params),
        std::min(dropped, 1.0), penalty);
    m.planned = planned();
    m.ready = ready();
    m.drop_rate = drop_rate_;
    minute_latencies_.clear();
    minute_arrivals_ = 0;
    minute_tail_drops_ = 0;
    minute_explicit_drops_ = 0;
    minute_late_ = 0;
    return m;
  }

 private:
  struct Busy {
    double finish;
    double arrival;
    bool operator>(const Busy& o) const {
      return finish != o.finish ? finish > o.finish : arrival > o.arrival;
    }
  };

  double peek_arrival(double until) {
    while (next_arrival_ == arrivals_.size()) {
      const double start = static_cast<double>(generated_) * rate_interval_;
      if (generated_ >= rates_.size() || start > until) return kInfinity;
      generate(generated_++);
    }
    return arrivals_[next_arrival_];
  }

  void generate(std::size_t interval) {
    arrivals_.clear();
    next_arrival_ = 0;
    const double rate = rates_[interval];
    if (!(rate > 0.0)) return;
    std::poisson_distribution<long long> count(rate);
    std::uniform_real_distribution<double> when(0.0, rate_interval_);
    const long long n = count(arrival_rng_);
    const double start = static_cast<double>(interval) * rate_interval_;
    arrivals_.reserve(static_cast<std::size_t>(n));
    for (long long i = 0; i < n; ++i) {
      arrivals_.push_back(start + when(arrival_rng_));
    }
    std::sort(arrivals_.begin(), arrivals_.end());
  }

  void arrive(double t) {
    ++total_arrivals_;
    ++minute_arrivals_;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(drop_rng_);
    if (u < drop_rate_) {
      ++total_explicit_drops_;
      ++minute_explicit_drops_;
      ++total_violations_;
      return;
    }
    if (queue_.size() >= threshold_) {
      ++total_tail_drops_;
      ++minute_tail_drops_;
      ++tick_tail_drops_;
      ++total_violations_;
      return;
    }
    queue_.push_back(t);
    max_queue_ = std::max(max_queue_, queue_.size());
    dispatch(t);
  }

  void dispatch(double now) {
    while (idle_ > 0 && !queue_.empty()) {
      const double arrival = queue_.front();
      queue_.pop_front();
      --idle_;
      if (record_waits_) waits_.push_back(now - arrival);
      double service = job_.service_time;
      if (exponential_) {
        service = std::exponential_distribution<double>(
            1.0 / job_.service_time)(service_rng_);
      }
      busy_.push({now + service, arrival});
    }
  }

  void complete() {
    const Busy done = busy_.top();
    busy_.pop();
    const double latency = done.finish - done.arrival;
    ++total_completions_;
    minute_latencies_.push_back(latency);
    tick_latencies_.push_back(latency);
    if (record_latencies_) all_latencies_.push_back(latency);
    if (latency > job_.slo.target_latency) {
      ++minute_late_;
      ++total_violations_;
    }
    if (retiring_ > 0) {
      --retiring_;
    } else {
      ++idle_;
    }
    dispatch(done.finish);
  }

  JobSpec job_;
  std::vector<double> rates_;  // requests per rate interval
  double rate_interval_;
  std::size_t threshold_;
  double cold_start_;
  bool exponential_;
  std::mt19937_64 arrival_rng_;
  std::mt19937_64 drop_rng_;
  std::mt19937_64 service_rng_;

  std::vector<double> arrivals_;  // current interval, sorted
  std::size_t next_arrival_ = 0;
  std::size_t generated_ = 0;

  std::deque<double> queue_;
  std::priority_queue<Busy, std::vector<Busy>, std::greater<Busy>> busy_;
  std::size_t idle_ = 0;
  std::size_t retiring_ = 0;
  std::deque<double> pending_;
  double drop_rate_ = 0.0;
  std::size_t max_queue_ = 0;

  bool record_waits_ = false;
  bool record_latencies_ = false;
  std::vector<double> waits_;
  std::vector<double> all_latencies_;

  std::size_t total_arrivals_ = 0;
  std::size_t total_completions_ = 0;
  std::size_t total_tail_drops_ = 0;
  std::size_t total_explicit_drops_ = 0;
  std::size_t total_violations_ = 0;

  std::vector<double> minute_latencies_;
  std::size_t minute_arrivals_ = 0;
  std::size_t minute_tail_drops_ = 0;
  std::size_t minute_explicit_drops_ = 0;
  std::size_t minute_late_ = 0;
  std::vector<double> tick_latencies_;
  std::size_t tick_tail_drops_ = 0;
};

/// Trace-driven arrivals for one job: a Poisson count per trace interval,
/// spread uniformly over it. Returns sorted arrival times in seconds.
inline std::vector<double> generate_arrivals(const RateSeries& series,
                                             std::uint64_t seed) {
  series.validate();
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  std::uniform_real_distribution<double> when(0.0, series.interval);
  for (std::size_t m = 0; m < series.size(); ++m) {
    const double rate = series.values[m];
    if (!(rate > 0.0)) continue;
    const long long n = std::poisson_distribution<long long>(rate)(rng);
    const std::size_t first = out.size();
    for (long long i = 0; i < n; ++i) {
      out.push_back(static_cast<double>(m) * series.interval + when(rng));
    }
    std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end());
  }
  return out;
}

/// Jobs, their traces, a policy and the clock that ties them together.
class Simulation {
 public:
  /// `traces` hold the simulated requests per interval; `history` holds each
  /// job's arrivals before the start, visible to forecasters.
  Simulation(std::vector<JobSpec> jobs, const std::vector<RateSeries>& traces,
             const std::vector<std::vector<double>>& history,
             SimConfig config, ClusterObjectiveSpec metrics_spec = {})
      : jobs_(std::move(jobs)), config_(std::move(config)),
        metrics_spec_(std::move(metrics_spec)) {
    config_.validate();
    if (traces.size() != jobs_.size()) {
      throw std::invalid_argument("trace/job mismatch: " +
                                  std::to_string(traces.size()) +
                                  " traces for " +
                                  std::to_string(jobs_.size()) + " jobs");
    }
    if (!history.empty() && history.size() != jobs_.size()) {
      throw std::invalid_argument("history/job mismatch");
    }
    double longest = 0.0;
    state_.interval = config_.measurement_interval;
    for (std::size_t i = 0; i < jobs_.size(); ++i) {
      traces[i].validate();
      longest = std::max(longest, traces[i].interval *
                                      static_cast<double>(traces[i].size()));
      engines_.emplace_back(jobs_[i], traces[i].values, traces[i].interval,
                            config_, detail::mix_seed(config_.seed, i));
      JobState js;
      if (!history.empty()) js.arrivals = history[i];
      state_.jobs.push_back(std::move(js));
    }
    if (config_.duration == 0.0) config_.duration = longest;
    const double ticks = config_.duration / config_.tick;
    if (std::fabs(ticks - std::round(ticks)) > 1e-9) {
      throw std::invalid_argument("tick must divide the duration");
    }
    reports_.resize(jobs_.size());
    for (std::size_t i = 0; i < jobs_.size(); ++i) reports_[i].id = jobs_[i].id;
    penalty_ = metrics_spec_.penalty.with_mode(false);
  }

  const ClusterState& state() const { return state_; }
  const std::vector<JobEngine>& engines() const { return engines_; }
  std::vector<JobEngine>& engines() { return engines_; }
  const SimConfig& config() const { return config_; }

  void apply(const AllocationPlan& plan, bool immediate) {
    if (plan.size() != jobs_.size()) {
      throw std::invalid_argument("plan does not match the job list");
    }
    if (!is_feasible(plan, jobs_, config_.limits, 1e-9)) {
      throw std::logic_error("policy emitted an infeasible plan");
    }
    for (std::size_t i = 0; i < jobs_.size(); ++i) {
      engines_[i].set_target(plan.replicas[i], state_.now, immediate);
      engines_[i].set_drop_rate(plan.drop_rates[i]);
    }
    sync_state();
  }

  /// Run the whole scenario under `policy`.
  MetricsReport run(Policy& policy) {
    state_.now = 0.0;
    sync_state();
    apply(policy.initial_plan(state_), true);
    const auto ticks =
        static_cast<std::size_t>(std::llround(config_.duration / config_.tick));
    const auto per_minute = static_cast<std::size_t>(
        std::llround(config_.measurement_interval / config_.tick));
    for (std::size_t k = 1; k <= ticks; ++k) {
      const double t = static_cast<double>(k) * config_.tick;
      for (auto& e : engines_) e.advance(t);
      state_.now = t;
      for (std::size_t i = 0; i < engines_.size(); ++i) {
        engines_[i].close_tick(t, state_.jobs[i].tick_latency,
                               state_.jobs[i].tick_tail_drops);
      }
      if (k % per_minute == 0) close_minute();
      sync_state();
      if (k == ticks) break;
      if (auto plan = policy.on_tick(state_)) apply(*plan, false);
    }
    return finish(policy);
  }

 private:
  void sync_state() {
    for (std::size_t i = 0; i < engines_.size(); ++i) {
      auto& js = state_.jobs[i];
      js.planned = engines_[i].planned();
      js.ready = engines_[i].ready();
      js.pending_ready_at = engines_[i].pending_ready_at();
      js.drop_rate = engines_[i].drop_rate();
    }
  }

  void close_minute() {
    for (std::size_t i = 0; i < engines_.size(); ++i) {
      MinuteStats m = engines_[i].close_minute(penalty_, metrics_spec_.utility);
      state_.jobs[i].arrivals.push_back(static_cast<double>(m.arrivals));
      reports_[i].minutes.push_back(m);
    }
  }

  MetricsReport finish(const Policy& policy) {
    MetricsReport r;
    r.policy = policy.name();
    r.seed = config_.seed;
    r.counters = policy.counters();
    const std::size_t minutes =
        reports_.empty() ? 0 : reports_.front().minutes.size();
    const double n = static_cast<double>(jobs_.size());
    r.cluster_utility.assign(minutes, 0.0);
    std::vector<double> effective(minutes, 0.0);
    for (std::size_t i = 0; i < engines_.size(); ++i) {
      JobReport& jr = reports_[i];
      const JobEngine& e = engines_[i];
      jr.arrivals = e.arrivals();
      jr.completions = e.completions();
      jr.tail_drops = e.tail_drops();
      jr.explicit_drops = e.explicit_drops();
      jr.in_flight = e.in_flight();
      jr.violations = e.violations();
      jr.violation_rate = jr.arrivals == 0
                              ? 0.0
                              : static_cast<double>(jr.violations) /
                                    static_cast<double>(jr.arrivals);
      double u = 0.0;
      double eu = 0.0;
      for (std::size_t m = 0; m < minutes; ++m) {
        u += jr.minutes[m].utility;
        eu += jr.minutes[m].effective_utility;
        r.cluster_utility[m] += jr.minutes[m].utility;
        effective[m] += jr.minutes[m].effective_utility;
      }
      if (minutes > 0) {
        jr.mean_utility = u / static_cast<double>(minutes);
        jr.mean_effective_utility = eu / static_cast<double>(minutes);
      }
      r.violation_rate += jr.violation_rate / n;
      r.jobs.push_back(jr);
    }
    r.lost_cluster_utility.resize(minutes);
    double total = 0.0;
    double total_eff = 0.0;
    for (std::size_t m = 0; m < minutes; ++m) {
      r.lost_cluster_utility[m] = n - r.cluster_utility[m];
      total += r.cluster_utility[m];
      total_eff += effective[m];
    }
    if (minutes > 0) {
      r.mean_cluster_utility = total / static_cast<double>(minutes);
      r.mean_effective_cluster_utility = total_eff / static_cast<double>(minutes);
    }
    r.mean_lost_cluster_utility = n - r.mean_cluster_utility;
    r.mean_lost_effective_cluster_utility = n - r.mean_effective_cluster_utility;
    return r;
  }

  std::vector<JobSpec> jobs_;
  SimConfig config_;
  ClusterObjectiveSpec metrics_spec_;
  PenaltySchedule penalty_ = PenaltySchedule::cloud_sla();
  std::vector<JobEngine> engines_;
  ClusterState state_;
  std::vector<JobReport> reports_;
};

/// Simulate a whole scenario under one policy.
inline MetricsReport run_scenario(const std::vector<RateSeries>& traces,
                                  const std::vector<JobSpec>& jobs,
                                  Policy& policy, const SimConfig& config,
                                  const std::vector<std::vector<double>>& history = {},
                                  const ClusterObjectiveSpec& metrics_spec = {}) {
  Simulation sim(jobs, traces, history, config, metrics_spec);
  return sim.run(policy);
}

/// A single job with a fixed replica pool under a constant arrival rate
/// (requests per second), without tail drop. Used to check the latency
/// models against simulation.
struct FixedPoolResult {
  std::vector<double> waits;      // start - arrival, per served request
  std::vector<double> latencies;  // completion - arrival
};

inline FixedPoolResult simulate_fixed_pool(double service_time,
                                           double arrival_rate, int replicas,
                                           std::size_t target_arrivals,
                                           bool exponential,
                                           std::uint64_t seed) {
  if (!(arrival_rate > 0.0) || replicas < 1 || target_arrivals == 0) {
    throw std::invalid_argument("fixed pool needs rate > 0 and replicas >= 1");
  }
  constexpr double kInterval = 60.0;
  const double per_interval = arrival_rate * kInterval;
  const auto intervals = static_cast<std::size_t>(std::ceil(
      static_cast<double>(target_arrivals) / per_interval));
  JobSpec job;
  job.id = "pool";
  job.service_time = service_time;
  job.slo.target_latency = kInfinity;
  SimConfig config;
  config.tail_drop_threshold = std::numeric_limits<std::size_t>::max();
  config.exponential_service = exponential;
  JobEngine engine(job, std::vector<double>(intervals, per_interval), kInterval,
                   config, seed);
  engine.record_waits(true);
  engine.record_latencies(true);
  engine.set_target(replicas, 0.0, true);
  engine.advance(kInfinity);
  return {engine.waits(), engine.latencies()};
}

}  // namespace sloscale

#endif  // SLOSCALE_SIMULATOR_HPP_
