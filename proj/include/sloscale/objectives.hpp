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

// Cluster objectives: per-job predicted utilities under the latency model,
// combined into one of five cluster-wide scores, plus the resource
// constraints every allocation has to respect.

#ifndef SLOSCALE_OBJECTIVES_HPP_
#define SLOSCALE_OBJECTIVES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sloscale/latency.hpp"
#include "sloscale/utility.hpp"

namespace sloscale {

inline constexpr double kGiB = 1024.0 * 1024.0 * 1024.0;

struct JobSpec {
  std::string id;
  double service_time = 0.18;  // seconds
  Slo slo;
  double priority = 1.0;
  double cpu_per_replica = 1.0;    // vCPU
  double mem_per_replica = kGiB;   // bytes

  void validate() const {
    if (!(service_time > 0.0)) {
      throw std::invalid_argument("job " + id + ": service time must be > 0");
    }
    slo.validate();
    if (!(priority >= 0.0)) {
      throw std::invalid_argument("job " + id + ": priority must be >= 0");
    }
    if (!(cpu_per_replica > 0.0) || !(mem_per_replica > 0.0)) {
      throw std::invalid_argument("job " + id +
                                  ": replica footprint must be positive");
    }
  }
};

struct ResourceLimits {
  double max_cpu = 32.0;
  double max_mem = 32.0 * kGiB;

  void validate() const {
    if (!(max_cpu > 0.0) || !(max_mem > 0.0)) {
      throw std::invalid_argument("resource limits must be positive");
    }
  }

  /// Limits that admit exactly `count` replicas of a 1 vCPU / 1 GiB job.
  static ResourceLimits replicas(double count) {
    return {count, count * kGiB};
  }
};

enum class ObjectiveKind { kSum, kFair, kFairSum, kPenaltySum, kPenaltyFairSum };

inline bool uses_drops(ObjectiveKind kind) {
  return kind == ObjectiveKind::kPenaltySum ||
         kind == ObjectiveKind::kPenaltyFairSum;
}

enum class ObjectiveForm { kPrecise, kRelaxed };

/// How a job's load samples are folded into one predicted utility.
enum class LoadAggregation {
  kMeanUtility,   // average utility over every sample
  kRateQuantile,  // utility at a high quantile of the sampled rates
};

struct ClusterObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::kSum;
  std::optional<double> gamma;  // fairness weight; job count when unset
  PenaltySchedule penalty = PenaltySchedule::cloud_sla();
  UtilityParams utility;
  RelaxationKnobs knobs;
  ObjectiveForm form = ObjectiveForm::kRelaxed;
  LatencyModel latency_model = LatencyModel::kMdc;
  LoadAggregation aggregation = LoadAggregation::kMeanUtility;
  double rate_quantile = 0.95;

  double gamma_for(std::size_t job_count) const {
    return gamma.value_or(static_cast<double>(job_count));
  }

  void validate() const {
    if (gamma && !(*gamma >= 0.0)) {
      throw std::invalid_argument("fairness weight gamma must be >= 0");
    }
    utility.validate();
    knobs.validate();
    if (!(rate_quantile > 0.0 && rate_quantile <= 1.0)) {
      throw std::invalid_argument("rate quantile must lie in (0, 1]");
    }
  }
};

/// Per-job replica counts and drop fractions.
struct AllocationPlan {
  std::vector<double> replicas;
  std::vector<double> drop_rates;

  AllocationPlan() = default;
  explicit AllocationPlan(std::vector<double> x)
      : replicas(std::move(x)), drop_rates(replicas.size(), 0.0) {}
  AllocationPlan(std::vector<double> x, std::vector<double> d)
      : replicas(std::move(x)), drop_rates(std::move(d)) {
    if (replicas.size() != drop_rates.size()) {
      throw std::invalid_argument("plan replica/drop dimensions differ");
    }
  }

  std::size_t size() const { return replicas.size(); }

  bool operator==(const AllocationPlan&) const = default;
};

/// Predicted arrival rates (requests/second) for one job.
///
/// Samples form `trajectories x steps` in row-major order. During the first
/// `capped_steps` steps at most `capped_replicas` can serve, which models
/// replicas still cold-starting.
class JobLoad {
 public:
  JobLoad() = default;

  JobLoad(std::vector<double> samples, std::size_t steps,
          std::size_t capped_steps = 0, double capped_replicas = 0.0)
      : steps_(steps), capped_steps_(std::min(capped_steps, steps)),
        capped_replicas_(capped_replicas) {
    if (steps == 0 || samples.empty() || samples.size() % steps != 0) {
      throw std::invalid_argument("load samples must fill whole trajectories");
    }
    for (double r : samples) {
      if (!(r >= 0.0)) throw std::invalid_argument("load rates must be >= 0");
    }
    total_ = samples.size();
    for (std::size_t i = 0; i < samples.size(); ++i) {
      ((i % steps) < capped_steps_ ? capped_ : free_).push_back(samples[i]);
    }
    std::sort(capped_.begin(), capped_.end());
    std::sort(free_.begin(), free_.end());
    samples_ = std::move(samples);
  }

  /// A flat list of rates, each its own step with no cold-start cap.
  static JobLoad from_rates(std::vector<double> rates) {
    const std::size_t n = rates.size();
    return JobLoad(std::move(rates), n);
  }

  static JobLoad constant(double rate) { return from_rates({rate}); }

  std::size_t steps() const { return steps_; }
  std::size_t capped_steps() const { return capped_steps_; }
  double capped_replicas() const { return capped_replicas_; }
  std::size_t sample_count() const { return total_; }
  std::size_t trajectories() const { return total_ / steps_; }
  /// Samples in their original trajectory-major order.
  const std::vector<double>& samples() const { return samples_; }

  /// Sorted rates of samples in capped and in uncapped steps.
  const std::vector<double>& capped_rates() const { return capped_; }
  const std::vector<double>& free_rates() const { return free_; }

  double mean_rate() const {
    double sum = 0.0;
    for (double r : capped_) sum += r;
    for (double r : free_) sum += r;
    return total_ == 0 ? 0.0 : sum / static_cast<double>(total_);
  }

  double max_rate() const {
    double m = 0.0;
    if (!capped_.empty()) m = capped_.back();
    if (!free_.empty()) m = std::max(m, free_.back());
    return m;
  }

 private:
  std::size_t steps_ = 1;
  std::size_t capped_steps_ = 0;
  double capped_replicas_ = 0.0;
  std::size_t total_ = 0;
  std::vector<double> samples_;
  std::vector<double> capped_;
  std::vector<double> free_;
};

namespace detail {

inline double estimate_latency(const JobSpec& job, double rate,
                               double replicas,
                               const ClusterObjectiveSpec& spec) {
  const double p = job.service_time;
  const double k = std::min(job.slo.percentile, 1.0 - 1e-9);
  if (spec.latency_model == LatencyModel::kUpperBound) {
    return std::max(p, p * rate / replicas);
  }
  if (spec.form == ObjectiveForm::kRelaxed) {
    return relaxed_mdc_latency_unchecked(p, rate, replicas, k,
                                         spec.knobs.rho_max);
  }
  return mdc_latency_unchecked(p, rate, replicas, k);
}

// Sum of utilities over sorted rates served by `replicas`. Latency is
// monotone in the rate, so only the samples above the SLO crossing need an
// individual evaluation.
inline double utility_sum_sorted(const JobSpec& job,
                                 const std::vector<double>& sorted_rates,
                                 double replicas, double drop_rate,
                                 const ClusterObjectiveSpec& spec) {
  if (sorted_rates.empty()) return 0.0;
  const double keep = 1.0 - drop_rate;
  const double target = job.slo.target_latency;
  auto latency_at = [&](double rate) {
    return estimate_latency(job, rate * keep, replicas, spec);
  };
  if (spec.form == ObjectiveForm::kPrecise) {
    auto first_miss = std::partition_point(
        sorted_rates.begin(), sorted_rates.end(),
        [&](double rate) { return latency_at(rate) <= target; });
    return static_cast<double>(first_miss - sorted_rates.begin());
  }
  double sum = 0.0;
  std::size_t i = sorted_rates.size();
  while (i > 0) {
    const double latency = latency_at(sorted_rates[i - 1]);
    if (latency <= target) break;
    sum += utility_relaxed(latency, job.slo, spec.utility);
    --i;
  }
  return sum + static_cast<double>(i);
}

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto idx = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(sorted.size())) - 1.0);
  return sorted[std::min(idx, sorted.size() - 1)];
}

}  // namespace detail

/// Expected utility of one job given replicas, drop fraction and load
/// samples. Precise form uses the step utility over M/D/c latency; relaxed
/// form uses the inverse-power utility over the relaxed estimator.
inline double job_predicted_utility(const JobSpec& job, double replicas,
                                    double drop_rate, const JobLoad& load,
                                    const ClusterObjectiveSpec& spec) {
  if (load.sample_count() == 0) {
    throw std::invalid_argument("job utility needs at least one load sample");
  }
  const double x = std::max(replicas, 1.0);
  const double d = std::clamp(drop_rate, 0.0, 1.0);
  const double capped_x =
      std::clamp(load.capped_replicas(), 1.0, std::max(x, 1.0));
  const auto& capped = load.capped_rates();
  const auto& free = load.free_rates();
  const double total = static_cast<double>(load.sample_count());

  if (spec.aggregation == LoadAggregation::kRateQuantile) {
    double value = 0.0;
    auto one = [&](const std::vector<double>& rates, double n) {
      if (rates.empty()) return;
      const double rate = detail::quantile_sorted(rates, spec.rate_quantile);
      const double latency = detail::estimate_latency(job, rate * (1.0 - d), n,
                                                      spec);
      const double u = spec.form == ObjectiveForm::kPrecise
                           ? utility_original(latency, job.slo)
                           : utility_relaxed(latency, job.slo, spec.utility);
      value += u * static_cast<double>(rates.size()) / total;
    };
    one(capped, capped_x);
    one(free, x);
    return value;
  }

  const double sum = detail::utility_sum_sorted(job, capped, capped_x, d, spec) +
                     detail::utility_sum_sorted(job, free, x, d, spec);
  return sum / total;
}

/// Convenience overload over a plain list of rate samples.
inline double job_predicted_utility(const JobSpec& job, double replicas,
                                    double drop_rate,
                                    std::span<const double> loads,
                                    const ClusterObjectiveSpec& spec) {
  return job_predicted_utility(
      job, replicas, drop_rate,
      JobLoad::from_rates(std::vector<double>(loads.begin(), loads.end())),
      spec);
}

/// The cluster objective from its two ingredients: the priority-weighted sum
/// of job values and their spread (max minus min) over `job_count` jobs.
inline double combine_summary(double weighted, double spread,
                              std::size_t job_count,
                              const ClusterObjectiveSpec& spec) {
  switch (spec.kind) {
    case ObjectiveKind::kSum:
    case ObjectiveKind::kPenaltySum:
      return weighted;
    case ObjectiveKind::kFair:
      return -spread;
    case ObjectiveKind::kFairSum:
    case ObjectiveKind::kPenaltyFairSum:
      return weighted - spec.gamma_for(job_count) * spread;
  }
  return weighted;
}

/// Fold per-job (effective) utilities into the selected cluster objective,
/// always expressed as a quantity to maximize.
inline double combine_utilities(std::span<const double> values,
                                std::span<const double> priorities,
                                const ClusterObjectiveSpec& spec) {
  if (values.size() != priorities.size()) {
    throw std::invalid_argument("utility/priority dimensions differ");
  }
  double weighted = 0.0;
  double hi = values.empty() ? 0.0 : values[0];
  double lo = hi;
  for (std::size_t i = 0; i < values.size(); ++i) {
    weighted += priorities[i] * values[i];
    hi = std::max(hi, values[i]);
    lo = std::min(lo, values[i]);
  }
  return combine_summary(weighted, hi - lo, values.size(), spec);
}

/// A cluster objective bound to its jobs and predicted loads. Evaluation is
/// split per job so callers that change one job at a time can re-combine
/// cached values instead of recomputing everything.
class ClusterObjective {
 public:
  ClusterObjective(std::vector<JobSpec> jobs, std::vector<JobLoad> loads,
                   ClusterObjectiveSpec spec)
      : jobs_(std::move(jobs)), loads_(std::move(loads)),
        spec_(std::move(spec)) {
    if (jobs_.size() != loads_.size()) {
      throw std::invalid_argument("one load per job is required");
    }
    spec_.validate();
    spec_.penalty = spec_.penalty.with_mode(spec_.form ==
                                            ObjectiveForm::kRelaxed);
    priorities_.reserve(jobs_.size());
    for (const auto& job : jobs_) {
      job.validate();
      priorities_.push_back(job.priority);
    }
  }

  std::size_t size() const { return jobs_.size(); }
  const std::vector<JobSpec>& jobs() const { return jobs_; }
  const std::vector<JobLoad>& loads() const { return loads_; }
  const ClusterObjectiveSpec& spec() const { return spec_; }
  const std::vector<double>& priorities() const { return priorities_; }
  bool uses_drops() const { return sloscale::uses_drops(spec_.kind); }

  ClusterObjective with_form(ObjectiveForm form) const {
    ClusterObjectiveSpec spec = spec_;
    spec.form = form;
    return ClusterObjective(jobs_, loads_, spec);
  }

  /// Predicted utility of job i (before any drop penalty).
  double job_utility(std::size_t i, double replicas, double drop_rate) const {
    const double d = uses_drops() ? drop_rate : 0.0;
    return job_predicted_utility(jobs_[i], replicas, d, loads_[i], spec_);
  }

  /// The per-job term entering the cluster objective: utility, or effective
  /// utility for the penalty kinds.
  double job_value(std::size_t i, double replicas, double drop_rate) const {
    const double u = job_utility(i, replicas, drop_rate);
    if (!uses_drops()) return u;
    return effective_utility(u, drop_rate, spec_.penalty);
  }

  std::vector<double> job_values(const AllocationPlan& plan) const {
    check(plan);
    std::vector<double> values(size());
    for (std::size_t i = 0; i < size(); ++i) {
      values[i] = job_value(i, plan.replicas[i], plan.drop_rates[i]);
    }
    return values;
  }

  double combine(std::span<const double> values) const {
    return combine_utilities(values, priorities_, spec_);
  }

  double combine_summary(double weighted, double spread) const {
    return sloscale::combine_summary(weighted, spread, size(), spec_);
  }

  double operator()(const AllocationPlan& plan) const {
    const auto values = job_values(plan);
    return combine(values);
  }

 private:
  void check(const AllocationPlan& plan) const {
    if (plan.replicas.size() != size() || plan.drop_rates.size() != size()) {
      throw std::invalid_argument("plan dimensions do not match the job list");
    }
  }

  std::vector<JobSpec> jobs_;
  std::vector<JobLoad> loads_;
  ClusterObjectiveSpec spec_;
  std::vector<double> priorities_;
};

inline double cluster_objective(const AllocationPlan& plan,
                                const std::vector<JobSpec>& jobs,
                                const std::vector<JobLoad>& loads,
                                const ClusterObjectiveSpec& spec) {
  if (plan.size() != jobs.size() || plan.drop_rates.size() != jobs.size()) {
    throw std::invalid_argument("plan dimensions do not match the job list");
  }
  return ClusterObjective(jobs, loads, spec)(plan);
}

/// Constraint residuals, all >= 0 exactly when the plan is feasible:
/// {cpu headroom, memory headroom, x_i - 1..., d_i..., 1 - d_i...}.
inline std::vector<double> constraint_residuals(
    const AllocationPlan& plan, const std::vector<JobSpec>& jobs,
    const ResourceLimits& limits) {
  if (plan.size() != jobs.size() || plan.drop_rates.size() != jobs.size()) {
    throw std::invalid_argument("plan dimensions do not match the job list");
  }
  const std::size_t n = jobs.size();
  std::vector<double> residuals;
  residuals.reserve(2 + 3 * n);
  double cpu = 0.0;
  double mem = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cpu += jobs[i].cpu_per_replica * plan.replicas[i];
    mem += jobs[i].mem_per_replica * plan.replicas[i];
  }
  residuals.push_back(limits.max_cpu - cpu);
  residuals.push_back(limits.max_mem - mem);
  for (std::size_t i = 0; i < n; ++i) residuals.push_back(plan.replicas[i] - 1.0);
  for (std::size_t i = 0; i < n; ++i) residuals.push_back(plan.drop_rates[i]);
  for (std::size_t i = 0; i < n; ++i) {
    residuals.push_back(1.0 - plan.drop_rates[i]);
  }
  return residuals;
}

/// True when the plan fits the limits, each within `tolerance` of its limit.
inline bool is_feasible(const AllocationPlan& plan,
                        const std::vector<JobSpec>& jobs,
                        const ResourceLimits& limits,
                        double relative_tolerance = 0.0) {
  const auto r = constraint_residuals(plan, jobs, limits);
  if (r[0] < -relative_tolerance * limits.max_cpu) return false;
  if (r[1] < -relative_tolerance * limits.max_mem) return false;
  for (std::size_t i = 2; i < r.size(); ++i) {
    if (r[i] < -1e-12) return false;
  }
  return true;
}

}  // namespace sloscale

#endif  // SLOSCALE_OBJECTIVES_HPP_
