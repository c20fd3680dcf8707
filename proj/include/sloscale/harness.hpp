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

// Experiment orchestration: scenario files, policy construction, trials,
// reports, ranking comparison.

#ifndef SLOSCALE_HARNESS_HPP_
#define SLOSCALE_HARNESS_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sloscale/autoscaler.hpp"
#include "sloscale/objectives.hpp"
#include "sloscale/predictor.hpp"
#include "sloscale/simulator.hpp"
#include "sloscale/solver.hpp"
#include "sloscale/traces.hpp"

namespace sloscale {

using Json = nlohmann::ordered_json;

inline const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names = {
      "fairshare",      "oneshot",         "aiad",
      "mark",           "sloscale-sum",    "sloscale-fair",
      "sloscale-fairsum", "sloscale-penaltysum", "sloscale-penaltyfairsum"};
  return names;
}

/// Ordering of the nine policies by lost utility (best first) in a
/// slightly oversubscribed ten-job cluster, used as the reference ranking.
inline const std::vector<std::string>& reference_ranking_oversubscribed() {
  static const std::vector<std::string> ranking = {
      "sloscale-fairsum", "sloscale-fair",  "sloscale-sum",
      "sloscale-penaltysum", "sloscale-penaltyfairsum", "aiad",
      "mark",           "fairshare",       "oneshot"};
  return ranking;
}

inline bool is_planner_policy(const std::string& name) {
  return name.rfind("sloscale-", 0) == 0;
}

inline ObjectiveKind planner_objective(const std::string& name) {
  if (name == "sloscale-sum") return ObjectiveKind::kSum;
  if (name == "sloscale-fair") return ObjectiveKind::kFair;
  if (name == "sloscale-fairsum") return ObjectiveKind::kFairSum;
  if (name == "sloscale-penaltysum") return ObjectiveKind::kPenaltySum;
  if (name == "sloscale-penaltyfairsum") return ObjectiveKind::kPenaltyFairSum;
  throw std::invalid_argument("not a planner policy: " + name);
}

inline void check_policy_name(const std::string& name) {
  const auto& names = policy_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    std::string all;
    for (const auto& n : names) all += (all.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown policy '" + name + "' (expected one of " +
                                all + ")");
  }
}

struct PredictorConfig {
  std::string kind = "damped-mean";
  std::size_t window = 15;
  double damping = 0.9;
  std::size_t period = 7;
  double noise = 0.0;
  std::string path;  // forecast file
};

/// Planner component switches. Each one off gives one ablation.
struct AblationFlags {
  bool relaxation = true;
  bool mdc = true;
  bool prediction = true;
  bool probabilistic = true;
  bool hybrid = true;
  bool shrink = true;

  static const std::vector<std::string>& names() {
    static const std::vector<std::string> n = {"relaxation", "mdc",
                                               "prediction", "probabilistic",
                                               "hybrid",     "shrink"};
    return n;
  }

  bool& flag(const std::string& name) {
    if (name == "relaxation") return relaxation;
    if (name == "mdc") return mdc;
    if (name == "prediction") return prediction;
    if (name == "probabilistic") return probabilistic;
    if (name == "hybrid") return hybrid;
    if (name == "shrink") return shrink;
    throw std::invalid_argument("unknown ablation flag '" + name + "'");
  }
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::vector<JobSpec> jobs;
  std::vector<std::string> models;
  std::vector<RateSeries> traces;                 // simulated part
  std::vector<std::vector<double>> history;       // before the start
  ResourceLimits limits;
  std::string policy = "sloscale-fairsum";
  PredictorConfig predictor;
  AblationFlags ablation;
  ClusterObjectiveSpec objective;
  SolverConfig solver;
  AutoscalerConfig autoscaler;
  SimConfig sim;
  std::vector<std::uint64_t> seeds = {1};
  Json echo;  // the scenario as read, for reports

  void validate() const {
    if (jobs.empty()) throw std::invalid_argument("scenario has no jobs");
    if (traces.size() != jobs.size() || history.size() != jobs.size()) {
      throw std::invalid_argument("trace/job mismatch");
    }
    check_policy_name(policy);
    if (seeds.empty()) throw std::invalid_argument("trial count must be >= 1");
    for (const auto& job : jobs) job.validate();
    limits.validate();
    objective.validate();
    solver.validate();
    autoscaler.validate();
    sim.validate();
  }
};

namespace detail {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

inline void reject_unknown(const Json& j, const std::set<std::string>& known,
                           const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0) {
      throw std::invalid_argument("unknown field '" + key + "' in " + where);
    }
  }
}

inline SynthParams synth_params(const Json& c) {
  SynthParams p;
  p.base = get_or(c, "base", p.base);
  p.amplitude = get_or(c, "amplitude", p.amplitude);
  p.period = get_or(c, "period", p.period);
  p.phase = get_or(c, "phase", p.phase);
  p.step_minute = get_or(c, "step_minute", p.step_minute);
  p.step_level = get_or(c, "step_level", p.step_level);
  p.spike_rate = get_or(c, "spike_rate", p.spike_rate);
  p.spike_height = get_or(c, "spike_height", p.spike_height);
  p.spike_length = get_or(c, "spike_length", p.spike_length);
  p.noise = get_or(c, "noise", p.noise);
  return p;
}

/// Build one job's simulated trace and pre-start history from its binding.
inline std::pair<RateSeries, std::vector<double>> build_trace(
    const Json& t, const std::filesystem::path& base) {
  reject_unknown(t,
                 {"path", "format", "function", "synth", "minutes", "seed",
                  "rescale", "split", "window", "warmup"},
                 "trace binding");
  RateSeries series;
  if (t.contains("path")) {
    const std::string fmt = get_or<std::string>(t, "format", "canonical");
    std::filesystem::path p = t.at("path").get<std::string>();
    if (p.is_relative()) p = base / p;
    if (fmt == "canonical") {
      series = load_trace(p.string(), TraceFormat::kCanonical);
    } else if (fmt == "azure") {
      series = load_azure_function(p.string(),
                                   get_or<std::string>(t, "function", ""));
    } else {
      throw std::invalid_argument("unknown trace format '" + fmt + "'");
    }
    series.origin = t.at("path").get<std::string>();
  } else if (t.contains("synth")) {
    const auto minutes = t.at("minutes").get<std::size_t>();
    const auto seed = get_or<std::uint64_t>(t, "seed", 0);
    Json parts = t.at("synth");
    if (parts.is_object()) parts = Json::array({parts});
    std::vector<RateSeries> pieces;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const Json& c = parts[k];
      reject_unknown(c,
                     {"kind", "base", "amplitude", "period", "phase",
                      "step_minute", "step_level", "spike_rate",
                      "spike_height", "spike_length", "noise"},
                     "synthetic component");
      pieces.push_back(synth_trace(parse_synth_kind(c.at("kind")),
                                   synth_params(c), minutes,
                                   mix_seed(seed, k)));
    }
    series = sum_series(pieces);
    series.origin = "synthetic:" + std::to_string(seed);
  } else {
    throw std::invalid_argument("trace binding needs `path` or `synth`");
  }
  if (t.contains("rescale")) {
    const auto r = t.at("rescale").get<std::vector<double>>();
    if (r.size() != 2) throw std::invalid_argument("rescale takes [lo, hi]");
    series = rescale(series, r[0], r[1]);
  }
  const auto window = get_or<std::size_t>(t, "window", 1);
  const auto warmup = get_or<std::size_t>(t, "warmup", 0);
  std::vector<double> history;
  if (t.contains("split")) {
    const Json& s = t.at("split");
    auto [train, eval] = split(series, s.at("train_days").get<std::size_t>(),
                               s.at("eval_days").get<std::size_t>());
    train = window_average(train, window);
    series = window_average(eval, window);
    const std::size_t h = std::min(warmup, train.size());
    history.assign(train.values.end() - static_cast<std::ptrdiff_t>(h),
                   train.values.end());
  } else {
    series = window_average(series, window);
    if (warmup >= series.size()) {
      throw std::invalid_argument("warmup leaves nothing to simulate");
    }
    history.assign(series.values.begin(),
                   series.values.begin() + static_cast<std::ptrdiff_t>(warmup));
    series.values.erase(series.values.begin(),
                        series.values.begin() + static_cast<std::ptrdiff_t>(warmup));
  }
  return {series, history};
}

}  // namespace detail

/// Parse a scenario. Relative trace paths resolve against `base`.
inline ScenarioConfig parse_scenario(const Json& j,
                                     const std::filesystem::path& base = ".") {
  using detail::get_or;
  detail::reject_unknown(j,
                         {"name", "jobs", "cluster", "policy", "predictor",
                          "ablation", "objective", "solver", "autoscaler",
                          "simulation", "seeds", "seed", "trials"},
                         "scenario");
  ScenarioConfig cfg;
  cfg.echo = j;
  cfg.name = get_or<std::string>(j, "name", cfg.name);
  cfg.policy = get_or<std::string>(j, "policy", cfg.policy);
  check_policy_name(cfg.policy);

  const Json& cluster = j.at("cluster");
  detail::reject_unknown(cluster, {"replicas", "cpu", "mem_gib"}, "cluster");
  if (cluster.contains("replicas")) {
    cfg.limits = ResourceLimits::replicas(cluster.at("replicas").get<double>());
  } else {
    cfg.limits = {cluster.at("cpu").get<double>(),
                  cluster.at("mem_gib").get<double>() * kGiB};
  }

  for (const Json& jj : j.at("jobs")) {
    detail::reject_unknown(jj,
                           {"id", "model", "service_time", "slo", "percentile",
                            "priority", "cpu", "mem_gib", "trace"},
                           "job");
    JobSpec job;
    job.id = jj.at("id").get<std::string>();
    job.service_time = get_or(jj, "service_time", job.service_time);
    job.slo.target_latency = get_or(jj, "slo", job.slo.target_latency);
    job.slo.percentile = get_or(jj, "percentile", job.slo.percentile);
    job.priority = get_or(jj, "priority", job.priority);
    job.cpu_per_replica = get_or(jj, "cpu", job.cpu_per_replica);
    job.mem_per_replica = get_or(jj, "mem_gib", 1.0) * kGiB;
    cfg.jobs.push_back(job);
    cfg.models.push_back(get_or<std::string>(jj, "model", ""));
    auto [series, history] = detail::build_trace(jj.at("trace"), base);
    cfg.traces.push_back(std::move(series));
    cfg.history.push_back(std::move(history));
  }

  if (j.contains("predictor")) {
    const Json& p = j.at("predictor");
    detail::reject_unknown(p, {"kind", "window", "damping", "period", "noise",
                               "path"},
                           "predictor");
    auto& pc = cfg.predictor;
    pc.kind = get_or(p, "kind", pc.kind);
    pc.window = get_or(p, "window", pc.window);
    pc.damping = get_or(p, "damping", pc.damping);
    pc.period = get_or(p, "period", pc.period);
    pc.noise = get_or(p, "noise", pc.noise);
    pc.path = get_or(p, "path", pc.path);
    if (!pc.path.empty() && std::filesystem::path(pc.path).is_relative()) {
      pc.path = (base / pc.path).string();
    }
  }
  if (j.contains("ablation")) {
    const Json& a = j.at("ablation");
    detail::reject_unknown(a, {"relaxation", "mdc", "prediction",
                               "probabilistic", "hybrid", "shrink"},
                           "ablation");
    for (const auto& name : AblationFlags::names()) {
      cfg.ablation.flag(name) = get_or(a, name.c_str(), true);
    }
  }
  if (j.contains("objective")) {
    const Json& o = j.at("objective");
    detail::reject_unknown(o, {"alpha", "rho_max", "gamma", "aggregation"},
                           "objective");
    cfg.objective.utility.alpha = get_or(o, "alpha", 4.0);
    cfg.objective.knobs.rho_max = get_or(o, "rho_max",
                                         cfg.objective.knobs.rho_max);
    if (o.contains("gamma") && !o.at("gamma").is_null()) {
      cfg.objective.gamma = o.at("gamma").get<double>();
    }
    const auto agg = get_or<std::string>(o, "aggregation", "mean-utility");
    if (agg == "rate-quantile") {
      cfg.objective.aggregation = LoadAggregation::kRateQuantile;
    } else if (agg != "mean-utility") {
      throw std::invalid_argument("unknown aggregation '" + agg + "'");
    }
  }
  if (j.contains("solver")) {
    const Json& s = j.at("solver");
    detail::reject_unknown(s, {"max_iterations", "initial_step", "final_step",
                               "group_count"},
                           "solver");
    cfg.solver.max_iterations = get_or(s, "max_iterations",
                                       cfg.solver.max_iterations);
    cfg.solver.initial_step = get_or(s, "initial_step", cfg.solver.initial_step);
    cfg.solver.final_step = get_or(s, "final_step", cfg.solver.final_step);
    cfg.solver.group_count = get_or(s, "group_count", cfg.solver.group_count);
  }
  if (j.contains("autoscaler")) {
    const Json& a = j.at("autoscaler");
    detail::reject_unknown(a, {"long_period", "short_period", "horizon",
                               "cold_start_delay", "upscale_trigger",
                               "downscale_trigger", "sample_count",
                               "short_term_step"},
                           "autoscaler");
    auto& ac = cfg.autoscaler;
    ac.long_period = get_or(a, "long_period", ac.long_period);
    ac.short_period = get_or(a, "short_period", ac.short_period);
    ac.horizon = get_or(a, "horizon", ac.horizon);
    ac.cold_start_delay = get_or(a, "cold_start_delay", ac.cold_start_delay);
    ac.upscale_trigger = get_or(a, "upscale_trigger", ac.upscale_trigger);
    ac.downscale_trigger = get_or(a, "downscale_trigger", ac.downscale_trigger);
    ac.sample_count = get_or(a, "sample_count", ac.sample_count);
    ac.short_term_step = get_or(a, "short_term_step", ac.short_term_step);
  }
  if (j.contains("simulation")) {
    const Json& s = j.at("simulation");
    detail::reject_unknown(s, {"duration_minutes", "tail_drop_threshold",
                               "measurement_interval"},
                           "simulation");
    cfg.sim.duration = get_or(s, "duration_minutes", 0.0) * 60.0;
    cfg.sim.tail_drop_threshold =
        get_or(s, "tail_drop_threshold", cfg.sim.tail_drop_threshold);
    cfg.sim.measurement_interval =
        get_or(s, "measurement_interval", cfg.sim.measurement_interval);
  }
  cfg.sim.cold_start_delay = cfg.autoscaler.cold_start_delay;
  cfg.sim.tick = cfg.autoscaler.short_period;
  cfg.sim.limits = cfg.limits;

  if (j.contains("seeds")) {
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  } else {
    const auto first = get_or<std::uint64_t>(j, "seed", 1);
    const auto trials = get_or<std::size_t>(j, "trials", 1);
    cfg.seeds.clear();
    for (std::size_t k = 0; k < trials; ++k) cfg.seeds.push_back(first + k);
  }
  cfg.validate();
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  return parse_scenario(j, std::filesystem::path(path).parent_path());
}

/// One predictor per job, as configured.
inline std::vector<std::shared_ptr<const Predictor>> make_predictors(
    const ScenarioConfig& cfg, std::uint64_t seed) {
  std::vector<std::shared_ptr<const Predictor>> out;
  std::shared_ptr<const ForecastTable> table;
  const auto& pc = cfg.predictor;
  if (pc.kind == "forecast-file") {
    table = std::make_shared<const ForecastTable>(ForecastTable::load(pc.path));
  }
  for (std::size_t i = 0; i < cfg.jobs.size(); ++i) {
    if (pc.kind == "damped-mean") {
      out.push_back(std::make_shared<DampedMeanPredictor>(pc.window, pc.damping));
    } else if (pc.kind == "seasonal-naive") {
      out.push_back(std::make_shared<SeasonalNaivePredictor>(pc.period));
    } else if (pc.kind == "last-value") {
      out.push_back(std::make_shared<LastValuePredictor>());
    } else if (pc.kind == "oracle") {
      std::vector<double> truth = cfg.history[i];
      truth.insert(truth.end(), cfg.traces[i].values.begin(),
                   cfg.traces[i].values.end());
      out.push_back(std::make_shared<OraclePredictor>(
          std::move(truth), pc.noise, detail::mix_seed(seed, 100 + i)));
    } else if (pc.kind == "forecast-file") {
      out.push_back(std::make_shared<ForecastFilePredictor>(table, cfg.jobs[i].id));
    } else {
      throw std::invalid_argument("unknown predictor '" + pc.kind + "'");
    }
  }
  return out;
}

/// The objective spec a planner policy solves, after ablation switches.
inline ClusterObjectiveSpec planner_spec(const ScenarioConfig& cfg) {
  ClusterObjectiveSpec spec = cfg.objective;
  spec.kind = planner_objective(cfg.policy);
  spec.form = cfg.ablation.relaxation ? ObjectiveForm::kRelaxed
                                      : ObjectiveForm::kPrecise;
  spec.latency_model =
      cfg.ablation.mdc ? LatencyModel::kMdc : LatencyModel::kUpperBound;
  return spec;
}

inline std::unique_ptr<Policy> make_policy(const ScenarioConfig& cfg,
                                           std::uint64_t seed) {
  const auto& name = cfg.policy;
  if (name == "fairshare") {
    return std::make_unique<FairSharePolicy>(cfg.jobs, cfg.limits);
  }
  if (name == "oneshot") {
    return std::make_unique<ReactivePolicy>(ReactivePolicy::Rule::kOneshot,
                                            cfg.jobs, cfg.limits, cfg.autoscaler);
  }
  if (name == "aiad") {
    return std::make_unique<ReactivePolicy>(ReactivePolicy::Rule::kAiad,
                                            cfg.jobs, cfg.limits, cfg.autoscaler);
  }
  if (name == "mark") {
    return std::make_unique<MarkPolicy>(cfg.jobs, cfg.limits, cfg.autoscaler,
                                        make_predictors(cfg, seed));
  }
  SolverConfig solver = cfg.solver;
  solver.seed = detail::mix_seed(seed, 7);
  PlannerOptions options;
  options.prediction = cfg.ablation.prediction;
  options.probabilistic = cfg.ablation.probabilistic;
  options.hybrid = cfg.ablation.hybrid;
  options.shrink = cfg.ablation.shrink;
  return std::make_unique<PlannerPolicy>(
      name, cfg.jobs, cfg.limits, planner_spec(cfg), cfg.autoscaler, solver,
      make_predictors(cfg, seed), options, detail::mix_seed(seed, 11));
}

inline MetricsReport run_trial(const ScenarioConfig& cfg, std::uint64_t seed) {
  SimConfig sim = cfg.sim;
  sim.seed = seed;
  auto policy = make_policy(cfg, seed);
  ClusterObjectiveSpec metrics = cfg.objective;
  return run_scenario(cfg.traces, cfg.jobs, *policy, sim, cfg.history, metrics);
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

inline MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

struct RunResult {
  std::vector<MetricsReport> trials;  // successful trials in seed order
  std::vector<std::pair<std::uint64_t, std::string>> failures;
  MeanSd lost_cluster_utility;
  MeanSd cluster_utility;
  MeanSd violation_rate;
  MeanSd lost_effective_cluster_utility;
  bool partial() const { return !failures.empty(); }
};

/// Run every seed of the scenario, up to `parallel` at a time.
inline RunResult run(const ScenarioConfig& cfg, std::size_t parallel = 1) {
  cfg.validate();
  const std::size_t n = cfg.seeds.size();
  std::vector<std::optional<MetricsReport>> done(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        done[k] = run_trial(cfg, cfg.seeds[k]);
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(parallel, 1, n);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  RunResult r;
  std::vector<double> lost, util, viol, eff;
  for (std::size_t k = 0; k < n; ++k) {
    if (!done[k]) {
      r.failures.emplace_back(cfg.seeds[k], errors[k]);
      continue;
    }
    lost.push_back(done[k]->mean_lost_cluster_utility);
    util.push_back(done[k]->mean_cluster_utility);
    viol.push_back(done[k]->violation_rate);
    eff.push_back(done[k]->mean_lost_effective_cluster_utility);
    r.trials.push_back(std::move(*done[k]));
  }
  r.lost_cluster_utility = mean_sd(lost);
  r.cluster_utility = mean_sd(util);
  r.violation_rate = mean_sd(viol);
  r.lost_effective_cluster_utility = mean_sd(eff);
  return r;
}

/// Every resolved setting, so a report can be reproduced from itself.
inline Json config_json(const ScenarioConfig& cfg) {
  Json c;
  c["scenario"] = cfg.name;
  c["policy"] = cfg.policy;
  Json jobs = Json::array();
  for (std::size_t i = 0; i < cfg.jobs.size(); ++i) {
    const auto& job = cfg.jobs[i];
    jobs.push_back({{"id", job.id},
                    {"model", cfg.models[i]},
                    {"service_time", job.service_time},
                    {"slo", job.slo.target_latency},
                    {"percentile", job.slo.percentile},
                    {"priority", job.priority},
                    {"cpu", job.cpu_per_replica},
                    {"mem_gib", job.mem_per_replica / kGiB},
                    {"trace", cfg.traces[i].origin},
                    {"trace_minutes", cfg.traces[i].size()},
                    {"history_minutes", cfg.history[i].size()}});
  }
  c["jobs"] = jobs;
  c["cluster"] = {{"cpu", cfg.limits.max_cpu},
                  {"mem_gib", cfg.limits.max_mem / kGiB}};
  c["predictor"] = {{"kind", cfg.predictor.kind},
                    {"window", cfg.predictor.window},
                    {"damping", cfg.predictor.damping},
                    {"period", cfg.predictor.period},
                    {"noise", cfg.predictor.noise},
                    {"path", cfg.predictor.path}};
  Json ablation;
  AblationFlags flags = cfg.ablation;
  for (const auto& name : AblationFlags::names()) ablation[name] = flags.flag(name);
  c["ablation"] = ablation;
  c["objective"] = {
      {"alpha", cfg.objective.utility.alpha},
      {"rho_max", cfg.objective.knobs.rho_max},
      {"gamma", cfg.objective.gamma ? Json(*cfg.objective.gamma) : Json()},
      {"aggregation", cfg.objective.aggregation == LoadAggregation::kMeanUtility
                          ? "mean-utility"
                          : "rate-quantile"},
      {"rate_quantile", cfg.objective.rate_quantile}};
  c["solver"] = {{"max_iterations", cfg.solver.max_iterations},
                 {"initial_step", cfg.solver.initial_step},
                 {"final_step", cfg.solver.final_step},
                 {"group_count", cfg.solver.group_count},
                 {"drop_scale", cfg.solver.drop_scale},
                 {"tolerance", cfg.solver.tolerance}};
  const auto& a = cfg.autoscaler;
  c["autoscaler"] = {{"long_period", a.long_period},
                     {"short_period", a.short_period},
                     {"horizon", a.horizon},
                     {"cold_start_delay", a.cold_start_delay},
                     {"upscale_trigger", a.upscale_trigger},
                     {"downscale_trigger", a.downscale_trigger},
                     {"sample_count", a.sample_count},
                     {"short_term_step", a.short_term_step}};
  c["simulation"] = {{"duration", cfg.sim.duration},
                     {"tail_drop_threshold", cfg.sim.tail_drop_threshold},
                     {"measurement_interval", cfg.sim.measurement_interval},
                     {"tick", cfg.sim.tick}};
  c["seeds"] = cfg.seeds;
  return c;
}

inline Json counters_json(const PolicyCounters& c) {
  return {{"long_term_cycles", c.long_term_cycles},
          {"flagged_cycles", c.flagged_cycles},
          {"short_term_upscales", c.short_term_upscales},
          {"starvation_events", c.starvation_events}};
}

inline Json summary_json(const MetricsReport& r) {
  return {{"seed", r.seed},
          {"violation_rate", r.violation_rate},
          {"mean_cluster_utility", r.mean_cluster_utility},
          {"mean_lost_cluster_utility", r.mean_lost_cluster_utility},
          {"mean_effective_cluster_utility", r.mean_effective_cluster_utility},
          {"mean_lost_effective_cluster_utility",
           r.mean_lost_effective_cluster_utility}};
}

/// Per-trial report. Infinite latencies are written as null.
inline Json trial_json(const ScenarioConfig& cfg, const MetricsReport& r) {
  Json out;
  out["config"] = config_json(cfg);
  out["policy"] = r.policy;
  out["summary"] = summary_json(r);
  out["counters"] = counters_json(r.counters);
  Json jobs = Json::array();
  for (const auto& j : r.jobs) {
    jobs.push_back({{"id", j.id},
                    {"arrivals", j.arrivals},
                    {"completions", j.completions},
                    {"tail_drops", j.tail_drops},
                    {"explicit_drops", j.explicit_drops},
                    {"in_flight", j.in_flight},
                    {"violations", j.violations},
                    {"violation_rate", j.violation_rate},
                    {"mean_utility", j.mean_utility},
                    {"mean_effective_utility", j.mean_effective_utility}});
  }
  out["jobs"] = jobs;
  out["cluster_utility"] = r.cluster_utility;
  return out;
}

inline Json aggregate_json(const ScenarioConfig& cfg, const RunResult& run) {
  Json out;
  out["config"] = config_json(cfg);
  out["policy"] = cfg.policy;
  Json trials = Json::array();
  for (const auto& t : run.trials) trials.push_back(summary_json(t));
  out["trials"] = trials;
  auto ms = [](const MeanSd& m) { return Json{{"mean", m.mean}, {"sd", m.sd}}; };
  out["aggregate"] = {
      {"lost_cluster_utility", ms(run.lost_cluster_utility)},
      {"cluster_utility", ms(run.cluster_utility)},
      {"violation_rate", ms(run.violation_rate)},
      {"lost_effective_cluster_utility",
       ms(run.lost_effective_cluster_utility)}};
  Json failures = Json::array();
  for (const auto& [seed, what] : run.failures) {
    failures.push_back({{"seed", seed}, {"error", what}});
  }
  out["failures"] = failures;
  out["partial"] = run.partial();
  return out;
}

/// Per-minute series of one job as CSV.
inline std::string job_csv(const JobReport& job) {
  std::ostringstream out;
  out << "minute,arrivals,completions,tail_drops,explicit_drops,violations,"
         "tail_latency,satisfaction,utility,effective_utility,planned,ready,"
         "drop_rate\n";
  out << std::setprecision(17);
  for (std::size_t m = 0; m < job.minutes.size(); ++m) {
    const auto& s = job.minutes[m];
    out << m << ',' << s.arrivals << ',' << s.completions << ','
        << s.tail_drops << ',' << s.explicit_drops << ',' << s.violations
        << ',';
    if (std::isinf(s.tail_latency)) {
      out << "inf";
    } else {
      out << s.tail_latency;
    }
    out << ',' << s.satisfaction << ',' << s.utility << ','
        << s.effective_utility << ',' << s.planned << ',' << s.ready << ','
        << s.drop_rate << '\n';
  }
  return out.str();
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

/// Write aggregate.json, one trial-<seed>.json per trial and the per-job
/// CSV series under trial-<seed>/.
inline void write_reports(const ScenarioConfig& cfg, const RunResult& run,
                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "aggregate.json", aggregate_json(cfg, run).dump(2) + "\n");
  for (const auto& t : run.trials) {
    const std::string stem = "trial-" + std::to_string(t.seed);
    write_text(dir / (stem + ".json"), trial_json(cfg, t).dump(2) + "\n");
    std::filesystem::create_directories(dir / stem);
    for (const auto& job : t.jobs) {
      write_text(dir / stem / (job.id + ".csv"), job_csv(job));
    }
  }
}

/// Fraction of item pairs ordered differently by the two rankings.
inline double kendall_tau_distance(const std::vector<std::string>& a,
                                   const std::vector<std::string>& b) {
  if (a.size() != b.size() ||
      std::set<std::string>(a.begin(), a.end()) !=
          std::set<std::string>(b.begin(), b.end()) ||
      std::set<std::string>(a.begin(), a.end()).size() != a.size()) {
    throw std::invalid_argument("rankings must order the same distinct items");
  }
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < n; ++i) pos[b[i]] = i;
  std::size_t discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (pos[a[i]] > pos[a[j]]) ++discordant;
    }
  }
  return static_cast<double>(discordant) /
         static_cast<double>(n * (n - 1) / 2);
}

struct ComparisonRow {
  std::string policy;
  // Lost effective cluster utility: explicit drops are charged through the
  // penalty schedule rather than as infinite latency. Equal to the lost
  // cluster utility for policies that never drop on purpose.
  MeanSd lost_utility;
  MeanSd violation_rate;
  std::size_t rank = 0;  // 1 = lowest lost utility
};

struct Comparison {
  std::vector<ComparisonRow> rows;  // best first
  std::optional<double> kendall_tau;  // against the reference, if any

  std::vector<std::string> ranking() const {
    std::vector<std::string> r;
    for (const auto& row : rows) r.push_back(row.policy);
    return r;
  }
};

/// Rank policies by mean lost effective cluster utility (ties by name). With a
/// reference, the Kendall-Tau distance is computed over the shared
/// policies.
inline Comparison compare(std::vector<ComparisonRow> rows,
                          const std::vector<std::string>& reference = {}) {
  std::set<std::string> seen;
  for (const auto& r : rows) {
    if (!seen.insert(r.policy).second) {
      throw std::invalid_argument("policy " + r.policy + " reported twice");
    }
  }
  std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
    if (x.lost_utility.mean != y.lost_utility.mean) {
      return x.lost_utility.mean < y.lost_utility.mean;
    }
    return x.policy < y.policy;
  });
  Comparison c;
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = i + 1;
  c.rows = std::move(rows);
  if (!reference.empty()) {
    std::vector<std::string> ours;
    std::vector<std::string> theirs;
    const std::set<std::string> ref(reference.begin(), reference.end());
    for (const auto& p : c.ranking()) {
      if (ref.count(p)) ours.push_back(p);
    }
    for (const auto& p : reference) {
      if (seen.count(p)) theirs.push_back(p);
    }
    c.kendall_tau = kendall_tau_distance(ours, theirs);
  }
  return c;
}

/// Read the comparison row of an aggregate report.
inline ComparisonRow comparison_row(const Json& aggregate) {
  ComparisonRow row;
  row.policy = aggregate.at("policy").get<std::string>();
  const Json& a = aggregate.at("aggregate");
  row.lost_utility = {a.at("lost_effective_cluster_utility").at("mean"),
                      a.at("lost_effective_cluster_utility").at("sd")};
  row.violation_rate = {a.at("violation_rate").at("mean"),
                        a.at("violation_rate").at("sd")};
  return row;
}

inline std::string comparison_table(const Comparison& c) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "rank  policy                    lost_utility (sd)   violation_rate (sd)\n";
  for (const auto& r : c.rows) {
    out << std::setw(4) << r.rank << "  " << std::left << std::setw(24)
        << r.policy << std::right << "  " << std::setw(8)
        << r.lost_utility.mean << " (" << r.lost_utility.sd
        << ")   " << std::setw(8) << r.violation_rate.mean << " ("
        << r.violation_rate.sd << ")\n";
  }
  if (c.kendall_tau) {
    out << "kendall-tau distance to reference: " << *c.kendall_tau << "\n";
  }
  return out.str();
}

/// A random planning snapshot for solver benchmarks: jobs with rates drawn
/// from 1 to 1600 req/min, 7-step Gaussian forecasts with 10% spread, and a
/// cluster at `capacity_ratio` of the summed per-job M/D/c need.
struct BenchInstance {
  std::vector<JobSpec> jobs;
  std::vector<JobLoad> loads;
  ResourceLimits limits;
};

inline BenchInstance make_bench_instance(std::size_t job_count,
                                         std::uint64_t seed,
                                         double capacity_ratio = 0.9,
                                         std::size_t samples = 100) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> per_minute(1.0, 1600.0);
  BenchInstance b;
  double need = 0.0;
  for (std::size_t i = 0; i < job_count; ++i) {
    JobSpec job;
    job.id = "job-" + std::to_string(i);
    const double rate = per_minute(rng);
    ProbabilisticForecast f{std::vector<double>(7, rate),
                            std::vector<double>(7, 0.1 * rate)};
    auto s = sample_trajectories(f, samples, detail::mix_seed(seed, i));
    for (double& r : s) r /= 60.0;
    need += min_replicas_mdc(rate / 60.0, job.service_time,
                             job.slo.target_latency, job.slo.percentile);
    b.jobs.push_back(job);
    b.loads.emplace_back(std::move(s), 7);
  }
  b.limits = ResourceLimits::replicas(
      std::max(static_cast<double>(job_count),
               std::floor(capacity_ratio * need)));
  return b;
}

struct BenchResult {
  std::size_t jobs = 0;
  int groups = 0;
  double seconds = 0.0;    // hierarchical solve wall clock
  double objective = 0.0;  // at the continuous plan
  double integer_objective = 0.0;  // after rounding to whole replicas
};

inline BenchResult bench_solver(const BenchInstance& b, int groups,
                                ObjectiveKind kind = ObjectiveKind::kSum,
                                std::uint64_t seed = 1) {
  ClusterObjectiveSpec spec;
  spec.kind = kind;
  SolverConfig config;
  config.group_count = groups;
  config.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  const auto r = hierarchical_solve(b.jobs, b.loads, b.limits, spec, config);
  const auto stop = std::chrono::steady_clock::now();
  const ClusterObjective objective(b.jobs, b.loads, spec);
  BenchResult out;
  out.jobs = b.jobs.size();
  out.groups = groups;
  out.seconds = std::chrono::duration<double>(stop - start).count();
  out.objective = r.objective;
  out.integer_objective = objective(integerize(r.plan, objective, b.limits));
  return out;
}

}  // namespace sloscale

#endif  // SLOSCALE_HARNESS_HPP_
