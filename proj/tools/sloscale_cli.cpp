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

// sloscale command line: run scenarios, compare reports, check the queueing
// model, benchmark the solver, sweep ablations.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sloscale/sloscale.hpp"

namespace {

namespace fs = std::filesystem;
using sloscale::Json;

struct RunOptions {
  std::string scenario;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::size_t parallel = 1;
  std::string policy;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("scenario,--scenario", o.scenario, "Scenario JSON file");
  cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", o.seed, "First trial seed");
  cmd->add_option("--trials", o.trials, "Number of trials");
  cmd->add_option("--parallel", o.parallel, "Trials run at once")
      ->capture_default_str();
  cmd->add_option("--policy", o.policy, "Override the scenario policy");
}

sloscale::ScenarioConfig load(const RunOptions& o) {
  if (o.scenario.empty()) throw std::invalid_argument("no scenario given");
  auto cfg = sloscale::load_scenario(o.scenario);
  if (!o.policy.empty()) {
    sloscale::check_policy_name(o.policy);
    cfg.policy = o.policy;
  }
  if (o.seed || o.trials) {
    const std::uint64_t first = o.seed.value_or(cfg.seeds.front());
    const std::size_t n = o.trials.value_or(cfg.seeds.size());
    if (n < 1) throw std::invalid_argument("trial count must be >= 1");
    cfg.seeds.clear();
    for (std::size_t k = 0; k < n; ++k) cfg.seeds.push_back(first + k);
  }
  cfg.validate();
  return cfg;
}

void print_summary(const std::string& label, const sloscale::RunResult& r) {
  std::printf(
      "%-24s lost %.3f (%.3f)  lost effective %.3f (%.3f)  violations %.4f "
      "(%.4f)  trials %zu%s\n",
      label.c_str(), r.lost_cluster_utility.mean, r.lost_cluster_utility.sd,
      r.lost_effective_cluster_utility.mean,
      r.lost_effective_cluster_utility.sd, r.violation_rate.mean,
              r.violation_rate.sd, r.trials.size(),
              r.partial() ? "  PARTIAL" : "");
  for (const auto& [seed, what] : r.failures) {
    std::fprintf(stderr, "trial seed %llu failed: %s\n",
                 static_cast<unsigned long long>(seed), what.c_str());
  }
}

int cmd_run(const RunOptions& o) {
  const auto cfg = load(o);
  const auto result = sloscale::run(cfg, o.parallel);
  sloscale::write_reports(cfg, result, o.out);
  print_summary(cfg.policy, result);
  return result.partial() ? 1 : 0;
}

int cmd_ablate(const RunOptions& o) {
  auto base = load(o);
  if (!sloscale::is_planner_policy(base.policy)) {
    throw std::invalid_argument("ablation needs a sloscale-* policy");
  }
  bool failed = false;
  auto one = [&](const std::string& label, const sloscale::ScenarioConfig& cfg) {
    const auto result = sloscale::run(cfg, o.parallel);
    sloscale::write_reports(cfg, result, fs::path(o.out) / label);
    print_summary(label, result);
    failed = failed || result.partial();
  };
  one("full", base);
  for (const auto& flag : sloscale::AblationFlags::names()) {
    auto cfg = base;
    cfg.ablation.flag(flag) = false;
    one("no-" + flag, cfg);
  }
  return failed ? 1 : 0;
}

int cmd_compare(const std::vector<std::string>& paths, bool reference) {
  std::vector<sloscale::ComparisonRow> rows;
  Json first_config;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report " + path);
    const Json report = Json::parse(in);
    Json config = report.at("config");
    config.erase("policy");
    if (first_config.is_null()) {
      first_config = config;
    } else if (config.at("scenario") != first_config.at("scenario") ||
               config.at("jobs") != first_config.at("jobs") ||
               config.at("cluster") != first_config.at("cluster")) {
      throw std::invalid_argument("report " + path +
                                  " comes from an incompatible scenario");
    }
    rows.push_back(sloscale::comparison_row(report));
  }
  const auto c = sloscale::compare(
      rows, reference ? sloscale::reference_ranking_oversubscribed()
                      : std::vector<std::string>{});
  std::cout << sloscale::comparison_table(c);
  return 0;
}

int cmd_validate_queueing(std::size_t arrivals, std::size_t replications,
                          std::uint64_t seed) {
  if (replications < 1) throw std::invalid_argument("replications must be >= 1");
  std::printf("   c    rho     k     model       des    rel_err\n");
  double worst = 0.0;
  for (int c : {1, 2, 4, 8}) {
    for (double rho : {0.5, 0.75, 0.9}) {
      const double p = 1.0;
      const double rate = rho * c / p;
      // Independent replications pooled into one wait sample.
      std::vector<double> pooled;
      for (std::size_t r = 0; r < replications; ++r) {
        const auto sim = sloscale::simulate_fixed_pool(
            p, rate, c, arrivals, true, sloscale::detail::mix_seed(seed, r));
        pooled.insert(pooled.end(), sim.waits.begin(), sim.waits.end());
      }
      for (double k : {0.9, 0.99}) {
        const double model = sloscale::mmc_wait_quantile(
            {p, rate, static_cast<double>(c), k});
        auto waits = pooled;
        const double des = sloscale::detail::tail_with_infinite(waits, 0, k);
        const double err =
            model == des ? 0.0 : std::fabs(model - des) / std::max(des, 1e-12);
        worst = std::max(worst, err);
        std::printf("%4d  %5.2f  %4.2f  %8.4f  %8.4f  %8.4f\n", c, rho, k,
                    model, des, err);
      }
    }
  }
  std::printf("worst relative error %.4f\n", worst);
  return 0;
}

int cmd_bench_solver(const std::vector<std::size_t>& sizes,
                     const std::vector<int>& groups, std::uint64_t seed) {
  std::printf("jobs  groups   seconds   objective  integer_objective\n");
  for (std::size_t n : sizes) {
    const auto instance = sloscale::make_bench_instance(n, seed);
    for (int g : groups) {
      const auto r = sloscale::bench_solver(instance, g,
                                            sloscale::ObjectiveKind::kSum, seed);
      std::printf("%4zu  %6d  %8.3f  %10.4f  %17.4f\n", r.jobs, r.groups,
                  r.seconds, r.objective, r.integer_objective);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sloscale: SLO-aware autoscaling planner and cluster simulator"};
  app.require_subcommand(1);

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Run a scenario's trials");
  add_run_options(run, run_opts);

  RunOptions ablate_opts;
  auto* ablate = app.add_subcommand(
      "ablate", "Run a scenario with each planner component switched off");
  add_run_options(ablate, ablate_opts);

  std::vector<std::string> reports;
  bool reference = false;
  auto* compare = app.add_subcommand("compare", "Rank policies across reports");
  compare->add_option("reports", reports, "aggregate.json files")->required();
  compare->add_flag("--reference", reference,
                    "Kendall-Tau distance to the oversubscribed reference "
                    "ranking");

  std::size_t arrivals = 1000000;
  std::size_t replications = 1;
  std::uint64_t vq_seed = 1;
  auto* vq = app.add_subcommand(
      "validate-queueing", "Compare the M/M/c wait quantile with simulation");
  vq->add_option("--arrivals", arrivals, "Arrivals per point")
      ->capture_default_str();
  vq->add_option("--replications", replications,
                 "Independent runs pooled per point")
      ->capture_default_str();
  vq->add_option("--seed", vq_seed, "Seed")->capture_default_str();

  std::vector<std::size_t> sizes = {10, 25, 50, 100};
  std::vector<int> groups = {1, 10};
  std::uint64_t bench_seed = 1;
  auto* bench = app.add_subcommand("bench-solver",
                                   "Solver time against job count and groups");
  bench->add_option("--jobs", sizes, "Job counts")->delimiter(',');
  bench->add_option("--groups", groups, "Group counts")->delimiter(',');
  bench->add_option("--seed", bench_seed, "Seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_opts);
    if (*ablate) return cmd_ablate(ablate_opts);
    if (*compare) return cmd_compare(reports, reference);
    if (*vq) return cmd_validate_queueing(arrivals, replications, vq_seed);
    if (*bench) return cmd_bench_solver(sizes, groups, bench_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
