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

// Probabilistic arrival-rate forecasting: per-step Gaussian forecasts behind
// one interface, and sampling them into rate trajectories.

#ifndef SLOSCALE_PREDICTOR_HPP_
#define SLOSCALE_PREDICTOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sloscale/traces.hpp"

namespace sloscale {

/// Past arrival counts, oldest first, one per interval.
struct RateHistory {
  double interval = 60.0;  // seconds
  std::vector<double> rates;

  void validate() const {
    if (!(interval > 0.0)) {
      throw std::invalid_argument("history interval must be positive");
    }
    for (double r : rates) {
      if (!(r >= 0.0)) throw std::invalid_argument("history rates must be >= 0");
    }
  }
};

/// Independent Gaussian per future step, in requests per interval.
struct ProbabilisticForecast {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t horizon() const { return mean.size(); }

  void validate() const {
    if (mean.size() != std.size()) {
      throw std::invalid_argument("forecast mean/std lengths differ");
    }
    for (std::size_t i = 0; i < mean.size(); ++i) {
      if (!(mean[i] >= 0.0) || !(std[i] >= 0.0)) {
        throw std::invalid_argument("forecast mean and std must be >= 0");
      }
    }
  }
};

namespace detail {

inline double sample_std(const std::vector<double>& v, std::size_t from = 0) {
  const std::size_t n = v.size() - std::min(from, v.size());
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (std::size_t i = from; i < v.size(); ++i) mean += v[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = from; i < v.size(); ++i) {
    ss += (v[i] - mean) * (v[i] - mean);
  }
  return std::sqrt(ss / static_cast<double>(n - 1));
}

}  // namespace detail

/// Forecasts from the rates observed so far. `history.rates.size()` is also
/// the index of the first forecast interval, counted from the trace start.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string name() const = 0;
  /// Shortest history this model forecasts from; shorter histories fall
  /// back to the last value.
  virtual std::size_t min_history() const = 0;

  ProbabilisticForecast forecast(const RateHistory& history,
                                 std::size_t horizon) const {
    history.validate();
    ProbabilisticForecast f = history.rates.size() < min_history()
                                  ? last_value(history, horizon)
                                  : compute(history, horizon);
    for (double& m : f.mean) m = std::max(0.0, m);
    for (double& s : f.std) s = std::max(0.0, s);
    return f;
  }

  /// Last observation as the mean, spread from the whole history.
  static ProbabilisticForecast last_value(const RateHistory& history,
                                          std::size_t horizon) {
    const double last = history.rates.empty() ? 0.0 : history.rates.back();
    const double spread = detail::sample_std(history.rates);
    return {std::vector<double>(horizon, last),
            std::vector<double>(horizon, spread)};
  }

 protected:
  virtual ProbabilisticForecast compute(const RateHistory& history,
                                        std::size_t horizon) const = 0;
};

class LastValuePredictor final : public Predictor {
 public:
  std::string name() const override { return "last-value"; }
  std::size_t min_history() const override { return 0; }

 protected:
  ProbabilisticForecast compute(const RateHistory& history,
                                std::size_t horizon) const override {
    return last_value(history, horizon);
  }
};

/// Exponentially damped mean over a trailing window; the spread is the
/// weighted deviation of the window around that mean.
class DampedMeanPredictor final : public Predictor {
 public:
  explicit DampedMeanPredictor(std::size_t window = 15, double damping = 0.9)
      : window_(window), damping_(damping) {
    if (window_ < 2) throw std::invalid_argument("damped mean window >= 2");
    if (!(damping_ > 0.0 && damping_ <= 1.0)) {
      throw std::invalid_argument("damping must lie in (0, 1]");
    }
  }

  std::string name() const override { return "damped-mean"; }
  std::size_t min_history() const override { return 2; }

 protected:
  ProbabilisticForecast compute(const RateHistory& history,
                                std::size_t horizon) const override {
    const auto& x = history.rates;
    const std::size_t n = std::min(window_, x.size());
    double weight = 1.0;
    double wsum = 0.0;
    double mean = 0.0;
    for (std::size_t age = 0; age < n; ++age) {
      mean += weight * x[x.size() - 1 - age];
      wsum += weight;
      weight *= damping_;
    }
    mean /= wsum;
    weight = 1.0;
    double var = 0.0;
    for (std::size_t age = 0; age < n; ++age) {
      const double e = x[x.size() - 1 - age] - mean;
      var += weight * e * e;
      weight *= damping_;
    }
    const double spread = std::sqrt(var / wsum);
    return {std::vector<double>(horizon, mean),
            std::vector<double>(horizon, spread)};
  }

 private:
  std::size_t window_;
  double damping_;
};

/// Repeats the last full period; the spread is the RMS of the seasonal
/// differences x[t] - x[t - period] over the available history.
class SeasonalNaivePredictor final : public Predictor {
 public:
  explicit SeasonalNaivePredictor(std::size_t period) : period_(period) {
    if (period_ < 1) throw std::invalid_argument("season period must be >= 1");
  }

  std::string name() const override { return "seasonal-naive"; }
  std::size_t min_history() const override { return period_; }

 protected:
  ProbabilisticForecast compute(const RateHistory& history,
                                std::size_t horizon) const override {
    const auto& x = history.rates;
    const std::size_t start = x.size() - period_;
    ProbabilisticForecast f;
    for (std::size_t h = 0; h < horizon; ++h) {
      f.mean.push_back(x[start + h % period_]);
    }
    double ss = 0.0;
    std::size_t count = 0;
    for (std::size_t t = period_; t < x.size(); ++t) {
      const double e = x[t] - x[t - period_];
      ss += e * e;
      ++count;
    }
    const double spread = count == 0 ? 0.0 : std::sqrt(ss / count);
    f.std.assign(horizon, spread);
    return f;
  }

 private:
  std::size_t period_;
};

/// Reads the future from an attached ground-truth series. With noise > 0
/// each mean is scaled by (1 + noise * N(0, 1)), drawn deterministically per
/// forecast position. The spread is always zero.
class OraclePredictor final : public Predictor {
 public:
  explicit OraclePredictor(std::vector<double> truth, double noise = 0.0,
                           std::uint64_t seed = 0)
      : truth_(std::move(truth)), noise_(noise), seed_(seed) {
    if (truth_.empty()) throw std::invalid_argument("oracle needs a truth");
    if (!(noise_ >= 0.0)) throw std::invalid_argument("noise must be >= 0");
  }

  std::string name() const override { return "oracle"; }
  std::size_t min_history() const override { return 0; }

 protected:
  ProbabilisticForecast compute(const RateHistory& history,
                                std::size_t horizon) const override {
    const std::size_t at = history.rates.size();
    ProbabilisticForecast f;
    std::mt19937_64 rng(seed_ ^ (0x9e3779b97f4a7c15ULL * (at + 1)));
    std::normal_distribution<double> eps(0.0, 1.0);
    for (std::size_t h = 0; h < horizon; ++h) {
      double m = truth_[std::min(at + h, truth_.size() - 1)];
      if (noise_ > 0.0) m *= std::max(0.0, 1.0 + noise_ * eps(rng));
      f.mean.push_back(m);
    }
    f.std.assign(horizon, 0.0);
    return f;
  }

 private:
  std::vector<double> truth_;
  double noise_;
  std::uint64_t seed_;
};

/// Per-job forecast rows `job_id,step,mean,std` read from a file. `step`
/// counts intervals from the trace start; a forecast from history length n
/// returns steps n, n+1, ... Steps missing from the file fall back to the
/// last value.
class ForecastTable {
 public:
  static ForecastTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open forecast file " + path);
    ForecastTable table;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
      ++line_no;
      const auto text = detail::trim(line);
      if (text.empty()) continue;
      const auto f = detail::split_commas(text);
      if (!header) {
        if (f.size() != 4 || f[0] != "job_id" || f[1] != "step" ||
            f[2] != "mean" || f[3] != "std") {
          detail::malformed(path, line_no,
                            "expected header `job_id,step,mean,std`");
        }
        header = true;
        continue;
      }
      double step = 0.0;
      double mean = 0.0;
      double spread = 0.0;
      if (f.size() != 4 || !detail::parse_number(f[1], step) || step < 0.0 ||
          step != std::floor(step) || !detail::parse_number(f[2], mean) ||
          !detail::parse_number(f[3], spread) || mean < 0.0 || spread < 0.0) {
        detail::malformed(path, line_no, "bad forecast row");
      }
      table.rows_[std::string(f[0])][static_cast<std::size_t>(step)] = {
          mean, spread};
    }
    if (!header) throw std::runtime_error(path + ": empty forecast file");
    return table;
  }

  bool has_job(const std::string& id) const { return rows_.count(id) != 0; }

  const std::map<std::size_t, std::pair<double, double>>& job(
      const std::string& id) const {
    const auto it = rows_.find(id);
    if (it == rows_.end()) {
      throw std::invalid_argument("forecast file has no rows for job " + id);
    }
    return it->second;
  }

 private:
  std::map<std::string, std::map<std::size_t, std::pair<double, double>>>
      rows_;
};

class ForecastFilePredictor final : public Predictor {
 public:
  ForecastFilePredictor(std::shared_ptr<const ForecastTable> table,
                        std::string job_id)
      : table_(std::move(table)), job_id_(std::move(job_id)) {
    table_->job(job_id_);
  }

  std::string name() const override { return "forecast-file"; }
  std::size_t min_history() const override { return 0; }

 protected:
  ProbabilisticForecast compute(const RateHistory& history,
                                std::size_t horizon) const override {
    const auto& rows = table_->job(job_id_);
    const auto fallback = last_value(history, horizon);
    ProbabilisticForecast f;
    for (std::size_t h = 0; h < horizon; ++h) {
      const auto it = rows.find(history.rates.size() + h);
      f.mean.push_back(it == rows.end() ? fallback.mean[h] : it->second.first);
      f.std.push_back(it == rows.end() ? fallback.std[h] : it->second.second);
    }
    return f;
  }

 private:
  std::shared_ptr<const ForecastTable> table_;
  std::string job_id_;
};

/// Draw `count` trajectories (trajectory-major, count x horizon) from the
/// per-step Gaussians, clamped at zero.
inline std::vector<double> sample_trajectories(
    const ProbabilisticForecast& forecast, std::size_t count,
    std::uint64_t seed) {
  forecast.validate();
  if (count < 1) throw std::invalid_argument("need at least one trajectory");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const std::size_t w = forecast.horizon();
  std::vector<double> out(count * w);
  for (std::size_t s = 0; s < count; ++s) {
    for (std::size_t h = 0; h < w; ++h) {
      const double draw = forecast.mean[h] + forecast.std[h] * z(rng);
      out[s * w + h] = std::max(0.0, draw);
    }
  }
  return out;
}

}  // namespace sloscale

#endif  // SLOSCALE_PREDICTOR_HPP_
