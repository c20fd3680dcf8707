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

// Arrival-rate traces: loading per-minute invocation counts, rescaling,
// window averaging, day splitting and synthetic generation.

#ifndef SLOSCALE_TRACES_HPP_
#define SLOSCALE_TRACES_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sloscale {

/// Requests per interval, one value per interval.
struct RateSeries {
  double interval = 60.0;  // seconds
  std::vector<double> values;
  std::string origin;

  std::size_t size() const { return values.size(); }

  void validate() const {
    if (!(interval > 0.0)) {
      throw std::invalid_argument("trace interval must be positive");
    }
    for (double v : values) {
      if (!(v >= 0.0)) {
        throw std::invalid_argument("trace " + origin +
                                    ": rates must be finite and >= 0");
      }
    }
  }
};

enum class TraceFormat {
  kCanonical,  // header `minute,count`, one row per minute
  kAzure,      // Azure Functions per-minute invocation table
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

inline bool parse_number(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

[[noreturn]] inline void malformed(const std::string& path, std::size_t line,
                                   const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

inline std::ifstream open_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file " + path);
  return in;
}

inline RateSeries load_canonical(const std::string& path) {
  auto in = open_trace(path);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::map<long long, double> counts;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto fields = split_commas(text);
    if (!header_seen) {
      header_seen = true;
      double probe = 0.0;
      if (fields.size() == 2 && !parse_number(fields[0], probe)) continue;
    }
    if (fields.size() != 2) {
      malformed(path, line_no, "expected two columns `minute,count`");
    }
    double minute = 0.0;
    double count = 0.0;
    if (!parse_number(fields[0], minute) || minute < 0.0 ||
        minute != std::floor(minute)) {
      malformed(path, line_no, "minute must be a non-negative integer");
    }
    if (!parse_number(fields[1], count) || count < 0.0) {
      malformed(path, line_no, "count must be a non-negative number");
    }
    const auto key = static_cast<long long>(minute);
    if (counts.count(key) != 0) {
      malformed(path, line_no, "duplicate minute " + std::to_string(key));
    }
    counts[key] = count;
  }
  if (counts.empty()) throw std::runtime_error(path + ": trace has no rows");
  RateSeries series;
  series.origin = path;
  series.values.assign(static_cast<std::size_t>(counts.rbegin()->first) + 1,
                       0.0);
  for (const auto& [minute, count] : counts) {
    series.values[static_cast<std::size_t>(minute)] = count;
  }
  return series;
}

// Azure Functions layout: HashOwner,HashApp,HashFunction,Trigger,1..1440.
// Picks the row whose function hash matches, or the busiest row when no hash
// is given.
inline RateSeries load_azure(const std::string& path,
                             const std::string& function_hash) {
  auto in = open_trace(path);
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  constexpr std::size_t kKeyColumns = 4;
  RateSeries best;
  double best_total = -1.0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto fields = split_commas(text);
    if (columns == 0) {
      if (fields.size() <= kKeyColumns || fields[2] != "HashFunction") {
        malformed(path, line_no, "expected Azure Functions invocation header");
      }
      columns = fields.size();
      continue;
    }
    if (fields.size() != columns) {
      malformed(path, line_no, "row width differs from the header");
    }
    if (!function_hash.empty() && fields[2] != function_hash) continue;
    RateSeries row;
    row.origin = path + "#" + std::string(fields[2]);
    double total = 0.0;
    for (std::size_t c = kKeyColumns; c < columns; ++c) {
      double v = 0.0;
      if (!parse_number(fields[c], v) || v < 0.0) {
        malformed(path, line_no, "invocation counts must be >= 0");
      }
      row.values.push_back(v);
      total += v;
    }
    if (total > best_total) {
      best_total = total;
      best = std::move(row);
    }
  }
  if (best_total < 0.0) {
    throw std::runtime_error(path + ": no matching function rows");
  }
  return best;
}

}  // namespace detail

/// Load a per-minute trace. Minutes missing from a canonical file count 0.
inline RateSeries load_trace(const std::string& path,
                             TraceFormat format = TraceFormat::kCanonical) {
  return format == TraceFormat::kCanonical ? detail::load_canonical(path)
                                           : detail::load_azure(path, "");
}

/// One function's day from an Azure Functions invocation table.
inline RateSeries load_azure_function(const std::string& path,
                                      const std::string& function_hash) {
  return detail::load_azure(path, function_hash);
}

/// Write a trace in the canonical `minute,count` format.
inline void save_trace(const RateSeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file " + path);
  out << "minute,count\n";
  char buf[64];
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), series.values[i]);
    out << i << ',' << std::string_view(buf, res.ptr - buf) << '\n';
  }
}

/// Affine map of the series' [min, max] onto [lo, hi]. A constant series maps
/// to lo.
inline RateSeries rescale(const RateSeries& series, double lo, double hi) {
  if (!(lo >= 0.0) || !(hi >= lo)) {
    throw std::invalid_argument("rescale needs 0 <= lo <= hi");
  }
  RateSeries out = series;
  if (series.values.empty()) return out;
  const auto [mn, mx] =
      std::minmax_element(series.values.begin(), series.values.end());
  const double span = *mx - *mn;
  for (double& v : out.values) {
    v = span > 0.0 ? lo + (v - *mn) * (hi - lo) / span : lo;
  }
  return out;
}

/// Replace each run of `window` values by its mean, compressing the series.
/// A trailing partial window is averaged over its actual length.
inline RateSeries window_average(const RateSeries& series, std::size_t window) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  RateSeries out;
  out.interval = series.interval;
  out.origin = series.origin;
  for (std::size_t i = 0; i < series.size(); i += window) {
    const std::size_t end = std::min(series.size(), i + window);
    double sum = 0.0;
    for (std::size_t j = i; j < end; ++j) sum += series.values[j];
    out.values.push_back(sum / static_cast<double>(end - i));
  }
  return out;
}

/// Contiguous split at day boundaries: the first `train_days` days, then the
/// following `eval_days` days.
inline std::pair<RateSeries, RateSeries> split(const RateSeries& series,
                                               std::size_t train_days,
                                               std::size_t eval_days) {
  const auto per_day = static_cast<std::size_t>(std::llround(86400.0 /
                                                             series.interval));
  const std::size_t train = train_days * per_day;
  const std::size_t eval = eval_days * per_day;
  if (series.size() < train + eval) {
    throw std::invalid_argument("trace of " + std::to_string(series.size()) +
                                " intervals is shorter than " +
                                std::to_string(train_days + eval_days) +
                                " days");
  }
  RateSeries a{series.interval, {}, series.origin + "[train]"};
  RateSeries b{series.interval, {}, series.origin + "[eval]"};
  a.values.assign(series.values.begin(), series.values.begin() + train);
  b.values.assign(series.values.begin() + train,
                  series.values.begin() + train + eval);
  return {a, b};
}

enum class SynthKind { kConstant, kSinusoid, kStep, kSpike };

inline SynthKind parse_synth_kind(const std::string& name) {
  if (name == "constant") return SynthKind::kConstant;
  if (name == "sinusoid") return SynthKind::kSinusoid;
  if (name == "step") return SynthKind::kStep;
  if (name == "spike") return SynthKind::kSpike;
  throw std::invalid_argument("unknown synthetic trace kind '" + name + "'");
}

/// Parameters of a synthetic trace, in requests per minute.
struct SynthParams {
  double base = 100.0;         // level; sinusoid mean; level before a step
  double amplitude = 0.0;      // sinusoid amplitude
  double period = 1440.0;      // sinusoid period, minutes
  double phase = 0.0;          // sinusoid phase, radians
  double step_minute = 0.0;    // first minute at the new level
  double step_level = 0.0;     // level from step_minute on
  double spike_rate = 0.0;     // expected burst starts per minute
  double spike_height = 0.0;   // added to the base during a burst
  double spike_length = 1.0;   // minutes per burst
  double noise = 0.0;          // relative std of multiplicative noise

  void validate(SynthKind kind) const {
    if (!(base >= 0.0)) throw std::invalid_argument("synth base must be >= 0");
    if (kind == SynthKind::kSinusoid && !(period > 0.0)) {
      throw std::invalid_argument("sinusoid period must be positive");
    }
    if (kind == SynthKind::kStep && !(step_level >= 0.0)) {
      throw std::invalid_argument("step level must be >= 0");
    }
    if (kind == SynthKind::kSpike &&
        (!(spike_rate >= 0.0) || !(spike_height >= 0.0) ||
         !(spike_length >= 1.0))) {
      throw std::invalid_argument("spike parameters out of range");
    }
    if (!(noise >= 0.0)) throw std::invalid_argument("noise must be >= 0");
  }
};

/// Deterministic synthetic trace of `minutes` per-minute values.
inline RateSeries synth_trace(SynthKind kind, const SynthParams& params,
                              std::size_t minutes, std::uint64_t seed) {
  params.validate(kind);
  std::mt19937_64 rng(seed);
  RateSeries out;
  out.origin = "synthetic";
  out.values.assign(minutes, params.base);
  switch (kind) {
    case SynthKind::kConstant:
      break;
    case SynthKind::kSinusoid:
      for (std::size_t t = 0; t < minutes; ++t) {
        out.values[t] = params.base +
                        params.amplitude *
                            std::sin(2.0 * std::numbers::pi *
                                         static_cast<double>(t) /
                                         params.period +
                                     params.phase);
      }
      break;
    case SynthKind::kStep:
      for (std::size_t t = 0; t < minutes; ++t) {
        if (static_cast<double>(t) >= params.step_minute) {
          out.values[t] = params.step_level;
        }
      }
      break;
    case SynthKind::kSpike: {
      std::poisson_distribution<int> starts(params.spike_rate);
      const auto length = static_cast<std::size_t>(params.spike_length);
      std::vector<double> extra(minutes, 0.0);
      for (std::size_t t = 0; t < minutes && params.spike_rate > 0.0; ++t) {
        const int k = starts(rng);
        for (std::size_t j = t; j < std::min(minutes, t + length) && k > 0;
             ++j) {
          extra[j] = std::max(extra[j], params.spike_height);
        }
      }
      for (std::size_t t = 0; t < minutes; ++t) out.values[t] += extra[t];
      break;
    }
  }
  if (params.noise > 0.0) {
    std::normal_distribution<double> eps(0.0, params.noise);
    for (double& v : out.values) v *= 1.0 + eps(rng);
  }
  for (double& v : out.values) v = std::max(0.0, v);
  return out;
}

/// Elementwise sum of equally long series.
inline RateSeries sum_series(const std::vector<RateSeries>& parts) {
  if (parts.empty()) throw std::invalid_argument("nothing to sum");
  RateSeries out = parts.front();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    if (parts[k].size() != out.size()) {
      throw std::invalid_argument("summed traces differ in length");
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.values[i] += parts[k].values[i];
    }
  }
  return out;
}

}  // namespace sloscale

#endif  // SLOSCALE_TRACES_HPP_
