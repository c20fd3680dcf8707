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

#include "sloscale/traces.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace sloscale {
namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() /
                    ("sloscale_traces_" + name);
  std::ofstream(path) << text;
  return path.string();
}

RateSeries series_of(std::vector<double> v) {
  RateSeries s;
  s.values = std::move(v);
  return s;
}

TEST(LoadTraceTest, TwoColumns) {
  const auto path = write_temp("two.csv", "minute,count\n0,5\n1,7\n");
  EXPECT_EQ(load_trace(path).values, (std::vector<double>{5, 7}));
}

TEST(LoadTraceTest, GapsFillWithZero) {
  const auto path = write_temp("gap.csv", "minute,count\n0,5\n2,9\n");
  EXPECT_EQ(load_trace(path).values, (std::vector<double>{5, 0, 9}));
}

TEST(LoadTraceTest, HeaderIsOptional) {
  const auto path = write_temp("nohdr.csv", "0,3\n1,4\n");
  EXPECT_EQ(load_trace(path).values, (std::vector<double>{3, 4}));
}

TEST(LoadTraceTest, EmptyFileIsAnError) {
  const auto path = write_temp("empty.csv", "");
  EXPECT_THROW(load_trace(path), std::runtime_error);
}

TEST(LoadTraceTest, MalformedRowNamesTheLine) {
  const auto path = write_temp("bad.csv", "minute,count\n0,5\n1,abc\n");
  try {
    load_trace(path);
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos);
  }
  const auto dup = write_temp("dup.csv", "minute,count\n0,5\n0,6\n");
  EXPECT_THROW(load_trace(dup), std::runtime_error);
  const auto neg = write_temp("neg.csv", "minute,count\n0,-1\n");
  EXPECT_THROW(load_trace(neg), std::runtime_error);
}

TEST(LoadTraceTest, AzureLayoutPicksBusiestOrNamedFunction) {
  const auto path = write_temp(
      "azure.csv",
      "HashOwner,HashApp,HashFunction,Trigger,1,2,3\n"
      "o,a,f1,http,1,2,3\n"
      "o,a,f2,http,10,0,10\n");
  EXPECT_EQ(load_trace(path, TraceFormat::kAzure).values,
            (std::vector<double>{10, 0, 10}));
  EXPECT_EQ(load_azure_function(path, "f1").values,
            (std::vector<double>{1, 2, 3}));
  EXPECT_THROW(load_azure_function(path, "nope"), std::runtime_error);
}

TEST(LoadTraceTest, SaveRoundTrips) {
  const auto path = (std::filesystem::temp_directory_path() /
                     "sloscale_traces_round.csv")
                        .string();
  const auto s = series_of({1.5, 0.0, 1e6, 3.25});
  save_trace(s, path);
  EXPECT_EQ(load_trace(path).values, s.values);
}

TEST(RescaleTest, Examples) {
  EXPECT_EQ(rescale(series_of({0, 100}), 1, 1600).values,
            (std::vector<double>{1, 1600}));
  EXPECT_EQ(rescale(series_of({7, 7, 7}), 1, 1600).values,
            (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(rescale(series_of({0, 5, 9}), 3, 3).values,
            (std::vector<double>{3, 3, 3}));
  EXPECT_THROW(rescale(series_of({1}), 5, 1), std::invalid_argument);
}

TEST(RescaleTest, PreservesOrder) {
  const auto in = synth_trace(SynthKind::kSinusoid, {100, 50, 60}, 200, 3);
  const auto out = rescale(in, 1, 1600);
  const auto amax = [](const RateSeries& s) {
    return std::max_element(s.values.begin(), s.values.end()) -
           s.values.begin();
  };
  const auto amin = [](const RateSeries& s) {
    return std::min_element(s.values.begin(), s.values.end()) -
           s.values.begin();
  };
  EXPECT_EQ(amax(in), amax(out));
  EXPECT_EQ(amin(in), amin(out));
  for (std::size_t i = 1; i < in.size(); ++i) {
    EXPECT_EQ(in.values[i] > in.values[i - 1], out.values[i] > out.values[i - 1]);
  }
}

TEST(WindowAverageTest, Examples) {
  EXPECT_EQ(window_average(series_of({4, 8, 0, 8}), 4).values,
            (std::vector<double>{5}));
  const auto s = series_of({1, 2, 3});
  EXPECT_EQ(window_average(s, 1).values, s.values);
  EXPECT_EQ(window_average(series_of({1, 1, 1, 1, 2, 4}), 4).values,
            (std::vector<double>{1, 3}));
  EXPECT_THROW(window_average(s, 0), std::invalid_argument);
}

TEST(WindowAverageTest, MeanPreservedOnWholeWindows) {
  const auto in = synth_trace(SynthKind::kSinusoid, {300, 200, 97}, 400, 1);
  const auto out = window_average(in, 4);
  const double a = std::accumulate(in.values.begin(), in.values.end(), 0.0) /
                   static_cast<double>(in.size());
  const double b = std::accumulate(out.values.begin(), out.values.end(), 0.0) /
                   static_cast<double>(out.size());
  EXPECT_NEAR(a, b, 1e-9);
}

TEST(SplitTest, Examples) {
  const auto eleven = series_of(std::vector<double>(11 * 1440, 1.0));
  const auto [train, eval] = split(eleven, 10, 1);
  EXPECT_EQ(train.size(), 14400u);
  EXPECT_EQ(eval.size(), 1440u);

  std::vector<double> two(2 * 1440);
  std::iota(two.begin(), two.end(), 0.0);
  const auto [a, b] = split(series_of(two), 1, 1);
  EXPECT_EQ(a.values.back(), 1439.0);
  EXPECT_EQ(b.values.front(), 1440.0);

  EXPECT_THROW(split(series_of(std::vector<double>(1440)), 10, 1),
               std::invalid_argument);
}

TEST(SynthTraceTest, Examples) {
  const auto c = synth_trace(SynthKind::kConstant, {100}, 60, 0);
  EXPECT_EQ(c.values, std::vector<double>(60, 100.0));

  SynthParams sin;
  sin.base = 800;
  sin.amplitude = 700;
  const auto s = synth_trace(SynthKind::kSinusoid, sin, 2880, 0);
  for (double v : s.values) {
    EXPECT_GE(v, 100.0 - 1e-9);
    EXPECT_LE(v, 1500.0 + 1e-9);
  }

  SynthParams spike;
  spike.base = 10;
  spike.spike_rate = 0.05;
  spike.spike_height = 500;
  spike.spike_length = 3;
  const auto a = synth_trace(SynthKind::kSpike, spike, 1000, 9);
  EXPECT_EQ(a.values, synth_trace(SynthKind::kSpike, spike, 1000, 9).values);
  EXPECT_NE(a.values, synth_trace(SynthKind::kSpike, spike, 1000, 10).values);
  EXPECT_GT(*std::max_element(a.values.begin(), a.values.end()), 500.0);
  EXPECT_EQ(*std::min_element(a.values.begin(), a.values.end()), 10.0);
}

TEST(SynthTraceTest, StepAndNoise) {
  SynthParams step;
  step.base = 10;
  step.step_minute = 5;
  step.step_level = 40;
  const auto s = synth_trace(SynthKind::kStep, step, 10, 0);
  EXPECT_EQ(s.values[4], 10.0);
  EXPECT_EQ(s.values[5], 40.0);

  SynthParams noisy;
  noisy.base = 100;
  noisy.noise = 5.0;
  for (double v : synth_trace(SynthKind::kConstant, noisy, 500, 2).values) {
    EXPECT_GE(v, 0.0);
  }
  EXPECT_THROW(parse_synth_kind("square"), std::invalid_argument);
}

TEST(SynthTraceTest, SumSeries) {
  const auto a = synth_trace(SynthKind::kConstant, {1}, 3, 0);
  const auto b = synth_trace(SynthKind::kConstant, {2}, 3, 0);
  EXPECT_EQ(sum_series({a, b}).values, (std::vector<double>{3, 3, 3}));
}

}  // namespace
}  // namespace sloscale
