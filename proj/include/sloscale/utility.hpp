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

// Per-job utility functions distilled from a latency SLO, and the drop
// penalty multiplier that turns a utility into an effective utility.

#ifndef SLOSCALE_UTILITY_HPP_
#define SLOSCALE_UTILITY_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sloscale {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// A latency target met at a given percentile (0.99 means p99).
struct Slo {
  double target_latency = 0.72;  // seconds
  double percentile = 0.99;

  void validate() const {
    if (!(target_latency > 0.0)) {
      throw std::invalid_argument("slo target latency must be positive");
    }
    if (!(percentile > 0.0 && percentile <= 1.0)) {
      throw std::invalid_argument("slo percentile must lie in (0, 1]");
    }
  }
};

struct UtilityParams {
  /// Steepness of the relaxed utility. Larger values approach the step.
  double alpha = 4.0;

  void validate() const {
    if (!(alpha >= 1.0)) {
      throw std::invalid_argument("utility alpha must be >= 1");
    }
  }
};

/// Step utility: 1 when the SLO is met, 0 otherwise.
inline double utility_original(double latency, const Slo& slo) {
  return latency <= slo.target_latency ? 1.0 : 0.0;
}

/// Relaxed utility min((s/l)^alpha, 1). Strictly below 1 for every latency
/// above the target, so local search sees a slope everywhere but the maximum.
inline double utility_relaxed(double latency, const Slo& slo,
                              const UtilityParams& params = {}) {
  if (latency <= slo.target_latency) return 1.0;
  if (std::isinf(latency)) return 0.0;
  return std::pow(slo.target_latency / latency, params.alpha);
}

/// Availability-to-credit bands of a service credit table.
///
/// Each breakpoint (availability, credit) says: availability at or above this
/// threshold earns at most this credit. Breakpoints are ordered by strictly
/// decreasing availability with non-decreasing credit. In step mode the credit
/// of the first band whose threshold is met applies. In relaxed mode the
/// credit is linear between knots at full availability (first credit) and at
/// each threshold carrying the credit of the band just below it, so it never
/// undercuts the step credit and has no flat stretch above the last band.
class PenaltySchedule {
 public:
  struct Breakpoint {
    double availability;
    double credit;
  };

  PenaltySchedule(std::vector<Breakpoint> breakpoints, bool relaxed)
      : breakpoints_(std::move(breakpoints)), relaxed_(relaxed) {
    if (breakpoints_.empty()) {
      throw std::invalid_argument("penalty schedule needs breakpoints");
    }
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
      const auto& bp = breakpoints_[i];
      if (bp.credit < 0.0 || bp.credit > 1.0) {
        throw std::invalid_argument("penalty credit must lie in [0, 1]");
      }
      if (bp.availability < 0.0 || bp.availability > 1.0) {
        throw std::invalid_argument("penalty availability must lie in [0, 1]");
      }
      if (i > 0) {
        const auto& prev = breakpoints_[i - 1];
        if (!(bp.availability < prev.availability)) {
          throw std::invalid_argument(
              "penalty availabilities must be strictly decreasing");
        }
        if (bp.credit < prev.credit) {
          throw std::invalid_argument(
              "penalty credits must not decrease as availability drops");
        }
      }
    }
  }

  /// The public-cloud credit table: >= 99% no credit, [95%, 99%) 25%,
  /// [90%, 95%) 50%, below 90% full credit.
  static PenaltySchedule cloud_sla(bool relaxed = false) {
    return PenaltySchedule(
        {{0.99, 0.0}, {0.95, 0.25}, {0.90, 0.50}, {0.0, 1.0}}, relaxed);
  }

  bool relaxed() const { return relaxed_; }
  const std::vector<Breakpoint>& breakpoints() const { return breakpoints_; }

  PenaltySchedule with_mode(bool relaxed) const {
    PenaltySchedule copy = *this;
    copy.relaxed_ = relaxed;
    return copy;
  }

  /// Fraction of value forfeited at the given availability.
  double credit(double availability) const {
    // Availabilities computed as 1 - d carry rounding noise; a band edge
    // such as 1 - 0.01 must land in the band it names.
    constexpr double kEdgeTolerance = 1e-12;
    if (!relaxed_) {
      for (const auto& bp : breakpoints_) {
        if (availability + kEdgeTolerance >= bp.availability) return bp.credit;
      }
      return breakpoints_.back().credit;
    }
    double hi_a = 1.0;
    double hi_c = breakpoints_.front().credit;
    for (std::size_t i = 0; i + 1 < breakpoints_.size(); ++i) {
      const double lo_a = breakpoints_[i].availability;
      const double lo_c = breakpoints_[i + 1].credit;
      if (availability >= lo_a) {
        if (!(hi_a > lo_a)) return lo_c;
        const double t = (hi_a - availability) / (hi_a - lo_a);
        return hi_c + std::clamp(t, 0.0, 1.0) * (lo_c - hi_c);
      }
      hi_a = lo_a;
      hi_c = lo_c;
    }
    return breakpoints_.back().credit;
  }

 private:
  std::vector<Breakpoint> breakpoints_;
  bool relaxed_ = false;
};

/// phi(d) = 1 - penalty(1 - d).
inline double penalty_multiplier(double drop_rate,
                                 const PenaltySchedule& schedule) {
  const double d = std::clamp(drop_rate, 0.0, 1.0);
  return 1.0 - schedule.credit(1.0 - d);
}

/// Utility of the non-dropped requests discounted by the drop penalty.
inline double effective_utility(double utility_non_dropped, double drop_rate,
                                const PenaltySchedule& schedule) {
  return penalty_multiplier(drop_rate, schedule) * utility_non_dropped;
}

}  // namespace sloscale

#endif  // SLOSCALE_UTILITY_HPP_
