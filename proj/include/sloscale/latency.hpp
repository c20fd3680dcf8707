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

// Analytic tail-latency estimates for a pool of identical replicas fed by one
// FIFO queue: a pessimistic upper bound, an M/D/c percentile estimate built
// on half the M/M/c waiting time, and a relaxed variant that stays finite
// (and keeps growing) past saturation.

#ifndef SLOSCALE_LATENCY_HPP_
#define SLOSCALE_LATENCY_HPP_

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sloscale/utility.hpp"

namespace sloscale {

struct QueueInput {
  double service_time = 0.18;  // seconds per request, deterministic
  double arrival_rate = 0.0;   // requests per second
  double replicas = 1.0;       // may be fractional inside the solver
  double percentile = 0.99;

  double utilization() const {
    return service_time * arrival_rate / replicas;
  }

  void validate() const {
    if (!(service_time > 0.0)) {
      throw std::invalid_argument("service time must be positive");
    }
    if (!(arrival_rate >= 0.0)) {
      throw std::invalid_argument("arrival rate must be non-negative");
    }
    if (!(replicas >= 1.0)) {
      throw std::invalid_argument("replica count must be >= 1");
    }
    if (!(percentile > 0.0 && percentile < 1.0)) {
      throw std::invalid_argument("queueing percentile must lie in (0, 1)");
    }
  }
};

struct RelaxationKnobs {
  /// Utilization above which latency is extrapolated linearly in load.
  double rho_max = 0.95;

  void validate() const {
    if (!(rho_max > 0.0 && rho_max < 1.0)) {
      throw std::invalid_argument("rho_max must lie in (0, 1)");
    }
  }
};

enum class LatencyModel { kMdc, kUpperBound };

namespace detail {

// Erlang C for integral c via the Erlang B recursion; saturates at 1 once the
// offered load reaches the server count.
inline double erlang_c_saturating(int servers, double offered_load) {
  if (offered_load <= 0.0) return 0.0;
  if (offered_load >= servers) return 1.0;
  double blocking = 1.0;
  for (int n = 1; n <= servers; ++n) {
    blocking = offered_load * blocking / (n + offered_load * blocking);
  }
  const double c = servers;
  return c * blocking / (c - offered_load * (1.0 - blocking));
}

// Fractional server counts interpolate linearly between floor and ceil. Both
// ends come out of one pass of the recursion.
inline double erlang_c_fractional(double servers, double offered_load) {
  if (offered_load <= 0.0) return 0.0;
  const double lo_servers = std::floor(servers);
  const double frac = servers - lo_servers;
  const int lo = static_cast<int>(lo_servers);
  const int hi = frac > 0.0 ? lo + 1 : lo;
  double blocking = 1.0;
  double blocking_lo = 1.0;
  for (int n = 1; n <= hi; ++n) {
    blocking = offered_load * blocking / (n + offered_load * blocking);
    if (n == lo) blocking_lo = blocking;
  }
  auto from_blocking = [offered_load](int c, double b) {
    if (offered_load >= c) return 1.0;
    return c * b / (c - offered_load * (1.0 - b));
  };
  const double c_lo = from_blocking(lo, blocking_lo);
  if (hi == lo) return c_lo;
  const double c_hi = from_blocking(hi, blocking);
  return c_lo + frac * (c_hi - c_lo);
}

// Unchecked hot-path variants used by the objective evaluation.
inline double mmc_wait_quantile_unchecked(double service_time,
                                          double arrival_rate, double replicas,
                                          double percentile) {
  if (arrival_rate <= 0.0) return 0.0;
  const double queueing =
      erlang_c_fractional(replicas, service_time * arrival_rate);
  const double tail = 1.0 - percentile;
  if (queueing <= tail) return 0.0;
  return std::log(queueing / tail) / (replicas / service_time - arrival_rate);
}

inline double mdc_latency_unchecked(double service_time, double arrival_rate,
                                    double replicas, double percentile) {
  if (service_time * arrival_rate >= replicas) return kInfinity;
  return service_time + 0.5 * mmc_wait_quantile_unchecked(
                                  service_time, arrival_rate, replicas,
                                  percentile);
}

}  // namespace detail

/// Probability that an arrival to an M/M/c queue has to wait.
inline double erlang_c(int servers, double offered_load) {
  if (servers < 1) throw std::invalid_argument("erlang_c needs >= 1 server");
  if (!(offered_load >= 0.0)) {
    throw std::invalid_argument("offered load must be non-negative");
  }
  if (offered_load >= servers) throw std::domain_error("unstable queue");
  return detail::erlang_c_saturating(servers, offered_load);
}

/// Erlang C for a fractional server count: linear in c between the
/// neighbouring integers, with C = 1 wherever the load saturates.
inline double erlang_c_fractional(double servers, double offered_load) {
  if (!(servers >= 1.0)) {
    throw std::invalid_argument("erlang_c needs >= 1 server");
  }
  if (!(offered_load >= 0.0)) {
    throw std::invalid_argument("offered load must be non-negative");
  }
  return detail::erlang_c_fractional(servers, offered_load);
}

/// k-th percentile of the M/M/c queueing delay, from the exponential tail
/// P(Wq > t) = C * exp(-(N/p - lambda) t). Zero when the queueing
/// probability is already below the tail mass.
inline double mmc_wait_quantile(const QueueInput& input) {
  input.validate();
  if (input.utilization() >= 1.0) throw std::domain_error("unstable queue");
  return detail::mmc_wait_quantile_unchecked(
      input.service_time, input.arrival_rate, input.replicas, input.percentile);
}

/// k-th percentile latency of an M/D/c queue: service time plus half the
/// M/M/c waiting-time quantile; infinite when the queue is unstable.
inline double mdc_latency(const QueueInput& input) {
  input.validate();
  return detail::mdc_latency_unchecked(input.service_time, input.arrival_rate,
                                       input.replicas, input.percentile);
}

/// Pessimistic completion time when one second of arrivals lands at once.
inline double upper_bound_latency(const QueueInput& input) {
  input.validate();
  return std::max(input.service_time,
                  input.service_time * input.arrival_rate / input.replicas);
}

/// Replicas needed so one second's worth of simultaneous arrivals finishes
/// within the target.
inline int upper_bound_replicas(double arrival_rate, double service_time,
                                double target_latency) {
  if (!(arrival_rate >= 0.0) || !(service_time > 0.0) ||
      !(target_latency > 0.0)) {
    throw std::invalid_argument("upper bound needs lambda >= 0, p > 0, s > 0");
  }
  // 0.15 * 40 / 0.6 is 10.000000000000002 in binary floating point.
  const double needed = service_time * arrival_rate / target_latency - 1e-9;
  return std::max(1, static_cast<int>(std::ceil(needed)));
}

/// Smallest integral replica count whose M/D/c latency meets the target, or
/// `limit + 1` if none up to `limit` does.
inline int min_replicas_mdc(double arrival_rate, double service_time,
                            double target_latency, double percentile,
                            int limit = 100000) {
  for (int n = 1; n <= limit; ++n) {
    if (mdc_latency({service_time, arrival_rate, static_cast<double>(n),
                     percentile}) <= target_latency) {
      return n;
    }
  }
  return limit + 1;
}

namespace detail {

inline double relaxed_mdc_latency_unchecked(double service_time,
                                            double arrival_rate,
                                            double replicas, double percentile,
                                            double rho_max) {
  const double rho = service_time * arrival_rate / replicas;
  if (rho <= rho_max) {
    return mdc_latency_unchecked(service_time, arrival_rate, replicas,
                                 percentile);
  }
  const double knee_rate = rho_max * replicas / service_time;
  return arrival_rate / knee_rate *
         mdc_latency_unchecked(service_time, knee_rate, replicas, percentile);
}

}  // namespace detail

/// M/D/c latency below rho_max; above it, the latency at the knee scaled by
/// lambda / lambda_knee, so the estimate is finite and keeps rising with load.
inline double relaxed_mdc_latency(const QueueInput& input,
                                  const RelaxationKnobs& knobs = {}) {
  input.validate();
  knobs.validate();
  return detail::relaxed_mdc_latency_unchecked(
      input.service_time, input.arrival_rate, input.replicas, input.percentile,
      knobs.rho_max);
}

}  // namespace sloscale

#endif  // SLOSCALE_LATENCY_HPP_
