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

// Umbrella header.

#ifndef SLOSCALE_SLOSCALE_HPP_
#define SLOSCALE_SLOSCALE_HPP_

#include "sloscale/autoscaler.hpp"
#include "sloscale/cobyla.hpp"
#include "sloscale/harness.hpp"
#include "sloscale/latency.hpp"
#include "sloscale/objectives.hpp"
#include "sloscale/predictor.hpp"
#include "sloscale/simulator.hpp"
#include "sloscale/solver.hpp"
#include "sloscale/traces.hpp"
#include "sloscale/utility.hpp"

#endif  // SLOSCALE_SLOSCALE_HPP_
