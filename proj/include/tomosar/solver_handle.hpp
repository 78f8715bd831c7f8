// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <memory>
#include <string>

#include "tomosar/alista_weights.hpp"
#include "tomosar/network.hpp"
#include "tomosar/solvers.hpp"

namespace tomosar {

/// A named per-pixel reconstruction y -> gamma bound to one steering matrix.
struct Solver {
  std::string name;
  std::uint64_t geometry_hash = 0;
  std::function<ReflectivityProfile(const PixelMeasurement&)> solve;

  ReflectivityProfile operator()(const PixelMeasurement& y) const { return solve(y); }
};

inline Solver make_omp_solver(const SteeringMatrix& a, const OmpConfig& cfg = {}) {
  return {"omp", a.geometry_hash, [a, cfg](const PixelMeasurement& y) { return omp(y, a, cfg); }};
}

inline Solver make_ista_solver(const SteeringMatrix& a, IstaConfig cfg = {}) {
  if (cfg.step_L <= 0.0) cfg.step_L = 1.01 * largest_eigenvalue(a.entries);
  return {"ista", a.geometry_hash, [a, cfg](const PixelMeasurement& y) { return ista(y, a, cfg); }};
}

inline Solver make_svd_solver(const SteeringMatrix& a, const SvdTruncation& trunc = {}) {
  auto inv = std::make_shared<const SvdInverse>(a, trunc);
  return {"svd", a.geometry_hash, [inv](const PixelMeasurement& y) { return inv->solve(y).gamma; }};
}

/// Named "atasi" for adaptive thresholds and "alista" for layer constants.
inline Solver make_network_solver(const SteeringMatrix& a, const AlistaWeights& weights, const NetworkParams& params) {
  params.validate();
  check_binding(a, weights, params);
  auto w = std::make_shared<const AlistaWeights>(weights);
  const std::string name = params.mode == ThresholdMode::adaptive ? "atasi" : "alista";
  return {name, a.geometry_hash, [a, w, params](const PixelMeasurement& y) { return forward(y, a, *w, params).gamma; }};
}

}  // namespace tomosar
