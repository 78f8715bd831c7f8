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

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace tomosar {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent per-item seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for item `index` of a run seeded with `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix_seed(mix_seed(seed) ^ mix_seed(index + 0x5851f42d4c957f2dULL));
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Rayleigh(sigma) sample by inversion.
inline double rayleigh(Rng& rng, double sigma) {
  const double u = uniform01(rng);
  return sigma * std::sqrt(-2.0 * std::log1p(-u));
}

/// Rayleigh(sigma) restricted to [0, cap] by rejection.
inline double truncated_rayleigh(Rng& rng, double sigma, double cap) {
  for (;;) {
    const double a = rayleigh(rng, sigma);
    if (a <= cap) return a;
  }
}

/// CDF of Rayleigh(sigma) truncated to [0, cap].
inline double truncated_rayleigh_cdf(double x, double sigma, double cap) {
  if (x <= 0.0) return 0.0;
  if (x >= cap) return 1.0;
  const double norm = -std::expm1(-cap * cap / (2.0 * sigma * sigma));
  return -std::expm1(-x * x / (2.0 * sigma * sigma)) / norm;
}

/// Circularly-symmetric complex Gaussian with total variance `variance`.
inline std::complex<double> complex_gaussian(Rng& rng, double variance) {
  std::normal_distribution<double> nd(0.0, std::sqrt(variance / 2.0));
  const double re = nd(rng);
  const double im = nd(rng);
  return {re, im};
}

}  // namespace tomosar
