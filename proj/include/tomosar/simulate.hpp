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

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "tomosar/cube.hpp"
#include "tomosar/errors.hpp"
#include "tomosar/geometry.hpp"
#include "tomosar/random.hpp"

namespace tomosar {

/// std::nullopt means noiseless.
using SnrDb = std::optional<double>;

/// Noise variance giving the requested per-channel SNR for a clean signal.
inline double noise_variance(const CVec& clean, double snr_db) {
  const double power = clean.squaredNorm() / static_cast<double>(clean.size());
  return power / std::pow(10.0, snr_db / 10.0);
}

inline void add_noise(CVec& y, double variance, Rng& rng) {
  for (Eigen::Index n = 0; n < y.size(); ++n) y(n) += complex_gaussian(rng, variance);
}

/// y = A*gamma + n with circular Gaussian noise at the requested SNR.
inline PixelMeasurement simulate_pixel(const ReflectivityProfile& profile, const SteeringMatrix& a,
                                       SnrDb snr_db, std::uint64_t seed) {
  require(profile.size() == a.grid_size(), "simulate_pixel: profile length does not match steering matrix");
  require(profile.allFinite(), "simulate_pixel: non-finite profile");
  CVec y = a.entries * profile;
  if (!snr_db) return y;
  if (y.squaredNorm() == 0.0)
    throw InvalidArgument("simulate_pixel: SNR is undefined for a zero-signal profile");
  Rng rng(seed);
  add_noise(y, noise_variance(y, *snr_db), rng);
  return y;
}

/// Rayleigh amplitude law restricted to [0, cap].
struct AmplitudeLaw {
  double sigma = 1.0;
  double cap = 4.0;
};

struct TrainingSetConfig {
  std::size_t count = 20000;
  double single_fraction = 0.5;
  AmplitudeLaw amplitude;
  std::vector<double> snr_levels = {0, 3, 6, 9, 12, 15, 18, 21, 24, 27, 30};
  /// Double-scatterer spacing range as multiples of the Rayleigh resolution.
  std::pair<double, double> spacing_range{0.1, 1.2};
  std::uint64_t seed = 0;
  /// 0 means derive from the geometry.
  double rayleigh_resolution_m = 0.0;
};

struct Sample {
  PixelMeasurement y;
  ReflectivityProfile label;
};
using Dataset = std::vector<Sample>;

namespace detail {

inline cplx random_reflectivity(Rng& rng, const AmplitudeLaw& law) {
  const double amp = truncated_rayleigh(rng, law.sigma, law.cap);
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  return std::polar(amp, phase);
}

}  // namespace detail

/// Single and double on-grid scatterer samples for supervised training.
inline Dataset gen_training_set(const ImagingGeometry& g, const SteeringMatrix& a,
                                const TrainingSetConfig& cfg) {
  g.validate();
  require(cfg.count > 0, "gen_training_set: count must be > 0");
  require(!cfg.snr_levels.empty(), "gen_training_set: snr_levels is empty");
  require(cfg.single_fraction >= 0.0 && cfg.single_fraction <= 1.0,
          "gen_training_set: single_fraction must lie in [0, 1]");
  require(a.geometry_hash == g.hash(), "gen_training_set: steering matrix does not match geometry");
  const double rho = cfg.rayleigh_resolution_m > 0.0 ? cfg.rayleigh_resolution_m : rayleigh_resolution(g);
  const auto [sp_lo, sp_hi] = cfg.spacing_range;
  const double extent = g.elevation_max() - g.elevation_min();
  require(sp_lo > 0.0 && sp_lo <= sp_hi, "gen_training_set: invalid spacing_range");
  require(sp_hi * rho < extent, "gen_training_set: spacing_range exceeds the grid extent");

  const auto n_single = static_cast<std::size_t>(std::llround(cfg.single_fraction * static_cast<double>(cfg.count)));
  std::vector<char> is_single(cfg.count, 0);
  std::fill_n(is_single.begin(), n_single, 1);
  Rng shuffle_rng(derive_seed(cfg.seed, ~0ULL));
  std::shuffle(is_single.begin(), is_single.end(), shuffle_rng);

  const auto l_size = static_cast<Eigen::Index>(g.grid_size());
  Dataset out(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    Rng rng(derive_seed(cfg.seed, i));
    CVec label = CVec::Zero(l_size);
    if (is_single[i]) {
      const double s = uniform(rng, g.elevation_min(), g.elevation_max());
      label(static_cast<Eigen::Index>(nearest_grid_index(g, s))) = detail::random_reflectivity(rng, cfg.amplitude);
    } else {
      const double d = uniform(rng, sp_lo, sp_hi) * rho;
      const double s1 = uniform(rng, g.elevation_min(), g.elevation_max() - d);
      const std::size_t i1 = nearest_grid_index(g, s1);
      std::size_t i2 = nearest_grid_index(g, s1 + d);
      if (i2 == i1) i2 = std::min(i1 + 1, g.grid_size() - 1);
      if (i2 == i1) i2 = i1 - 1;
      label(static_cast<Eigen::Index>(i1)) = detail::random_reflectivity(rng, cfg.amplitude);
      label(static_cast<Eigen::Index>(i2)) = detail::random_reflectivity(rng, cfg.amplitude);
    }
    const double snr = cfg.snr_levels[std::uniform_int_distribution<std::size_t>(0, cfg.snr_levels.size() - 1)(rng)];
    if (label.squaredNorm() == 0.0) {
      // Zero amplitude draw: keep the pair consistent with an empty pixel.
      out[i] = {CVec::Zero(a.channels()), label};
      continue;
    }
    out[i] = {simulate_pixel(label, a, snr, rng()), std::move(label)};
  }
  return out;
}

enum class SurfaceTag { roof, wall, ground, free_space };

struct Scatterer {
  std::size_t azimuth_idx = 0;
  std::size_t range_idx = 0;
  double elevation_m = 0.0;
  cplx reflectivity{};
  SurfaceTag surface = SurfaceTag::free_space;
};

struct ScattererSet {
  std::size_t n_azimuth = 0;
  std::size_t n_range = 0;
  std::vector<Scatterer> records;
};

/// Box building on flat ground observed under incidence theta0. The scene
/// origin (zero slant offset, zero elevation) is the building footprint center.
struct BuildingSceneConfig {
  std::size_t n_azimuth = 64;
  std::size_t n_range = 64;
  double azimuth_spacing_m = 1.0;
  double range_spacing_m = 1.0;
  /// Building length (azimuth), depth (ground range) and height.
  std::array<double, 3> box_dims_m{40.0, 20.0, 30.0};
  std::size_t num_targets = 7000;
  /// Mean-amplitude ratio roof : wall : ground.
  std::array<double, 3> rcs_ratio{2.0, 2.0, 1.0};
  double base_amplitude = 1.0;
  std::size_t max_per_cell = 4;
  std::uint64_t seed = 0;
};

namespace detail {

struct ScenePlacement {
  bool inside;
  std::size_t az, rg;
  double elevation;
};

inline ScenePlacement place_point(const ImagingGeometry& g, const BuildingSceneConfig& cfg, double x,
                                  double ground_range, double height) {
  const SlantCoords sc = ground_to_slant(ground_range, height, g.incident_angle_rad);
  const double az_pos = x / cfg.azimuth_spacing_m + 0.5 * static_cast<double>(cfg.n_azimuth);
  const double rg_pos = sc.slant_range_m / cfg.range_spacing_m + 0.5 * static_cast<double>(cfg.n_range);
  if (az_pos < 0.0 || rg_pos < 0.0 || az_pos >= static_cast<double>(cfg.n_azimuth) ||
      rg_pos >= static_cast<double>(cfg.n_range))
    return {false, 0, 0, 0.0};
  if (sc.elevation_m < g.elevation_min() || sc.elevation_m > g.elevation_max()) return {false, 0, 0, 0.0};
  return {true, static_cast<std::size_t>(az_pos), static_cast<std::size_t>(rg_pos), sc.elevation_m};
}

}  // namespace detail

/// Ground-range interval imaged by the range window at height h = 0.
inline std::pair<double, double> scene_ground_extent(const ImagingGeometry& g, const BuildingSceneConfig& cfg) {
  const double half = 0.5 * static_cast<double>(cfg.n_range) * cfg.range_spacing_m;
  const double s = std::sin(g.incident_angle_rad);
  return {-half / s, half / s};
}

/// Scatterers on the roof, the sensor-facing wall and the surrounding ground.
inline ScattererSet gen_building_scene(const ImagingGeometry& g, const BuildingSceneConfig& cfg) {
  g.validate();
  require(cfg.num_targets > 0, "gen_building_scene: number of targets must be > 0");
  for (double r : cfg.rcs_ratio) require(r > 0.0, "gen_building_scene: rcs ratios must be > 0");
  require(cfg.n_azimuth > 0 && cfg.n_range > 0, "gen_building_scene: empty pixel grid");
  require(cfg.max_per_cell >= 1, "gen_building_scene: max_per_cell must be >= 1");
  require(g.incident_angle_rad > 0.0 && g.incident_angle_rad < std::numbers::pi / 2.0,
          "gen_building_scene: incident angle must lie in (0, 90) degrees");
  const auto [length, depth, height] = cfg.box_dims_m;
  require(length > 0.0 && depth > 0.0 && height > 0.0, "gen_building_scene: box dimensions must be > 0");

  const double az_half = 0.5 * static_cast<double>(cfg.n_azimuth) * cfg.azimuth_spacing_m;
  const auto [g_lo, g_hi] = scene_ground_extent(g, cfg);
  require(0.5 * length <= az_half, "gen_building_scene: building longer than the azimuth window");
  for (double gr : {-0.5 * depth, 0.5 * depth})
    for (double h : {0.0, height}) {
      const auto p = detail::place_point(g, cfg, 0.0, gr, h);
      if (!p.inside)
        throw InvalidArgument("gen_building_scene: building box does not fit inside the elevation grid "
                              "extent and range window");
    }

  const double area_roof = length * depth;
  const double area_wall = length * height;
  const double area_ground = 2.0 * az_half * (g_hi - g_lo) - length * depth;
  const double area_total = area_roof + area_wall + area_ground;

  ScattererSet scene{cfg.n_azimuth, cfg.n_range, {}};
  scene.records.reserve(cfg.num_targets);
  std::vector<std::size_t> occupancy(cfg.n_azimuth * cfg.n_range, 0);
  Rng rng(derive_seed(cfg.seed, 0xb01d));
  const std::size_t max_attempts = 1000 * cfg.num_targets;
  std::size_t attempts = 0;
  while (scene.records.size() < cfg.num_targets) {
    if (++attempts > max_attempts)
      throw InvalidArgument("gen_building_scene: cannot place the requested number of targets "
                            "under the per-cell cap");
    const double pick = uniform(rng, 0.0, area_total);
    double x, gr, h;
    SurfaceTag tag;
    if (pick < area_roof) {
      tag = SurfaceTag::roof;
      x = uniform(rng, -0.5 * length, 0.5 * length);
      gr = uniform(rng, -0.5 * depth, 0.5 * depth);
      h = height;
    } else if (pick < area_roof + area_wall) {
      tag = SurfaceTag::wall;
      x = uniform(rng, -0.5 * length, 0.5 * length);
      gr = -0.5 * depth;
      h = uniform(rng, 0.0, height);
    } else {
      tag = SurfaceTag::ground;
      x = uniform(rng, -az_half, az_half);
      gr = uniform(rng, g_lo, g_hi);
      h = 0.0;
      if (std::abs(x) < 0.5 * length && std::abs(gr) < 0.5 * depth) continue;
    }
    const auto p = detail::place_point(g, cfg, x, gr, h);
    const double mean_amp = cfg.base_amplitude * cfg.rcs_ratio[static_cast<std::size_t>(tag)];
    // Rayleigh with the requested mean.
    const double amp = rayleigh(rng, mean_amp / std::sqrt(std::numbers::pi / 2.0));
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    if (!p.inside) continue;
    std::size_t& occ = occupancy[p.az * cfg.n_range + p.rg];
    if (occ >= cfg.max_per_cell) continue;
    ++occ;
    scene.records.push_back({p.az, p.rg, p.elevation, std::polar(amp, phase), tag});
  }
  return scene;
}

/// Clean (noise-free) stack from a scatterer set using off-grid steering vectors.
inline MeasurementStack clean_stack(const ScattererSet& scene, const ImagingGeometry& g) {
  MeasurementStack stack(scene.n_azimuth, scene.n_range, g.channels(), g.hash());
  for (const auto& s : scene.records) {
    auto px = stack.pixel(s.azimuth_idx, s.range_idx);
    px += s.reflectivity * steering_vector(g, s.elevation_m);
  }
  return stack;
}

/// Scene stack with noise at a scene-level SNR: the noise variance is the mean
/// per-channel signal power over occupied pixels divided by 10^(snr/10).
inline MeasurementStack simulate_stack(const ScattererSet& scene, const ImagingGeometry& g, SnrDb snr_db,
                                       std::uint64_t seed) {
  MeasurementStack stack = clean_stack(scene, g);
  if (!snr_db) return stack;
  double power = 0.0;
  std::size_t occupied = 0;
  for (std::size_t p = 0; p < stack.pixels(); ++p) {
    const double e = stack.pixel(p).squaredNorm();
    if (e > 0.0) {
      power += e / static_cast<double>(stack.depth);
      ++occupied;
    }
  }
  if (occupied == 0) throw InvalidArgument("simulate_stack: SNR is undefined for an empty scene");
  const double variance = power / static_cast<double>(occupied) / std::pow(10.0, *snr_db / 10.0);
  for (std::size_t p = 0; p < stack.pixels(); ++p) {
    Rng rng(derive_seed(seed, p));
    CVec y = stack.pixel(p);
    add_noise(y, variance, rng);
    stack.pixel(p) = y;
  }
  return stack;
}

/// On-grid reference profile cube: each scatterer snapped to its nearest node.
inline ComplexCube reference_cube(const ScattererSet& scene, const ImagingGeometry& g) {
  ComplexCube cube(scene.n_azimuth, scene.n_range, g.grid_size(), g.hash());
  for (const auto& s : scene.records)
    cube.pixel(s.azimuth_idx, s.range_idx)(static_cast<Eigen::Index>(nearest_grid_index(g, s.elevation_m))) +=
        s.reflectivity;
  return cube;
}

}  // namespace tomosar
