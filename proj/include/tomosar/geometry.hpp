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

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "tomosar/errors.hpp"

namespace tomosar {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// Complex elevation profile sampled on the elevation grid (length L).
using ReflectivityProfile = CVec;
/// Complex N-channel measurement of one range-azimuth pixel.
using PixelMeasurement = CVec;

inline constexpr double kSpeedOfLight = 299792458.0;

/// Acquisition geometry of a single-pass array (or repeat-pass stack).
///
/// Baselines are perpendicular baselines b_n in meters; the elevation grid
/// holds the L sample positions s_l in meters, strictly increasing with
/// uniform spacing.
struct ImagingGeometry {
  double wavelength_m = 0.0;
  double range_m = 0.0;
  std::vector<double> baselines_m;
  std::vector<double> elevation_grid_m;
  double incident_angle_rad = 0.0;

  std::size_t channels() const { return baselines_m.size(); }
  std::size_t grid_size() const { return elevation_grid_m.size(); }
  double grid_spacing() const {
    return (elevation_grid_m.back() - elevation_grid_m.front()) /
           static_cast<double>(elevation_grid_m.size() - 1);
  }
  double elevation_min() const { return elevation_grid_m.front(); }
  double elevation_max() const { return elevation_grid_m.back(); }

  /// Throws InvalidArgument when any invariant is violated.
  void validate() const {
    require(std::isfinite(wavelength_m) && wavelength_m > 0.0, "geometry: wavelength_m must be > 0");
    require(std::isfinite(range_m) && range_m > 0.0, "geometry: range_m must be > 0");
    require(baselines_m.size() >= 2, "geometry: need at least 2 baselines");
    require(elevation_grid_m.size() >= 2, "geometry: need at least 2 elevation grid nodes");
    for (double b : baselines_m) require(std::isfinite(b), "geometry: non-finite baseline");
    for (std::size_t i = 0; i < baselines_m.size(); ++i)
      for (std::size_t j = i + 1; j < baselines_m.size(); ++j)
        require(baselines_m[i] != baselines_m[j], "geometry: baselines must be pairwise distinct");
    const double step = grid_spacing();
    require(std::isfinite(step) && step > 0.0, "geometry: elevation grid must be strictly increasing");
    for (std::size_t l = 1; l < elevation_grid_m.size(); ++l) {
      const double d = elevation_grid_m[l] - elevation_grid_m[l - 1];
      require(d > 0.0, "geometry: elevation grid must be strictly increasing");
      require(std::abs(d - step) <= 1e-9 * std::abs(step),
              "geometry: elevation grid must be uniformly spaced");
    }
  }

  /// Stable 64-bit identity of everything the steering matrix depends on.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](double v) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffU;
        h *= 1099511628211ULL;
      }
    };
    mix(wavelength_m);
    mix(range_m);
    mix(static_cast<double>(baselines_m.size()));
    for (double b : baselines_m) mix(b);
    mix(static_cast<double>(elevation_grid_m.size()));
    for (double s : elevation_grid_m) mix(s);
    return h;
  }
};

/// Baselines b_n = (n-1) * spacing, first channel is the phase reference.
inline std::vector<double> uniform_baselines(std::size_t count, double spacing_m) {
  std::vector<double> b(count);
  for (std::size_t n = 0; n < count; ++n) b[n] = static_cast<double>(n) * spacing_m;
  return b;
}

/// Uniform grid of `count` nodes from `lo` (inclusive) in steps of `step`.
inline std::vector<double> uniform_grid(double lo, double step, std::size_t count) {
  std::vector<double> s(count);
  for (std::size_t l = 0; l < count; ++l) s[l] = lo + static_cast<double>(l) * step;
  return s;
}

/// Elevation extent over which a uniform array is unambiguous: lambda*r0/(2*dd).
inline double ambiguity_height(double wavelength_m, double range_m, double spacing_m) {
  return wavelength_m * range_m / (2.0 * spacing_m);
}

/// Geometry for a uniform linear array. The default grid covers exactly one
/// ambiguity period, half-open and centered on zero: s_l = -H/2 + l*H/L.
/// On that grid the rows of the steering matrix are mutually orthogonal.
inline ImagingGeometry make_ula_geometry(double wavelength_m, double range_m, double spacing_m,
                                         std::size_t channels, std::size_t grid_size,
                                         double incident_angle_rad = 0.0) {
  ImagingGeometry g;
  g.wavelength_m = wavelength_m;
  g.range_m = range_m;
  g.baselines_m = uniform_baselines(channels, spacing_m);
  g.incident_angle_rad = incident_angle_rad;
  require(grid_size >= 2, "geometry: need at least 2 elevation grid nodes");
  const double h = ambiguity_height(wavelength_m, range_m, spacing_m);
  const double step = h / static_cast<double>(grid_size);
  g.elevation_grid_m = uniform_grid(-0.5 * h, step, grid_size);
  g.validate();
  return g;
}

/// Scatterer-simulation geometry: 14.25 GHz (0.021 m), 0.084 m spacing, 8 channels, 400 m, 45 deg.
inline ImagingGeometry scatterer_sim_geometry(std::size_t grid_size = 128) {
  return make_ula_geometry(0.021, 400.0, 0.084, 8, grid_size, std::numbers::pi / 4.0);
}

/// Building-simulation geometry: as above with 1200 m range and 30 deg incidence.
inline ImagingGeometry building_sim_geometry(std::size_t grid_size = 128) {
  return make_ula_geometry(0.021, 1200.0, 0.084, 8, grid_size, std::numbers::pi / 6.0);
}

/// N x L mapping matrix tied to the geometry that produced it.
struct SteeringMatrix {
  CMat entries;
  std::uint64_t geometry_hash = 0;

  Eigen::Index channels() const { return entries.rows(); }
  Eigen::Index grid_size() const { return entries.cols(); }
};

/// Phase of the steering entry for baseline b and elevation s.
inline double steering_phase(const ImagingGeometry& g, double baseline_m, double elevation_m) {
  return 4.0 * std::numbers::pi * baseline_m * elevation_m / (g.wavelength_m * g.range_m);
}

/// Steering vector a(s) for an arbitrary (possibly off-grid) elevation.
inline CVec steering_vector(const ImagingGeometry& g, double elevation_m) {
  CVec a(static_cast<Eigen::Index>(g.channels()));
  for (std::size_t n = 0; n < g.channels(); ++n)
    a(static_cast<Eigen::Index>(n)) = std::polar(1.0, steering_phase(g, g.baselines_m[n], elevation_m));
  return a;
}

inline SteeringMatrix build_steering(const ImagingGeometry& g) {
  g.validate();
  const auto n_ch = static_cast<Eigen::Index>(g.channels());
  const auto n_grid = static_cast<Eigen::Index>(g.grid_size());
  SteeringMatrix a{CMat(n_ch, n_grid), g.hash()};
  for (Eigen::Index l = 0; l < n_grid; ++l)
    for (Eigen::Index n = 0; n < n_ch; ++n)
      a.entries(n, l) = std::polar(
          1.0, steering_phase(g, g.baselines_m[static_cast<std::size_t>(n)],
                              g.elevation_grid_m[static_cast<std::size_t>(l)]));
  return a;
}

/// Constant baseline spacing, or 0 when the baselines are not a uniform linear array.
inline double uniform_spacing(const ImagingGeometry& g) {
  std::vector<double> b = g.baselines_m;
  std::sort(b.begin(), b.end());
  const double step = (b.back() - b.front()) / static_cast<double>(b.size() - 1);
  for (std::size_t i = 1; i < b.size(); ++i)
    if (std::abs((b[i] - b[i - 1]) - step) > 1e-9 * std::abs(step)) return 0.0;
  return step;
}

/// Rayleigh elevation resolution lambda*r0/(2*N*dd) of a uniform linear array.
inline double rayleigh_resolution(const ImagingGeometry& g) {
  g.validate();
  const double dd = uniform_spacing(g);
  if (dd <= 0.0)
    throw InvalidArgument("rayleigh_resolution: baselines are not a uniform linear array; "
                          "supply the resolution explicitly");
  return g.wavelength_m * g.range_m / (2.0 * static_cast<double>(g.channels()) * dd);
}

/// Index of the grid node nearest to `elevation_m` (clamped to the grid).
inline std::size_t nearest_grid_index(const ImagingGeometry& g, double elevation_m) {
  const double pos = (elevation_m - g.elevation_min()) / g.grid_spacing();
  const double r = std::round(pos);
  if (r <= 0.0) return 0;
  const auto last = static_cast<double>(g.grid_size() - 1);
  return static_cast<std::size_t>(std::min(r, last));
}

/// Slant-range / elevation offsets to ground-range / height under a flat-earth
/// model with incidence angle theta0 (LOS direction (sin, -cos), elevation
/// direction (cos, sin) in the ground-range/height plane).
struct GroundCoords {
  double ground_range_m;
  double height_m;
};
struct SlantCoords {
  double slant_range_m;
  double elevation_m;
};

inline GroundCoords slant_to_ground(double slant_range_m, double elevation_m, double theta0) {
  const double c = std::cos(theta0), s = std::sin(theta0);
  return {slant_range_m * s + elevation_m * c, -slant_range_m * c + elevation_m * s};
}

inline SlantCoords ground_to_slant(double ground_range_m, double height_m, double theta0) {
  const double c = std::cos(theta0), s = std::sin(theta0);
  return {ground_range_m * s - height_m * c, ground_range_m * c + height_m * s};
}

}  // namespace tomosar
