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
#include <map>
#include <numbers>
#include <vector>

#include "tomosar/cube.hpp"
#include "tomosar/errors.hpp"
#include "tomosar/geometry.hpp"

namespace tomosar {

/// ||g_hat - g_ref||^2 / ||g_ref||^2
inline double nmse(const CVec& gamma_hat, const CVec& gamma_ref) {
  require(gamma_hat.size() == gamma_ref.size(), "nmse: length mismatch");
  const double ref = gamma_ref.squaredNorm();
  if (ref == 0.0) throw InvalidArgument("nmse: reference profile is zero");
  return (gamma_hat - gamma_ref).squaredNorm() / ref;
}

inline constexpr double kPsnrCapDb = 300.0;

/// Copy of `v` scaled to unit peak magnitude (zero grids stay zero).
inline VoxelGrid peak_normalized(const VoxelGrid& v) {
  VoxelGrid out = v;
  double peak = 0.0;
  for (double x : v.values) peak = std::max(peak, std::abs(x));
  if (peak > 0.0)
    for (double& x : out.values) x /= peak;
  return out;
}

/// PSNR of peak-normalized grids, capped at 300 dB.
inline double psnr(const VoxelGrid& x_hat, const VoxelGrid& x_ref) {
  if (!x_hat.same_shape(x_ref)) throw InvalidArgument("psnr: shape mismatch");
  require(x_ref.size() > 0, "psnr: empty grid");
  const VoxelGrid a = peak_normalized(x_hat);
  const VoxelGrid b = peak_normalized(x_ref);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(b.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, -10.0 * std::log10(mse));
}

/// Global-statistics SSIM, clamped to [0, 1].
inline double ssim(const VoxelGrid& x_hat, const VoxelGrid& x_ref, double k1 = 0.01, double k2 = 0.03,
                   double dynamic_range = 1.0) {
  if (!x_hat.same_shape(x_ref)) throw InvalidArgument("ssim: shape mismatch");
  require(x_ref.size() > 0, "ssim: empty grid");
  const auto n = static_cast<double>(x_ref.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x_ref.size(); ++i) {
    mx += x_hat.values[i];
    my += x_ref.values[i];
  }
  mx /= n;
  my /= n;
  double vx = 0.0, vy = 0.0, cxy = 0.0;
  for (std::size_t i = 0; i < x_ref.size(); ++i) {
    const double dx = x_hat.values[i] - mx;
    const double dy = x_ref.values[i] - my;
    vx += dx * dx;
    vy += dy * dy;
    cxy += dx * dy;
  }
  vx /= n;
  vy /= n;
  cxy /= n;
  const double c1 = (k1 * dynamic_range) * (k1 * dynamic_range);
  const double c2 = (k2 * dynamic_range) * (k2 * dynamic_range);
  const double v = ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  return std::clamp(v, 0.0, 1.0);
}

/// Joint grey-level / neighborhood-mean entropy of a voxel grid.
///
/// Magnitudes are peak-normalized and quantized to 0..255; the neighborhood
/// value of a voxel is the rounded mean grey level over the in-bounds part
/// of its 3x3x3 neighborhood (center included).
inline double entropy3d(const VoxelGrid& v) {
  require(v.size() > 0, "entropy3d: empty grid");
  double peak = 0.0;
  for (double x : v.values) peak = std::max(peak, std::abs(x));
  std::vector<int> grey(v.size(), 0);
  if (peak > 0.0)
    for (std::size_t i = 0; i < v.size(); ++i)
      grey[i] = static_cast<int>(std::lround(255.0 * std::abs(v.values[i]) / peak));

  const auto na = static_cast<long>(v.n_azimuth), nr = static_cast<long>(v.n_range),
             nz = static_cast<long>(v.n_elevation);
  auto idx = [&](long a, long r, long z) { return static_cast<std::size_t>((a * nr + r) * nz + z); };
  std::vector<std::uint64_t> hist(256 * 256, 0);
  for (long a = 0; a < na; ++a)
    for (long r = 0; r < nr; ++r)
      for (long z = 0; z < nz; ++z) {
        long sum = 0, count = 0;
        for (long da = -1; da <= 1; ++da)
          for (long dr = -1; dr <= 1; ++dr)
            for (long dz = -1; dz <= 1; ++dz) {
              const long aa = a + da, rr = r + dr, zz = z + dz;
              if (aa < 0 || rr < 0 || zz < 0 || aa >= na || rr >= nr || zz >= nz) continue;
              sum += grey[idx(aa, rr, zz)];
              ++count;
            }
        const auto j = static_cast<int>(std::lround(static_cast<double>(sum) / static_cast<double>(count)));
        ++hist[static_cast<std::size_t>(grey[idx(a, r, z)] * 256 + j)];
      }
  const auto total = static_cast<double>(v.size());
  double h = 0.0;
  for (std::uint64_t f : hist) {
    if (f == 0) continue;
    const double p = static_cast<double>(f) / total;
    h -= p * std::log(p);
  }
  return h;
}

struct CrlbResult {
  double sigma_s;
  double c0;
  double sigma_d;
};

/// Interference factor c0 for two scatterers at normalized distance alpha.
inline double crlb_interference_factor(double alpha, double delta_phi, std::size_t n) {
  const double num = 40.0 / (alpha * alpha) * (1.0 - alpha / 3.0);
  const double b = 3.0 - 2.0 * alpha;
  const double den =
      9.0 - 6.0 * b * std::cos(2.0 * delta_phi - 2.0 * std::numbers::pi * alpha / static_cast<double>(n)) + b * b;
  return std::sqrt(std::max(num / den, 1.0));
}

/// How sigma_b, the spread of the elevation aperture, is obtained.
enum class ApertureSpread {
  /// rho_s / sqrt(12), the uniform-array shortcut.
  rayleigh_over_sqrt12,
  /// Population standard deviation of the configured baselines.
  baseline_std,
};

inline double aperture_spread(const ImagingGeometry& g, ApertureSpread rule) {
  if (rule == ApertureSpread::rayleigh_over_sqrt12) return rayleigh_resolution(g) / std::sqrt(12.0);
  const auto& b = g.baselines_m;
  double mean = 0.0;
  for (double v : b) mean += v;
  mean /= static_cast<double>(b.size());
  double var = 0.0;
  for (double v : b) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(b.size()));
}

/// Elevation CRLB of two closely spaced scatterers: sigma_d = c0 * sigma_s,
/// with sigma_s = lambda*R0 / (4*pi*sqrt(2*N*SNR)*sigma_b).
inline CrlbResult crlb_sigma(const ImagingGeometry& g, double snr_linear, double alpha, double delta_phi,
                             std::size_t n, ApertureSpread rule = ApertureSpread::rayleigh_over_sqrt12) {
  require(snr_linear > 0.0, "crlb_sigma: snr must be > 0");
  require(alpha > 0.0, "crlb_sigma: alpha must be > 0");
  require(n >= 2, "crlb_sigma: N must be >= 2");
  const double sigma_b = aperture_spread(g, rule);
  const double sigma_s = g.wavelength_m * g.range_m /
                         (4.0 * std::numbers::pi * std::sqrt(2.0 * static_cast<double>(n) * snr_linear) * sigma_b);
  const double c0 = crlb_interference_factor(alpha, delta_phi, n);
  return {sigma_s, c0, c0 * sigma_s};
}

struct Peak {
  std::size_t index = 0;
  double elevation_m = 0.0;
  double magnitude = 0.0;
  cplx value{};
};

struct PeakConfig {
  std::size_t max_peaks = 4;
  double floor_fraction = 0.1;
  /// 3-point parabolic sub-grid refinement of |gamma|.
  bool refine = true;
};

/// Local maxima of |gamma| above floor_fraction * max|gamma|, strongest first.
inline std::vector<Peak> extract_peaks(const CVec& gamma, const std::vector<double>& grid, const PeakConfig& cfg = {}) {
  require(cfg.floor_fraction > 0.0 && cfg.floor_fraction < 1.0, "extract_peaks: floor_fraction must lie in (0, 1)");
  require(static_cast<std::size_t>(gamma.size()) == grid.size(), "extract_peaks: grid length mismatch");
  std::vector<Peak> peaks;
  const Eigen::Index n = gamma.size();
  if (n == 0) return peaks;
  const Eigen::VectorXd mag = gamma.cwiseAbs();
  const double top = mag.maxCoeff();
  if (top <= 0.0) return peaks;
  const double floor = cfg.floor_fraction * top;
  const double step = n > 1 ? (grid.back() - grid.front()) / static_cast<double>(n - 1) : 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = mag(i);
    if (m < floor || m <= 0.0) continue;
    const double left = i > 0 ? mag(i - 1) : 0.0;
    const double right = i + 1 < n ? mag(i + 1) : 0.0;
    if (!(m >= left && m > right)) continue;
    Peak p{static_cast<std::size_t>(i), grid[static_cast<std::size_t>(i)], m, gamma(i)};
    if (cfg.refine && i > 0 && i + 1 < n) {
      const double curv = left - 2.0 * m + right;
      if (curv < 0.0) p.elevation_m += std::clamp(0.5 * (left - right) / curv, -0.5, 0.5) * step;
    }
    peaks.push_back(p);
  }
  std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.magnitude > b.magnitude; });
  if (peaks.size() > cfg.max_peaks) peaks.resize(cfg.max_peaks);
  return peaks;
}

}  // namespace tomosar
