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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tomosar/alista_weights.hpp"
#include "tomosar/cube.hpp"
#include "tomosar/io.hpp"
#include "tomosar/metrics.hpp"
#include "tomosar/network.hpp"
#include "tomosar/parallel.hpp"
#include "tomosar/simulate.hpp"
#include "tomosar/solver_handle.hpp"

namespace tomosar {

struct ReconstructionResult {
  ComplexCube profiles;
  /// Final-layer thresholds, pixel-major with grid depth; empty unless captured.
  std::vector<double> final_theta;
  std::vector<std::size_t> failed_pixels;
  std::vector<std::string> failure_messages;
  double wall_time_s = 0.0;
  /// Sum of per-pixel solve times.
  double pixel_time_s = 0.0;

  bool has_thresholds() const { return !final_theta.empty(); }
};

namespace detail {

template <typename PixelFn>
ReconstructionResult reconstruct_pixels(const MeasurementStack& stack, std::size_t grid_size, bool with_theta,
                                        std::size_t workers, PixelFn&& solve_pixel) {
  ReconstructionResult res;
  res.profiles = ComplexCube(stack.n_azimuth, stack.n_range, grid_size, stack.geometry_hash);
  if (with_theta) res.final_theta.assign(stack.pixels() * grid_size, 0.0);
  std::vector<double> times(stack.pixels(), 0.0);
  std::vector<std::string> errors(stack.pixels());
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(stack.pixels(), workers, [&](std::size_t p) {
    const auto start = std::chrono::steady_clock::now();
    try {
      const CVec y = stack.pixel(p);
      double* theta = with_theta ? res.final_theta.data() + p * grid_size : nullptr;
      res.profiles.pixel(p) = solve_pixel(y, theta);
    } catch (const std::exception& ex) {
      res.profiles.pixel(p).setZero();
      if (with_theta) std::fill_n(res.final_theta.begin() + static_cast<long>(p * grid_size), grid_size, 0.0);
      errors[p] = ex.what();
      if (errors[p].empty()) errors[p] = "unknown failure";
    }
    times[p] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });
  res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (std::size_t p = 0; p < stack.pixels(); ++p) {
    res.pixel_time_s += times[p];
    if (!errors[p].empty()) {
      res.failed_pixels.push_back(p);
      res.failure_messages.push_back(std::move(errors[p]));
    }
  }
  return res;
}

}  // namespace detail

/// Applies the solver to every range-azimuth pixel. Failing pixels are zeroed
/// and listed in the result.
inline ReconstructionResult reconstruct_stack(const MeasurementStack& stack, const Solver& solver,
                                              std::size_t grid_size, std::size_t workers = 1) {
  require(solver.geometry_hash == stack.geometry_hash, "reconstruct_stack: solver and stack geometries differ");
  return detail::reconstruct_pixels(stack, grid_size, false, workers,
                                    [&](const CVec& y, double*) { return solver(y); });
}

/// Network reconstruction that also records the final-layer thresholds.
inline ReconstructionResult reconstruct_stack_traced(const MeasurementStack& stack, const SteeringMatrix& a,
                                                     const AlistaWeights& weights, const NetworkParams& params,
                                                     std::size_t workers = 1) {
  require(a.geometry_hash == stack.geometry_hash, "reconstruct_stack: steering matrix and stack geometries differ");
  require(static_cast<Eigen::Index>(stack.depth) == a.channels(), "reconstruct_stack: channel count mismatch");
  const auto l = static_cast<std::size_t>(a.grid_size());
  return detail::reconstruct_pixels(stack, l, true, workers, [&](const CVec& y, double* theta) {
    ForwardResult f = forward(y, a, weights, params, true);
    const Vec& t = f.trace->layers.back().theta;
    std::copy(t.data(), t.data() + t.size(), theta);
    return f.gamma;
  });
}

/// Pixel pitch of the stack in azimuth and slant range.
struct PixelLayout {
  double azimuth_spacing_m = 1.0;
  double range_spacing_m = 1.0;
};

inline PixelLayout layout_of(const BuildingSceneConfig& cfg) { return {cfg.azimuth_spacing_m, cfg.range_spacing_m}; }

/// Point in azimuth (x), ground range (y) and height (z).
struct CloudPoint {
  float x = 0.0f, y = 0.0f, z = 0.0f;
  float intensity = 0.0f;
  std::uint32_t azimuth_idx = 0;
  std::uint32_t range_idx = 0;
};

using PointCloud = std::vector<CloudPoint>;

enum class IntensityScale { linear, db };

struct ExtractionConfig {
  PeakConfig peaks;
  IntensityScale intensity = IntensityScale::linear;
};

/// Pixel centers follow the scene convention: the stack is centered on the
/// origin in azimuth and slant range.
inline PointCloud extract_pointcloud(const ComplexCube& cube, const ImagingGeometry& g, const PixelLayout& layout,
                                     const ExtractionConfig& cfg = {}) {
  require(cube.depth == g.grid_size(), "export_pointcloud: cube depth does not match the elevation grid");
  require(cube.geometry_hash == 0 || cube.geometry_hash == g.hash(), "export_pointcloud: cube geometry mismatch");
  PointCloud cloud;
  for (std::size_t az = 0; az < cube.n_azimuth; ++az)
    for (std::size_t rg = 0; rg < cube.n_range; ++rg) {
      const CVec gamma = cube.pixel(az, rg);
      const auto peaks = extract_peaks(gamma, g.elevation_grid_m, cfg.peaks);
      const double x = (static_cast<double>(az) + 0.5 - 0.5 * static_cast<double>(cube.n_azimuth)) *
                       layout.azimuth_spacing_m;
      const double r =
          (static_cast<double>(rg) + 0.5 - 0.5 * static_cast<double>(cube.n_range)) * layout.range_spacing_m;
      for (const auto& p : peaks) {
        const GroundCoords gc = slant_to_ground(r, p.elevation_m, g.incident_angle_rad);
        const double inten = cfg.intensity == IntensityScale::db ? 20.0 * std::log10(p.magnitude) : p.magnitude;
        cloud.push_back({static_cast<float>(x), static_cast<float>(gc.ground_range_m), static_cast<float>(gc.height_m),
                         static_cast<float>(inten), static_cast<std::uint32_t>(az), static_cast<std::uint32_t>(rg)});
      }
    }
  return cloud;
}

/// Binary little-endian PLY with float x, y, z, intensity per vertex.
inline void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  io::write_atomically(path, [&](std::ostream& out) {
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size()
        << "\nproperty float x\nproperty float y\nproperty float z\nproperty float intensity\nend_header\n";
    for (const auto& p : cloud) {
      const float v[4] = {p.x, p.y, p.z, p.intensity};
      out.write(reinterpret_cast<const char*>(v), sizeof(v));
    }
  });
}

/// Reads files produced by write_ply; pixel indices are not stored and come back as 0.
inline PointCloud read_ply(const std::filesystem::path& path) {
  auto in = io::open_in(path);
  std::string line;
  std::size_t count = 0;
  std::vector<std::string> props;
  bool binary_le = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (key == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex") throw IoError("ply: unsupported element '" + name + "'");
    } else if (key == "property") {
      std::string type, name;
      ls >> type >> name;
      if (type != "float") throw IoError("ply: unsupported property type '" + type + "'");
      props.push_back(name);
    }
  }
  if (!in) throw IoError("ply: missing end_header in " + path.string());
  if (!binary_le) throw IoError("ply: only binary_little_endian files are supported");
  if (props != std::vector<std::string>{"x", "y", "z", "intensity"})
    throw IoError("ply: expected properties x y z intensity");
  PointCloud cloud(count);
  for (auto& p : cloud) {
    float v[4];
    io::detail::get_bytes(in, v, sizeof(v), "ply " + path.string());
    p.x = v[0];
    p.y = v[1];
    p.z = v[2];
    p.intensity = v[3];
  }
  return cloud;
}

/// CSV with header x,y,z,intensity,azimuth_idx,range_idx.
inline void write_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
  io::write_atomically(
      path,
      [&](std::ostream& out) {
        out << "x,y,z,intensity,azimuth_idx,range_idx\n" << std::setprecision(9);
        for (const auto& p : cloud)
          out << p.x << ',' << p.y << ',' << p.z << ',' << p.intensity << ',' << p.azimuth_idx << ',' << p.range_idx
              << '\n';
      },
      false);
}

inline PointCloud export_pointcloud(const ComplexCube& cube, const ImagingGeometry& g, const PixelLayout& layout,
                                    const ExtractionConfig& cfg, const std::filesystem::path& path) {
  PointCloud cloud = extract_pointcloud(cube, g, layout, cfg);
  const std::string ext = path.extension().string();
  if (ext == ".ply")
    write_ply(path, cloud);
  else if (ext == ".xyz" || ext == ".csv")
    write_xyz(path, cloud);
  else
    throw InvalidArgument("export_pointcloud: unknown format '" + ext + "' (use .ply, .xyz or .csv)");
  return cloud;
}

enum class ThresholdReduction { at_peak, min_over_elevation };

inline ThresholdReduction threshold_reduction_from_string(const std::string& s) {
  if (s == "at_peak") return ThresholdReduction::at_peak;
  if (s == "min_over_elevation") return ThresholdReduction::min_over_elevation;
  throw InvalidArgument("unknown threshold reduction '" + s + "'");
}

struct ThresholdMap {
  std::size_t n_azimuth = 0;
  std::size_t n_range = 0;
  std::vector<double> summary;
  std::vector<std::uint8_t> labels;
  /// Summary values separating class 0 from 1 and class 1 from 2.
  double lower_boundary = 0.0;
  double upper_boundary = 0.0;
};

/// Linear-interpolated empirical quantile of sorted values.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  require(!sorted.empty(), "quantile: empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Three classes from quantiles of a per-pixel summary; values on a boundary
/// go to the lower class.
inline ThresholdMap classify_summary(std::size_t n_azimuth, std::size_t n_range, std::vector<double> summary,
                                     double q_low = 1.0 / 3.0, double q_high = 2.0 / 3.0) {
  require(summary.size() == n_azimuth * n_range && !summary.empty(), "threshold map: summary size mismatch");
  require(0.0 <= q_low && q_low <= q_high && q_high <= 1.0, "threshold map: quantiles must satisfy 0 <= q1 <= q2 <= 1");
  ThresholdMap map{n_azimuth, n_range, std::move(summary), {}, 0.0, 0.0};
  std::vector<double> sorted = map.summary;
  std::sort(sorted.begin(), sorted.end());
  map.lower_boundary = quantile_sorted(sorted, q_low);
  map.upper_boundary = quantile_sorted(sorted, q_high);
  map.labels.resize(map.summary.size());
  for (std::size_t i = 0; i < map.summary.size(); ++i) {
    const double v = map.summary[i];
    map.labels[i] = v <= map.lower_boundary ? 0 : (v <= map.upper_boundary ? 1 : 2);
  }
  return map;
}

/// Per-pixel summary of the final-layer thresholds. at_peak reads theta at the
/// strongest extracted peak and falls back to the minimum for empty pixels.
inline ThresholdMap threshold_map(const ReconstructionResult& rec, const ImagingGeometry& g,
                                  ThresholdReduction reduction = ThresholdReduction::at_peak,
                                  double q_low = 1.0 / 3.0, double q_high = 2.0 / 3.0, const PeakConfig& peaks = {}) {
  if (!rec.has_thresholds())
    throw InvalidArgument("threshold map: no final-layer thresholds; reconstruct with the network and capture_trace enabled");
  const ComplexCube& cube = rec.profiles;
  const std::size_t l = cube.depth;
  std::vector<double> summary(cube.pixels());
  for (std::size_t p = 0; p < cube.pixels(); ++p) {
    const double* theta = rec.final_theta.data() + p * l;
    double v = *std::min_element(theta, theta + l);
    if (reduction == ThresholdReduction::at_peak) {
      const auto pk = extract_peaks(cube.pixel(p), g.elevation_grid_m, peaks);
      if (!pk.empty()) v = theta[pk.front().index];
    }
    summary[p] = v;
  }
  return classify_summary(cube.n_azimuth, cube.n_range, std::move(summary), q_low, q_high);
}

/// Writes `<stem>.pgm` (azimuth rows, range columns, grey 0/127/254 per class)
/// and `<stem>_classes.csv` with the class boundaries.
inline void write_threshold_map(const std::filesystem::path& stem, const ThresholdMap& map) {
  std::filesystem::path pgm = stem;
  pgm += ".pgm";
  std::filesystem::path csv = stem;
  csv += "_classes.csv";
  io::write_atomically(pgm, [&](std::ostream& out) {
    out << "P5\n" << map.n_range << ' ' << map.n_azimuth << "\n255\n";
    for (std::uint8_t c : map.labels) out.put(static_cast<char>(c * 127));
  });
  std::size_t counts[3] = {0, 0, 0};
  for (std::uint8_t c : map.labels) ++counts[c];
  io::write_atomically(
      csv,
      [&](std::ostream& out) {
        out << "class,lower,upper,pixels\n" << std::setprecision(12);
        out << "0,-inf," << map.lower_boundary << ',' << counts[0] << '\n';
        out << "1," << map.lower_boundary << ',' << map.upper_boundary << ',' << counts[1] << '\n';
        out << "2," << map.upper_boundary << ",inf," << counts[2] << '\n';
      },
      false);
}

/// Share of |gamma|^2 within `halfwidth` cells of the extracted peaks.
inline double focus_ratio(const CVec& gamma, const std::vector<double>& grid, const PeakConfig& peaks = {},
                          std::size_t halfwidth = 1) {
  const double total = gamma.squaredNorm();
  if (!(total > 0.0)) return 0.0;
  std::vector<char> used(static_cast<std::size_t>(gamma.size()), 0);
  double e = 0.0;
  for (const auto& p : extract_peaks(gamma, grid, peaks)) {
    const std::size_t lo = p.index >= halfwidth ? p.index - halfwidth : 0;
    const std::size_t hi = std::min(p.index + halfwidth, used.size() - 1);
    for (std::size_t i = lo; i <= hi; ++i)
      if (!used[i]) {
        used[i] = 1;
        e += std::norm(gamma(static_cast<Eigen::Index>(i)));
      }
  }
  return e / total;
}

struct BaselineLabelConfig {
  double focus_threshold = 0.7;
  PeakConfig peaks;
  std::size_t lobe_halfwidth = 1;
};

/// Runs the baseline on the masked pixels and keeps well-focused
/// reconstructions as (y, gamma_baseline) training pairs in pixel order.
inline Dataset labels_from_baseline(const MeasurementStack& stack, const Solver& baseline, const ImagingGeometry& g,
                                    const std::vector<bool>& mask, const BaselineLabelConfig& cfg = {},
                                    std::size_t workers = 1) {
  require(mask.size() == stack.pixels(), "labels_from_baseline: mask size does not match the stack");
  require(cfg.focus_threshold >= 0.0 && cfg.focus_threshold <= 1.0,
          "labels_from_baseline: focus threshold must lie in [0, 1]");
  require(baseline.geometry_hash == stack.geometry_hash, "labels_from_baseline: baseline geometry mismatch");
  std::vector<std::size_t> selected;
  for (std::size_t p = 0; p < mask.size(); ++p)
    if (mask[p]) selected.push_back(p);
  require(!selected.empty(), "labels_from_baseline: mask selects no pixel");
  std::vector<CVec> gammas(selected.size());
  std::vector<double> ratios(selected.size(), 0.0);
  parallel_for(selected.size(), workers, [&](std::size_t i) {
    const CVec y = stack.pixel(selected[i]);
    if (y.squaredNorm() == 0.0) return;
    gammas[i] = baseline(y);
    ratios[i] = focus_ratio(gammas[i], g.elevation_grid_m, cfg.peaks, cfg.lobe_halfwidth);
  });
  Dataset out;
  double best = 0.0;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    best = std::max(best, ratios[i]);
    if (gammas[i].size() > 0 && ratios[i] >= cfg.focus_threshold && ratios[i] > 0.0)
      out.push_back({CVec(stack.pixel(selected[i])), gammas[i]});
  }
  if (out.empty()) {
    std::ostringstream msg;
    msg << "labels_from_baseline: no pixel passed the focus filter (threshold " << cfg.focus_threshold << ", "
        << selected.size() << " pixels tried, best ratio " << best << ")";
    throw InvalidArgument(msg.str());
  }
  return out;
}

}  // namespace tomosar
