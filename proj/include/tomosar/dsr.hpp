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
#include <cmath>
#include <iomanip>
#include <numbers>
#include <string>
#include <vector>

#include "tomosar/io.hpp"
#include "tomosar/metrics.hpp"
#include "tomosar/parallel.hpp"
#include "tomosar/random.hpp"
#include "tomosar/simulate.hpp"
#include "tomosar/solver_handle.hpp"

namespace tomosar {

/// Double-scatterer detection experiment. alpha is the spacing in Rayleigh
/// resolutions and amp_ratio the amplitude of the first scatterer over the second.
struct DsrConfig {
  double snr_db = 10.0;
  double alpha = 0.6;
  double amp_ratio = 1.0;
  double phase_diff_rad = 0.0;
  int trials = 1000;
  double crlb_multiplier = 3.0;
  std::string solver;
  std::uint64_t seed = 0;
  PeakConfig peaks{2, 0.1, true};
  ApertureSpread aperture = ApertureSpread::rayleigh_over_sqrt12;

  void validate() const {
    require(trials >= 1, "dsr: trials must be >= 1");
    require(alpha > 0.0, "dsr: alpha must be > 0");
    require(amp_ratio > 0.0, "dsr: amp_ratio must be > 0");
    require(crlb_multiplier > 0.0, "dsr: crlb_multiplier must be > 0");
    require(std::isfinite(snr_db), "dsr: snr_db must be finite");
  }
};

struct DsrResult {
  double rate = 0.0;
  double standard_error = 0.0;
  int successes = 0;
  int trials = 0;
  /// Acceptance half-width min(k*sigma_d, d_s/2) in meters.
  double gate_m = 0.0;
};

struct DoubleScatterer {
  double s1 = 0.0, s2 = 0.0;
  cplx g1{}, g2{};
  PixelMeasurement y;
};

/// One random trial: continuous positions inside the grid, first scatterer
/// with unit amplitude and random phase, the second offset by d_s and delta_phi.
inline DoubleScatterer draw_double_scatterer(const ImagingGeometry& g, const DsrConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  const double ds = cfg.alpha * rayleigh_resolution(g);
  const double margin = 2.0 * g.grid_spacing();
  const double lo = g.elevation_min() + margin;
  const double hi = g.elevation_max() - margin - ds;
  require(hi > lo, "dsr: scatterer spacing does not fit inside the elevation grid");
  DoubleScatterer t;
  t.s1 = uniform(rng, lo, hi);
  t.s2 = t.s1 + ds;
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  t.g1 = std::polar(1.0, phase);
  t.g2 = std::polar(1.0 / cfg.amp_ratio, phase + cfg.phase_diff_rad);
  t.y = t.g1 * steering_vector(g, t.s1) + t.g2 * steering_vector(g, t.s2);
  add_noise(t.y, noise_variance(t.y, cfg.snr_db), rng);
  return t;
}

/// Success when two peaks exist and, under the cheaper of the two pairings,
/// both lie within the gate of their true elevations.
inline bool dsr_trial_success(const std::vector<Peak>& peaks, double s1, double s2, double gate) {
  if (peaks.size() < 2) return false;
  const double e1 = peaks[0].elevation_m, e2 = peaks[1].elevation_m;
  const double straight = std::abs(e1 - s1) + std::abs(e2 - s2);
  const double swapped = std::abs(e1 - s2) + std::abs(e2 - s1);
  if (straight <= swapped) return std::abs(e1 - s1) <= gate && std::abs(e2 - s2) <= gate;
  return std::abs(e1 - s2) <= gate && std::abs(e2 - s1) <= gate;
}

inline double dsr_gate(const ImagingGeometry& g, const DsrConfig& cfg) {
  const double rho = rayleigh_resolution(g);
  const CrlbResult crlb =
      crlb_sigma(g, std::pow(10.0, cfg.snr_db / 10.0), cfg.alpha, cfg.phase_diff_rad, g.channels(), cfg.aperture);
  return std::min(cfg.crlb_multiplier * crlb.sigma_d, 0.5 * cfg.alpha * rho);
}

inline DsrResult dsr_monte_carlo(const DsrConfig& cfg, const ImagingGeometry& g, const Solver& solver,
                                 std::size_t workers = 1) {
  cfg.validate();
  require(solver.geometry_hash == g.hash(), "dsr: solver is bound to a different geometry");
  const double gate = dsr_gate(g, cfg);
  std::vector<char> ok(static_cast<std::size_t>(cfg.trials), 0);
  parallel_for(ok.size(), workers, [&](std::size_t i) {
    const DoubleScatterer t = draw_double_scatterer(g, cfg, derive_seed(cfg.seed, i));
    const auto peaks = extract_peaks(solver(t.y), g.elevation_grid_m, cfg.peaks);
    ok[i] = dsr_trial_success(peaks, t.s1, t.s2, gate) ? 1 : 0;
  });
  DsrResult r;
  r.trials = cfg.trials;
  for (char c : ok) r.successes += c;
  r.rate = static_cast<double>(r.successes) / static_cast<double>(r.trials);
  r.standard_error = std::sqrt(r.rate * (1.0 - r.rate) / static_cast<double>(r.trials));
  r.gate_m = gate;
  return r;
}

struct SweepRow {
  std::string parameter;
  double value = 0.0;
  std::string solver;
  DsrResult result;
};

/// Runs dsr_monte_carlo for each value of one swept parameter
/// ("snr_db", "alpha", "amp_ratio" or "phase_diff_rad").
inline std::vector<SweepRow> dsr_sweep(const DsrConfig& base, const std::string& parameter,
                                       const std::vector<double>& values, const ImagingGeometry& g,
                                       const std::vector<Solver>& solvers, std::size_t workers = 1) {
  std::vector<SweepRow> rows;
  for (double v : values) {
    DsrConfig cfg = base;
    if (parameter == "snr_db")
      cfg.snr_db = v;
    else if (parameter == "alpha")
      cfg.alpha = v;
    else if (parameter == "amp_ratio")
      cfg.amp_ratio = v;
    else if (parameter == "phase_diff_rad")
      cfg.phase_diff_rad = v;
    else
      throw InvalidArgument("dsr sweep: unknown parameter '" + parameter + "'");
    for (const auto& s : solvers) {
      cfg.solver = s.name;
      rows.push_back({parameter, v, s.name, dsr_monte_carlo(cfg, g, s, workers)});
    }
  }
  return rows;
}

inline void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  io::write_atomically(
      path,
      [&](std::ostream& out) {
        out << "parameter,value,solver,rate,standard_error,successes,trials,gate_m\n" << std::setprecision(12);
        for (const auto& r : rows)
          out << r.parameter << ',' << r.value << ',' << r.solver << ',' << r.result.rate << ','
              << r.result.standard_error << ',' << r.result.successes << ',' << r.result.trials << ','
              << r.result.gate_m << '\n';
      },
      false);
}

}  // namespace tomosar
