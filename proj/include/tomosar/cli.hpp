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

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tomosar/alista_weights.hpp"
#include "tomosar/config.hpp"
#include "tomosar/dsr.hpp"
#include "tomosar/io.hpp"
#include "tomosar/metrics.hpp"
#include "tomosar/scene.hpp"
#include "tomosar/simulate.hpp"
#include "tomosar/trainer.hpp"

namespace tomosar::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kIoFailure = 1, kConfigError = 2, kNumericalFailure = 3 };

/// Global flags; set values override the config file.
struct Options {
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> solver;
  fs::path out = ".";
};

/// Parsed config plus the effective global settings of one invocation.
struct Context {
  Config cfg;
  fs::path out;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string solver;
  std::ostream* log = &std::cout;

  fs::path output(const std::string& name) const { return out / name; }

  /// Input path from [io].key, defaulting to a file in the output directory.
  fs::path input(const std::string& key, const std::string& default_name) const {
    return cfg.string("io." + key, output(default_name).string());
  }
};

inline const std::set<std::string>& known_fields() {
  static const std::set<std::string> keys = {
      "seed", "workers", "solver",
      "geometry.preset", "geometry.wavelength_m", "geometry.carrier_frequency_hz", "geometry.antenna_interval_m",
      "geometry.array_number", "geometry.range_m", "geometry.incident_angle_deg", "geometry.grid_size",
      "geometry.baselines_m", "geometry.elevation_min_m", "geometry.elevation_max_m",
      "dataset.kind", "dataset.count", "dataset.single_fraction", "dataset.snr_levels_db", "dataset.spacing_min",
      "dataset.spacing_max", "dataset.amplitude_sigma", "dataset.amplitude_cap", "dataset.validation_count",
      "dataset.validation_snr_db", "dataset.csv", "dataset.n_azimuth", "dataset.n_range",
      "dataset.azimuth_spacing_m", "dataset.range_spacing_m", "dataset.box_dims_m", "dataset.num_targets",
      "dataset.rcs_ratio", "dataset.base_amplitude", "dataset.max_per_cell", "dataset.snr_db",
      "weights.delta", "weights.auto_fallback",
      "network.layers", "network.mode", "network.epsilon_rule", "network.epsilon_value", "network.beta_init",
      "train.learning_rate", "train.optimizer", "train.epochs", "train.batch_size", "train.lr_patience",
      "train.lr_factor", "train.clamp_nonneg", "train.sgd_momentum", "train.labels", "train.baseline_solver",
      "train.focus_threshold", "train.keep_best_validation",
      "solver.ista_lambda", "solver.ista_iters", "solver.ista_tol", "solver.omp_sparsity", "solver.svd_rank",
      "infer.capture_trace",
      "dsr.snr_db", "dsr.alpha", "dsr.amp_ratio", "dsr.phase_diff_deg", "dsr.trials", "dsr.crlb_multiplier",
      "dsr.aperture", "dsr.sweep", "dsr.values", "dsr.solvers", "dsr.params",
      "export.format", "export.intensity", "export.max_peaks", "export.floor_fraction", "export.reduction",
      "export.quantiles",
      "io.dataset", "io.validation", "io.weights", "io.params", "io.stack", "io.reference", "io.cube",
      "io.thresholds", "io.input"};
  return keys;
}

inline Context make_context(const Options& opt) {
  Context ctx;
  if (!opt.config.empty()) ctx.cfg = Config::load(opt.config);
  ctx.cfg.check_known({"", "geometry", "dataset", "weights", "network", "train", "solver", "infer", "dsr", "export", "io"},
                      known_fields());
  ctx.out = opt.out;
  ctx.seed = opt.seed ? *opt.seed : static_cast<std::uint64_t>(ctx.cfg.integer("seed", 0));
  ctx.workers = opt.workers ? *opt.workers : ctx.cfg.count("workers", 0);
  if (ctx.workers == 0) ctx.workers = default_workers();
  ctx.solver = opt.solver ? *opt.solver : ctx.cfg.string("solver", "atasi");
  return ctx;
}

inline ImagingGeometry geometry_from(const Config& c) {
  const std::string preset = c.string("geometry.preset", "scatterer");
  double lambda = 0.021, range = 400.0, dd = 0.084, theta_deg = 45.0;
  std::size_t channels = 8;
  if (preset == "building") {
    range = 1200.0;
    theta_deg = 30.0;
  } else if (preset != "scatterer") {
    c.field_error("geometry.preset", "expected \"scatterer\" or \"building\"");
  }
  if (c.has("geometry.wavelength_m")) lambda = c.number("geometry.wavelength_m");
  if (c.has("geometry.carrier_frequency_hz")) {
    const double f = c.number("geometry.carrier_frequency_hz");
    if (!(f > 0.0)) c.field_error("geometry.carrier_frequency_hz", "must be > 0");
    const double from_f = kSpeedOfLight / f;
    if (c.has("geometry.wavelength_m") && std::abs(from_f - lambda) > 1e-3 * lambda)
      c.field_error("geometry.carrier_frequency_hz", "inconsistent with geometry.wavelength_m");
    if (!c.has("geometry.wavelength_m")) lambda = from_f;
  }
  dd = c.number("geometry.antenna_interval_m", dd);
  channels = c.count("geometry.array_number", channels, 2);
  range = c.number("geometry.range_m", range);
  theta_deg = c.number("geometry.incident_angle_deg", theta_deg);
  const std::size_t l = c.count("geometry.grid_size", 128, 2);
  if (!(lambda > 0.0)) c.field_error("geometry.wavelength_m", "must be > 0");
  if (!(range > 0.0)) c.field_error("geometry.range_m", "must be > 0");
  if (!(dd > 0.0)) c.field_error("geometry.antenna_interval_m", "must be > 0");
  if (!(theta_deg > 0.0 && theta_deg < 90.0)) c.field_error("geometry.incident_angle_deg", "must lie in (0, 90)");
  ImagingGeometry g = make_ula_geometry(lambda, range, dd, channels, l, theta_deg * std::numbers::pi / 180.0);
  if (c.has("geometry.baselines_m")) {
    g.baselines_m = c.numbers("geometry.baselines_m", {});
    if (g.baselines_m.size() < 2) c.field_error("geometry.baselines_m", "need at least 2 baselines");
  }
  if (c.has("geometry.elevation_min_m") || c.has("geometry.elevation_max_m")) {
    const double lo = c.number("geometry.elevation_min_m");
    const double hi = c.number("geometry.elevation_max_m");
    if (!(hi > lo)) c.field_error("geometry.elevation_max_m", "must exceed geometry.elevation_min_m");
    g.elevation_grid_m = uniform_grid(lo, (hi - lo) / static_cast<double>(l - 1), l);
  }
  g.validate();
  return g;
}

inline TrainingSetConfig training_set_from(const Config& c, std::uint64_t seed) {
  TrainingSetConfig t;
  t.count = c.count("dataset.count", t.count, 1);
  t.single_fraction = c.number("dataset.single_fraction", t.single_fraction);
  t.snr_levels = c.numbers("dataset.snr_levels_db", t.snr_levels);
  t.spacing_range = {c.number("dataset.spacing_min", t.spacing_range.first),
                     c.number("dataset.spacing_max", t.spacing_range.second)};
  t.amplitude.sigma = c.number("dataset.amplitude_sigma", t.amplitude.sigma);
  t.amplitude.cap = c.number("dataset.amplitude_cap", t.amplitude.cap);
  t.seed = seed;
  return t;
}

inline BuildingSceneConfig building_from(const Config& c, std::uint64_t seed) {
  BuildingSceneConfig b;
  b.n_azimuth = c.count("dataset.n_azimuth", b.n_azimuth, 1);
  b.n_range = c.count("dataset.n_range", b.n_range, 1);
  b.azimuth_spacing_m = c.number("dataset.azimuth_spacing_m", b.azimuth_spacing_m);
  b.range_spacing_m = c.number("dataset.range_spacing_m", b.range_spacing_m);
  auto triple = [&](const std::string& key, std::array<double, 3> def) {
    const auto v = c.numbers(key, {def[0], def[1], def[2]});
    if (v.size() != 3) c.field_error(key, "expected a list of 3 numbers");
    return std::array<double, 3>{v[0], v[1], v[2]};
  };
  b.box_dims_m = triple("dataset.box_dims_m", b.box_dims_m);
  b.rcs_ratio = triple("dataset.rcs_ratio", b.rcs_ratio);
  b.num_targets = c.count("dataset.num_targets", b.num_targets, 1);
  b.base_amplitude = c.number("dataset.base_amplitude", b.base_amplitude);
  b.max_per_cell = c.count("dataset.max_per_cell", b.max_per_cell, 1);
  b.seed = seed;
  return b;
}

inline SnrDb stack_snr_from(const Config& c) {
  const std::string key = "dataset.snr_db";
  if (!c.has(key)) return 30.0;
  return c.number(key);
}

inline WeightOptions weight_options_from(const Config& c) {
  WeightOptions w;
  w.delta = c.number("weights.delta", w.delta);
  w.auto_fallback = c.boolean("weights.auto_fallback", w.auto_fallback);
  return w;
}

inline EpsilonRule epsilon_from(const Config& c) {
  const std::string kind = c.string("network.epsilon_rule", "relative_to_peak");
  const double v = c.number("network.epsilon_value", 0.005);
  if (!(v > 0.0)) c.field_error("network.epsilon_value", "must be > 0");
  if (kind == "relative_to_peak") return EpsilonRule::relative_to_peak(v);
  if (kind == "fixed") return EpsilonRule::fixed(v);
  c.field_error("network.epsilon_rule", "expected \"relative_to_peak\" or \"fixed\"");
}

inline TrainConfig train_config_from(const Context& ctx) {
  const Config& c = ctx.cfg;
  TrainConfig t;
  t.learning_rate = c.number("train.learning_rate", t.learning_rate);
  const std::string opt = c.string("train.optimizer", "adam");
  if (opt == "adam")
    t.optimizer = OptimizerKind::adam;
  else if (opt == "sgd")
    t.optimizer = OptimizerKind::sgd;
  else
    c.field_error("train.optimizer", "expected \"adam\" or \"sgd\"");
  t.epochs = static_cast<int>(c.count("train.epochs", static_cast<std::size_t>(t.epochs)));
  t.batch_size = c.count("train.batch_size", t.batch_size, 1);
  t.lr_patience = static_cast<int>(c.count("train.lr_patience", static_cast<std::size_t>(t.lr_patience)));
  t.lr_factor = c.number("train.lr_factor", t.lr_factor);
  t.clamp_nonneg = c.boolean("train.clamp_nonneg", t.clamp_nonneg);
  t.sgd_momentum = c.number("train.sgd_momentum", t.sgd_momentum);
  t.keep_best_validation = c.boolean("train.keep_best_validation", t.keep_best_validation);
  t.seed = ctx.seed;
  t.workers = ctx.workers;
  try {
    t.validate();
  } catch (const InvalidArgument& ex) {
    throw InvalidArgument(c.source() + ": [train] " + ex.what());
  }
  return t;
}

/// Classic solver or network by name. Networks need the parameter file.
inline Solver solver_from(const Context& ctx, const std::string& name, const SteeringMatrix& a) {
  const Config& c = ctx.cfg;
  if (name == "omp") {
    OmpConfig o;
    o.max_sparsity = static_cast<int>(c.count("solver.omp_sparsity", 4, 1));
    return make_omp_solver(a, o);
  }
  if (name == "ista") {
    IstaConfig i;
    i.reg_lambda = c.number("solver.ista_lambda", i.reg_lambda);
    i.max_iters = static_cast<int>(c.count("solver.ista_iters", static_cast<std::size_t>(i.max_iters), 1));
    i.tol = c.number("solver.ista_tol", i.tol);
    return make_ista_solver(a, i);
  }
  if (name == "svd") {
    SvdTruncation t;
    t.rank = c.count("solver.svd_rank", 0);
    return make_svd_solver(a, t);
  }
  if (name == "atasi" || name == "alista") {
    const fs::path params_path = ctx.input("params", "params_" + name + ".json");
    const NetworkParams p = io::read_params(params_path);
    const char* expected = name == "atasi" ? "adaptive" : "layer_constant";
    if (std::string(to_string(p.mode)) != expected)
      throw InvalidArgument(params_path.string() + ": parameters use threshold mode '" + to_string(p.mode) +
                            "', solver '" + name + "' needs '" + expected + "'");
    const AlistaWeights w = io::read_weights(ctx.input("weights", "weights.wmat"));
    return make_network_solver(a, w, p);
  }
  throw InvalidArgument("unknown solver '" + name + "' (expected omp, ista, svd, alista or atasi)");
}

inline std::vector<bool> full_mask(const MeasurementStack& s) { return std::vector<bool>(s.pixels(), true); }

// ---------------------------------------------------------------- commands

inline int cmd_gen_data(const Context& ctx) {
  const ImagingGeometry g = geometry_from(ctx.cfg);
  const SteeringMatrix a = build_steering(g);
  const std::string kind = ctx.cfg.string("dataset.kind", "training");
  if (kind == "training") {
    const TrainingSetConfig tc = training_set_from(ctx.cfg, ctx.seed);
    const Dataset data = gen_training_set(g, a, tc);
    io::write_dataset(ctx.output("dataset.tomo"), data, g.channels(), g.grid_size());
    if (ctx.cfg.boolean("dataset.csv", false)) io::write_dataset_csv(ctx.output("dataset.csv"), data);
    const std::size_t n_val = ctx.cfg.count("dataset.validation_count", 0);
    if (n_val > 0) {
      TrainingSetConfig vc = tc;
      vc.count = n_val;
      vc.seed = derive_seed(ctx.seed, 1);
      vc.snr_levels = ctx.cfg.numbers("dataset.validation_snr_db", {30.0});
      io::write_dataset(ctx.output("validation.tomo"), gen_training_set(g, a, vc), g.channels(), g.grid_size());
    }
    *ctx.log << "gen-data: " << data.size() << " samples -> " << ctx.output("dataset.tomo").string() << '\n';
    return kOk;
  }
  if (kind == "building") {
    const BuildingSceneConfig bc = building_from(ctx.cfg, ctx.seed);
    const ScattererSet scene = gen_building_scene(g, bc);
    const MeasurementStack stack = simulate_stack(scene, g, stack_snr_from(ctx.cfg), derive_seed(ctx.seed, 2));
    io::write_stack(ctx.output("stack.stak"), stack);
    io::write_profile_cube(ctx.output("reference.cube"), reference_cube(scene, g));
    io::write_atomically(
        ctx.output("scene.csv"),
        [&](std::ostream& out) {
          static const char* tags[] = {"roof", "wall", "ground", "free_space"};
          out << "azimuth_idx,range_idx,elevation_m,re,im,surface\n" << std::setprecision(17);
          for (const auto& s : scene.records)
            out << s.azimuth_idx << ',' << s.range_idx << ',' << s.elevation_m << ',' << s.reflectivity.real() << ','
                << s.reflectivity.imag() << ',' << tags[static_cast<int>(s.surface)] << '\n';
        },
        false);
    *ctx.log << "gen-data: building scene with " << scene.records.size() << " scatterers -> "
             << ctx.output("stack.stak").string() << '\n';
    return kOk;
  }
  ctx.cfg.field_error("dataset.kind", "expected \"training\" or \"building\"");
}

inline int cmd_precompute_w(const Context& ctx) {
  const ImagingGeometry g = geometry_from(ctx.cfg);
  const SteeringMatrix a = build_steering(g);
  const AlistaWeights w = precompute_w(a, weight_options_from(ctx.cfg));
  io::write_weights(ctx.output("weights.wmat"), w);
  *ctx.log << "precompute-w: constraint residual " << w.constraint_residual << ", delta " << w.tikhonov_delta
           << ", geometry " << io::hash_hex(w.geometry_hash) << '\n';
  return kOk;
}

inline int cmd_train(const Context& ctx) {
  const ImagingGeometry g = geometry_from(ctx.cfg);
  const SteeringMatrix a = build_steering(g);
  const AlistaWeights w = io::read_weights(ctx.input("weights", "weights.wmat"));
  if (w.geometry_hash != a.geometry_hash)
    throw InvalidArgument("train: weight cache was computed for a different geometry");
  const std::string mode_name = ctx.solver;
  if (mode_name != "atasi" && mode_name != "alista")
    throw InvalidArgument("train: --solver must be atasi or alista, got '" + mode_name + "'");
  const ThresholdMode mode = threshold_mode_from_string(mode_name);

  Dataset data;
  const std::string labels = ctx.cfg.string("train.labels", "dataset");
  if (labels == "dataset") {
    const io::DatasetFile f = io::read_dataset(ctx.input("dataset", "dataset.tomo"));
    if (f.n != g.channels() || f.l != g.grid_size())
      throw InvalidArgument("train: dataset dimensions do not match the geometry");
    data = f.samples;
  } else if (labels == "baseline") {
    const MeasurementStack stack = io::read_stack(ctx.input("stack", "stack.stak"));
    if (stack.geometry_hash != a.geometry_hash) throw InvalidArgument("train: stack geometry mismatch");
    const Solver baseline = solver_from(ctx, ctx.cfg.string("train.baseline_solver", "ista"), a);
    BaselineLabelConfig bl;
    bl.focus_threshold = ctx.cfg.number("train.focus_threshold", bl.focus_threshold);
    data = labels_from_baseline(stack, baseline, g, full_mask(stack), bl, ctx.workers);
    *ctx.log << "train: " << data.size() << " baseline labels passed the focus filter\n";
  } else {
    ctx.cfg.field_error("train.labels", "expected \"dataset\" or \"baseline\"");
  }

  Dataset validation;
  const fs::path val_path = ctx.input("validation", "validation.tomo");
  if (fs::exists(val_path)) validation = io::read_dataset(val_path).samples;

  const std::size_t layers = ctx.cfg.count("network.layers", 10, 1);
  NetworkParams init =
      init_params(data, a, w, layers, mode, epsilon_from(ctx.cfg), ctx.cfg.number("network.beta_init", 0.01));
  const TrainConfig tc = train_config_from(ctx);
  TrainResult r = train(data, a, w, init, tc, validation.empty() ? nullptr : &validation, [&](const EpochLog& e) {
    *ctx.log << "epoch " << e.epoch << " loss " << e.train_loss << " val_nmse " << e.val_nmse << " lr "
             << e.learning_rate << '\n';
  });
  // Reference the weight cache relative to the output directory so runs in
  // different directories produce identical files.
  const fs::path weights_path = ctx.input("weights", "weights.wmat");
  std::string weights_ref = weights_path.lexically_relative(ctx.out).string();
  if (weights_ref.empty()) weights_ref = weights_path.string();
  io::write_params(ctx.output("params_" + mode_name + ".json"), r.params, weights_ref);
  io::write_checkpoint(ctx.output("checkpoint_" + mode_name + ".json"), r.params, r.optimizer);
  io::write_training_log(ctx.output("train_log_" + mode_name + ".csv"), r.log);
  return kOk;
}

inline int cmd_infer(const Context& ctx) {
  const ImagingGeometry g = geometry_from(ctx.cfg);
  const SteeringMatrix a = build_steering(g);
  const Solver solver = solver_from(ctx, ctx.solver, a);
  fs::path input = ctx.cfg.string("io.input", "");
  if (input.empty()) input = fs::exists(ctx.output("stack.stak")) ? ctx.output("stack.stak") : ctx.output("dataset.tomo");
  const bool is_stack = input.extension() == ".stak";
  double wall = 0.0;
  if (is_stack) {
    const MeasurementStack stack = io::read_stack(input);
    if (stack.geometry_hash != a.geometry_hash) throw InvalidArgument("infer: stack geometry mismatch");
    const bool network = ctx.solver == "atasi" || ctx.solver == "alista";
    ReconstructionResult rec;
    if (network && ctx.cfg.boolean("infer.capture_trace", true)) {
      const NetworkParams p = io::read_params(ctx.input("params", "params_" + ctx.solver + ".json"));
      const AlistaWeights w = io::read_weights(ctx.input("weights", "weights.wmat"));
      rec = reconstruct_stack_traced(stack, a, w, p, ctx.workers);
      ComplexCube theta(stack.n_azimuth, stack.n_range, g.grid_size(), stack.geometry_hash);
      for (std::size_t i = 0; i < rec.final_theta.size(); ++i) theta.data[i] = rec.final_theta[i];
      io::write_profile_cube(ctx.output("thresholds_" + ctx.solver + ".cube"), theta);
    } else {
      rec = reconstruct_stack(stack, solver, g.grid_size(), ctx.workers);
    }
    for (std::size_t i = 0; i < rec.failed_pixels.size(); ++i)
      std::cerr << "infer: pixel " << rec.failed_pixels[i] << " failed: " << rec.failure_messages[i] << '\n';
    io::write_profile_cube(ctx.output("profiles_" + ctx.solver + ".cube"), rec.profiles);
    wall = rec.wall_time_s;
  } else {
    const io::DatasetFile f = io::read_dataset(input);
    if (f.n != g.channels() || f.l != g.grid_size())
      throw InvalidArgument("infer: dataset dimensions do not match the geometry");
    Dataset out(f.samples.size());
    const auto t0 = std::chrono::steady_clock::now();
    parallel_for(out.size(), ctx.workers, [&](std::size_t i) { out[i] = {f.samples[i].y, solver(f.samples[i].y)}; });
    wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    io::write_dataset(ctx.output("inferred_" + ctx.solver + ".tomo"), out, f.n, f.l);
  }
  // Wall-clock time is the only non-reproducible output and lives in its own file.
  io::write_atomically(
      ctx.output("timing_" + ctx.solver + ".csv"),
      [&](std::ostream& o) { o << "solver,runtime_s\n" << ctx.solver << ',' << std::setprecision(9) << wall << '\n'; },
      false);
  *ctx.log << "infer: " << ctx.solver << " on " << input.string() << " in " << wall << " s\n";
  return kOk;
}

inline int cmd_eval(const Context& ctx) {
  const ImagingGeometry g = geometry_from(ctx.cfg);
  const fs::path cube_path = ctx.input("cube", "profiles_" + ctx.solver + ".cube");
  std::ostringstream row;
  row << std::setprecision(12);
  if (cube_path.extension() == ".cube" && fs::exists(cube_path)) {
    const ComplexCube est = io::read_profile_cube(cube_path);
    const ComplexCube ref = io::read_profile_cube(ctx.input("reference", "reference.cube"));
    if (!est.same_shape(ref)) throw InvalidArgument("eval: estimate and reference cubes differ in shape");
    if (est.geometry_hash != ref.geometry_hash || est.geometry_hash != g.hash())
      throw InvalidArgument("eval: estimate, reference and geometry hashes differ");
    const CVec e = Eigen::Map<const CVec>(est.data.data(), static_cast<Eigen::Index>(est.data.size()));
    const CVec r = Eigen::Map<const CVec>(ref.data.data(), static_cast<Eigen::Index>(ref.data.size()));
    const VoxelGrid ve = magnitude_voxels(est), vr = magnitude_voxels(ref);
    row << ctx.solver << ',' << nmse(e, r) << ',' << psnr(ve, vr) << ',' << ssim(ve, vr) << ',' << entropy3d(ve);
  } else {
    const io::DatasetFile inferred = io::read_dataset(ctx.input("cube", "inferred_" + ctx.solver + ".tomo"));
    const io::DatasetFile truth = io::read_dataset(ctx.input("dataset", "dataset.tomo"));
    if (inferred.samples.size() != truth.samples.size())
      throw InvalidArgument("eval: inferred and reference datasets differ in size");
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < truth.samples.size(); ++i)
      if (truth.samples[i].label.squaredNorm() > 0.0) {
        sum += nmse(inferred.samples[i].label, truth.samples[i].label);
        ++used;
      }
    row << ctx.solver << ',' << (used ? sum / static_cast<double>(used) : 0.0) << ",,,";
  }
  io::write_atomically(
      ctx.output("metrics_" + ctx.solver + ".csv"),
      [&](std::ostream& o) { o << "solver,nmse,psnr_db,ssim,entropy3d\n" << row.str() << '\n'; }, false);
  *ctx.log << "eval: " << row.str() << '\n';
  return kOk;
}

inline int cmd_dsr(const Context& ctx) {
  const Config& c = ctx.cfg;
  const ImagingGeometry g = geometry_from(c);
  const SteeringMatrix a = build_steering(g);
  DsrConfig base;
  base.snr_db = c.number("dsr.snr_db", base.snr_db);
  base.alpha = c.number("dsr.alpha", base.alpha);
  base.amp_ratio = c.number("dsr.amp_ratio", base.amp_ratio);
  base.phase_diff_rad = c.number("dsr.phase_diff_deg", 0.0) * std::numbers::pi / 180.0;
  base.trials = static_cast<int>(c.count("dsr.trials", static_cast<std::size_t>(base.trials), 1));
  base.crlb_multiplier = c.number("dsr.crlb_multiplier", base.crlb_multiplier);
  base.seed = ctx.seed;
  const std::string ap = c.string("dsr.aperture", "rayleigh_over_sqrt12");
  if (ap == "baseline_std")
    base.aperture = ApertureSpread::baseline_std;
  else if (ap != "rayleigh_over_sqrt12")
    c.field_error("dsr.aperture", "expected \"rayleigh_over_sqrt12\" or \"baseline_std\"");
  std::string parameter = c.string("dsr.sweep", "snr_db");
  std::vector<double> values;
  if (parameter == "phase_diff_deg") {
    for (double d : c.numbers("dsr.values", {0.0})) values.push_back(d * std::numbers::pi / 180.0);
    parameter = "phase_diff_rad";
  } else {
    const double current = parameter == "snr_db" ? base.snr_db
                           : parameter == "alpha" ? base.alpha
                                                  : base.amp_ratio;
    values = c.numbers("dsr.values", {current});
  }
  std::vector<std::string> names = c.strings("dsr.solvers", {ctx.solver});
  std::vector<Solver> solvers;
  for (const auto& n : names) solvers.push_back(solver_from(ctx, n, a));
  const auto rows = dsr_sweep(base, parameter, values, g, solvers, ctx.workers);
  write_sweep_csv(ctx.output("dsr_sweep.csv"), rows);
  for (const auto& r : rows)
    *ctx.log << "dsr: " << r.parameter << '=' << r.value << ' ' << r.solver << " rate " << r.result.rate << " +- "
             << r.result.standard_error << '\n';
  return kOk;
}

inline int cmd_export(const Context& ctx) {
  const Config& c = ctx.cfg;
  const ImagingGeometry g = geometry_from(c);
  const ComplexCube cube = io::read_profile_cube(ctx.input("cube", "profiles_" + ctx.solver + ".cube"));
  ExtractionConfig ex;
  ex.peaks.max_peaks = c.count("export.max_peaks", ex.peaks.max_peaks, 1);
  ex.peaks.floor_fraction = c.number("export.floor_fraction", ex.peaks.floor_fraction);
  const std::string scale = c.string("export.intensity", "linear");
  if (scale == "db")
    ex.intensity = IntensityScale::db;
  else if (scale != "linear")
    c.field_error("export.intensity", "expected \"linear\" or \"db\"");
  const std::string format = c.string("export.format", "ply");
  if (format != "ply" && format != "xyz") c.field_error("export.format", "expected \"ply\" or \"xyz\"");
  const PixelLayout layout = layout_of(building_from(c, ctx.seed));
  const PointCloud cloud =
      export_pointcloud(cube, g, layout, ex, ctx.output("pointcloud_" + ctx.solver + "." + format));
  *ctx.log << "export: " << cloud.size() << " points\n";

  const fs::path theta_path = ctx.input("thresholds", "thresholds_" + ctx.solver + ".cube");
  if (fs::exists(theta_path)) {
    const ComplexCube theta = io::read_profile_cube(theta_path);
    if (!theta.same_shape(cube)) throw InvalidArgument("export: threshold cube does not match the profile cube");
    ReconstructionResult rec;
    rec.profiles = cube;
    rec.final_theta.resize(theta.data.size());
    for (std::size_t i = 0; i < theta.data.size(); ++i) rec.final_theta[i] = theta.data[i].real();
    const auto q = c.numbers("export.quantiles", {1.0 / 3.0, 2.0 / 3.0});
    if (q.size() != 2) c.field_error("export.quantiles", "expected two quantiles");
    const ThresholdMap map = threshold_map(rec, g, threshold_reduction_from_string(c.string("export.reduction", "at_peak")),
                                           q[0], q[1], ex.peaks);
    write_threshold_map(ctx.output("threshold_map_" + ctx.solver), map);
  }
  return kOk;
}

/// Parses argv and runs one subcommand; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"SAR tomography with adaptive-threshold unfolded networks"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  std::string solver;
  auto add_globals = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Config file (TOML-style key = value)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--workers", workers, "Worker threads (0 = all cores)");
    sub->add_option("--solver", solver, "Solver")->check(CLI::IsMember({"omp", "ista", "svd", "alista", "atasi"}));
    sub->add_option("--out", opt.out, "Output directory");
  };
  using Cmd = int (*)(const Context&);
  const std::vector<std::tuple<std::string, std::string, Cmd>> table = {
      {"gen-data", "Generate a training set or a building-scene stack", cmd_gen_data},
      {"precompute-w", "Compute the analytic weight matrix", cmd_precompute_w},
      {"train", "Train network parameters", cmd_train},
      {"infer", "Reconstruct a stack or dataset", cmd_infer},
      {"eval", "Compute quality metrics", cmd_eval},
      {"dsr", "Detection success rate sweeps", cmd_dsr},
      {"export", "Export point clouds and threshold maps", cmd_export}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, help, fn] : table) {
    subs.push_back(app.add_subcommand(name, help));
    add_globals(subs.back());
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    log << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      if (subs[i]->count("--seed")) opt.seed = seed;
      if (subs[i]->count("--workers")) opt.workers = workers;
      if (subs[i]->count("--solver")) opt.solver = solver;
      Context ctx = make_context(opt);
      ctx.log = &log;
      fs::create_directories(ctx.out);
      return std::get<2>(table[i])(ctx);
    }
    return kConfigError;
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIoFailure;
  }
}

}  // namespace tomosar::cli
