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

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "tomosar/alista_weights.hpp"
#include "tomosar/cube.hpp"
#include "tomosar/errors.hpp"
#include "tomosar/network.hpp"
#include "tomosar/simulate.hpp"
#include "tomosar/trainer.hpp"

namespace tomosar::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// Writes through `fill` into a sibling temp file, then renames over `path`.
inline void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill,
                             bool binary = true) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, binary ? std::ios::binary : std::ios::out);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    fill(out);
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline std::ifstream open_in(const std::filesystem::path& path, bool binary = true) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
inline void put_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }
inline void put_cplx(std::ostream& out, const cplx* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(cplx)));
}

inline void get_bytes(std::istream& in, void* dst, std::size_t n, const std::string& what) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw IoError(what + ": truncated file");
}
inline std::uint64_t get_u64(std::istream& in, const std::string& what) {
  std::uint64_t v;
  get_bytes(in, &v, 8, what);
  return v;
}
inline double get_f64(std::istream& in, const std::string& what) {
  double v;
  get_bytes(in, &v, 8, what);
  return v;
}
inline void expect_magic(std::istream& in, const char* magic, const std::string& what) {
  char buf[5];
  get_bytes(in, buf, 5, what);
  if (std::memcmp(buf, magic, 5) != 0) throw IoError(what + ": bad magic, expected " + magic);
}

}  // namespace detail

// Dataset: "TOMO1", N, L, count (u64), then per record y (N) and gamma (L)
// as interleaved float64 (re, im).
inline void write_dataset(const std::filesystem::path& path, const Dataset& data, std::size_t n, std::size_t l) {
  for (const auto& s : data)
    require(static_cast<std::size_t>(s.y.size()) == n && static_cast<std::size_t>(s.label.size()) == l,
            "write_dataset: record dimensions differ from header");
  write_atomically(path, [&](std::ostream& out) {
    out.write("TOMO1", 5);
    detail::put_u64(out, n);
    detail::put_u64(out, l);
    detail::put_u64(out, data.size());
    for (const auto& s : data) {
      detail::put_cplx(out, s.y.data(), n);
      detail::put_cplx(out, s.label.data(), l);
    }
  });
}

struct DatasetFile {
  std::size_t n = 0;
  std::size_t l = 0;
  Dataset samples;
};

inline DatasetFile read_dataset(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string what = "dataset " + path.string();
  detail::expect_magic(in, "TOMO1", what);
  DatasetFile f;
  f.n = detail::get_u64(in, what);
  f.l = detail::get_u64(in, what);
  const std::uint64_t count = detail::get_u64(in, what);
  f.samples.resize(count);
  for (auto& s : f.samples) {
    s.y.resize(static_cast<Eigen::Index>(f.n));
    s.label.resize(static_cast<Eigen::Index>(f.l));
    detail::get_bytes(in, s.y.data(), f.n * sizeof(cplx), what);
    detail::get_bytes(in, s.label.data(), f.l * sizeof(cplx), what);
  }
  return f;
}

/// Debug CSV: record,field,index,re,im with field in {y, gamma}.
inline void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  write_atomically(
      path,
      [&](std::ostream& out) {
        out << "record,field,index,re,im\n" << std::setprecision(17);
        for (std::size_t r = 0; r < data.size(); ++r) {
          for (Eigen::Index i = 0; i < data[r].y.size(); ++i)
            out << r << ",y," << i << ',' << data[r].y(i).real() << ',' << data[r].y(i).imag() << '\n';
          for (Eigen::Index i = 0; i < data[r].label.size(); ++i)
            out << r << ",gamma," << i << ',' << data[r].label(i).real() << ',' << data[r].label(i).imag() << '\n';
        }
      },
      false);
}

// Weight cache: "WMAT1", N, L, geometry hash (u64), delta, constraint
// residual, objective (f64), then W column by column as interleaved float64.
inline void write_weights(const std::filesystem::path& path, const AlistaWeights& w) {
  write_atomically(path, [&](std::ostream& out) {
    out.write("WMAT1", 5);
    detail::put_u64(out, static_cast<std::uint64_t>(w.w.rows()));
    detail::put_u64(out, static_cast<std::uint64_t>(w.w.cols()));
    detail::put_u64(out, w.geometry_hash);
    detail::put_f64(out, w.tikhonov_delta);
    detail::put_f64(out, w.constraint_residual);
    detail::put_f64(out, w.objective_value);
    detail::put_cplx(out, w.w.data(), static_cast<std::size_t>(w.w.size()));
  });
}

inline AlistaWeights read_weights(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string what = "weight cache " + path.string();
  detail::expect_magic(in, "WMAT1", what);
  const auto n = static_cast<Eigen::Index>(detail::get_u64(in, what));
  const auto l = static_cast<Eigen::Index>(detail::get_u64(in, what));
  AlistaWeights w;
  w.geometry_hash = detail::get_u64(in, what);
  w.tikhonov_delta = detail::get_f64(in, what);
  w.constraint_residual = detail::get_f64(in, what);
  w.objective_value = detail::get_f64(in, what);
  w.w.resize(n, l);
  detail::get_bytes(in, w.w.data(), static_cast<std::size_t>(n * l) * sizeof(cplx), what);
  return w;
}

/// Loads a cached weight matrix when its hash matches, otherwise computes and stores it.
inline AlistaWeights cached_weights(const std::filesystem::path& path, const SteeringMatrix& a,
                                    const WeightOptions& opt = {}) {
  if (std::filesystem::exists(path)) {
    AlistaWeights w = read_weights(path);
    if (w.geometry_hash == a.geometry_hash && w.w.rows() == a.channels() && w.w.cols() == a.grid_size()) return w;
  }
  AlistaWeights w = precompute_w(a, opt);
  write_weights(path, w);
  return w;
}

namespace detail {

inline void write_cube(const std::filesystem::path& path, const ComplexCube& c, const char* magic) {
  write_atomically(path, [&](std::ostream& out) {
    out.write(magic, 5);
    put_u64(out, c.n_azimuth);
    put_u64(out, c.n_range);
    put_u64(out, c.depth);
    put_u64(out, c.geometry_hash);
    put_cplx(out, c.data.data(), c.data.size());
  });
}

inline ComplexCube read_cube(const std::filesystem::path& path, const char* magic, const std::string& what) {
  auto in = open_in(path);
  expect_magic(in, magic, what);
  ComplexCube c;
  c.n_azimuth = get_u64(in, what);
  c.n_range = get_u64(in, what);
  c.depth = get_u64(in, what);
  c.geometry_hash = get_u64(in, what);
  c.data.resize(c.n_azimuth * c.n_range * c.depth);
  get_bytes(in, c.data.data(), c.data.size() * sizeof(cplx), what);
  return c;
}

}  // namespace detail

// Stack: "STAK1", n_azimuth, n_range, N, geometry hash (u64), then
// azimuth-major, range, channel samples as interleaved float64.
inline void write_stack(const std::filesystem::path& path, const MeasurementStack& s) {
  detail::write_cube(path, s, "STAK1");
}
inline MeasurementStack read_stack(const std::filesystem::path& path) {
  return detail::read_cube(path, "STAK1", "stack " + path.string());
}

// Profile cube: same layout as the stack with magic "CUBE1" and depth L.
inline void write_profile_cube(const std::filesystem::path& path, const ComplexCube& c) {
  detail::write_cube(path, c, "CUBE1");
}
inline ComplexCube read_profile_cube(const std::filesystem::path& path) {
  return detail::read_cube(path, "CUBE1", "profile cube " + path.string());
}

inline std::string hash_hex(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

inline std::uint64_t parse_hash_hex(const std::string& s) {
  try {
    return std::stoull(s, nullptr, 16);
  } catch (const std::exception&) {
    throw InvalidArgument("bad geometry hash '" + s + "'");
  }
}

inline nlohmann::json params_to_json(const NetworkParams& p) {
  nlohmann::json j;
  j["layers"] = p.layers();
  j["mu"] = p.mu;
  j["beta"] = p.beta;
  j["threshold_mode"] = to_string(p.mode);
  j["epsilon_rule"] = {{"kind", p.epsilon.kind == EpsilonRule::Kind::fixed ? "fixed" : "relative_to_peak"},
                       {"value", p.epsilon.value}};
  j["geometry_hash"] = hash_hex(p.geometry_hash);
  return j;
}

inline NetworkParams params_from_json(const nlohmann::json& j) {
  try {
    NetworkParams p;
    p.mu = j.at("mu").get<std::vector<double>>();
    p.beta = j.at("beta").get<std::vector<double>>();
    if (j.contains("layers") && j.at("layers").get<std::size_t>() != p.mu.size())
      throw InvalidArgument("network parameters: 'layers' does not match the length of mu");
    p.mode = threshold_mode_from_string(j.value("threshold_mode", std::string("adaptive")));
    const auto& e = j.at("epsilon_rule");
    const std::string kind = e.at("kind").get<std::string>();
    if (kind == "fixed")
      p.epsilon = EpsilonRule::fixed(e.at("value").get<double>());
    else if (kind == "relative_to_peak")
      p.epsilon = EpsilonRule::relative_to_peak(e.at("value").get<double>());
    else
      throw InvalidArgument("network parameters: unknown epsilon rule '" + kind + "'");
    p.geometry_hash = parse_hash_hex(j.value("geometry_hash", std::string("0")));
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument(std::string("network parameters: ") + ex.what());
  }
}

/// Parameter file: pretty-printed JSON with an optional weight-cache reference.
inline void write_params(const std::filesystem::path& path, const NetworkParams& p,
                         const std::string& weight_cache = {}) {
  nlohmann::json j = params_to_json(p);
  if (!weight_cache.empty()) j["weight_cache"] = weight_cache;
  write_atomically(path, [&](std::ostream& out) { out << std::setprecision(17) << j.dump(2) << '\n'; }, false);
}

inline NetworkParams read_params(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument("network parameters " + path.string() + ": " + ex.what());
  }
  return params_from_json(j);
}

/// Checkpoint: parameter file contents plus the optimizer state.
inline void write_checkpoint(const std::filesystem::path& path, const NetworkParams& p, const OptimizerState& st) {
  nlohmann::json j = params_to_json(p);
  j["optimizer"] = {{"m", st.m},
                    {"v", st.v},
                    {"step", st.step},
                    {"learning_rate", st.learning_rate},
                    {"best_loss", std::isfinite(st.best_loss) ? nlohmann::json(st.best_loss) : nlohmann::json()},
                    {"plateau_epochs", st.plateau_epochs}};
  write_atomically(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; }, false);
}

inline void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  write_atomically(
      path,
      [&](std::ostream& out) {
        out << "epoch,train_loss,val_NMSE,lr\n" << std::setprecision(12);
        for (const auto& e : log) out << e.epoch << ',' << e.train_loss << ',' << e.val_nmse << ',' << e.learning_rate << '\n';
      },
      false);
}

}  // namespace tomosar::io
