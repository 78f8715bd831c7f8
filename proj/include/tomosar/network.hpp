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

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tomosar/alista_weights.hpp"
#include "tomosar/errors.hpp"
#include "tomosar/geometry.hpp"
#include "tomosar/solvers.hpp"

namespace tomosar {

/// How the per-element threshold of a layer is formed.
enum class ThresholdMode {
  /// theta_i = mu / (|z_i| + eps): element-wise adaptive (ATASI-Net).
  adaptive,
  /// theta_i = mu for every element (ALISTA).
  layer_constant,
};

inline const char* to_string(ThresholdMode m) {
  return m == ThresholdMode::adaptive ? "adaptive" : "layer_constant";
}

inline ThresholdMode threshold_mode_from_string(const std::string& s) {
  if (s == "adaptive" || s == "atasi") return ThresholdMode::adaptive;
  if (s == "layer_constant" || s == "alista") return ThresholdMode::layer_constant;
  throw InvalidArgument("unknown threshold mode '" + s + "'");
}

/// Floor added to |z| in the adaptive threshold.
struct EpsilonRule {
  enum class Kind { fixed, relative_to_peak };
  Kind kind = Kind::relative_to_peak;
  double value = 0.005;

  static EpsilonRule fixed(double v) { return {Kind::fixed, v}; }
  static EpsilonRule relative_to_peak(double factor) { return {Kind::relative_to_peak, factor}; }

  /// Resolved floor for one measurement; never below 1e-12.
  double resolve(const CVec& y) const {
    const double e = kind == Kind::fixed ? value : value * (y.size() > 0 ? y.cwiseAbs().maxCoeff() : 0.0);
    return std::max(e, 1e-12);
  }
  bool operator==(const EpsilonRule&) const = default;
};

struct NetworkParams {
  std::vector<double> mu;
  std::vector<double> beta;
  EpsilonRule epsilon;
  ThresholdMode mode = ThresholdMode::adaptive;
  /// Geometry the parameters were trained for; 0 when unbound.
  std::uint64_t geometry_hash = 0;

  std::size_t layers() const { return mu.size(); }

  void validate() const {
    require(!mu.empty(), "network: need at least one layer");
    require(mu.size() == beta.size(), "network: mu and beta lengths differ");
    for (double m : mu) require(std::isfinite(m) && m > 0.0, "network: every mu must be > 0");
    for (double b : beta) require(std::isfinite(b), "network: non-finite beta");
    require(epsilon.value > 0.0, "network: epsilon rule value must be > 0");
  }

  bool operator==(const NetworkParams&) const = default;
};

/// Uniform initial parameters.
inline NetworkParams make_params(std::size_t layers, double mu, double beta, ThresholdMode mode,
                                 EpsilonRule eps = EpsilonRule::relative_to_peak(0.005)) {
  NetworkParams p;
  p.mu.assign(layers, mu);
  p.beta.assign(layers, beta);
  p.epsilon = eps;
  p.mode = mode;
  return p;
}

/// theta_i = mu / (|z_i| + eps)
inline Vec adaptive_threshold(const CVec& z, double mu, double epsilon) {
  require(mu > 0.0, "adaptive_threshold: mu must be > 0");
  require(epsilon > 0.0, "adaptive_threshold: epsilon must be > 0");
  Vec theta(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) theta(i) = mu / (std::abs(z(i)) + epsilon);
  return theta;
}

/// Intermediate quantities of one layer.
struct LayerState {
  CVec z;
  Vec theta;
  CVec gamma;
  CVec d;
};

struct LayerTrace {
  double epsilon = 0.0;
  /// layers[k-1] holds the outputs of layer k.
  std::vector<LayerState> layers;
};

/// One unrolled layer: gradient step with the scaled weight matrix, threshold,
/// shrinkage, then residual refresh.
inline LayerState layer_step(const CVec& gamma_prev, const CVec& d_prev, const CMat& w, double beta, double mu,
                             double epsilon, const CMat& a, const CVec& y,
                             ThresholdMode mode = ThresholdMode::adaptive) {
  require(gamma_prev.size() == a.cols() && w.cols() == a.cols() && w.rows() == a.rows(),
          "layer_step: dimension mismatch");
  require(d_prev.size() == a.rows() && y.size() == a.rows(), "layer_step: dimension mismatch");
  LayerState s;
  s.z = gamma_prev - beta * (w.adjoint() * d_prev);
  if (mode == ThresholdMode::adaptive) {
    s.theta = adaptive_threshold(s.z, mu, epsilon);
  } else {
    require(mu > 0.0, "layer_step: mu must be > 0");
    s.theta = Vec::Constant(s.z.size(), mu);
  }
  s.gamma.resize(s.z.size());
  for (Eigen::Index i = 0; i < s.z.size(); ++i) s.gamma(i) = soft_threshold(s.z(i), s.theta(i));
  s.d = a * s.gamma - y;
  return s;
}

struct ForwardResult {
  ReflectivityProfile gamma;
  std::optional<LayerTrace> trace;
};

inline void check_binding(const SteeringMatrix& a, const AlistaWeights& w, const NetworkParams& p) {
  if (w.geometry_hash != a.geometry_hash)
    throw InvalidArgument("network: weight matrix was precomputed for a different geometry");
  if (p.geometry_hash != 0 && p.geometry_hash != a.geometry_hash)
    throw InvalidArgument("network: parameters were trained for a different geometry");
  require(w.w.rows() == a.channels() && w.w.cols() == a.grid_size(), "network: weight matrix shape mismatch");
}

/// Runs the K-layer network from gamma^0 = 0, D^0 = -y.
inline ForwardResult forward(const PixelMeasurement& y, const SteeringMatrix& a, const AlistaWeights& weights,
                             const NetworkParams& params, bool capture_trace = false) {
  params.validate();
  check_binding(a, weights, params);
  require(y.size() == a.channels(), "forward: measurement length does not match steering matrix");
  const double eps = params.epsilon.resolve(y);
  ForwardResult out;
  if (capture_trace) {
    out.trace.emplace();
    out.trace->epsilon = eps;
    out.trace->layers.reserve(params.layers());
  }
  CVec gamma = CVec::Zero(a.grid_size());
  CVec d = -y;
  for (std::size_t k = 0; k < params.layers(); ++k) {
    LayerState s = layer_step(gamma, d, weights.w, params.beta[k], params.mu[k], eps, a.entries, y, params.mode);
    gamma = s.gamma;
    d = s.d;
    if (capture_trace) out.trace->layers.push_back(std::move(s));
  }
  out.gamma = std::move(gamma);
  return out;
}

}  // namespace tomosar
