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
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tomosar/alista_weights.hpp"
#include "tomosar/errors.hpp"
#include "tomosar/metrics.hpp"
#include "tomosar/network.hpp"
#include "tomosar/parallel.hpp"
#include "tomosar/random.hpp"
#include "tomosar/simulate.hpp"

namespace tomosar {

/// Mean over the batch of ||g_hat - label||^2.
inline double loss(const std::vector<CVec>& gamma_hat, const std::vector<CVec>& labels) {
  require(!gamma_hat.empty(), "loss: empty batch");
  require(gamma_hat.size() == labels.size(), "loss: batch sizes differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(gamma_hat[i].size() == labels[i].size(), "loss: profile lengths differ");
    sum += (gamma_hat[i] - labels[i]).squaredNorm();
  }
  return sum / static_cast<double>(labels.size());
}

/// Per-layer parameter gradients.
struct ParamGrad {
  std::vector<double> dmu;
  std::vector<double> dbeta;
};

/// Reverse-mode gradient of ||g^K - label||^2 with respect to every mu^k and beta^k.
///
/// Complex quantities carry gradients as dL/dRe + j dL/dIm, so a linear map
/// v = M x pulls back as g_x = M^H g_v. The shrinkage contributes zero inside
/// its dead zone (|z| <= theta) and at the kink.
inline ParamGrad backward(const LayerTrace& trace, const PixelMeasurement& y, const SteeringMatrix& a,
                          const AlistaWeights& weights, const NetworkParams& params, const CVec& label) {
  const std::size_t k_layers = params.layers();
  require(trace.layers.size() == k_layers, "backward: trace does not match parameters");
  require(label.size() == a.grid_size(), "backward: label length mismatch");
  const CMat& w = weights.w;
  const CMat& m = a.entries;
  const double eps = trace.epsilon;
  const bool adaptive = params.mode == ThresholdMode::adaptive;

  ParamGrad g{std::vector<double>(k_layers, 0.0), std::vector<double>(k_layers, 0.0)};
  CVec g_gamma = 2.0 * (trace.layers.back().gamma - label);
  CVec g_z(m.cols());
  for (std::size_t kk = k_layers; kk-- > 0;) {
    const LayerState& s = trace.layers[kk];
    const double mu = params.mu[kk];
    double g_mu = 0.0;
    for (Eigen::Index i = 0; i < s.z.size(); ++i) {
      const double r = std::abs(s.z(i));
      const double theta = s.theta(i);
      if (!(r > theta)) {
        g_z(i) = 0.0;
        continue;
      }
      const cplx unit = s.z(i) / r;
      const cplx rot = std::conj(unit) * g_gamma(i);
      const double p = rot.real();
      const double q = rot.imag();
      cplx gz = unit * cplx(p, q * (r - theta) / r);
      const double g_theta = -p;
      if (adaptive) {
        const double denom = r + eps;
        g_mu += g_theta / denom;
        gz += unit * (g_theta * (-mu / (denom * denom)));
      } else {
        g_mu += g_theta;
      }
      g_z(i) = gz;
    }
    g.dmu[kk] = g_mu;
    const CVec d_prev = kk == 0 ? CVec(-y) : trace.layers[kk - 1].d;
    const CVec u = w.adjoint() * d_prev;
    g.dbeta[kk] = -g_z.dot(u).real();
    if (kk == 0) break;
    const CVec g_d = w * (-params.beta[kk] * g_z);
    g_gamma = g_z + m.adjoint() * g_d;
  }
  return g;
}

/// Per-sample loss and gradients in one call.
inline double loss_and_gradient(const Sample& sample, const SteeringMatrix& a, const AlistaWeights& weights,
                                const NetworkParams& params, ParamGrad& grad) {
  ForwardResult f = forward(sample.y, a, weights, params, true);
  grad = backward(*f.trace, sample.y, a, weights, params, sample.label);
  return (f.gamma - sample.label).squaredNorm();
}

struct GradientRow {
  std::string name;
  std::size_t layer = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  /// Some |z_i| of an affected layer sits within the margin of its threshold.
  bool kink_adjacent = false;
};

struct GradientReport {
  std::vector<GradientRow> rows;

  /// Fraction of non-flagged rows whose relative error is below tol.
  double pass_fraction(double tol) const {
    std::size_t total = 0, ok = 0;
    for (const auto& r : rows) {
      if (r.kink_adjacent) continue;
      ++total;
      if (r.rel_error < tol) ++ok;
    }
    return total == 0 ? 1.0 : static_cast<double>(ok) / static_cast<double>(total);
  }
};

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-10});
  return std::abs(analytic - numeric) / scale;
}

/// Central differences of f at x with step h for every coordinate.
inline std::vector<double> central_differences(const std::function<double(const std::vector<double>&)>& f,
                                               std::vector<double> x, double h) {
  require(h > 0.0, "central_differences: h must be > 0");
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Compares backward() against central differences for one sample; 2K rows,
/// mu^1..mu^K then beta^1..beta^K.
inline GradientReport finite_diff_check(const NetworkParams& params, const Sample& sample, const SteeringMatrix& a,
                                        const AlistaWeights& weights, double h = 1e-6, double kink_margin = 1e-5) {
  require(h > 0.0, "finite_diff_check: h must be > 0");
  const std::size_t k_layers = params.layers();
  ParamGrad analytic;
  ForwardResult base = forward(sample.y, a, weights, params, true);
  analytic = backward(*base.trace, sample.y, a, weights, params, sample.label);

  // A layer is kink-adjacent when any element sits within the margin of its threshold.
  std::vector<bool> layer_kink(k_layers, false);
  for (std::size_t k = 0; k < k_layers; ++k) {
    const auto& s = base.trace->layers[k];
    for (Eigen::Index i = 0; i < s.z.size(); ++i)
      if (std::abs(std::abs(s.z(i)) - s.theta(i)) <= kink_margin) layer_kink[k] = true;
  }
  std::vector<bool> downstream_kink(k_layers, false);
  bool any = false;
  for (std::size_t k = k_layers; k-- > 0;) {
    any = any || layer_kink[k];
    downstream_kink[k] = any;
  }

  std::vector<double> flat(params.mu);
  flat.insert(flat.end(), params.beta.begin(), params.beta.end());
  auto f = [&](const std::vector<double>& x) {
    NetworkParams p = params;
    std::copy(x.begin(), x.begin() + static_cast<long>(k_layers), p.mu.begin());
    std::copy(x.begin() + static_cast<long>(k_layers), x.end(), p.beta.begin());
    for (double& m : p.mu) m = std::max(m, std::numeric_limits<double>::min());
    return (forward(sample.y, a, weights, p).gamma - sample.label).squaredNorm();
  };
  const std::vector<double> numeric = central_differences(f, flat, h);

  GradientReport report;
  for (std::size_t j = 0; j < 2 * k_layers; ++j) {
    const bool is_mu = j < k_layers;
    const std::size_t k = is_mu ? j : j - k_layers;
    GradientRow row;
    row.name = (is_mu ? "mu" : "beta") + std::to_string(k + 1);
    row.layer = k + 1;
    row.analytic = is_mu ? analytic.dmu[k] : analytic.dbeta[k];
    row.numeric = numeric[j];
    row.rel_error = relative_error(row.analytic, row.numeric);
    row.kink_adjacent = downstream_kink[k];
    report.rows.push_back(row);
  }
  return report;
}

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  double learning_rate = 0.001;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double sgd_momentum = 0.9;
  int epochs = 200;
  std::size_t batch_size = 64;
  /// Reduce-on-plateau on the epoch training loss.
  int lr_patience = 10;
  double lr_factor = 0.5;
  std::uint64_t seed = 0;
  bool clamp_nonneg = true;
  /// Optimize log(mu) instead of mu (gradients are mapped by the chain rule).
  bool log_mu = false;
  /// With a validation set, return the parameters of the epoch with the
  /// lowest validation NMSE instead of the last epoch.
  bool keep_best_validation = false;
  std::size_t workers = 1;

  void validate() const {
    require(learning_rate > 0.0, "train: learning_rate must be > 0");
    require(batch_size >= 1, "train: batch_size must be >= 1");
    require(epochs >= 0, "train: epochs must be >= 0");
    require(lr_factor > 0.0 && lr_factor <= 1.0, "train: lr_factor must lie in (0, 1]");
  }
};

/// Optimizer moments over the 2K trainable coordinates (log-mu or mu, then beta).
struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  double learning_rate = 0.0;
  double best_loss = std::numeric_limits<double>::infinity();
  int plateau_epochs = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_nmse = std::numeric_limits<double>::quiet_NaN();
  double learning_rate = 0.0;
};

struct TrainResult {
  NetworkParams params;
  std::vector<EpochLog> log;
  OptimizerState optimizer;
  /// Epoch whose parameters were returned under keep_best_validation, else 0.
  int best_epoch = 0;
};

/// Mean per-sample NMSE of the network over samples with a nonzero label.
inline double mean_nmse(const Dataset& data, const SteeringMatrix& a, const AlistaWeights& weights,
                        const NetworkParams& params, std::size_t workers = 1) {
  std::vector<double> per(data.size(), 0.0);
  std::vector<char> used(data.size(), 0);
  parallel_for(data.size(), workers, [&](std::size_t i) {
    if (data[i].label.squaredNorm() == 0.0) return;
    per[i] = nmse(forward(data[i].y, a, weights, params).gamma, data[i].label);
    used[i] = 1;
  });
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (used[i]) {
      sum += per[i];
      ++n;
    }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

/// Initial parameters: beta^k = beta0 and mu^k = 0.1 * median(|A^H y|) * eps,
/// medians taken over a calibration batch of at most 256 samples.
inline NetworkParams init_params(const Dataset& calibration, const SteeringMatrix& a, const AlistaWeights& weights,
                                 std::size_t layers, ThresholdMode mode,
                                 EpsilonRule eps = EpsilonRule::relative_to_peak(0.005), double beta0 = 0.01) {
  require(!calibration.empty(), "init_params: empty calibration batch");
  const std::size_t count = std::min<std::size_t>(calibration.size(), 256);
  std::vector<double> mags, epss;
  for (std::size_t i = 0; i < count; ++i) {
    const CVec u = a.entries.adjoint() * calibration[i].y;
    for (Eigen::Index l = 0; l < u.size(); ++l) mags.push_back(std::abs(u(l)));
    epss.push_back(eps.resolve(calibration[i].y));
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  double mu = 0.1 * median(mags) * median(epss);
  if (!(mu > 0.0)) mu = 1e-6;
  NetworkParams p = make_params(layers, mu, beta0, mode, eps);
  p.geometry_hash = weights.geometry_hash;
  return p;
}

namespace detail {

inline std::vector<double> to_coords(const NetworkParams& p, bool log_mu) {
  std::vector<double> x;
  for (double m : p.mu) x.push_back(log_mu ? std::log(m) : m);
  x.insert(x.end(), p.beta.begin(), p.beta.end());
  return x;
}

inline void from_coords(const std::vector<double>& x, NetworkParams& p, bool log_mu, bool clamp) {
  const std::size_t k = p.layers();
  for (std::size_t i = 0; i < k; ++i) p.mu[i] = log_mu ? std::exp(x[i]) : x[i];
  for (std::size_t i = 0; i < k; ++i) p.beta[i] = x[k + i];
  for (double& m : p.mu) m = std::max(m, 1e-8);
  if (clamp)
    for (double& b : p.beta) b = std::max(b, 0.0);
}

}  // namespace detail

/// Mini-batch training of the 2K layer scalars.
inline TrainResult train(const Dataset& dataset, const SteeringMatrix& a, const AlistaWeights& weights,
                         const NetworkParams& net_init, const TrainConfig& cfg, const Dataset* validation = nullptr,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  net_init.validate();
  check_binding(a, weights, net_init);
  require(!dataset.empty(), "train: dataset is empty");

  TrainResult res;
  res.params = net_init;
  const std::size_t k = net_init.layers();
  std::vector<double> x = detail::to_coords(net_init, cfg.log_mu);
  res.optimizer.m.assign(2 * k, 0.0);
  res.optimizer.v.assign(2 * k, 0.0);
  res.optimizer.learning_rate = cfg.learning_rate;

  double best_val = std::numeric_limits<double>::infinity();
  NetworkParams best = net_init;

  std::vector<std::size_t> order(dataset.size());
  std::vector<ParamGrad> grads(std::min(cfg.batch_size, dataset.size()));
  std::vector<double> losses(grads.size());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t bs = std::min(cfg.batch_size, order.size() - start);
      parallel_for(bs, cfg.workers, [&](std::size_t j) {
        losses[j] = loss_and_gradient(dataset[order[start + j]], a, weights, res.params, grads[j]);
      });
      // Fixed-order reduction keeps runs with different worker counts identical.
      std::vector<double> g(2 * k, 0.0);
      double batch_loss = 0.0;
      for (std::size_t j = 0; j < bs; ++j) {
        batch_loss += losses[j];
        for (std::size_t l = 0; l < k; ++l) {
          g[l] += grads[j].dmu[l];
          g[k + l] += grads[j].dbeta[l];
        }
      }
      for (double& v : g) v /= static_cast<double>(bs);
      epoch_loss += batch_loss;
      if (cfg.log_mu)
        for (std::size_t l = 0; l < k; ++l) g[l] *= res.params.mu[l];

      auto& st = res.optimizer;
      ++st.step;
      const double lr = st.learning_rate;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (cfg.optimizer == OptimizerKind::adam) {
          st.m[i] = cfg.adam_beta1 * st.m[i] + (1.0 - cfg.adam_beta1) * g[i];
          st.v[i] = cfg.adam_beta2 * st.v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
          const double mh = st.m[i] / (1.0 - std::pow(cfg.adam_beta1, static_cast<double>(st.step)));
          const double vh = st.v[i] / (1.0 - std::pow(cfg.adam_beta2, static_cast<double>(st.step)));
          x[i] -= lr * mh / (std::sqrt(vh) + cfg.adam_eps);
        } else {
          st.m[i] = cfg.sgd_momentum * st.m[i] + g[i];
          x[i] -= lr * st.m[i];
        }
      }
      detail::from_coords(x, res.params, cfg.log_mu, cfg.clamp_nonneg);
      x = detail::to_coords(res.params, cfg.log_mu);
    }
    epoch_loss /= static_cast<double>(dataset.size());
    if (!std::isfinite(epoch_loss)) {
      std::ostringstream msg;
      msg << "train: loss diverged at epoch " << epoch << " (lr " << res.optimizer.learning_rate << "; mu";
      for (double m : res.params.mu) msg << ' ' << m;
      msg << "; beta";
      for (double b : res.params.beta) msg << ' ' << b;
      msg << ")";
      throw NumericalError(msg.str());
    }
    EpochLog entry{epoch, epoch_loss, std::numeric_limits<double>::quiet_NaN(), res.optimizer.learning_rate};
    if (validation && !validation->empty()) entry.val_nmse = mean_nmse(*validation, a, weights, res.params, cfg.workers);
    res.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (cfg.keep_best_validation && entry.val_nmse < best_val) {
      best_val = entry.val_nmse;
      best = res.params;
      res.best_epoch = epoch;
    }

    auto& st = res.optimizer;
    if (epoch_loss < st.best_loss * (1.0 - 1e-4)) {
      st.best_loss = epoch_loss;
      st.plateau_epochs = 0;
    } else if (++st.plateau_epochs > cfg.lr_patience) {
      st.learning_rate *= cfg.lr_factor;
      st.plateau_epochs = 0;
    }
  }
  if (res.best_epoch > 0) res.params = best;
  return res;
}

}  // namespace tomosar
