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
#include <complex>
#include <limits>
#include <vector>

#include "tomosar/errors.hpp"
#include "tomosar/geometry.hpp"

namespace tomosar {

/// Complex soft threshold: (x/|x|) * max(|x| - theta, 0), with 0 mapped to 0.
inline cplx soft_threshold(cplx x, double theta) {
  if (!(theta >= 0.0)) throw InvalidArgument("soft_threshold: theta must be >= 0");
  const double r = std::abs(x);
  if (r <= theta) return {0.0, 0.0};
  return x * ((r - theta) / r);
}

/// Largest eigenvalue of A^H A by power iteration.
inline double largest_eigenvalue(const CMat& a, int max_iters = 200, double tol = 1e-10) {
  require(a.size() > 0, "largest_eigenvalue: empty matrix");
  CVec v = CVec::Ones(a.cols()) / std::sqrt(static_cast<double>(a.cols()));
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    CVec w = a.adjoint() * (a * v);
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (std::abs(next - lambda) <= tol * next) return next;
    lambda = next;
  }
  // Rayleigh quotient is accurate even when the iterate has not settled to tol.
  const double rq = (a * v).squaredNorm();
  if (!std::isfinite(rq)) throw NumericalError("largest_eigenvalue: power iteration diverged");
  return std::max(rq, lambda);
}

struct IstaConfig {
  double reg_lambda = 0.1;
  /// Inverse step size; 0 selects 1.01 * lambda_max(A^H A).
  double step_L = 0.0;
  int max_iters = 200;
  /// Relative-change stop; 0 runs all iterations.
  double tol = 1e-8;
};

struct IstaResult {
  ReflectivityProfile gamma;
  int iterations = 0;
  double step_L = 0.0;
  /// Objective after each iteration (only when requested).
  std::vector<double> objective;
};

/// 0.5*||y - A g||^2 + lambda*||g||_1
inline double lasso_objective(const CVec& y, const CMat& a, const CVec& gamma, double lambda) {
  return 0.5 * (y - a * gamma).squaredNorm() + lambda * gamma.cwiseAbs().sum();
}

inline IstaResult ista_detailed(const PixelMeasurement& y, const SteeringMatrix& a, const IstaConfig& cfg,
                                bool record_objective = false) {
  require(y.size() == a.channels(), "ista: measurement length does not match steering matrix");
  require(cfg.reg_lambda > 0.0, "ista: reg_lambda must be > 0");
  require(cfg.max_iters >= 0, "ista: max_iters must be >= 0");
  const CMat& m = a.entries;
  IstaResult res;
  res.step_L = cfg.step_L;
  if (res.step_L <= 0.0) res.step_L = 1.01 * largest_eigenvalue(m);
  require(res.step_L > 0.0, "ista: step_L must be > 0");
  const double theta = cfg.reg_lambda / res.step_L;
  const double inv_l = 1.0 / res.step_L;
  CVec gamma = CVec::Zero(m.cols());
  CVec next(m.cols());
  const CVec aty = m.adjoint() * y;
  const CMat gram = m.adjoint() * m;
  for (int it = 0; it < cfg.max_iters; ++it) {
    next.noalias() = gamma + inv_l * (aty - gram * gamma);
    for (Eigen::Index i = 0; i < next.size(); ++i) next(i) = soft_threshold(next(i), theta);
    const double change = (next - gamma).norm();
    gamma.swap(next);
    res.iterations = it + 1;
    if (record_objective) res.objective.push_back(lasso_objective(y, m, gamma, cfg.reg_lambda));
    if (cfg.tol > 0.0 && change <= cfg.tol * std::max(gamma.norm(), std::numeric_limits<double>::min())) break;
  }
  res.gamma = std::move(gamma);
  return res;
}

inline ReflectivityProfile ista(const PixelMeasurement& y, const SteeringMatrix& a, const IstaConfig& cfg) {
  return ista_detailed(y, a, cfg).gamma;
}

struct OmpConfig {
  int max_sparsity = 4;
  double residual_tol = 0.0;
};

struct OmpResult {
  ReflectivityProfile gamma;
  std::vector<Eigen::Index> support;
  /// Residual norm before the first and after every iteration.
  std::vector<double> residual_norms;
  /// True when a numerically dependent column ended the pursuit.
  bool stopped_early = false;
};

inline OmpResult omp_detailed(const PixelMeasurement& y, const SteeringMatrix& a, const OmpConfig& cfg) {
  require(y.size() == a.channels(), "omp: measurement length does not match steering matrix");
  require(cfg.max_sparsity >= 1, "omp: max_sparsity must be >= 1");
  const CMat& m = a.entries;
  OmpResult res;
  res.gamma = CVec::Zero(m.cols());
  CVec residual = y;
  res.residual_norms.push_back(residual.norm());
  const double y_norm = y.norm();
  if (y_norm == 0.0) return res;
  const Eigen::Index max_k = std::min<Eigen::Index>(cfg.max_sparsity, m.rows());
  CVec coef;
  CMat selected(m.rows(), 0);
  while (static_cast<Eigen::Index>(res.support.size()) < max_k) {
    if (residual.norm() <= cfg.residual_tol) break;
    Eigen::VectorXd corr = ((m.adjoint() * residual).cwiseAbs2()).eval();
    for (Eigen::Index s : res.support) corr(s) = -1.0;
    Eigen::Index best = 0;
    if (corr.maxCoeff(&best) <= 0.0) break;
    // Reject a column already (numerically) in the span of the selection.
    CVec col = m.col(best);
    if (selected.cols() > 0) {
      CVec proj = selected * selected.colPivHouseholderQr().solve(col);
      if ((col - proj).norm() <= 1e-10 * col.norm()) {
        res.stopped_early = true;
        break;
      }
    }
    selected.conservativeResize(Eigen::NoChange, selected.cols() + 1);
    selected.col(selected.cols() - 1) = col;
    res.support.push_back(best);
    coef = selected.colPivHouseholderQr().solve(y);
    residual = y - selected * coef;
    res.residual_norms.push_back(residual.norm());
  }
  for (std::size_t k = 0; k < res.support.size(); ++k) res.gamma(res.support[k]) = coef(static_cast<Eigen::Index>(k));
  return res;
}

inline ReflectivityProfile omp(const PixelMeasurement& y, const SteeringMatrix& a, const OmpConfig& cfg) {
  return omp_detailed(y, a, cfg).gamma;
}

/// Keep singular values with index < rank (0 = all) and s_i > rel_threshold * s_max.
struct SvdTruncation {
  std::size_t rank = 0;
  double rel_threshold = 1e-12;
};

struct SvdResult {
  ReflectivityProfile gamma;
  std::size_t kept = 0;
  /// Set when the truncation removed every singular value.
  bool all_excluded = false;
};

/// Precomputed truncated pseudoinverse V * S_r^-1 * U^H.
class SvdInverse {
 public:
  SvdInverse(const SteeringMatrix& a, const SvdTruncation& trunc) {
    const Eigen::Index max_rank = std::min(a.channels(), a.grid_size());
    require(trunc.rank <= static_cast<std::size_t>(max_rank), "svd_inverse: rank exceeds min(N, L)");
    Eigen::JacobiSVD<CMat> svd(a.entries, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const std::size_t limit = trunc.rank == 0 ? static_cast<std::size_t>(max_rank) : trunc.rank;
    const double floor = trunc.rel_threshold * (s.size() > 0 ? s(0) : 0.0);
    for (Eigen::Index i = 0; i < s.size() && static_cast<std::size_t>(i) < limit; ++i)
      if (s(i) > floor && s(i) > 0.0) ++kept_;
    const auto r = static_cast<Eigen::Index>(kept_);
    pinv_ = svd.matrixV().leftCols(r) * s.head(r).cwiseInverse().asDiagonal() * svd.matrixU().leftCols(r).adjoint();
    if (r == 0) pinv_ = CMat::Zero(a.grid_size(), a.channels());
  }

  SvdResult solve(const PixelMeasurement& y) const {
    require(y.size() == pinv_.cols(), "svd_inverse: measurement length does not match steering matrix");
    return {pinv_ * y, kept_, kept_ == 0};
  }

  std::size_t kept() const { return kept_; }

 private:
  CMat pinv_;
  std::size_t kept_ = 0;
};

inline SvdResult svd_inverse_detailed(const PixelMeasurement& y, const SteeringMatrix& a, const SvdTruncation& t) {
  return SvdInverse(a, t).solve(y);
}

inline ReflectivityProfile svd_inverse(const PixelMeasurement& y, const SteeringMatrix& a, const SvdTruncation& t) {
  return svd_inverse_detailed(y, a, t).gamma;
}

}  // namespace tomosar
