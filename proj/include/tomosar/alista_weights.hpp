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

#include "tomosar/errors.hpp"
#include "tomosar/geometry.hpp"

namespace tomosar {

/// Analytic weight matrix shared by every layer of the unrolled solvers.
struct AlistaWeights {
  CMat w;
  double tikhonov_delta = 0.0;
  /// max_i |w_i^H a_i - 1|
  double constraint_residual = 0.0;
  /// ||W^H A||_F^2
  double objective_value = 0.0;
  std::uint64_t geometry_hash = 0;
};

struct WeightOptions {
  double delta = 0.0;
  /// Retry with delta = 1e-8 * trace(G) / N when G is (near) singular.
  bool auto_fallback = true;
};

/// ||W^H A||_F^2
inline double coherence_objective(const CMat& w, const CMat& a) {
  require(w.rows() == a.rows() && w.cols() == a.cols(), "coherence_objective: W and A shapes differ");
  return (w.adjoint() * a).squaredNorm();
}

inline double constraint_residual(const CMat& w, const CMat& a) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i)
    worst = std::max(worst, std::abs(w.col(i).dot(a.col(i)) - 1.0));
  return worst;
}

/// Minimizes ||W^H A||_F^2 subject to w_i^H a_i = 1 for every column.
///
/// With G = A A^H + delta*I the problem separates per column into
/// min w^H G w s.t. w^H a_i = 1, whose minimizer is G^-1 a_i / (a_i^H G^-1 a_i).
/// One Cholesky factorization of G serves all L columns.
inline AlistaWeights precompute_w(const SteeringMatrix& a, const WeightOptions& opt = {}) {
  require(opt.delta >= 0.0, "precompute_w: delta must be >= 0");
  const CMat& m = a.entries;
  require(m.size() > 0, "precompute_w: empty steering matrix");
  const CMat gram = m * m.adjoint();
  const Eigen::Index n = gram.rows();

  auto factor = [&](double delta, Eigen::LLT<CMat>& llt) {
    llt.compute(gram + delta * CMat::Identity(n, n));
    if (llt.info() != Eigen::Success) return false;
    // Reciprocal condition estimate from the Cholesky diagonal.
    const Eigen::VectorXd d = llt.matrixL().toDenseMatrix().diagonal().real();
    const double ratio = d.minCoeff() / d.maxCoeff();
    return std::isfinite(ratio) && ratio * ratio > 1e-12;
  };

  double delta = opt.delta;
  Eigen::LLT<CMat> llt;
  if (!factor(delta, llt)) {
    if (delta == 0.0 && !opt.auto_fallback)
      throw NumericalError("precompute_w: A A^H is singular or ill-conditioned; supply a positive delta");
    delta = std::max(delta, 1e-8 * gram.trace().real() / static_cast<double>(n));
    if (!factor(delta, llt)) throw NumericalError("precompute_w: regularized Gram matrix is not positive definite");
  }

  AlistaWeights out;
  out.w = llt.solve(m);
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    const cplx denom = m.col(i).dot(out.w.col(i));  // a_i^H G^-1 a_i, real positive
    out.w.col(i) /= std::conj(denom);
  }
  out.tikhonov_delta = delta;
  out.constraint_residual = constraint_residual(out.w, m);
  out.objective_value = coherence_objective(out.w, m);
  out.geometry_hash = a.geometry_hash;
  return out;
}

}  // namespace tomosar
