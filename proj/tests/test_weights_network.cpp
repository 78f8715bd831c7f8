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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "tomosar/tomosar.hpp"

using namespace tomosar;

namespace {

SteeringMatrix random_steering(std::uint64_t seed) {
  Rng rng(seed);
  ImagingGeometry g = scatterer_sim_geometry();
  g.baselines_m.assign(8, 0.0);
  for (std::size_t n = 1; n < 8; ++n) g.baselines_m[n] = uniform(rng, -0.4, 0.4);
  return build_steering(g);
}

CVec random_vector(Rng& rng, Eigen::Index n, double variance = 1.0) {
  CVec v(n);
  for (auto& x : v) x = complex_gaussian(rng, variance);
  return v;
}

// Random direction in the tangent space of every column constraint w_i^H a_i = 1.
CMat tangent_perturbation(Rng& rng, const CMat& a) {
  CMat p = oracle::random_matrix(rng, a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    const CVec ai = a.col(i);
    p.col(i) -= ai * (ai.dot(p.col(i)) / ai.squaredNorm());
  }
  return p;
}

}  // namespace

TEST(Weights, IdentityMatrix) {
  const SteeringMatrix a{CMat::Identity(4, 4), 0};
  const auto w = precompute_w(a);
  EXPECT_LT((w.w - CMat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_DOUBLE_EQ(coherence_objective(CMat::Identity(4, 4), CMat::Identity(4, 4)), 4.0);
}

TEST(Weights, OrthonormalRowsGiveScaledColumns) {
  const SteeringMatrix a{build_steering(scatterer_sim_geometry()).entries / std::sqrt(128.0), 0};
  const auto w = precompute_w(a);
  for (Eigen::Index i = 0; i < a.grid_size(); ++i) {
    const CVec expect = a.entries.col(i) / a.entries.col(i).squaredNorm();
    EXPECT_LT((w.w.col(i) - expect).cwiseAbs().maxCoeff(), 1e-10);
  }
  EXPECT_LT(w.constraint_residual, 1e-12);
}

TEST(Weights, ObjectiveIsHomogeneous) {
  Rng rng(2);
  const CMat w = oracle::random_matrix(rng, 8, 20), a = oracle::random_matrix(rng, 8, 20);
  const cplx c(0.3, -1.7);
  EXPECT_NEAR(coherence_objective(c * w, a), std::norm(c) * coherence_objective(w, a),
              1e-10 * coherence_objective(w, a));
  EXPECT_THROW(coherence_objective(w, oracle::random_matrix(rng, 8, 21)), InvalidArgument);
}

TEST(Weights, ConstraintAndKktOnRandomSteering) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto a = random_steering(seed);
    const auto w = precompute_w(a);
    EXPECT_LT(w.constraint_residual, 1e-8);
    EXPECT_EQ(w.tikhonov_delta, 0.0);
    const CMat g = a.entries * a.entries.adjoint();
    for (Eigen::Index i = 0; i < a.grid_size(); ++i) {
      const CVec grad = 2.0 * g * w.w.col(i);
      const CVec ai = a.entries.col(i);
      const CVec proj = grad - ai * (ai.dot(grad) / ai.squaredNorm());
      EXPECT_LT(proj.norm(), 1e-6);
    }
  }
}

TEST(Weights, NoFeasiblePerturbationImproves) {
  const auto a = random_steering(4);
  const auto w = precompute_w(a);
  const double f0 = coherence_objective(w.w, a.entries);
  EXPECT_NEAR(f0, w.objective_value, 1e-12 * f0);
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const double scale = std::pow(10.0, uniform(rng, -6.0, 0.0));
    const CMat cand = w.w + scale * tangent_perturbation(rng, a.entries);
    ASSERT_LT(constraint_residual(cand, a.entries), 1e-8);
    EXPECT_GE(coherence_objective(cand, a.entries), f0 * (1.0 - 1e-8));
  }
}

TEST(Weights, ColumnPhaseInvariance) {
  const auto a = random_steering(5);
  SteeringMatrix rotated = a;
  Rng rng(5);
  Eigen::VectorXcd phase(a.grid_size());
  for (auto& p : phase) p = std::polar(1.0, uniform(rng, 0.0, 2.0 * std::numbers::pi));
  rotated.entries = a.entries * phase.asDiagonal();
  const auto w1 = precompute_w(a), w2 = precompute_w(rotated);
  for (Eigen::Index i = 0; i < a.grid_size(); ++i) {
    EXPECT_NEAR(std::abs(w1.w.col(i).dot(a.entries.col(i))), std::abs(w2.w.col(i).dot(rotated.entries.col(i))), 1e-12);
    EXPECT_LT((w2.w.col(i) - w1.w.col(i) * phase(i)).norm(), 1e-9);
  }
}

TEST(Weights, SingularGramNeedsDelta) {
  CMat m(3, 6);
  Rng rng(1);
  m.topRows(2) = oracle::random_matrix(rng, 2, 6);
  m.row(2) = m.row(0);
  const SteeringMatrix a{m, 0};
  EXPECT_THROW(precompute_w(a, {0.0, false}), NumericalError);
  const auto w = precompute_w(a, {0.0, true});
  EXPECT_GT(w.tikhonov_delta, 0.0);
  const auto explicit_delta = precompute_w(a, {0.5, false});
  EXPECT_EQ(explicit_delta.tikhonov_delta, 0.5);
  EXPECT_LT(explicit_delta.constraint_residual, 1e-10);
  EXPECT_THROW(precompute_w(a, {-1.0, true}), InvalidArgument);
}

TEST(Weights, Deterministic) {
  const auto a = build_steering(scatterer_sim_geometry());
  EXPECT_EQ(precompute_w(a).w, precompute_w(a).w);
}

TEST(Threshold, Examples) {
  CVec z(3);
  z << 0.0, cplx(0.0, 0.03), 1e9;
  const Vec t = adaptive_threshold(z, 0.02, 0.01);
  EXPECT_DOUBLE_EQ(t(0), 2.0);
  EXPECT_NEAR(t(1), 0.5, 1e-15);
  EXPECT_LT(t(2), 1e-10);
  EXPECT_THROW(adaptive_threshold(z, 0.0, 0.01), InvalidArgument);
  EXPECT_THROW(adaptive_threshold(z, 0.1, 0.0), InvalidArgument);
}

TEST(Threshold, MonotoneInMagnitude) {
  Rng rng(3);
  const CVec z = random_vector(rng, 200);
  const Vec t = adaptive_threshold(z, 0.3, 0.01);
  std::vector<Eigen::Index> idx(200);
  for (Eigen::Index i = 0; i < 200; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return std::abs(z(x)) < std::abs(z(y)); });
  for (std::size_t i = 1; i < idx.size(); ++i) EXPECT_LE(t(idx[i]), t(idx[i - 1]));
}

class NetworkTest : public ::testing::Test {
 protected:
  SteeringMatrix a = build_steering(scatterer_sim_geometry());
  AlistaWeights w = precompute_w(a);
};

TEST_F(NetworkTest, NullInputsStayNull) {
  const auto s = layer_step(CVec::Zero(128), CVec::Zero(8), w.w, 0.5, 0.1, 0.01, a.entries, CVec::Zero(8));
  EXPECT_EQ(s.gamma, CVec::Zero(128));
  const auto p = make_params(5, 0.1, 0.3, ThresholdMode::adaptive);
  EXPECT_EQ(forward(CVec::Zero(8), a, w, p).gamma, CVec::Zero(128));
}

TEST_F(NetworkTest, ZeroBetaRethresholdsPrevious) {
  Rng rng(4);
  const CVec g = random_vector(rng, 128), d = random_vector(rng, 8), y = random_vector(rng, 8);
  const auto s = layer_step(g, d, w.w, 0.0, 0.05, 0.01, a.entries, y);
  EXPECT_EQ(s.z, g);
  EXPECT_LT((s.d - (a.entries * s.gamma - y)).norm(), 1e-12);
}

TEST_F(NetworkTest, TwoLayersComposeByHand) {
  Rng rng(5);
  CVec gamma = CVec::Zero(128);
  gamma(20) = 1.5;
  gamma(31) = cplx(0.0, 0.8);
  const CVec y = simulate_pixel(gamma, a, 20.0, 7);
  NetworkParams p = make_params(2, 0.0, 0.0, ThresholdMode::adaptive);
  p.mu = {2e-3, 1e-3};
  p.beta = {0.9, 0.6};
  const double eps = p.epsilon.resolve(y);
  const auto s1 = layer_step(CVec::Zero(128), -y, w.w, p.beta[0], p.mu[0], eps, a.entries, y);
  const auto s2 = layer_step(s1.gamma, s1.d, w.w, p.beta[1], p.mu[1], eps, a.entries, y);
  const auto f = forward(y, a, w, p, true);
  EXPECT_EQ(f.gamma, s2.gamma);
  ASSERT_TRUE(f.trace.has_value());
  EXPECT_EQ(f.trace->layers.back().gamma, f.gamma);
  EXPECT_EQ(f.trace->layers.size(), 2u);
  EXPECT_DOUBLE_EQ(eps, 0.005 * y.cwiseAbs().maxCoeff());
}

TEST_F(NetworkTest, DeadZoneIsExactlyZero) {
  Rng rng(6);
  const CVec y = random_vector(rng, 8);
  const auto f = forward(y, a, w, make_params(4, 0.05, 0.5, ThresholdMode::adaptive), true);
  for (const auto& s : f.trace->layers)
    for (Eigen::Index i = 0; i < s.z.size(); ++i) {
      EXPECT_GT(s.theta(i), 0.0);
      if (std::abs(s.z(i)) <= s.theta(i)) {
        EXPECT_EQ(s.gamma(i), cplx(0.0, 0.0));
      }
    }
}

TEST_F(NetworkTest, FirstLayerScalesWithInput) {
  Rng rng(7);
  const CVec y = random_vector(rng, 8);
  const auto p = make_params(1, 0.05, 0.4, ThresholdMode::adaptive);
  const auto f1 = forward(y, a, w, p, true), f3 = forward(3.0 * y, a, w, p, true);
  EXPECT_LT((f3.trace->layers[0].z - 3.0 * f1.trace->layers[0].z).norm(), 1e-12);
}

TEST_F(NetworkTest, TinyMuApproachesGradientSteps) {
  Rng rng(8);
  const CVec y = random_vector(rng, 8);
  const auto p = make_params(6, 1e-12, 0.3, ThresholdMode::adaptive);
  CVec g = CVec::Zero(128);
  for (int k = 0; k < 6; ++k) g = g - 0.3 * (w.w.adjoint() * (a.entries * g - y));
  EXPECT_LT((forward(y, a, w, p).gamma - g).norm(), 1e-8 * g.norm());
}

TEST_F(NetworkTest, LayerConstantModeUsesScalarThreshold) {
  Rng rng(9);
  const CVec y = random_vector(rng, 8);
  const auto f = forward(y, a, w, make_params(3, 0.2, 0.5, ThresholdMode::layer_constant), true);
  for (const auto& s : f.trace->layers) EXPECT_TRUE((s.theta.array() == 0.2).all());
}

TEST_F(NetworkTest, RefusesForeignGeometry) {
  const auto other = build_steering(building_sim_geometry());
  auto p = make_params(2, 0.1, 0.1, ThresholdMode::adaptive);
  EXPECT_THROW(forward(CVec::Zero(8), other, w, p), InvalidArgument);
  p.geometry_hash = other.geometry_hash;
  EXPECT_THROW(forward(CVec::Zero(8), a, w, p), InvalidArgument);
  EXPECT_THROW(forward(CVec::Zero(7), a, w, make_params(2, 0.1, 0.1, ThresholdMode::adaptive)), InvalidArgument);
  auto bad = make_params(2, 0.1, 0.1, ThresholdMode::adaptive);
  bad.mu[1] = 0.0;
  EXPECT_THROW(forward(CVec::Zero(8), a, w, bad), InvalidArgument);
  EXPECT_THROW(threshold_mode_from_string("bogus"), InvalidArgument);
}
