// Copyright 2026 The FISMO Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "fismo/error.hpp"
#include "fismo/optimizers.hpp"
#include "fismo/random.hpp"

using namespace fismo;

namespace {

using E = Eigen::MatrixXd;

E to_eigen(const Matrix& a) {
  E e(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) e(i, j) = a(i, j);
  return e;
}

double max_diff(const Matrix& a, const E& b) { return (to_eigen(a) - b).cwiseAbs().maxCoeff(); }

E eigen_polar(const E& m) {
  const Eigen::JacobiSVD<E> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().transpose();
}

E inv_sqrt(const E& a) { return Eigen::SelfAdjointEigenSolver<E>(a).operatorInverseSqrt(); }

E normalized_ema(const E& prev, const E& fresh, double gamma) {
  E t = gamma * prev + (1 - gamma) * fresh;
  t *= double(prev.rows()) / t.trace();
  return 0.5 * (t + t.transpose());
}

// FISMO written out in Eigen with the exact polar factor.
struct ReferenceFismo {
  E w, m, p, q;
  double eta, beta, gamma, mu;

  void step(const E& g) {
    const auto rows = double(p.rows()), cols = double(q.rows());
    p = normalized_ema(p, g * q.inverse() * g.transpose() / cols +
                              mu * p.trace() / rows * E::Identity(p.rows(), p.rows()),
                       gamma);
    q = normalized_ema(q, g.transpose() * p.inverse() * g / rows +
                              mu * q.trace() / cols * E::Identity(q.rows(), q.rows()),
                       gamma);
    const E pi = inv_sqrt(p), qi = inv_sqrt(q);
    m = beta * m + (1 - beta) * pi * g * qi;
    w -= eta * pi * eigen_polar(m) * qi;
  }
};

}  // namespace

TEST_CASE("FISMO follows an independent Eigen implementation") {
  Rng rng(51);
  FismoHyper h;
  h.eta = 0.05;
  h.beta = 0.9;
  h.mu = 0.02;
  h.gamma = 0.8;
  h.polar_backend = PolarBackend::exact;
  const Matrix w0 = rng.gaussian_matrix(5, 3);
  FismoState s = FismoState::init(w0, h);
  ReferenceFismo ref{to_eigen(w0), E::Zero(5, 3), E::Identity(5, 5), E::Identity(3, 3),
                     h.eta, h.beta, 0.8, h.mu};
  for (int t = 0; t < 30; ++t) {
    const Matrix g = rng.gaussian_matrix(5, 3);
    s = fismo_step(s, g).state;
    ref.step(to_eigen(g));
    CHECK(max_diff(s.weights, ref.w) < 1e-9);
  }
  CHECK(max_diff(s.precond.p(), ref.p) < 1e-10);
  CHECK(s.step_count == 30);
}

TEST_CASE("momentum equals the discounted sum of whitened gradients") {
  Rng rng(52);
  FismoHyper h;
  h.beta = 0.7;
  FismoState s = FismoState::init(Matrix(4, 4), h);
  std::vector<Matrix> whitened;
  for (int t = 0; t < 12; ++t) {
    auto r = fismo_step(s, rng.gaussian_matrix(4, 4));
    whitened.push_back(r.trace.whitened_grad);
    s = std::move(r.state);
  }
  Matrix expected(4, 4);
  const std::size_t big_t = whitened.size();
  for (std::size_t k = 0; k < big_t; ++k) {
    expected.add_scaled(whitened[k], (1 - h.beta) * std::pow(h.beta, double(big_t - 1 - k)));
  }
  CHECK(max_abs_diff(s.momentum, expected) < 1e-13);
}

TEST_CASE("Muon matches an Eigen reference and FISMO with gamma = 1 reduces to it") {
  Rng rng(53);
  BaselineHyper mh;
  mh.kind = BaselineKind::muon;
  mh.lr = 0.03;
  mh.momentum = 0.9;
  mh.polar_backend = PolarBackend::exact;
  FismoHyper fh;
  fh.eta = 0.03;
  fh.beta = 0.9;
  fh.gamma = 1.0;
  fh.polar_backend = PolarBackend::exact;
  const Matrix w0 = rng.gaussian_matrix(6, 4);
  BaselineState muon = BaselineState::init(w0, mh);
  FismoState fismo = FismoState::init(w0, fh);
  E w = to_eigen(w0), m = E::Zero(6, 4);
  for (int t = 0; t < 100; ++t) {
    const Matrix g = rng.gaussian_matrix(6, 4);
    m = 0.9 * m + 0.1 * to_eigen(g);
    w -= 0.03 * eigen_polar(m);
    muon = muon_step(muon, g).state;
    fismo = fismo_step(fismo, g).state;
  }
  CHECK(max_diff(muon.weights, w) < 1e-10);
  CHECK(max_abs_diff(fismo.weights, muon.weights) < 1e-10);
}

TEST_CASE("AdamW follows the bias-corrected element-wise recurrence") {
  BaselineHyper h;
  h.kind = BaselineKind::adamw;
  h.lr = 0.1;
  h.weight_decay = 0.5;
  BaselineState s = BaselineState::init(Matrix{{1.0}}, h);
  double w = 1.0, m = 0.0, v = 0.0;
  const double grads[] = {0.3, -1.2, 2.0, 0.0, 0.7};
  for (int t = 1; t <= 5; ++t) {
    const double g = grads[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mhat = m / (1 - std::pow(0.9, t));
    const double vhat = v / (1 - std::pow(0.999, t));
    w *= 1 - 0.1 * 0.5;
    w -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    s = adamw_step(s, Matrix{{g}}).state;
    CHECK(s.weights(0, 0) == doctest::Approx(w).epsilon(1e-14));
  }
  // The first step has magnitude lr regardless of gradient scale.
  BaselineState fresh = BaselineState::init(Matrix{{0.0}}, BaselineHyper{.kind = BaselineKind::adamw, .lr = 0.1});
  CHECK(adamw_step(fresh, Matrix{{1e6}}).state.weights(0, 0) == doctest::Approx(-0.1).epsilon(1e-10));
}

TEST_CASE("SGD with heavy-ball momentum") {
  BaselineHyper h;
  h.kind = BaselineKind::sgd_momentum;
  h.lr = 0.1;
  h.momentum = 0.5;
  BaselineState s = BaselineState::init(Matrix{{0.0, 0.0}}, h);
  s = sgd_step(s, Matrix{{1.0, 2.0}}).state;
  s = sgd_step(s, Matrix{{1.0, 2.0}}).state;
  // buf: 1 then 1.5; w = -0.1 - 0.15
  CHECK(s.weights(0, 0) == doctest::Approx(-0.25));
  CHECK(s.weights(0, 1) == doctest::Approx(-0.5));
}

TEST_CASE("zero gradient from zero momentum skips the update") {
  FismoState s = FismoState::init(Matrix(3, 3, 1.0), FismoHyper{});
  const auto r = fismo_step(s, Matrix(3, 3));
  CHECK(r.trace.skipped);
  CHECK(r.state.weights == s.weights);
  CHECK(r.state.step_count == 1);
}

TEST_CASE("steps never modify their input state") {
  Rng rng(54);
  FismoState s = FismoState::init(rng.gaussian_matrix(3, 2), FismoHyper{});
  const FismoState copy = s;
  const auto r = fismo_step(s, rng.gaussian_matrix(3, 2));
  CHECK(s.weights == copy.weights);
  CHECK(s.momentum == copy.momentum);
  CHECK(s.precond.p().matrix() == copy.precond.p().matrix());
  CHECK(r.state.weights != s.weights);
}

TEST_CASE("update direction of FISMO is orthogonal in whitened coordinates") {
  Rng rng(55);
  FismoHyper h;
  h.polar_backend = PolarBackend::exact;
  FismoState s = FismoState::init(rng.gaussian_matrix(5, 5), h);
  for (int t = 0; t < 20; ++t) s = fismo_step(s, rng.gaussian_matrix(5, 5)).state;
  const auto r = fismo_step(s, rng.gaussian_matrix(5, 5));
  const Matrix whitened_dir =
      matmul(r.state.precond.p_sqrt(), r.trace.direction, r.state.precond.q_sqrt());
  CHECK(max_abs_diff(matmul_tn(whitened_dir, whitened_dir), Matrix::identity(5)) < 1e-10);
}

TEST_CASE("weight decay is decoupled") {
  FismoHyper h;
  h.weight_decay = 0.1;
  h.eta = 0.5;
  h.polar_backend = PolarBackend::exact;
  const FismoState s = FismoState::init(Matrix::identity(2) * 2.0, h);
  const auto r = fismo_step(s, Matrix::identity(2));
  Matrix expected = Matrix::identity(2) * (2.0 * (1 - 0.05));
  expected.add_scaled(r.trace.direction, -0.5);
  CHECK(max_abs_diff(r.state.weights, expected) < 1e-14);
}

TEST_CASE("optimizer errors") {
  Rng rng(56);
  FismoState s = FismoState::init(Matrix(3, 2, 1.0), FismoHyper{});
  CHECK_THROWS_AS(fismo_step(s, Matrix(2, 3)), InvalidInput);
  Matrix bad(3, 2);
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(fismo_step(s, bad), InvalidInput);
  CHECK_THROWS_AS(FismoState::init(Matrix(2, 2), FismoHyper{.eta = -1.0}), InvalidInput);
  CHECK_THROWS_AS(FismoState::init(Matrix(2, 2), FismoHyper{.beta = 1.0}), InvalidInput);
  CHECK_THROWS_AS(BaselineState::init(Matrix(2, 2), BaselineHyper{.lr = 0.0}), InvalidInput);

  BaselineHyper sgd{.kind = BaselineKind::sgd_momentum, .lr = 1e308};
  BaselineState b = BaselineState::init(Matrix(1, 1), sgd);
  CHECK_THROWS_AS(sgd_step(b, Matrix{{1e308}}), IterationDiverged);
}

TEST_CASE("variant interface dispatches and reports K_PQ only for FISMO") {
  OptimizerState f = FismoState::init(Matrix(2, 2, 1.0), FismoHyper{});
  OptimizerState b = BaselineState::init(Matrix(2, 2, 1.0), BaselineHyper{});
  CHECK(kpq_of(f).has_value());
  CHECK_FALSE(kpq_of(b).has_value());
  const auto r = step(b, Matrix::identity(2));
  CHECK(weights_of(r.state) != weights_of(b));
}
