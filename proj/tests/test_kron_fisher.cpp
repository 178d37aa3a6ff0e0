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
#include "fismo/kron_fisher.hpp"
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

E ema(const E& prev, const E& fresh, double gamma) {
  E tilde = gamma * prev + (1.0 - gamma) * fresh;
  tilde *= static_cast<double>(prev.rows()) / tilde.trace();
  return 0.5 * (tilde + tilde.transpose());
}

}  // namespace

TEST_CASE("one preconditioner step matches a direct Eigen evaluation") {
  Rng rng(31);
  const std::size_t m = 5, n = 3;
  const double mu = 0.05, gamma = 0.9;
  PreconditionerPair pair(rng.spd(m), rng.spd(n), mu, gamma);
  E p = to_eigen(pair.p());
  E q = to_eigen(pair.q());
  for (int t = 0; t < 5; ++t) {
    const Matrix g = rng.gaussian_matrix(m, n);
    const E ge = to_eigen(g);
    const E l = ge * q.inverse() * ge.transpose() / double(n) +
                mu * p.trace() / double(m) * E::Identity(m, m);
    const E p_next = ema(p, l, gamma);
    // Gauss-Seidel: the right factor sees the new left factor.
    const E r = ge.transpose() * p_next.inverse() * ge / double(m) +
                mu * q.trace() / double(n) * E::Identity(n, n);
    const E q_next = ema(q, r, gamma);

    pair = update_preconditioners(pair, g);
    CHECK(max_diff(pair.p(), p_next) < 1e-11);
    CHECK(max_diff(pair.q(), q_next) < 1e-11);
    p = p_next;
    q = q_next;

    const Eigen::SelfAdjointEigenSolver<E> ep(p);
    CHECK(max_diff(pair.p_inv_sqrt(), ep.operatorInverseSqrt()) < 1e-10);
    CHECK(pair.p_min_eigenvalue() == doctest::Approx(ep.eigenvalues()(0)).epsilon(1e-10));
  }
}

TEST_CASE("invariants: trace normalization, positive definiteness, K_PQ bounds") {
  Rng rng(32);
  for (double gamma : {0.0, 0.5, 0.98, 1.0}) {
    auto pair = PreconditionerPair::identity(6, 4, 0.01, gamma);
    for (int t = 0; t < 200; ++t) {
      const Matrix g = rng.gaussian_matrix(6, 4) * std::exp(rng.gaussian() * 2.0);
      pair = update_preconditioners(pair, g);
      CHECK(trace(pair.p()) == doctest::Approx(6.0).epsilon(1e-12));
      CHECK(trace(pair.q()) == doctest::Approx(4.0).epsilon(1e-12));
      CHECK(pair.p_min_eigenvalue() > 0.0);
      CHECK(pair.q_min_eigenvalue() > 0.0);
      const double k = kpq(pair);
      CHECK(k >= 1.0 / std::sqrt(24.0));
      CHECK(k == doctest::Approx(1.0 / std::sqrt(pair.p_min_eigenvalue() *
                                                 pair.q_min_eigenvalue())).epsilon(1e-10));
    }
  }
}

TEST_CASE("gamma = 1 leaves identity preconditioners untouched") {
  Rng rng(33);
  auto pair = PreconditionerPair::identity(4, 3, 0.01, 1.0);
  for (int t = 0; t < 10; ++t) pair = update_preconditioners(pair, rng.gaussian_matrix(4, 3));
  CHECK(pair.p().matrix() == Matrix::identity(4));
  CHECK(pair.q().matrix() == Matrix::identity(3));
  CHECK(kpq(pair) == 1.0);
}

TEST_CASE("planted Kronecker structure is recovered by alternating fixed points") {
  Rng rng(34);
  const std::size_t m = 4, n = 3;
  const SpdMatrix p_true = rng.spd(m, 0.3);
  const SpdMatrix q_true = rng.spd(n, 0.3);
  const Matrix ps = spd_factors(p_true).sqrt;
  const Matrix qs = spd_factors(q_true).sqrt;
  std::vector<Matrix> samples;
  for (int i = 0; i < 20000; ++i) samples.push_back(matmul(ps, rng.gaussian_matrix(m, n), qs));

  SpdMatrix p = SpdMatrix::identity(m);
  SpdMatrix q = SpdMatrix::identity(n);
  for (int it = 0; it < 30; ++it) {
    p = fixed_point_P(q, samples, 1e-9);
    q = fixed_point_Q(p, samples, 1e-9);
  }
  const auto normalized = [](const Matrix& a) { return a * (static_cast<double>(a.rows()) / trace(a)); };
  const Matrix pn = normalized(p);
  const Matrix pt = normalized(p_true);
  const Matrix qn = normalized(q);
  const Matrix qt = normalized(q_true);
  CHECK(frobenius_norm(pn - pt) / frobenius_norm(pt) < 0.03);
  CHECK(frobenius_norm(qn - qt) / frobenius_norm(qt) < 0.03);
}

TEST_CASE("log-det divergence matches the definition and vanishes only at equality") {
  Rng rng(35);
  const SpdMatrix a = rng.spd(5);
  const SpdMatrix b = rng.spd(5);
  const E ae = to_eigen(a), be = to_eigen(b);
  const E x = be.inverse() * ae;
  const double expected = x.trace() - std::log(x.determinant()) - 5.0;
  CHECK(logdet_divergence(a, b) == doctest::Approx(expected).epsilon(1e-11));
  CHECK(logdet_divergence(a, a) == doctest::Approx(0.0).scale(1.0));
  CHECK(logdet_divergence(a, b) > 0.0);
  CHECK_THROWS_AS(logdet_divergence(rng.spd(3), rng.spd(4)), ShapeError);
}

TEST_CASE("objective J matches its definition") {
  Rng rng(36);
  const SpdMatrix p = rng.spd(3);
  const SpdMatrix q = rng.spd(2);
  std::vector<Matrix> samples{rng.gaussian_matrix(3, 2), rng.gaussian_matrix(3, 2)};
  const double mu = 0.2;
  const E pi = to_eigen(p).inverse(), qi = to_eigen(q).inverse();
  double quad = 0.0;
  for (const auto& g : samples) {
    const E ge = to_eigen(g);
    quad += (pi * ge * qi * ge.transpose()).trace();
  }
  const double expected = quad / 2.0 + mu * pi.trace() * qi.trace() +
                          2.0 * std::log(to_eigen(p).determinant()) +
                          3.0 * std::log(to_eigen(q).determinant());
  CHECK(objective_J(p, q, samples, mu) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("fixed points agree with their closed forms") {
  Rng rng(37);
  const SpdMatrix q = rng.spd(3);
  std::vector<Matrix> samples{rng.gaussian_matrix(4, 3), rng.gaussian_matrix(4, 3),
                              rng.gaussian_matrix(4, 3)};
  const double mu = 0.1;
  const E qi = to_eigen(q).inverse();
  E acc = E::Zero(4, 4);
  for (const auto& g : samples) acc += to_eigen(g) * qi * to_eigen(g).transpose();
  const E expected = acc / (3.0 * 3.0) + mu * qi.trace() / 3.0 * E::Identity(4, 4);
  CHECK(max_diff(fixed_point_P(q, samples, mu), expected) < 1e-12);
}

TEST_CASE("coupled gamma") {
  CHECK(coupled_gamma(0.02, 1.0) == doctest::Approx(0.98));
  CHECK(coupled_gamma(2.0, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("preconditioner errors") {
  Rng rng(38);
  CHECK_THROWS_AS(PreconditionerPair::identity(2, 2, 0.0, 0.9), InvalidInput);
  CHECK_THROWS_AS(PreconditionerPair::identity(2, 2, 0.1, 1.5), InvalidInput);
  const auto pair = PreconditionerPair::identity(3, 2, 0.01, 0.9);
  CHECK_THROWS_AS(update_preconditioners(pair, Matrix(2, 3)), ShapeError);
  Matrix bad(3, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(update_preconditioners(pair, bad), InvalidInput);
  CHECK_THROWS_AS(fixed_point_P(SpdMatrix::identity(2), std::vector<Matrix>{}, 0.1), InvalidInput);
  CHECK_THROWS_AS(objective_J(SpdMatrix::identity(2), SpdMatrix::identity(2),
                              std::vector<Matrix>{Matrix(3, 2)}, 0.1),
                  ShapeError);

  // A zero gradient keeps both factors SPD through the damping term.
  const auto z = update_preconditioners(pair, Matrix(3, 2));
  CHECK(z.p_min_eigenvalue() > 0.0);
}
