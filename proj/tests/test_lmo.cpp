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
#include "fismo/lmo.hpp"
#include "fismo/polar.hpp"

using namespace fismo;

namespace {

Eigen::MatrixXd to_eigen(const Matrix& a) {
  Eigen::MatrixXd e(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) e(i, j) = a(i, j);
  return e;
}

}  // namespace

TEST_CASE("LMO value equals -eta times the nuclear norm of the whitened gradient (Eigen oracle)") {
  Rng rng(41);
  for (int k = 0; k < 25; ++k) {
    const std::size_t m = 2 + rng.index(5), n = 2 + rng.index(5);
    const SpdMatrix p = rng.spd(m), q = rng.spd(n);
    const PreconditionerPair pair(p, q, 0.01, 0.9);
    const Matrix g = rng.gaussian_matrix(m, n);
    const double eta = 0.3;
    const auto sol = solve_lmo(g, pair, eta);

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(to_eigen(p)), eq(to_eigen(q));
    const Eigen::MatrixXd gw =
        ep.operatorInverseSqrt() * to_eigen(g) * eq.operatorInverseSqrt();
    const double nuc = Eigen::JacobiSVD<Eigen::MatrixXd>(gw).singularValues().sum();
    CHECK(sol.objective_value == doctest::Approx(-eta * nuc).epsilon(1e-12));
    CHECK(frobenius_inner(g, sol.delta_w) == doctest::Approx(-eta * nuc).epsilon(1e-12));

    // Feasible and on the boundary of the preconditioned spectral ball.
    const Matrix phi = matmul(pair.p_sqrt(), sol.delta_w, pair.q_sqrt());
    CHECK(spectral_norm(phi) == doctest::Approx(eta).epsilon(1e-12));

    // No random feasible point does better.
    CHECK(feasible_oracle(g, pair, eta, 2000, rng) >= sol.objective_value - 1e-12);
  }
}

TEST_CASE("identity preconditioners reduce the LMO to -eta Polar(G)") {
  Rng rng(42);
  const Matrix g = rng.gaussian_matrix(4, 6);
  const auto pair = PreconditionerPair::identity(4, 6, 0.01, 0.9);
  const auto sol = solve_lmo(g, pair, 0.5);
  CHECK(max_abs_diff(sol.delta_w, -0.5 * polar_exact(g)) < 1e-13);
}

TEST_CASE("feasible oracle evaluates the supplied candidate first") {
  Rng rng(43);
  const Matrix g = rng.gaussian_matrix(3, 3);
  const auto pair = PreconditionerPair::identity(3, 3, 0.01, 0.9);
  const Matrix opt = -1.0 * polar_exact(g);
  CHECK(feasible_oracle(g, pair, 1.0, 1, rng, opt) ==
        doctest::Approx(-nuclear_norm(g)).epsilon(1e-13));
}

TEST_CASE("random spectral-ball points are feasible") {
  Rng rng(44);
  for (int k = 0; k < 50; ++k) {
    CHECK(spectral_norm(random_spectral_ball_point(4, 5, 0.7, rng)) <= 0.7 * (1 + 1e-12));
  }
}

TEST_CASE("LMO errors") {
  Rng rng(45);
  const auto pair = PreconditionerPair::identity(3, 2, 0.01, 0.9);
  CHECK_THROWS_AS(solve_lmo(Matrix(3, 2), pair, 0.1), DegenerateInput);
  CHECK_THROWS_AS(solve_lmo(Matrix(2, 3, 1.0), pair, 0.1), ShapeError);
  CHECK_THROWS_AS(solve_lmo(Matrix(3, 2, 1.0), pair, 0.0), InvalidInput);
  CHECK_THROWS_AS(feasible_oracle(Matrix(3, 2, 1.0), pair, 0.1, 0, rng), InvalidInput);
}
