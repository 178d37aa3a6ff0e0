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
#include "fismo/polar.hpp"
#include "fismo/random.hpp"

using namespace fismo;

namespace {

Matrix eigen_polar(const Matrix& a) {
  Eigen::MatrixXd e(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) e(i, j) = a(i, j);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(e, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd p = svd.matrixU() * svd.matrixV().transpose();
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = p(i, j);
  return out;
}

}  // namespace

TEST_CASE("exact polar matches U V^T from Eigen") {
  Rng rng(21);
  for (int k = 0; k < 30; ++k) {
    const Matrix a = rng.gaussian_matrix(2 + rng.index(6), 2 + rng.index(6));
    CHECK(max_abs_diff(polar_exact(a), eigen_polar(a)) < 1e-12);
  }
}

TEST_CASE("exact polar of an orthogonal matrix is itself") {
  Rng rng(22);
  const Matrix o = rng.orthogonal(5);
  CHECK(max_abs_diff(polar_exact(o), o) < 1e-13);
}

TEST_CASE("exact polar of a rank-deficient matrix has Frobenius norm sqrt(rank)") {
  Rng rng(23);
  const Matrix a = matmul(rng.gaussian_matrix(6, 2), rng.gaussian_matrix(2, 5));
  const Matrix p = polar_exact(a);
  CHECK(frobenius_norm(p) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(condition_number(p) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("polar factor maximizes <M, O> over the spectral ball: <M, Polar(M)> = ||M||_*") {
  Rng rng(24);
  const Matrix m = rng.gaussian_matrix(4, 7);
  CHECK(frobenius_inner(m, polar_exact(m)) == doctest::Approx(nuclear_norm(m)).epsilon(1e-13));
}

TEST_CASE("cubic Newton-Schulz converges to the exact factor") {
  Rng rng(25);
  NewtonSchulzConfig cfg;
  cfg.variant = NsVariant::cubic;
  cfg.iterations = 30;
  for (int k = 0; k < 20; ++k) {
    const Matrix a = rng.with_singular_values(3 + rng.index(5), 3 + rng.index(5), 2.0, 0.05);
    CHECK(max_abs_diff(polar_ns(a, cfg), polar_exact(a)) < 1e-10);
  }
}

TEST_CASE("quintic Newton-Schulz is approximate and more iterations sharpen it") {
  Rng rng(26);
  const Matrix a = rng.with_singular_values(16, 16, 1.0, 1e-3);
  NewtonSchulzConfig five;
  NewtonSchulzConfig seven;
  seven.iterations = 7;
  const double k5 = condition_number(polar_ns(a, five));
  const double k7 = condition_number(polar_ns(a, seven));
  CHECK(k5 > 1.0);
  CHECK(k7 < k5);
  // The quintic's fixed band keeps singular values near 1 but not at 1.
  for (double s : singular_values(polar_ns(a, seven))) {
    CHECK(s > 0.3);
    CHECK(s < 1.3);
  }
}

TEST_CASE("wide inputs are handled through the transpose") {
  Rng rng(27);
  const Matrix a = rng.gaussian_matrix(3, 8);
  NewtonSchulzConfig cfg;
  cfg.variant = NsVariant::cubic;
  cfg.iterations = 40;
  CHECK(max_abs_diff(polar_ns(a, cfg), polar_exact(a)) < 1e-10);
}

TEST_CASE("polar errors") {
  CHECK_THROWS_AS(polar_exact(Matrix(3, 2)), DegenerateInput);
  CHECK_THROWS_AS(polar_ns(Matrix(3, 2)), DegenerateInput);
  NewtonSchulzConfig bad;
  bad.iterations = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad.iterations = 51;
  CHECK_THROWS_AS(polar_ns(Matrix::identity(2), bad), InvalidInput);

  // Without pre-normalization a large input leaves the basin and blows up.
  NewtonSchulzConfig raw;
  raw.variant = NsVariant::cubic;
  raw.pre_normalize = false;
  raw.iterations = 10;
  CHECK_THROWS_AS(polar_ns(Matrix::identity(3) * 10.0, raw), IterationDiverged);
}

TEST_CASE("condition number conventions") {
  CHECK(condition_number(Matrix::diagonal({4.0, 2.0, 1.0})) == doctest::Approx(4.0));
  CHECK(condition_number(Matrix{{1, 2}, {2, 4}}) == doctest::Approx(1.0));
}
