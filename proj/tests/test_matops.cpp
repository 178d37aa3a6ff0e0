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
#include "fismo/matops.hpp"
#include "fismo/random.hpp"

using namespace fismo;

namespace {

Eigen::MatrixXd to_eigen(const Matrix& a) {
  Eigen::MatrixXd e(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) e(i, j) = a(i, j);
  return e;
}

Matrix from_eigen(const Eigen::MatrixXd& e) {
  Matrix a(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) a(i, j) = e(i, j);
  return a;
}

}  // namespace

TEST_CASE("matrix arithmetic and products") {
  const Matrix a{{1, 2, 3}, {4, 5, 6}};
  const Matrix b{{1, 0}, {0, 1}, {1, 1}};
  CHECK(matmul(a, b) == Matrix{{4, 5}, {10, 11}});
  CHECK(matmul_tn(a, a) == matmul(a.transposed(), a));
  CHECK(matmul_nt(a, a) == matmul(a, a.transposed()));
  CHECK(trace(Matrix::identity(4)) == 4.0);
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(max_abs_diff(a, b), ShapeError);

  Matrix c = a;
  c.add_scaled(a, -1.0);
  CHECK(frobenius_norm(c) == 0.0);
}

TEST_CASE("kron and vec satisfy vec(A X B) = (B^T kron A) vec(X)") {
  Rng rng(1);
  const Matrix a = rng.gaussian_matrix(3, 2);
  const Matrix x = rng.gaussian_matrix(2, 4);
  const Matrix b = rng.gaussian_matrix(4, 5);
  const Matrix lhs = vec(matmul(a, x, b));
  const Matrix rhs = matmul(kron(b.transposed(), a), vec(x));
  CHECK(max_abs_diff(lhs, rhs) < 1e-12);
}

TEST_CASE("svd agrees with Eigen on random shapes") {
  Rng rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 1 + rng.index(9);
    const std::size_t n = 1 + rng.index(9);
    const Matrix a = rng.gaussian_matrix(m, n);
    const SvdFactors f = svd(a);
    const Eigen::JacobiSVD<Eigen::MatrixXd> ref(to_eigen(a));
    const auto& sv = ref.singularValues();
    REQUIRE(f.sigma.size() == static_cast<std::size_t>(sv.size()));
    for (std::size_t i = 0; i < f.sigma.size(); ++i) CHECK(f.sigma[i] == doctest::Approx(sv(i)).epsilon(1e-12));

    Matrix us = f.u;
    for (std::size_t i = 0; i < us.rows(); ++i)
      for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= f.sigma[j];
    CHECK(max_abs_diff(matmul(us, f.vt), a) < 1e-12);
    const std::size_t r = f.sigma.size();
    CHECK(max_abs_diff(matmul_tn(f.u, f.u), Matrix::identity(r)) < 1e-12);
    CHECK(max_abs_diff(matmul_nt(f.vt, f.vt), Matrix::identity(r)) < 1e-12);

    const auto vals = singular_values(a);
    for (std::size_t i = 0; i < r; ++i) CHECK(vals[i] == doctest::Approx(sv(i)).epsilon(1e-12));
  }
}

TEST_CASE("norms match Eigen singular values") {
  Rng rng(3);
  const Matrix a = rng.gaussian_matrix(5, 3);
  const Eigen::JacobiSVD<Eigen::MatrixXd> ref(to_eigen(a));
  CHECK(spectral_norm(a) == doctest::Approx(ref.singularValues()(0)).epsilon(1e-13));
  CHECK(nuclear_norm(a) == doctest::Approx(ref.singularValues().sum()).epsilon(1e-13));
  CHECK(frobenius_norm(a) == doctest::Approx(to_eigen(a).norm()).epsilon(1e-13));
  CHECK(frobenius_inner(a, a) == doctest::Approx(to_eigen(a).squaredNorm()).epsilon(1e-13));
}

TEST_CASE("duality inequality |<A,B>| <= ||A||_2 ||B||_*") {
  Rng rng(4);
  for (int k = 0; k < 100; ++k) {
    const Matrix a = rng.gaussian_matrix(4, 6);
    const Matrix b = rng.gaussian_matrix(4, 6);
    CHECK(std::abs(frobenius_inner(a, b)) <= spectral_norm(a) * nuclear_norm(b) * (1 + 1e-12));
    CHECK(nuclear_norm(a) <= std::sqrt(4.0) * frobenius_norm(a) * (1 + 1e-12));
  }
}

TEST_CASE("eigh agrees with Eigen's SelfAdjointEigenSolver") {
  Rng rng(5);
  for (std::size_t d : {1u, 2u, 3u, 7u, 16u, 32u}) {
    const Matrix s = sym(rng.gaussian_matrix(d, d));
    const SymEigen e = eigh(s);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(to_eigen(s));
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(e.values[i] == doctest::Approx(ref.eigenvalues()(d - 1 - i)).epsilon(1e-12).scale(1.0));
    }
    Matrix vd = e.vectors;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) vd(i, j) *= e.values[j];
    CHECK(max_abs_diff(matmul_nt(vd, e.vectors), s) < 1e-12);
  }
  CHECK_THROWS_AS(eigh(Matrix(2, 3)), ShapeError);
}

TEST_CASE("eigh handles repeated eigenvalues") {
  const Matrix a = Matrix::diagonal({2.0, 2.0, 1.0, 1.0});
  const SymEigen e = eigh(a);
  CHECK(e.values == std::vector<double>{2.0, 2.0, 1.0, 1.0});
}

TEST_CASE("spd factors against Eigen") {
  Rng rng(6);
  const SpdMatrix a = rng.spd(6);
  const SpdFactors f = spd_factors(a);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(to_eigen(a));
  CHECK(max_abs_diff(f.inv_sqrt, from_eigen(ref.operatorInverseSqrt())) < 1e-12);
  CHECK(max_abs_diff(f.sqrt, from_eigen(ref.operatorSqrt())) < 1e-12);
  CHECK(max_abs_diff(f.inverse, from_eigen(to_eigen(a).inverse())) < 1e-12);
  CHECK(f.min_eigenvalue == doctest::Approx(ref.eigenvalues()(0)).epsilon(1e-12));
  CHECK(f.max_eigenvalue == doctest::Approx(ref.eigenvalues()(5)).epsilon(1e-12));
  CHECK(max_abs_diff(inv_sqrt(a).matrix(), f.inv_sqrt) < 1e-14);
  CHECK(logdet_spd(a) == doctest::Approx(std::log(to_eigen(a).determinant())).epsilon(1e-12));

  const Matrix l = cholesky(a);
  CHECK(max_abs_diff(matmul_nt(l, l), a.matrix()) < 1e-12);
}

TEST_CASE("spd validation") {
  CHECK_THROWS_AS(SpdMatrix(Matrix{{1, 2}, {0, 1}}), InvalidInput);
  CHECK_THROWS_AS(SpdMatrix(Matrix{{1, 0}, {0, -1}}), InvalidInput);
  CHECK_THROWS_AS(cholesky(Matrix{{0, 0}, {0, 1}}), InvalidInput);
  CHECK_THROWS_AS(spd_factors(SpdMatrix(Matrix::diagonal({1.0, 1e-16}))), NearSingular);
}

TEST_CASE("qr_orthonormal yields orthonormal columns spanning the input") {
  Rng rng(7);
  const Matrix a = rng.gaussian_matrix(7, 4);
  const Matrix q = qr_orthonormal(a);
  CHECK(max_abs_diff(matmul_tn(q, q), Matrix::identity(4)) < 1e-13);
  const Matrix r = matmul_tn(q, a);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r(i, i) > 0.0);
    for (std::size_t j = 0; j < i; ++j) CHECK(std::abs(r(i, j)) < 1e-12);
  }
  CHECK(max_abs_diff(matmul(q, r), a) < 1e-12);
}

TEST_CASE("random generators are seed-reproducible") {
  Rng a(11), b(11);
  CHECK(a.gaussian_matrix(3, 3) == b.gaussian_matrix(3, 3));
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  Rng c(12);
  const Matrix w = c.with_singular_values(5, 3, 1.0, 0.01);
  const auto s = singular_values(w);
  CHECK(s.front() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.back() == doctest::Approx(0.01).epsilon(1e-10));
  const Matrix o = c.orthogonal(5);
  CHECK(max_abs_diff(matmul_tn(o, o), Matrix::identity(5)) < 1e-13);
}
