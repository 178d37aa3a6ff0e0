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

#pragma once

#include <vector>

#include "fismo/matrix.hpp"

namespace fismo {

/// Symmetric positive definite matrix. Construction validates symmetry
/// (|A_ij - A_ji| <= 1e-12 * max(1, ||A||_F)) and positive definiteness
/// (Cholesky succeeds); violations throw InvalidInput.
class SpdMatrix {
 public:
  explicit SpdMatrix(Matrix a);

  static SpdMatrix identity(std::size_t d);

  std::size_t dim() const noexcept { return a_.rows(); }
  const Matrix& matrix() const noexcept { return a_; }
  operator const Matrix&() const noexcept { return a_; }  // NOLINT

 private:
  Matrix a_;
};

struct SvdFactors {
  Matrix u;                   // m x r, orthonormal columns
  std::vector<double> sigma;  // r values, nonincreasing, >= 0
  Matrix vt;                  // r x n, orthonormal rows
};

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending and
/// eigenvectors stored as the columns of `vectors`.
struct SymEigen {
  std::vector<double> values;
  Matrix vectors;
};

enum class NormKind { frobenius, spectral, nuclear };

/// Thin SVD by one-sided (Hestenes) Jacobi rotations, r = min(m, n).
/// Sign convention: the first entry of each left singular vector whose
/// magnitude exceeds 1e-12 is positive.
SvdFactors svd(const Matrix& a);
std::vector<double> singular_values(const Matrix& a);

/// Householder tridiagonalization and implicit QL. Throws ShapeError if `a` is not
/// square; only the symmetric part of `a` is used.
SymEigen eigh(const Matrix& a);

double norm(const Matrix& a, NormKind kind);
inline double frobenius_norm(const Matrix& a) { return norm(a, NormKind::frobenius); }
inline double spectral_norm(const Matrix& a) { return norm(a, NormKind::spectral); }
inline double nuclear_norm(const Matrix& a) { return norm(a, NormKind::nuclear); }

/// tr(A^T B).
double frobenius_inner(const Matrix& a, const Matrix& b);

/// (A + A^T) / 2.
Matrix sym(const Matrix& a);

/// Spectral functions of an SPD matrix computed from a single symmetric
/// eigendecomposition.
struct SpdFactors {
  Matrix inv_sqrt;
  Matrix inverse;
  Matrix sqrt;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
};

/// Throws NearSingular when the smallest eigenvalue is below 1e-14 * tr(A).
SpdFactors spd_factors(const SpdMatrix& a);

/// A^{-1/2}.
SpdMatrix inv_sqrt(const SpdMatrix& a);

/// Lower Cholesky factor; throws InvalidInput if `a` is not positive definite.
Matrix cholesky(const Matrix& a);
/// log det A via Cholesky.
double logdet_spd(const SpdMatrix& a);

/// Orthonormal factor of a thin QR of `a` (rows >= cols), with the
/// diagonal of R made positive so Gaussian inputs yield Haar samples.
Matrix qr_orthonormal(const Matrix& a);

}  // namespace fismo
