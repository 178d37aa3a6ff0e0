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

#include <array>

#include "fismo/matrix.hpp"

namespace fismo {

enum class NsVariant { cubic, quintic };

/// Newton-Schulz settings.
///
/// cubic:   X <- 1.5 X - 0.5 X X^T X
/// quintic: X <- a X + b X X^T X + c (X X^T)^2 X
struct NewtonSchulzConfig {
  int iterations = 5;
  NsVariant variant = NsVariant::quintic;
  std::array<double, 3> quintic_coeffs{3.4445, -4.7750, 2.0315};
  bool pre_normalize = true;

  /// Throws InvalidInput unless iterations is in [1, 50].
  void validate() const;
};

/// Polar(M) = U V^T over the singular directions with sigma_i above
/// max(m, n) * eps * sigma_1, so ||Polar(M)||_F^2 = rank(M).
/// Throws DegenerateInput for the zero matrix.
Matrix polar_exact(const Matrix& m);

/// Approximate polar factor by Newton-Schulz. Wide inputs are transposed so
/// the iteration always runs on the tall orientation. Throws
/// IterationDiverged if ||X_k||_F exceeds 10 sqrt(min(m, n)).
Matrix polar_ns(const Matrix& m, const NewtonSchulzConfig& cfg = {});

/// sigma_1 / sigma_k, where sigma_k is the smallest singular value above
/// rank_tol * sigma_1. A rank-one matrix therefore has condition number 1.
double condition_number(const Matrix& m, double rank_tol = 1e-8);

}  // namespace fismo
