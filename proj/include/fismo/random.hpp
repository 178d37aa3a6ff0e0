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

#include <cstdint>
#include <random>

#include "fismo/matops.hpp"
#include "fismo/matrix.hpp"

namespace fismo {

/// The single explicit random source. Every stochastic component takes one
/// of these (or a seed to build one) so runs are reproducible from the seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double gaussian() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  std::uint64_t next_u64() { return engine_(); }

  Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double scale = 1.0);
  /// Haar-distributed orthogonal d x d matrix (QR of a Gaussian matrix).
  Matrix orthogonal(std::size_t d);
  /// U diag(s) V^T with Haar U, V and singular values log-spaced from
  /// `largest` down to `smallest`.
  Matrix with_singular_values(std::size_t rows, std::size_t cols, double largest,
                              double smallest);
  /// B^T B / d + floor * I for Gaussian B.
  SpdMatrix spd(std::size_t d, double floor = 0.1);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// SplitMix64 finalizer; derives independent stream seeds from one seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace fismo
