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

#include "fismo/random.hpp"

#include <algorithm>
#include <cmath>

namespace fismo {

std::size_t Rng::index(std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

Matrix Rng::gaussian_matrix(std::size_t rows, std::size_t cols, double scale) {
  Matrix out(rows, cols);
  for (double& x : out.data()) x = scale * gaussian();
  return out;
}

Matrix Rng::orthogonal(std::size_t d) { return qr_orthonormal(gaussian_matrix(d, d)); }

Matrix Rng::with_singular_values(std::size_t rows, std::size_t cols, double largest,
                                 double smallest) {
  const std::size_t r = std::min(rows, cols);
  Matrix left = orthogonal(rows);
  Matrix right = orthogonal(cols);
  Matrix s(rows, cols);
  for (std::size_t k = 0; k < r; ++k) {
    const double frac = r == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(r - 1);
    s(k, k) = largest * std::pow(smallest / largest, frac);
  }
  return matmul_nt(matmul(left, s), right);
}

SpdMatrix Rng::spd(std::size_t d, double floor) {
  const Matrix b = gaussian_matrix(d, d);
  Matrix a = matmul_tn(b, b) / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i) a(i, i) += floor;
  return SpdMatrix(sym(a));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace fismo
