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

#include "fismo/lmo.hpp"

#include <algorithm>
#include <limits>

#include "fismo/error.hpp"
#include "fismo/polar.hpp"

namespace fismo {

LmoSolution solve_lmo(const Matrix& g, const PreconditionerPair& pair, double eta) {
  if (g.rows() != pair.m() || g.cols() != pair.n()) {
    throw ShapeError("solve_lmo: gradient shape does not match preconditioners");
  }
  if (!(eta > 0.0)) throw InvalidInput("solve_lmo: eta must be positive");
  if (!g.all_finite()) throw InvalidInput("solve_lmo: non-finite gradient");
  if (frobenius_norm(g) == 0.0) throw DegenerateInput("solve_lmo: zero gradient");

  const Matrix whitened = matmul(pair.p_inv_sqrt(), g, pair.q_inv_sqrt());
  LmoSolution out;
  out.whitened_polar = polar_exact(whitened);
  out.delta_w = -eta * matmul(pair.p_inv_sqrt(), out.whitened_polar, pair.q_inv_sqrt());
  out.objective_value = -eta * nuclear_norm(whitened);
  return out;
}

Matrix random_spectral_ball_point(std::size_t m, std::size_t n, double eta, Rng& rng) {
  const Matrix left = rng.orthogonal(m);
  const Matrix right = rng.orthogonal(n);
  Matrix s(m, n);
  for (std::size_t k = 0; k < std::min(m, n); ++k) s(k, k) = eta * rng.uniform();
  return matmul(left, s, right);
}

double feasible_oracle(const Matrix& g, const PreconditionerPair& pair, double eta,
                       int trials, Rng& rng, const std::optional<Matrix>& first_phi) {
  if (trials < 1) throw InvalidInput("feasible_oracle: trials must be >= 1");
  const std::size_t m = pair.m();
  const std::size_t n = pair.n();
  double best = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    const Matrix phi = (t == 0 && first_phi) ? *first_phi
                                              : random_spectral_ball_point(m, n, eta, rng);
    const Matrix delta_w = matmul(pair.p_inv_sqrt(), phi, pair.q_inv_sqrt());
    best = std::min(best, frobenius_inner(g, delta_w));
  }
  return best;
}

}  // namespace fismo
