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

#include <optional>

#include "fismo/kron_fisher.hpp"
#include "fismo/matrix.hpp"
#include "fismo/random.hpp"

namespace fismo {

/// Minimizer of <G, dW> subject to ||P^{1/2} dW Q^{1/2}||_2 <= eta.
struct LmoSolution {
  Matrix delta_w;          // -eta P^{-1/2} Polar(G~) Q^{-1/2}
  double objective_value;  // <G, delta_w> = -eta ||G~||_*
  Matrix whitened_polar;   // Polar(G~), G~ = P^{-1/2} G Q^{-1/2}
};

/// Closed-form preconditioned spectral-ball LMO, using the exact (SVD)
/// polar factor. Throws DegenerateInput for G = 0.
LmoSolution solve_lmo(const Matrix& g, const PreconditionerPair& pair, double eta);

/// Random point of the spectral ball ||Phi||_2 <= eta:
/// eta * O_1 diag(u) O_2 with Haar O_1, O_2 and u_i ~ U[0, 1].
Matrix random_spectral_ball_point(std::size_t m, std::size_t n, double eta, Rng& rng);

/// Monte-Carlo feasible-point oracle: the minimum of <G, P^{-1/2} Phi Q^{-1/2}>
/// over `trials` feasible Phi. If `first_phi` is given it is used as the first
/// trial. The result is never below the closed-form optimum.
double feasible_oracle(const Matrix& g, const PreconditionerPair& pair, double eta,
                       int trials, Rng& rng,
                       const std::optional<Matrix>& first_phi = std::nullopt);

}  // namespace fismo
