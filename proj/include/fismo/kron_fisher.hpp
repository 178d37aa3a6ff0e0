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

#include <span>

#include "fismo/matops.hpp"
#include "fismo/matrix.hpp"

namespace fismo {

/// Kronecker factors (P, Q) of the damped Fisher approximation F ~ Q (x) P,
/// together with cached spectral functions of each factor.
///
/// After every `update_preconditioners` call: tr(P) = m, tr(Q) = n, both
/// factors are SPD, and the caches agree with the factors.
class PreconditionerPair;
PreconditionerPair update_preconditioners(const PreconditionerPair& state, const Matrix& g);

class PreconditionerPair {
 public:
  /// Throws InvalidInput if mu <= 0 or gamma is outside [0, 1].
  PreconditionerPair(SpdMatrix p, SpdMatrix q, double mu, double gamma);

  /// P_0 = I_m, Q_0 = I_n.
  static PreconditionerPair identity(std::size_t m, std::size_t n, double mu,
                                     double gamma);

  const SpdMatrix& p() const noexcept { return p_; }
  const SpdMatrix& q() const noexcept { return q_; }
  const Matrix& p_inv_sqrt() const noexcept { return pf_.inv_sqrt; }
  const Matrix& q_inv_sqrt() const noexcept { return qf_.inv_sqrt; }
  const Matrix& p_inv() const noexcept { return pf_.inverse; }
  const Matrix& q_inv() const noexcept { return qf_.inverse; }
  const Matrix& p_sqrt() const noexcept { return pf_.sqrt; }
  const Matrix& q_sqrt() const noexcept { return qf_.sqrt; }
  double p_min_eigenvalue() const noexcept { return pf_.min_eigenvalue; }
  double q_min_eigenvalue() const noexcept { return qf_.min_eigenvalue; }
  double mu() const noexcept { return mu_; }
  double gamma() const noexcept { return gamma_; }
  std::size_t m() const noexcept { return p_.dim(); }
  std::size_t n() const noexcept { return q_.dim(); }

 private:
  friend PreconditionerPair update_preconditioners(const PreconditionerPair&, const Matrix&);
  PreconditionerPair(SpdMatrix p, SpdFactors pf, SpdMatrix q, SpdFactors qf, double mu,
                     double gamma);

  SpdMatrix p_;
  SpdMatrix q_;
  SpdFactors pf_;
  SpdFactors qf_;
  double mu_;
  double gamma_;
};

/// 1 - gamma = min(0.5, c_gamma * eta).
double coupled_gamma(double eta, double c_gamma);

/// D(A || B) = tr(B^{-1} A) - log det(B^{-1} A) - d, computed through
/// Cholesky factors. Throws ShapeError on dimension mismatch.
double logdet_divergence(const SpdMatrix& a, const SpdMatrix& b);

/// Empirical J(P, Q) = mean_G tr(P^{-1} G Q^{-1} G^T) + mu tr(P^{-1}) tr(Q^{-1})
///                     + n log det P + m log det Q.
double objective_J(const SpdMatrix& p, const SpdMatrix& q,
                   std::span<const Matrix> samples, double mu);

/// argmin_P J(P, Q) = (1/n) mean[G Q^{-1} G^T] + (mu tr(Q^{-1}) / n) I_m.
SpdMatrix fixed_point_P(const SpdMatrix& q, std::span<const Matrix> samples, double mu);

/// argmin_Q J(P, Q) = (1/m) mean[G^T P^{-1} G] + (mu tr(P^{-1}) / m) I_n.
SpdMatrix fixed_point_Q(const SpdMatrix& p, std::span<const Matrix> samples, double mu);

/// One Gauss-Seidel preconditioner step: the left factor is refreshed from
/// Q_{t-1}, then the right factor from the new P_t. Each step applies the
/// EMA with gamma, identity damping scaled by the previous trace, and trace
/// normalization followed by symmetrization.
PreconditionerPair update_preconditioners(const PreconditionerPair& state,
                                          const Matrix& g);

/// K_PQ = ||P^{-1/2}||_2 ||Q^{-1/2}||_2.
double kpq(const PreconditionerPair& state);

}  // namespace fismo
