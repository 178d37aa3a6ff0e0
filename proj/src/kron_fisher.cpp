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

#include "fismo/kron_fisher.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>

#include "fismo/error.hpp"

namespace fismo {

namespace {

void require_samples(std::span<const Matrix> samples, std::size_t m, std::size_t n,
                     const char* op) {
  if (samples.empty()) throw InvalidInput(std::string(op) + ": no samples");
  for (const Matrix& g : samples) {
    if (g.rows() != m || g.cols() != n) {
      throw ShapeError(std::string(op) + ": sample shape does not match factors");
    }
    if (!g.all_finite()) throw InvalidInput(std::string(op) + ": non-finite sample");
  }
}

// Solves L L^T X = B for X given the lower Cholesky factor L.
Matrix cholesky_solve(const Matrix& l, const Matrix& b) {
  const std::size_t d = l.rows();
  Matrix x = b;
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < d; ++i) {
      double acc = x(i, c);
      for (std::size_t k = 0; k < i; ++k) acc -= l(i, k) * x(k, c);
      x(i, c) = acc / l(i, i);
    }
    for (std::size_t i = d; i-- > 0;) {
      double acc = x(i, c);
      for (std::size_t k = i + 1; k < d; ++k) acc -= l(k, i) * x(k, c);
      x(i, c) = acc / l(i, i);
    }
  }
  return x;
}

Matrix add_identity(Matrix a, double s) {
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += s;
  return a;
}

// Trace-normalized EMA: sym((d / tr(P~)) P~) with P~ = gamma prev + (1 - gamma) fresh.
SpdMatrix ema_normalize(const Matrix& prev, const Matrix& fresh, double gamma) {
  Matrix tilde = gamma * prev;
  tilde.add_scaled(fresh, 1.0 - gamma);
  const double tr = trace(tilde);
  // PD inputs make the trace positive; a non-positive value means the state
  // was corrupted upstream.
  assert(tr > 0.0);
  if (!(tr > 0.0)) throw InvalidInput("update_preconditioners: non-positive trace");
  tilde *= static_cast<double>(prev.rows()) / tr;
  return SpdMatrix(sym(tilde));
}

}  // namespace

PreconditionerPair::PreconditionerPair(SpdMatrix p, SpdMatrix q, double mu, double gamma)
    : p_(std::move(p)),
      q_(std::move(q)),
      pf_(spd_factors(p_)),
      qf_(spd_factors(q_)),
      mu_(mu),
      gamma_(gamma) {
  if (!(mu > 0.0)) throw InvalidInput("PreconditionerPair: mu must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw InvalidInput("PreconditionerPair: gamma must lie in [0, 1]");
  }
}

PreconditionerPair::PreconditionerPair(SpdMatrix p, SpdFactors pf, SpdMatrix q, SpdFactors qf,
                                       double mu, double gamma)
    : p_(std::move(p)),
      q_(std::move(q)),
      pf_(std::move(pf)),
      qf_(std::move(qf)),
      mu_(mu),
      gamma_(gamma) {}

PreconditionerPair PreconditionerPair::identity(std::size_t m, std::size_t n, double mu,
                                                double gamma) {
  return PreconditionerPair(SpdMatrix::identity(m), SpdMatrix::identity(n), mu, gamma);
}

double coupled_gamma(double eta, double c_gamma) {
  return 1.0 - std::min(0.5, c_gamma * eta);
}

double logdet_divergence(const SpdMatrix& a, const SpdMatrix& b) {
  if (a.dim() != b.dim()) throw ShapeError("logdet_divergence: dimension mismatch");
  const Matrix lb = cholesky(b.matrix());
  const double tr = trace(cholesky_solve(lb, a.matrix()));
  const double logdet = logdet_spd(a) - logdet_spd(b);
  return std::max(0.0, tr - logdet - static_cast<double>(a.dim()));
}

double objective_J(const SpdMatrix& p, const SpdMatrix& q,
                   std::span<const Matrix> samples, double mu) {
  const std::size_t m = p.dim();
  const std::size_t n = q.dim();
  require_samples(samples, m, n, "objective_J");
  const SpdFactors pf = spd_factors(p);
  const SpdFactors qf = spd_factors(q);
  double quad = 0.0;
  for (const Matrix& g : samples) {
    // tr(P^{-1} G Q^{-1} G^T) = <P^{-1} G, G Q^{-1}>
    quad += frobenius_inner(matmul(pf.inverse, g), matmul(g, qf.inverse));
  }
  quad /= static_cast<double>(samples.size());
  return quad + mu * trace(pf.inverse) * trace(qf.inverse) +
         static_cast<double>(n) * logdet_spd(p) + static_cast<double>(m) * logdet_spd(q);
}

SpdMatrix fixed_point_P(const SpdMatrix& q, std::span<const Matrix> samples, double mu) {
  if (samples.empty()) throw InvalidInput("fixed_point_P: no samples");
  const std::size_t m = samples.front().rows();
  const std::size_t n = q.dim();
  require_samples(samples, m, n, "fixed_point_P");
  const SpdFactors qf = spd_factors(q);
  Matrix acc(m, m);
  for (const Matrix& g : samples) acc += matmul_nt(matmul(g, qf.inverse), g);
  acc /= static_cast<double>(samples.size()) * static_cast<double>(n);
  return SpdMatrix(sym(add_identity(std::move(acc), mu * trace(qf.inverse) / n)));
}

SpdMatrix fixed_point_Q(const SpdMatrix& p, std::span<const Matrix> samples, double mu) {
  if (samples.empty()) throw InvalidInput("fixed_point_Q: no samples");
  const std::size_t m = p.dim();
  const std::size_t n = samples.front().cols();
  require_samples(samples, m, n, "fixed_point_Q");
  const SpdFactors pf = spd_factors(p);
  Matrix acc(n, n);
  for (const Matrix& g : samples) acc += matmul(matmul_tn(g, pf.inverse), g);
  acc /= static_cast<double>(samples.size()) * static_cast<double>(m);
  return SpdMatrix(sym(add_identity(std::move(acc), mu * trace(pf.inverse) / m)));
}

PreconditionerPair update_preconditioners(const PreconditionerPair& state,
                                          const Matrix& g) {
  const std::size_t m = state.m();
  const std::size_t n = state.n();
  if (g.rows() != m || g.cols() != n) {
    throw ShapeError("update_preconditioners: gradient is " + std::to_string(g.rows()) +
                     "x" + std::to_string(g.cols()) + ", expected " +
                     std::to_string(m) + "x" + std::to_string(n));
  }
  if (!g.all_finite()) throw InvalidInput("update_preconditioners: non-finite gradient");
  const double mu = state.mu();
  const double gamma = state.gamma();
  const double dm = static_cast<double>(m);
  const double dn = static_cast<double>(n);

  // L_t = (1/n) G Q_{t-1}^{-1} G^T + mu tr(P_{t-1})/m I
  Matrix left = matmul_nt(matmul(g, state.q_inv()), g) / dn;
  left = add_identity(std::move(left), mu * trace(state.p().matrix()) / dm);
  SpdMatrix p_next = ema_normalize(state.p().matrix(), left, gamma);
  SpdFactors pf = spd_factors(p_next);

  // R_t = (1/m) G^T P_t^{-1} G + mu tr(Q_{t-1})/n I
  Matrix right = matmul(matmul_tn(g, pf.inverse), g) / dm;
  right = add_identity(std::move(right), mu * trace(state.q().matrix()) / dn);
  SpdMatrix q_next = ema_normalize(state.q().matrix(), right, gamma);
  SpdFactors qf = spd_factors(q_next);

  return PreconditionerPair(std::move(p_next), std::move(pf), std::move(q_next), std::move(qf),
                            mu, gamma);
}

double kpq(const PreconditionerPair& state) {
  return spectral_norm(state.p_inv_sqrt()) * spectral_norm(state.q_inv_sqrt());
}

}  // namespace fismo
