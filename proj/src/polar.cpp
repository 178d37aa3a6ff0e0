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

#include "fismo/polar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fismo/error.hpp"
#include "fismo/matops.hpp"

namespace fismo {

namespace {

constexpr double kNormalizeEps = 1e-7;

void require_nonzero(const Matrix& m, const char* op) {
  if (m.empty() || frobenius_norm(m) == 0.0) {
    throw DegenerateInput(std::string(op) + ": zero matrix has no polar factor");
  }
}

}  // namespace

void NewtonSchulzConfig::validate() const {
  if (iterations < 1 || iterations > 50) {
    throw InvalidInput("NewtonSchulzConfig: iterations must be in [1, 50], got " +
                       std::to_string(iterations));
  }
}

Matrix polar_exact(const Matrix& m) {
  require_nonzero(m, "polar_exact");
  const SvdFactors f = svd(m);
  const double tol = static_cast<double>(std::max(m.rows(), m.cols())) *
                     std::numeric_limits<double>::epsilon() * f.sigma.front();
  Matrix out(m.rows(), m.cols());
  for (std::size_t k = 0; k < f.sigma.size(); ++k) {
    if (f.sigma[k] <= tol) break;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const double uik = f.u(i, k);
      for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) += uik * f.vt(k, j);
    }
  }
  return out;
}

Matrix polar_ns(const Matrix& m, const NewtonSchulzConfig& cfg) {
  cfg.validate();
  require_nonzero(m, "polar_ns");
  if (!m.all_finite()) throw InvalidInput("polar_ns: non-finite entry");

  const bool wide = m.rows() < m.cols();
  Matrix x = wide ? m.transposed() : m;
  if (cfg.pre_normalize) x /= frobenius_norm(x) + kNormalizeEps;

  const double limit = 10.0 * std::sqrt(static_cast<double>(std::min(m.rows(), m.cols())));
  const auto [a, b, c] = cfg.quintic_coeffs;
  for (int k = 0; k < cfg.iterations; ++k) {
    const Matrix gram = matmul_tn(x, x);  // X^T X, small side
    if (cfg.variant == NsVariant::cubic) {
      Matrix next = 1.5 * x;
      next.add_scaled(matmul(x, gram), -0.5);
      x = std::move(next);
    } else {
      Matrix poly = b * gram;
      poly.add_scaled(matmul(gram, gram), c);
      Matrix next = a * x;
      next += matmul(x, poly);
      x = std::move(next);
    }
    const double fro = x.all_finite() ? frobenius_norm(x)
                                      : std::numeric_limits<double>::infinity();
    if (fro > limit) {
      throw IterationDiverged("polar_ns: ||X_" + std::to_string(k + 1) +
                              "||_F exceeded 10 sqrt(min(m, n))");
    }
  }
  return wide ? x.transposed() : x;
}

double condition_number(const Matrix& m, double rank_tol) {
  if (m.empty() || frobenius_norm(m) == 0.0) {
    throw DegenerateInput("condition_number: zero matrix");
  }
  const auto s = singular_values(m);
  const double cutoff = rank_tol * s.front();
  double smallest = s.front();
  for (double v : s)
    if (v > cutoff) smallest = v;
  return s.front() / smallest;
}

}  // namespace fismo
