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

#include "fismo/matops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fismo/error.hpp"

namespace fismo {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxSweeps = 100;

void require_finite(const Matrix& a, const char* op) {
  if (!a.all_finite()) {
    throw InvalidInput(std::string(op) + ": non-finite entry");
  }
}

double dot(const std::vector<double>& x, const std::vector<double>& y) {
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) acc += x[k] * y[k];
  return acc;
}

void rotate(std::vector<double>& x, std::vector<double>& y, double c, double s) {
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xk = x[k];
    const double yk = y[k];
    x[k] = c * xk - s * yk;
    y[k] = s * xk + c * yk;
  }
}

// Smaller-magnitude root of t^2 + 2 zeta t - 1 = 0.
double jacobi_tangent(double zeta) {
  if (zeta == 0.0) return 1.0;
  const double sign = zeta > 0.0 ? 1.0 : -1.0;
  return sign / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
}

// Completes `basis` (orthonormal columns, some missing) with unit vectors
// orthogonal to every present column.
void complete_basis(std::vector<std::vector<double>>& basis,
                    std::vector<bool>& present) {
  const std::size_t dim = basis.empty() ? 0 : basis.front().size();
  std::size_t candidate = 0;
  for (std::size_t j = 0; j < basis.size(); ++j) {
    if (present[j]) continue;
    for (; candidate < dim; ++candidate) {
      std::vector<double> v(dim, 0.0);
      v[candidate] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < basis.size(); ++k) {
          if (!present[k]) continue;
          const double proj = dot(basis[k], v);
          for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * basis[k][i];
        }
      }
      const double nrm = std::sqrt(dot(v, v));
      if (nrm > 0.5) {
        for (double& x : v) x /= nrm;
        basis[j] = std::move(v);
        present[j] = true;
        ++candidate;
        break;
      }
    }
  }
}

// One-sided Jacobi on a tall matrix (rows >= cols).
SvdFactors svd_tall(const Matrix& a, bool want_vectors) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  std::vector<std::vector<double>> cols(n, std::vector<double>(m));
  std::vector<std::vector<double>> v(want_vectors ? n : 0, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) cols[j][i] = a(i, j);
    if (want_vectors) v[j][j] = 1.0;
  }

  std::vector<double> sq(n);
  const double tol = kEps * static_cast<double>(m);
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t j = 0; j < n; ++j) sq[j] = dot(cols[j], cols[j]);
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = sq[p];
        const double beta = sq[q];
        const double gamma = dot(cols[p], cols[q]);
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) {
          continue;
        }
        rotated = true;
        const double t = jacobi_tangent((beta - alpha) / (2.0 * gamma));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(cols[p], cols[q], c, s);
        if (want_vectors) rotate(v[p], v[q], c, s);
        sq[p] = alpha - t * gamma;
        sq[q] = beta + t * gamma;
      }
    }
    if (!rotated) break;
  }

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(dot(cols[j], cols[j]));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  const double sigma_max = n == 0 ? 0.0 : norms[order.front()];
  const double zero_tol = static_cast<double>(std::max(m, n)) * kEps * sigma_max;

  SvdFactors out;
  out.sigma.resize(n);
  if (!want_vectors) {
    for (std::size_t k = 0; k < n; ++k) {
      const double s = norms[order[k]];
      out.sigma[k] = s > zero_tol ? s : 0.0;
    }
    return out;
  }
  std::vector<std::vector<double>> u(n);
  std::vector<bool> present(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    if (norms[j] > zero_tol && norms[j] > 0.0) {
      out.sigma[k] = norms[j];
      u[k] = cols[j];
      for (double& x : u[k]) x /= norms[j];
      present[k] = true;
    } else {
      out.sigma[k] = 0.0;
      u[k].assign(m, 0.0);
    }
  }
  complete_basis(u, present);

  out.u = Matrix(m, n);
  out.vt = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    for (std::size_t i = 0; i < m; ++i) out.u(i, k) = u[k][i];
    for (std::size_t i = 0; i < n; ++i) out.vt(k, i) = v[j][i];
  }
  return out;
}

void apply_sign_convention(SvdFactors& f) {
  for (std::size_t k = 0; k < f.sigma.size(); ++k) {
    for (std::size_t i = 0; i < f.u.rows(); ++i) {
      const double x = f.u(i, k);
      if (std::abs(x) > 1e-12) {
        if (x < 0.0) {
          for (std::size_t r = 0; r < f.u.rows(); ++r) f.u(r, k) = -f.u(r, k);
          for (std::size_t c = 0; c < f.vt.cols(); ++c) f.vt(k, c) = -f.vt(k, c);
        }
        break;
      }
    }
  }
}

Matrix spectral_function(const SymEigen& e, auto&& f) {
  const std::size_t d = e.values.size();
  std::vector<double> fv(d);
  for (std::size_t k = 0; k < d; ++k) fv[k] = f(e.values[k]);
  Matrix out(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k)
        acc += e.vectors(i, k) * fv[k] * e.vectors(j, k);
      out(i, j) = acc;
      out(j, i) = acc;
    }
  }
  return out;
}

// Householder reduction of the symmetric matrix held in v to tridiagonal
// form. On exit v holds the accumulated orthogonal transform, d the
// diagonal and e the subdiagonal in e[1..n-1].
void tridiagonalize(Matrix& v, std::vector<double>& d, std::vector<double>& e) {
  const int n = static_cast<int>(v.rows());
  for (int j = 0; j < n; ++j) d[j] = v(n - 1, j);
  for (int i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (int k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (int j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (int k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (int j = 0; j < i; ++j) e[j] = 0.0;
      for (int j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (int k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (int j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (int j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (int j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (int k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }
  for (int i = 0; i < n - 1; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (int k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (int j = 0; j <= i; ++j) {
        double g = 0.0;
        for (int k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (int k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (int k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (int j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit QL iteration on the tridiagonal (d, e), accumulating rotations
// into v. On exit d holds the eigenvalues (unsorted).
void tridiagonal_ql(Matrix& v, std::vector<double>& d, std::vector<double>& e) {
  const int n = static_cast<int>(v.rows());
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  double f = 0.0;
  double tst1 = 0.0;
  for (int l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    int m = l;
    while (m < n) {
      if (std::abs(e[m]) <= kEps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > 60 * n) throw InvalidInput("eigh: QL iteration did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (int i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (int i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          for (int k = 0; k < n; ++k) {
            h = v(k, i + 1);
            v(k, i + 1) = s * v(k, i) + c * h;
            v(k, i) = c * v(k, i) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > kEps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace

SpdMatrix::SpdMatrix(Matrix a) : a_(std::move(a)) {
  if (!a_.is_square() || a_.rows() == 0) {
    throw InvalidInput("SpdMatrix: matrix must be square and non-empty");
  }
  require_finite(a_, "SpdMatrix");
  const double tol = 1e-12 * std::max(1.0, frobenius_norm(a_));
  for (std::size_t i = 0; i < a_.rows(); ++i)
    for (std::size_t j = i + 1; j < a_.cols(); ++j)
      if (std::abs(a_(i, j) - a_(j, i)) > tol) {
        throw InvalidInput("SpdMatrix: matrix is not symmetric");
      }
  (void)cholesky(a_);
}

SpdMatrix SpdMatrix::identity(std::size_t d) { return SpdMatrix(Matrix::identity(d)); }

SvdFactors svd(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) {
    throw InvalidInput("svd: empty matrix");
  }
  require_finite(a, "svd");
  SvdFactors f;
  if (a.rows() >= a.cols()) {
    f = svd_tall(a, true);
  } else {
    // A^T = U' S V'^T  =>  A = V' S U'^T
    SvdFactors t = svd_tall(a.transposed(), true);
    f.u = t.vt.transposed();
    f.sigma = std::move(t.sigma);
    f.vt = t.u.transposed();
  }
  apply_sign_convention(f);
  return f;
}

std::vector<double> singular_values(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) throw InvalidInput("singular_values: empty matrix");
  require_finite(a, "singular_values");
  return svd_tall(a.rows() >= a.cols() ? a : a.transposed(), false).sigma;
}

SymEigen eigh(const Matrix& input) {
  if (!input.is_square()) throw ShapeError("eigh: matrix is not square");
  require_finite(input, "eigh");
  const std::size_t d = input.rows();
  Matrix v = sym(input);
  std::vector<double> values(d), off(d);
  tridiagonalize(v, values, off);
  tridiagonal_ql(v, values, off);

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return values[x] > values[y]; });
  SymEigen out;
  out.values.resize(d);
  out.vectors = Matrix(d, d);
  for (std::size_t k = 0; k < d; ++k) {
    out.values[k] = values[order[k]];
    for (std::size_t i = 0; i < d; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

double norm(const Matrix& a, NormKind kind) {
  require_finite(a, "norm");
  switch (kind) {
    case NormKind::frobenius: {
      double acc = 0.0;
      for (double x : a.data()) acc += x * x;
      return std::sqrt(acc);
    }
    case NormKind::spectral: {
      const auto s = singular_values(a);
      return s.empty() ? 0.0 : s.front();
    }
    case NormKind::nuclear: {
      const auto s = singular_values(a);
      return std::accumulate(s.begin(), s.end(), 0.0);
    }
  }
  return 0.0;
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ShapeError("frobenius_inner: shape mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a.data()[k] * b.data()[k];
  return acc;
}

Matrix sym(const Matrix& a) {
  if (!a.is_square()) throw ShapeError("sym: matrix is not square");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    out(i, i) = a(i, i);
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      const double s = 0.5 * (a(i, j) + a(j, i));
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  return out;
}

SpdFactors spd_factors(const SpdMatrix& a) {
  const SymEigen e = eigh(a.matrix());
  const std::size_t d = a.dim();
  const double tr = trace(a.matrix());
  if (e.values.back() < 1e-14 * tr) {
    throw NearSingular("spd_factors: smallest eigenvalue " +
                       std::to_string(e.values.back()) + " below 1e-14 * trace");
  }
  const double floor = 1e-14 * tr / static_cast<double>(d);
  auto clamp = [floor](double x) { return std::max(x, floor); };
  SpdFactors out;
  out.inv_sqrt = spectral_function(e, [&](double x) { return 1.0 / std::sqrt(clamp(x)); });
  out.inverse = spectral_function(e, [&](double x) { return 1.0 / clamp(x); });
  out.sqrt = spectral_function(e, [&](double x) { return std::sqrt(clamp(x)); });
  out.min_eigenvalue = e.values.back();
  out.max_eigenvalue = e.values.front();
  return out;
}

SpdMatrix inv_sqrt(const SpdMatrix& a) { return SpdMatrix(spd_factors(a).inv_sqrt); }

Matrix cholesky(const Matrix& a) {
  if (!a.is_square()) throw ShapeError("cholesky: matrix is not square");
  const std::size_t d = a.rows();
  Matrix l(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) {
      throw InvalidInput("cholesky: matrix is not positive definite");
    }
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < d; ++i) {
      double acc = a(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
      l(i, j) = acc / l(j, j);
    }
  }
  return l;
}

double logdet_spd(const SpdMatrix& a) {
  const Matrix l = cholesky(a.matrix());
  double acc = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) acc += std::log(l(i, i));
  return 2.0 * acc;
}

Matrix qr_orthonormal(const Matrix& a) {
  if (a.rows() < a.cols()) throw ShapeError("qr_orthonormal: matrix is wide");
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  std::vector<std::vector<double>> q(n, std::vector<double>(m));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) q[j][i] = a(i, j);
    const double original = std::sqrt(dot(q[j], q[j]));
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        const double proj = dot(q[k], q[j]);
        for (std::size_t i = 0; i < m; ++i) q[j][i] -= proj * q[k][i];
      }
    }
    const double nrm = std::sqrt(dot(q[j], q[j]));
    if (!(nrm > 1e-12 * original) || nrm == 0.0) {
      throw DegenerateInput("qr_orthonormal: columns are linearly dependent");
    }
    for (double& x : q[j]) x /= nrm;
  }
  Matrix out(m, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) out(i, j) = q[j][i];
  return out;
}

}  // namespace fismo
