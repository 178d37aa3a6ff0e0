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

#include "fismo/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fismo/error.hpp"
#include "fismo/matops.hpp"
#include "fismo/random.hpp"

namespace fismo {

namespace {

// In-place softmax of row r of z, returning log-sum-exp.
double softmax_row(Matrix& z, std::size_t r) {
  double mx = z(r, 0);
  for (std::size_t j = 1; j < z.cols(); ++j) mx = std::max(mx, z(r, j));
  double sum = 0.0;
  for (std::size_t j = 0; j < z.cols(); ++j) {
    z(r, j) = std::exp(z(r, j) - mx);
    sum += z(r, j);
  }
  for (std::size_t j = 0; j < z.cols(); ++j) z(r, j) /= sum;
  return mx + std::log(sum);
}

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(idx[r], c);
  }
  return out;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

// Gaussian clusters: x_i = mean_{y_i} + noise * N(0, I), labels uniform.
void make_clusters(std::size_t classes, std::size_t dim, std::size_t count, double separation,
                   double noise, Rng& rng, Matrix& x, std::vector<std::size_t>& labels) {
  const Matrix means = rng.gaussian_matrix(classes, dim, separation);
  x = Matrix(count, dim);
  labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    labels[i] = rng.index(classes);
    for (std::size_t j = 0; j < dim; ++j) {
      x(i, j) = means(labels[i], j) + noise * rng.gaussian();
    }
  }
}

}  // namespace

void Problem::check_params(const Params& w, const char* op) const {
  const auto specs = params();
  if (w.size() != specs.size()) {
    throw ShapeError(std::string(op) + ": expected " + std::to_string(specs.size()) +
                     " parameters, got " + std::to_string(w.size()));
  }
  for (std::size_t k = 0; k < specs.size(); ++k) {
    if (w[k].rows() != specs[k].rows || w[k].cols() != specs[k].cols) {
      throw ShapeError(std::string(op) + ": parameter " + specs[k].name + " has wrong shape");
    }
  }
}

Params Problem::full_gradient(const Params& w) const {
  const auto idx = all_indices(n_samples());
  return batch_gradient(w, idx);
}

std::pair<double, Params> Problem::evaluate(const Params& w) const {
  return {loss(w), full_gradient(w)};
}

Params Problem::minibatch_gradient(const Params& w, std::size_t batch_size,
                                   std::uint64_t seed) const {
  if (batch_size == 0) throw InvalidInput("minibatch_gradient: batch size must be >= 1");
  Rng rng(seed);
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = rng.index(n_samples());
  return batch_gradient(w, idx);
}

Params Problem::sample_gradient(const Params& w, std::size_t i) const {
  if (i >= n_samples()) throw InvalidInput("sample_gradient: index out of range");
  const std::size_t one[1] = {i};
  return batch_gradient(w, one);
}

// ---------------------------------------------------------------- quadratic

QuadraticProblem::QuadraticProblem(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (m < 2 || n < 2) throw InvalidInput("quadratic_problem: m and n must be >= 2");
  Rng rng(seed);
  a_ = rng.with_singular_values(m, m, 1.0, 0.1);
  b_ = rng.with_singular_values(n, n, 1.0, 0.2);
  w_star_ = rng.gaussian_matrix(m, n);
  ata_ = matmul_tn(a_, a_);
  bbt_ = matmul_nt(b_, b_);
  const double sa = spectral_norm(a_);
  const double sb = spectral_norm(b_);
  smoothness_ = sa * sa * sb * sb;
}

std::vector<ParamSpec> QuadraticProblem::params() const {
  return {{"W", w_star_.rows(), w_star_.cols(), true}};
}

Params QuadraticProblem::initial_params() const {
  return {Matrix(w_star_.rows(), w_star_.cols())};
}

double QuadraticProblem::loss(const Params& w) const {
  check_params(w, "quadratic.loss");
  const Matrix r = matmul(a_, w[0] - w_star_, b_);
  const double f = frobenius_norm(r);
  return 0.5 * f * f;
}

Matrix QuadraticProblem::gradient(const Matrix& w) const {
  return matmul(ata_, w - w_star_, bbt_);
}

Params QuadraticProblem::batch_gradient(const Params& w, std::span<const std::size_t>) const {
  check_params(w, "quadratic.gradient");
  return {gradient(w[0])};
}

// ----------------------------------------------------------------- logistic

LogisticProblem::LogisticProblem(std::size_t m, std::size_t n, std::size_t n_samples,
                                 std::uint64_t seed, double separation) {
  if (m < 2 || n < 1) throw InvalidInput("logistic_problem: need m >= 2 classes, n >= 1");
  if (n_samples < 1) throw InvalidInput("logistic_problem: n_samples must be >= 1");
  Rng data_rng(mix_seed(seed, 1));
  make_clusters(m, n, n_samples, separation, 1.0, data_rng, x_, labels_);
  Rng init_rng(mix_seed(seed, 2));
  w0_ = init_rng.gaussian_matrix(m, n, 0.1 / std::sqrt(static_cast<double>(n)));

  // Hessian of the softmax loss in the logits is bounded by 1/2 in spectral
  // norm, so L = lambda_max(X^T X / N) / 2.
  const Matrix cov = matmul_tn(x_, x_) / static_cast<double>(n_samples);
  smoothness_ = 0.5 * eigh(cov).values.front();

  const Params w{w0_};
  const Matrix mean = full_gradient(w)[0];
  double acc = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double d = frobenius_norm(sample_gradient(w, i)[0] - mean);
    acc += d * d;
  }
  sigma2_ = acc / static_cast<double>(n_samples);
}

std::vector<ParamSpec> LogisticProblem::params() const {
  return {{"W", w0_.rows(), w0_.cols(), true}};
}

Params LogisticProblem::initial_params() const { return {w0_}; }

double LogisticProblem::loss(const Params& w) const {
  check_params(w, "logistic.loss");
  Matrix z = matmul_nt(x_, w[0]);
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const double y_logit = z(i, labels_[i]);
    total += softmax_row(z, i) - y_logit;
  }
  return total / static_cast<double>(z.rows());
}

Params LogisticProblem::batch_gradient(const Params& w,
                                       std::span<const std::size_t> idx) const {
  check_params(w, "logistic.gradient");
  if (idx.empty()) throw InvalidInput("logistic.gradient: empty batch");
  const Matrix xb = gather_rows(x_, idx);
  Matrix z = matmul_nt(xb, w[0]);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    softmax_row(z, r);
    z(r, labels_[idx[r]]) -= 1.0;
  }
  return {matmul_tn(z, xb) / static_cast<double>(idx.size())};
}

// ---------------------------------------------------------------------- mlp

namespace {

void validate_mlp(const MlpOptions& o) {
  const auto& d = o.layer_dims;
  if (d.size() < 4 || d.size() > 5) {
    throw InvalidInput("mlp_problem: need 2 or 3 hidden layers (4 or 5 layer dims)");
  }
  for (std::size_t k : d) {
    if (k < 1 || k > 64) throw InvalidInput("mlp_problem: layer dims must lie in [1, 64]");
  }
  if (d.back() < 2) throw InvalidInput("mlp_problem: need at least 2 classes");
  if (o.n_samples < 1) throw InvalidInput("mlp_problem: n_samples must be >= 1");
  if (!(o.loss_scale > 0.0)) throw InvalidInput("mlp_problem: loss_scale must be positive");
}

}  // namespace

MlpProblem::MlpProblem(MlpOptions opts, std::uint64_t seed) : opts_(std::move(opts)) {
  validate_mlp(opts_);
  Rng data_rng(mix_seed(seed, 1));
  make_clusters(opts_.layer_dims.back(), opts_.layer_dims.front(), opts_.n_samples,
                opts_.separation, opts_.input_noise, data_rng, x_, labels_);
  init_weights(seed);
}

MlpProblem::MlpProblem(MlpOptions opts, Matrix inputs, std::vector<std::size_t> labels,
                       std::uint64_t seed)
    : opts_(std::move(opts)), x_(std::move(inputs)), labels_(std::move(labels)) {
  opts_.n_samples = labels_.size();
  validate_mlp(opts_);
  if (x_.rows() != labels_.size() || x_.cols() != opts_.layer_dims.front()) {
    throw ShapeError("mlp_problem: inputs must be n_samples x layer_dims[0]");
  }
  for (std::size_t y : labels_) {
    if (y >= opts_.layer_dims.back()) throw InvalidInput("mlp_problem: label out of range");
  }
  init_weights(seed);
}

void MlpProblem::init_weights(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 2));
  const auto& d = opts_.layer_dims;
  w0_.clear();
  for (std::size_t k = 1; k < d.size(); ++k) {
    w0_.push_back(rng.gaussian_matrix(d[k], d[k - 1], 1.0 / std::sqrt(static_cast<double>(d[k - 1]))));
    w0_.emplace_back(d[k], 1);
  }
}

std::vector<ParamSpec> MlpProblem::params() const {
  std::vector<ParamSpec> out;
  const auto& d = opts_.layer_dims;
  for (std::size_t k = 1; k < d.size(); ++k) {
    out.push_back({"W" + std::to_string(k), d[k], d[k - 1], true});
    out.push_back({"b" + std::to_string(k), d[k], 1, false});
  }
  return out;
}

double MlpProblem::loss(const Params& w) const {
  check_params(w, "mlp.loss");
  return forward_backward(w, x_, labels_, nullptr);
}

Params MlpProblem::batch_gradient(const Params& w, std::span<const std::size_t> idx) const {
  check_params(w, "mlp.gradient");
  if (idx.empty()) throw InvalidInput("mlp.gradient: empty batch");
  std::vector<std::size_t> labels(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) labels[r] = labels_[idx[r]];
  Params grads;
  forward_backward(w, gather_rows(x_, idx), labels, &grads);
  return grads;
}

std::pair<double, Params> MlpProblem::evaluate(const Params& w) const {
  check_params(w, "mlp.evaluate");
  Params grads;
  const double l = forward_backward(w, x_, labels_, &grads);
  return {l, std::move(grads)};
}

double MlpProblem::forward_backward(const Params& w, const Matrix& xb,
                                    std::span<const std::size_t> labels,
                                    Params* grads) const {
  const std::size_t layers = w.size() / 2;
  std::vector<Matrix> acts;  // acts[k] is the input to layer k
  acts.push_back(xb);
  Matrix out;
  for (std::size_t k = 0; k < layers; ++k) {
    Matrix z = matmul_nt(acts.back(), w[2 * k]);
    const Matrix& b = w[2 * k + 1];
    for (std::size_t r = 0; r < z.rows(); ++r) {
      for (std::size_t c = 0; c < z.cols(); ++c) {
        z(r, c) += b(c, 0);
        if (k + 1 < layers) z(r, c) = std::tanh(z(r, c));
      }
    }
    if (k + 1 < layers) {
      acts.push_back(std::move(z));
    } else {
      out = std::move(z);
    }
  }

  const double count = static_cast<double>(xb.rows());
  double total = 0.0;
  Matrix delta = std::move(out);
  for (std::size_t r = 0; r < delta.rows(); ++r) {
    const double y_logit = delta(r, labels[r]);
    total += softmax_row(delta, r) - y_logit;
    delta(r, labels[r]) -= 1.0;
  }
  const double loss_value = opts_.loss_scale * total / count;
  if (!grads) return loss_value;
  delta *= opts_.loss_scale / count;

  grads->assign(w.size(), Matrix());
  for (std::size_t k = layers; k-- > 0;) {
    (*grads)[2 * k] = matmul_tn(delta, acts[k]);
    Matrix gb(delta.cols(), 1);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      for (std::size_t c = 0; c < delta.cols(); ++c) gb(c, 0) += delta(r, c);
    }
    (*grads)[2 * k + 1] = std::move(gb);
    if (k > 0) {
      Matrix back = matmul(delta, w[2 * k]);
      const Matrix& a = acts[k];
      for (std::size_t r = 0; r < back.rows(); ++r) {
        for (std::size_t c = 0; c < back.cols(); ++c) back(r, c) *= 1.0 - a(r, c) * a(r, c);
      }
      delta = std::move(back);
    }
  }
  return loss_value;
}

// ---------------------------------------------------------------- factories

std::unique_ptr<Problem> make_quadratic_problem(std::size_t m, std::size_t n,
                                                std::uint64_t seed) {
  return std::make_unique<QuadraticProblem>(m, n, seed);
}

std::unique_ptr<Problem> make_logistic_problem(std::size_t m, std::size_t n,
                                               std::size_t n_samples, std::uint64_t seed) {
  return std::make_unique<LogisticProblem>(m, n, n_samples, seed);
}

std::unique_ptr<Problem> make_mlp_problem(const MlpOptions& opts, std::uint64_t seed) {
  return std::make_unique<MlpProblem>(opts, seed);
}

Params finite_difference_gradient(const Problem& problem, const Params& w, double h) {
  Params grads;
  Params probe = w;
  for (std::size_t k = 0; k < w.size(); ++k) {
    Matrix g(w[k].rows(), w[k].cols());
    auto pv = probe[k].data();
    auto gv = g.data();
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double orig = pv[i];
      pv[i] = orig + h;
      const double up = problem.loss(probe);
      pv[i] = orig - h;
      const double down = problem.loss(probe);
      pv[i] = orig;
      gv[i] = (up - down) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

}  // namespace fismo
