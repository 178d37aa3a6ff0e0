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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fismo/matrix.hpp"

namespace fismo {

/// One trainable parameter. Matrix parameters get a per-matrix optimizer
/// state; vector parameters (biases, stored as k x 1) use the element-wise
/// fallback.
struct ParamSpec {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool is_matrix = true;
};

using Params = std::vector<Matrix>;

/// Finite-sum objective L(W) = mean_i l_i(W) with exact gradients.
/// Instances are immutable after construction and safe to share.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  virtual std::vector<ParamSpec> params() const = 0;
  virtual Params initial_params() const = 0;
  virtual std::size_t n_samples() const = 0;

  virtual double loss(const Params& w) const = 0;
  /// Mean gradient over the given sample indices (repeats allowed).
  virtual Params batch_gradient(const Params& w, std::span<const std::size_t> idx) const = 0;
  virtual Params full_gradient(const Params& w) const;
  /// Loss and full gradient together.
  virtual std::pair<double, Params> evaluate(const Params& w) const;

  /// Mean of `batch_size` per-sample gradients drawn i.i.d. uniformly with
  /// replacement from a generator seeded with `seed`.
  Params minibatch_gradient(const Params& w, std::size_t batch_size, std::uint64_t seed) const;
  Params sample_gradient(const Params& w, std::size_t i) const;

  virtual std::optional<double> smoothness_L() const { return std::nullopt; }
  virtual std::optional<double> optimum_value() const { return std::nullopt; }
  /// E_i ||grad l_i(W_0) - grad L(W_0)||_F^2.
  virtual std::optional<double> noise_sigma2() const { return std::nullopt; }
  /// True when every minibatch gradient equals the full gradient.
  virtual bool deterministic() const { return false; }

 protected:
  void check_params(const Params& w, const char* op) const;
};

/// L(W) = 1/2 ||A (W - W*) B||_F^2 with A, B having log-spaced singular values
/// in [0.1, 1] and [0.2, 1]. W_0 = 0, L* = 0.
class QuadraticProblem final : public Problem {
 public:
  QuadraticProblem(std::size_t m, std::size_t n, std::uint64_t seed);

  std::string name() const override { return "quadratic"; }
  std::vector<ParamSpec> params() const override;
  Params initial_params() const override;
  std::size_t n_samples() const override { return 1; }
  double loss(const Params& w) const override;
  Params batch_gradient(const Params& w, std::span<const std::size_t> idx) const override;
  std::optional<double> smoothness_L() const override { return smoothness_; }
  std::optional<double> optimum_value() const override { return 0.0; }
  std::optional<double> noise_sigma2() const override { return 0.0; }
  bool deterministic() const override { return true; }

  const Matrix& a() const noexcept { return a_; }
  const Matrix& b() const noexcept { return b_; }
  const Matrix& optimum() const noexcept { return w_star_; }
  Matrix gradient(const Matrix& w) const;

 private:
  Matrix a_;
  Matrix b_;
  Matrix ata_;
  Matrix bbt_;
  Matrix w_star_;
  double smoothness_;
};

/// Softmax regression with weights m x n (m classes, n features) on
/// Gaussian clusters. Class means have scale `separation`, points have unit
/// isotropic noise.
class LogisticProblem final : public Problem {
 public:
  LogisticProblem(std::size_t m, std::size_t n, std::size_t n_samples, std::uint64_t seed,
                  double separation = 2.0);

  std::string name() const override { return "logistic"; }
  std::vector<ParamSpec> params() const override;
  Params initial_params() const override;
  std::size_t n_samples() const override { return labels_.size(); }
  double loss(const Params& w) const override;
  Params batch_gradient(const Params& w, std::span<const std::size_t> idx) const override;
  std::optional<double> smoothness_L() const override { return smoothness_; }
  std::optional<double> optimum_value() const override { return std::nullopt; }
  std::optional<double> noise_sigma2() const override { return sigma2_; }

  const Matrix& features() const noexcept { return x_; }

 private:
  Matrix x_;  // n_samples x n
  std::vector<std::size_t> labels_;
  Matrix w0_;
  double smoothness_ = 0.0;
  double sigma2_ = 0.0;
};

struct MlpOptions {
  std::vector<std::size_t> layer_dims{16, 32, 32, 4};
  std::size_t n_samples = 512;
  double input_noise = 3.0;
  double separation = 1.0;
  double loss_scale = 1.0;
};

/// tanh MLP classifier trained with (scaled) mean cross-entropy on Gaussian
/// clusters. Parameters are ordered W_1, b_1, W_2, b_2, ...; W_k has shape
/// dims[k] x dims[k-1] and b_k is dims[k] x 1.
class MlpProblem final : public Problem {
 public:
  MlpProblem(MlpOptions opts, std::uint64_t seed);
  /// Supplies the dataset directly; labels must be < layer_dims.back().
  MlpProblem(MlpOptions opts, Matrix inputs, std::vector<std::size_t> labels,
             std::uint64_t seed);

  std::string name() const override { return "mlp"; }
  std::vector<ParamSpec> params() const override;
  Params initial_params() const override { return w0_; }
  std::size_t n_samples() const override { return labels_.size(); }
  double loss(const Params& w) const override;
  Params batch_gradient(const Params& w, std::span<const std::size_t> idx) const override;
  std::pair<double, Params> evaluate(const Params& w) const override;
  std::optional<double> optimum_value() const override { return std::nullopt; }

  const MlpOptions& options() const noexcept { return opts_; }

 private:
  void init_weights(std::uint64_t seed);
  // Mean scaled cross-entropy over the rows of xb; fills grads when non-null.
  double forward_backward(const Params& w, const Matrix& xb,
                          std::span<const std::size_t> labels, Params* grads) const;

  MlpOptions opts_;
  Matrix x_;  // n_samples x dims[0]
  std::vector<std::size_t> labels_;
  Params w0_;
};

std::unique_ptr<Problem> make_quadratic_problem(std::size_t m, std::size_t n, std::uint64_t seed);
std::unique_ptr<Problem> make_logistic_problem(std::size_t m, std::size_t n,
                                               std::size_t n_samples, std::uint64_t seed);
std::unique_ptr<Problem> make_mlp_problem(const MlpOptions& opts, std::uint64_t seed);

/// Central-difference gradient with step h, for gradient checks.
Params finite_difference_gradient(const Problem& problem, const Params& w, double h = 1e-5);

}  // namespace fismo
