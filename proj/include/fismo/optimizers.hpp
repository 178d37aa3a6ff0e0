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
#include <variant>

#include "fismo/kron_fisher.hpp"
#include "fismo/matrix.hpp"
#include "fismo/polar.hpp"

namespace fismo {

enum class PolarBackend { exact, newton_schulz };

/// FISMO hyperparameters. When `gamma` is unset the EMA decay is coupled to
/// the step size through 1 - gamma = min(0.5, c_gamma * eta).
struct FismoHyper {
  double eta = 0.02;
  double beta = 0.95;
  double mu = 0.01;
  double c_gamma = 1.0;
  std::optional<double> gamma;
  double weight_decay = 0.0;
  PolarBackend polar_backend = PolarBackend::newton_schulz;
  NewtonSchulzConfig ns;

  double resolved_gamma() const;
};

struct FismoState {
  Matrix weights;
  Matrix momentum;  // whitened coordinates
  PreconditionerPair precond;
  double beta = 0.95;
  double eta = 0.02;
  double weight_decay = 0.0;
  long step_count = 0;
  NewtonSchulzConfig polar_cfg;
  PolarBackend polar_backend = PolarBackend::newton_schulz;

  /// M_0 = 0, P_0 = I_m, Q_0 = I_n.
  static FismoState init(Matrix weights, const FismoHyper& hyper);
};

enum class BaselineKind { sgd_momentum, adamw, muon };

struct BaselineHyper {
  BaselineKind kind = BaselineKind::sgd_momentum;
  double lr = 0.02;
  double momentum = 0.9;  // heavy-ball coefficient (SGD) or beta (Muon)
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  PolarBackend polar_backend = PolarBackend::newton_schulz;
  NewtonSchulzConfig ns;
};

struct BaselineState {
  BaselineHyper hyper;
  Matrix weights;
  Matrix first;   // SGD buffer, Muon momentum, or Adam first moment
  Matrix second;  // Adam second moment; empty otherwise
  long step_count = 0;

  static BaselineState init(Matrix weights, const BaselineHyper& hyper);
};

/// What a step did, for diagnostics. `direction` is the matrix D with
/// W_t = W_{t-1} - lr * D (decoupled weight decay excluded).
struct StepTrace {
  Matrix direction;
  Matrix whitened_grad;  // G~_t for FISMO, G_t for Muon, empty otherwise
  bool skipped = false;  // momentum was numerically zero, weights untouched
};

template <typename State>
struct StepResult {
  State state;
  StepTrace trace;
};

/// One iteration of FISMO: preconditioner update, whitening, momentum in
/// whitened space, orthogonalization, un-whitening. Throws InvalidInput for a
/// non-finite or mis-shaped gradient and IterationDiverged from Newton-Schulz;
/// the input state is never modified.
StepResult<FismoState> fismo_step(const FismoState& state, const Matrix& g);

StepResult<BaselineState> muon_step(const BaselineState& state, const Matrix& g);
StepResult<BaselineState> adamw_step(const BaselineState& state, const Matrix& g);
StepResult<BaselineState> sgd_step(const BaselineState& state, const Matrix& g);
StepResult<BaselineState> baseline_step(const BaselineState& state, const Matrix& g);

using OptimizerState = std::variant<FismoState, BaselineState>;

StepResult<OptimizerState> step(const OptimizerState& state, const Matrix& g);
const Matrix& weights_of(const OptimizerState& state);
/// K_PQ for FISMO states, nullopt for baselines.
std::optional<double> kpq_of(const OptimizerState& state);

/// Orthogonalize with the configured backend.
Matrix orthogonalize(const Matrix& m, PolarBackend backend, const NewtonSchulzConfig& cfg);

}  // namespace fismo
