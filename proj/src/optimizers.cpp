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

#include "fismo/optimizers.hpp"

#include <cmath>
#include <string>

#include "fismo/error.hpp"

namespace fismo {

namespace {

constexpr double kZeroMomentum = 1e-12;

void check_gradient(const Matrix& w, const Matrix& g, const char* op) {
  if (g.rows() != w.rows() || g.cols() != w.cols()) {
    throw InvalidInput(std::string(op) + ": gradient is " + std::to_string(g.rows()) + "x" +
                       std::to_string(g.cols()) + ", weights are " +
                       std::to_string(w.rows()) + "x" + std::to_string(w.cols()));
  }
  if (!g.all_finite()) throw InvalidInput(std::string(op) + ": non-finite gradient");
}

void check_unit_interval(double v, const char* what) {
  if (!(v >= 0.0 && v < 1.0)) throw InvalidInput(std::string(what) + " must lie in [0, 1)");
}

}  // namespace

double FismoHyper::resolved_gamma() const {
  return gamma ? *gamma : coupled_gamma(eta, c_gamma);
}

FismoState FismoState::init(Matrix weights, const FismoHyper& hyper) {
  if (!(hyper.eta > 0.0)) throw InvalidInput("fismo: eta must be positive");
  check_unit_interval(hyper.beta, "fismo: beta");
  if (!(hyper.c_gamma > 0.0)) throw InvalidInput("fismo: c_gamma must be positive");
  if (!(hyper.weight_decay >= 0.0)) throw InvalidInput("fismo: weight_decay must be >= 0");
  hyper.ns.validate();
  if (weights.empty()) throw InvalidInput("fismo: empty weight matrix");
  if (!weights.all_finite()) throw InvalidInput("fismo: non-finite initial weights");
  const std::size_t m = weights.rows();
  const std::size_t n = weights.cols();
  return FismoState{
      .weights = std::move(weights),
      .momentum = Matrix(m, n),
      .precond = PreconditionerPair::identity(m, n, hyper.mu, hyper.resolved_gamma()),
      .beta = hyper.beta,
      .eta = hyper.eta,
      .weight_decay = hyper.weight_decay,
      .step_count = 0,
      .polar_cfg = hyper.ns,
      .polar_backend = hyper.polar_backend,
  };
}

BaselineState BaselineState::init(Matrix weights, const BaselineHyper& hyper) {
  if (!(hyper.lr > 0.0)) throw InvalidInput("baseline: lr must be positive");
  check_unit_interval(hyper.momentum, "baseline: momentum");
  check_unit_interval(hyper.beta1, "adamw: beta1");
  check_unit_interval(hyper.beta2, "adamw: beta2");
  if (!(hyper.eps >= 0.0)) throw InvalidInput("adamw: eps must be >= 0");
  if (!(hyper.weight_decay >= 0.0)) throw InvalidInput("baseline: weight_decay must be >= 0");
  hyper.ns.validate();
  if (weights.empty()) throw InvalidInput("baseline: empty weight matrix");
  if (!weights.all_finite()) throw InvalidInput("baseline: non-finite initial weights");
  BaselineState s;
  s.hyper = hyper;
  s.first = Matrix(weights.rows(), weights.cols());
  if (hyper.kind == BaselineKind::adamw) s.second = Matrix(weights.rows(), weights.cols());
  s.weights = std::move(weights);
  return s;
}

Matrix orthogonalize(const Matrix& m, PolarBackend backend, const NewtonSchulzConfig& cfg) {
  return backend == PolarBackend::exact ? polar_exact(m) : polar_ns(m, cfg);
}

StepResult<FismoState> fismo_step(const FismoState& state, const Matrix& g) {
  check_gradient(state.weights, g, "fismo_step");
  StepResult<FismoState> out{state, {}};
  FismoState& s = out.state;

  s.precond = update_preconditioners(state.precond, g);
  const Matrix whitened = matmul(s.precond.p_inv_sqrt(), g, s.precond.q_inv_sqrt());
  s.momentum = state.beta * state.momentum;
  s.momentum.add_scaled(whitened, 1.0 - state.beta);
  s.step_count = state.step_count + 1;
  out.trace.whitened_grad = whitened;

  if (frobenius_norm(s.momentum) < kZeroMomentum) {
    out.trace.direction = Matrix(g.rows(), g.cols());
    out.trace.skipped = true;
    return out;
  }

  const Matrix ortho = orthogonalize(s.momentum, state.polar_backend, state.polar_cfg);
  out.trace.direction = matmul(s.precond.p_inv_sqrt(), ortho, s.precond.q_inv_sqrt());
  if (state.weight_decay > 0.0) s.weights *= 1.0 - state.eta * state.weight_decay;
  s.weights.add_scaled(out.trace.direction, -state.eta);
  if (!s.weights.all_finite()) throw IterationDiverged("fismo_step: non-finite weights");
  return out;
}

StepResult<BaselineState> muon_step(const BaselineState& state, const Matrix& g) {
  check_gradient(state.weights, g, "muon_step");
  const BaselineHyper& h = state.hyper;
  StepResult<BaselineState> out{state, {}};
  BaselineState& s = out.state;
  s.first = h.momentum * state.first;
  s.first.add_scaled(g, 1.0 - h.momentum);
  s.step_count = state.step_count + 1;
  out.trace.whitened_grad = g;

  if (frobenius_norm(s.first) < kZeroMomentum) {
    out.trace.direction = Matrix(g.rows(), g.cols());
    out.trace.skipped = true;
    return out;
  }
  out.trace.direction = orthogonalize(s.first, h.polar_backend, h.ns);
  if (h.weight_decay > 0.0) s.weights *= 1.0 - h.lr * h.weight_decay;
  s.weights.add_scaled(out.trace.direction, -h.lr);
  if (!s.weights.all_finite()) throw IterationDiverged("muon_step: non-finite weights");
  return out;
}

StepResult<BaselineState> adamw_step(const BaselineState& state, const Matrix& g) {
  check_gradient(state.weights, g, "adamw_step");
  const BaselineHyper& h = state.hyper;
  StepResult<BaselineState> out{state, {}};
  BaselineState& s = out.state;
  s.step_count = state.step_count + 1;
  const double t = static_cast<double>(s.step_count);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);

  Matrix dir(g.rows(), g.cols());
  auto mv = s.first.data();
  auto vv = s.second.data();
  auto gv = g.data();
  auto dv = dir.data();
  for (std::size_t i = 0; i < gv.size(); ++i) {
    mv[i] = h.beta1 * mv[i] + (1.0 - h.beta1) * gv[i];
    vv[i] = h.beta2 * vv[i] + (1.0 - h.beta2) * gv[i] * gv[i];
    const double denom = std::sqrt(vv[i] / c2) + h.eps;
    const double mhat = mv[i] / c1;
    dv[i] = denom > 0.0 ? mhat / denom : 0.0;
  }
  if (h.weight_decay > 0.0) s.weights *= 1.0 - h.lr * h.weight_decay;
  s.weights.add_scaled(dir, -h.lr);
  out.trace.direction = std::move(dir);
  if (!s.weights.all_finite()) throw IterationDiverged("adamw_step: non-finite weights");
  return out;
}

StepResult<BaselineState> sgd_step(const BaselineState& state, const Matrix& g) {
  check_gradient(state.weights, g, "sgd_step");
  const BaselineHyper& h = state.hyper;
  StepResult<BaselineState> out{state, {}};
  BaselineState& s = out.state;
  s.first = h.momentum * state.first;
  s.first += g;
  s.step_count = state.step_count + 1;
  if (h.weight_decay > 0.0) s.weights *= 1.0 - h.lr * h.weight_decay;
  s.weights.add_scaled(s.first, -h.lr);
  out.trace.direction = s.first;
  if (!s.weights.all_finite()) throw IterationDiverged("sgd_step: non-finite weights");
  return out;
}

StepResult<BaselineState> baseline_step(const BaselineState& state, const Matrix& g) {
  switch (state.hyper.kind) {
    case BaselineKind::muon:
      return muon_step(state, g);
    case BaselineKind::adamw:
      return adamw_step(state, g);
    case BaselineKind::sgd_momentum:
      return sgd_step(state, g);
  }
  throw InvalidInput("baseline_step: unknown optimizer kind");
}

StepResult<OptimizerState> step(const OptimizerState& state, const Matrix& g) {
  return std::visit(
      [&](const auto& s) -> StepResult<OptimizerState> {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, FismoState>) {
          auto r = fismo_step(s, g);
          return {std::move(r.state), std::move(r.trace)};
        } else {
          auto r = baseline_step(s, g);
          return {std::move(r.state), std::move(r.trace)};
        }
      },
      state);
}

const Matrix& weights_of(const OptimizerState& state) {
  return std::visit([](const auto& s) -> const Matrix& { return s.weights; }, state);
}

std::optional<double> kpq_of(const OptimizerState& state) {
  if (const auto* f = std::get_if<FismoState>(&state)) return kpq(f->precond);
  return std::nullopt;
}

}  // namespace fismo
