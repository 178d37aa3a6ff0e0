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

#include "fismo/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fismo/diagnostics.hpp"
#include "fismo/error.hpp"
#include "fismo/harness.hpp"
#include "fismo/kron_fisher.hpp"
#include "fismo/lmo.hpp"
#include "fismo/matops.hpp"
#include "fismo/optimizers.hpp"
#include "fismo/polar.hpp"
#include "fismo/problems.hpp"
#include "fismo/random.hpp"

namespace fismo {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---- 1: closed-form LMO is optimal --------------------------------------

Outcome lmo_optimality() {
  const auto start = Clock::now();
  Rng rng(mix_seed(2024, 1));
  double worst_gap = 0.0;
  double worst_beat = -1e300;
  double worst_feas = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t m = 2 + rng.index(5);
    const std::size_t n = 2 + rng.index(5);
    const double eta = i % 2 == 0 ? 0.1 : 1.0;
    const PreconditionerPair pair(rng.spd(m), rng.spd(n), 0.01, 0.99);
    const Matrix g = rng.gaussian_matrix(m, n);
    const auto sol = solve_lmo(g, pair, eta);

    const Matrix gw = matmul(pair.p_inv_sqrt(), g, pair.q_inv_sqrt());
    const double closed = frobenius_inner(g, sol.delta_w);
    worst_gap = std::max(worst_gap, std::abs(closed + eta * nuclear_norm(gw)));
    const double radius = spectral_norm(matmul(pair.p_sqrt(), sol.delta_w, pair.q_sqrt()));
    worst_feas = std::max(worst_feas, radius / eta - 1.0);

    const double best = feasible_oracle(g, pair, eta, 10000, rng);
    worst_beat = std::max(worst_beat, closed - best);
  }
  const double secs = seconds_since(start);
  Outcome o;
  o.pass = worst_gap <= 1e-10 && worst_beat <= 1e-9 && worst_feas <= 1e-10 && secs < 30.0;
  o.detail = "max |<G,dW> + eta||G~||_*| = " + fmt(worst_gap) +
             ", max feasible improvement = " + fmt(worst_beat) +
             ", max radius excess = " + fmt(worst_feas) + ", " + fmt(secs) + "s";
  return o;
}

// ---- 2: stationarity and minimality of the fixed points ------------------

std::vector<Matrix> gaussian_samples(std::size_t count, std::size_t m, std::size_t n, Rng& rng) {
  std::vector<Matrix> s;
  for (std::size_t i = 0; i < count; ++i) s.push_back(rng.gaussian_matrix(m, n));
  return s;
}

Matrix random_symmetric_unit(std::size_t d, Rng& rng) {
  Matrix e = sym(rng.gaussian_matrix(d, d));
  return e / frobenius_norm(e);
}

// Central-difference gradient of f over symmetric directions, as a matrix.
Matrix symmetric_fd_gradient(const Matrix& x, const std::function<double(const Matrix&)>& f,
                             double h) {
  const std::size_t d = x.rows();
  Matrix grad(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      Matrix e(d, d);
      e(i, j) = e(j, i) = i == j ? 1.0 : 0.5;
      const double df = (f(x + e * h) - f(x - e * h)) / (2.0 * h);
      grad(i, j) = grad(j, i) = df;
    }
  }
  return grad;
}

Outcome fixed_point_optimality() {
  const auto start = Clock::now();
  Rng rng(mix_seed(2024, 2));
  const double mu = 0.01;
  double worst_grad = 0.0;
  double worst_perturb = -1e300;
  std::size_t perturb_violations = 0;

  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t m = 2 + rng.index(4);
    const std::size_t n = 2 + rng.index(4);
    const auto samples = gaussian_samples(8, m, n, rng);
    const SpdMatrix q0 = rng.spd(n);
    const SpdMatrix p0 = rng.spd(m);

    const SpdMatrix p_star = fixed_point_P(q0, samples, mu);
    const SpdMatrix q_star = fixed_point_Q(p0, samples, mu);
    const auto jp = [&](const Matrix& p) {
      return objective_J(SpdMatrix(p), q0, samples, mu);
    };
    const auto jq = [&](const Matrix& q) {
      return objective_J(p0, SpdMatrix(q), samples, mu);
    };

    const auto rel_grad = [&](const SpdMatrix& x, const auto& f, double dim_other) {
      const SpdFactors fx = spd_factors(x);
      const double h = 1e-5 * fx.min_eigenvalue;
      const Matrix fd = symmetric_fd_gradient(x.matrix(), f, h);
      return frobenius_norm(fd) / frobenius_norm(fx.inverse * dim_other);
    };
    worst_grad = std::max(worst_grad, rel_grad(p_star, jp, static_cast<double>(n)));
    worst_grad = std::max(worst_grad, rel_grad(q_star, jq, static_cast<double>(m)));

    const auto perturb = [&](const SpdMatrix& x, const auto& f) {
      const double base = f(x.matrix());
      const double lam = spd_factors(x).min_eigenvalue;
      for (int k = 0; k < 100; ++k) {
        const double s = (0.01 + 0.89 * rng.uniform()) * lam;
        const double val = f(x.matrix() + random_symmetric_unit(x.dim(), rng) * s);
        const double beat = (base - val) / std::max(1.0, std::abs(base));
        worst_perturb = std::max(worst_perturb, beat);
        if (beat > 1e-12) ++perturb_violations;
      }
    };
    perturb(p_star, jp);
    perturb(q_star, jq);
  }

  std::size_t monotone_violations = 0;
  double worst_rise = -1e300;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t m = 2 + rng.index(5);
    const std::size_t n = 2 + rng.index(5);
    const auto samples = gaussian_samples(6, m, n, rng);
    SpdMatrix p = SpdMatrix::identity(m);
    SpdMatrix q = SpdMatrix::identity(n);
    double j = objective_J(p, q, samples, mu);
    for (int sweep = 0; sweep < 20; ++sweep) {
      for (int half = 0; half < 2; ++half) {
        if (half == 0) {
          p = fixed_point_P(q, samples, mu);
        } else {
          q = fixed_point_Q(p, samples, mu);
        }
        const double next = objective_J(p, q, samples, mu);
        const double rise = (next - j) / std::max(1.0, std::abs(j));
        worst_rise = std::max(worst_rise, rise);
        if (rise > 1e-12) ++monotone_violations;
        j = next;
      }
    }
  }

  const double secs = seconds_since(start);
  Outcome o;
  o.pass = worst_grad <= 1e-5 && perturb_violations == 0 && monotone_violations == 0 &&
           secs < 60.0;
  o.detail = "max relative FD gradient = " + fmt(worst_grad) +
             ", perturbation violations = " + std::to_string(perturb_violations) + " (worst " +
             fmt(worst_perturb) + "), alternating-min increases = " +
             std::to_string(monotone_violations) + " (worst " + fmt(worst_rise) + "), " +
             fmt(secs) + "s";
  return o;
}

// ---- 3: preconditioner invariants along training -------------------------

struct InvariantTally {
  std::size_t checks = 0;
  std::size_t violations = 0;
  double worst_trace = 0.0;
  double min_eig = 1e300;
  double min_kpq_margin = 1e300;

  void inspect(const PreconditionerPair& pair) {
    const double m = static_cast<double>(pair.m());
    const double n = static_cast<double>(pair.n());
    const double tp = std::abs(trace(pair.p()) - m) / m;
    const double tq = std::abs(trace(pair.q()) - n) / n;
    const double lp = eigh(pair.p()).values.back();
    const double lq = eigh(pair.q()).values.back();
    worst_trace = std::max({worst_trace, tp, tq});
    min_eig = std::min({min_eig, lp, lq});
    bool ok = tp <= 1e-9 && tq <= 1e-9 && lp > 0.0 && lq > 0.0;
    if (ok) {
      const double k = 1.0 / std::sqrt(lp * lq);
      const double margin = k * std::sqrt(m * n);
      min_kpq_margin = std::min(min_kpq_margin, margin);
      ok = margin >= 1.0;
    }
    ++checks;
    if (!ok) ++violations;
  }
};

void invariant_run(const Problem& problem, std::size_t batch, long steps, std::uint64_t seed,
                   InvariantTally& tally) {
  const auto specs = problem.params();
  Params w = problem.initial_params();
  FismoHyper fh;
  BaselineHyper bh;
  bh.kind = BaselineKind::adamw;
  bh.lr = 1e-3;
  std::vector<OptimizerState> states;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    if (specs[k].is_matrix) {
      states.emplace_back(FismoState::init(w[k], fh));
      tally.inspect(std::get<FismoState>(states.back()).precond);
    } else {
      states.emplace_back(BaselineState::init(w[k], bh));
    }
  }
  for (long t = 1; t <= steps; ++t) {
    const Params g = problem.minibatch_gradient(w, batch, mix_seed(seed, static_cast<std::uint64_t>(t)));
    for (std::size_t k = 0; k < specs.size(); ++k) {
      states[k] = step(states[k], g[k]).state;
      w[k] = weights_of(states[k]);
      if (const auto* f = std::get_if<FismoState>(&states[k])) tally.inspect(f->precond);
    }
  }
}

MlpOptions acceptance_mlp() {
  MlpOptions o;
  o.layer_dims = {16, 32, 32, 4};
  o.n_samples = 512;
  o.input_noise = 3.0;
  o.separation = 1.0;
  o.loss_scale = 64.0;
  return o;
}

Outcome preconditioner_invariants() {
  InvariantTally tally;
  const auto logistic = make_logistic_problem(4, 10, 512, 3);
  invariant_run(*logistic, 32, 1000, 31, tally);
  const auto mlp = make_mlp_problem(acceptance_mlp(), 3);
  invariant_run(*mlp, 64, 1000, 32, tally);
  Outcome o;
  o.pass = tally.violations == 0;
  o.detail = std::to_string(tally.violations) + " violations in " +
             std::to_string(tally.checks) + " checks; max trace error " +
             fmt(tally.worst_trace) + ", min eigenvalue " + fmt(tally.min_eig) +
             ", min K_PQ sqrt(mn) " + fmt(tally.min_kpq_margin);
  return o;
}

// ---- 4: reduction to Muon -------------------------------------------------

// Muon written directly against the SVD: M <- beta M + (1 - beta) G,
// W <- W - eta U V^T.
struct ReferenceMuon {
  Matrix w;
  Matrix m;
  double eta;
  double beta;

  void step(const Matrix& g) {
    m *= beta;
    m.add_scaled(g, 1.0 - beta);
    const SvdFactors f = svd(m);
    Matrix uvt(m.rows(), m.cols());
    for (std::size_t r = 0; r < f.sigma.size(); ++r) {
      if (f.sigma[r] <= 1e-13 * f.sigma[0]) continue;
      for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) uvt(i, j) += f.u(i, r) * f.vt(r, j);
      }
    }
    w.add_scaled(uvt, -eta);
  }
};

double muon_reduction_gap(const Problem& problem, std::size_t batch, std::uint64_t seed) {
  FismoHyper h;
  h.eta = 0.02;
  h.beta = 0.9;
  h.gamma = 1.0;
  h.polar_backend = PolarBackend::exact;
  const Matrix w0 = problem.initial_params().at(0);
  FismoState fs = FismoState::init(w0, h);
  ReferenceMuon ref{w0, Matrix(w0.rows(), w0.cols()), h.eta, h.beta};
  double worst = 0.0;
  for (long t = 1; t <= 100; ++t) {
    const auto s = mix_seed(seed, static_cast<std::uint64_t>(t));
    const Matrix gf = problem.minibatch_gradient({fs.weights}, batch, s).at(0);
    const Matrix gr = problem.minibatch_gradient({ref.w}, batch, s).at(0);
    fs = fismo_step(fs, gf).state;
    ref.step(gr);
    worst = std::max(worst, max_abs_diff(fs.weights, ref.w));
  }
  return worst;
}

Outcome muon_reduction() {
  const double gq = muon_reduction_gap(*make_quadratic_problem(6, 4, 4), 1, 41);
  const double gl = muon_reduction_gap(*make_logistic_problem(4, 10, 512, 4), 32, 42);
  Outcome o;
  o.pass = gq <= 1e-10 && gl <= 1e-10;
  o.detail = "max |W_fismo - W_muon|: quadratic " + fmt(gq) + ", logistic " + fmt(gl);
  return o;
}

// ---- 5: one-step descent bound on the quadratic --------------------------

OptimizerConfig fismo_config(const std::string& label) {
  OptimizerConfig c;
  c.label = label;
  c.kind = OptimizerKind::fismo;
  return c;
}

Outcome descent_bound(const std::filesystem::path& dir) {
  RunConfig cfg;
  cfg.name = "lemma1";
  cfg.problem.kind = ProblemKind::quadratic;
  cfg.problem.m = 6;
  cfg.problem.n = 4;
  auto opt = fismo_config("fismo_exact");
  opt.polar_backend = PolarBackend::exact;
  cfg.optimizers = {opt};
  cfg.horizon = 500;
  cfg.seeds = {0, 1, 2};
  cfg.snapshot_every = 1;
  cfg.output_dir = dir;
  run(cfg);
  const auto audits = audit_run(dir);
  bool pass = !audits.empty();
  double worst = 1e300;
  long at = 0;
  for (const auto& a : audits) {
    const auto* c = a.report.find("lemma1");
    if (!c) {
      pass = false;
      continue;
    }
    pass = pass && c->pass;
    if (c->worst_slack < worst) {
      worst = c->worst_slack;
      at = c->step_of_worst;
    }
  }
  Outcome o;
  o.pass = pass;
  o.detail = std::to_string(audits.size()) + " runs x 500 steps, min slack " + fmt(worst) +
             " at step " + std::to_string(at);
  return o;
}

// ---- 6: rate of the run-average nuclear norm ------------------------------

Outcome rate_slope(const std::filesystem::path& dir) {
  const auto start = Clock::now();
  std::vector<HorizonRun> runs;
  std::string per_t;
  for (long t : {250L, 500L, 1000L, 2000L, 4000L}) {
    RunConfig cfg;
    cfg.name = "rate";
    cfg.problem.kind = ProblemKind::quadratic;
    auto opt = fismo_config("fismo");
    opt.schedule = Schedule::inv_sqrt_horizon;
    opt.schedule_c = 1.0;
    cfg.optimizers = {opt};
    cfg.horizon = t;
    cfg.full_batch = true;
    cfg.seeds = {0};
    cfg.output_dir = dir / ("T" + std::to_string(t));
    auto res = run(cfg);
    const auto& recs = res.cells.at(0).records;
    double avg = 0.0;
    for (const auto& r : recs) avg += r.grad_nuclear;
    per_t += " T=" + std::to_string(t) + ":" + fmt(avg / static_cast<double>(recs.size()));
    runs.push_back({t, recs});
  }
  const double slope = rate_fit(runs);
  const double secs = seconds_since(start);
  Outcome o;
  o.pass = slope >= -0.75 && slope <= -0.35 && secs < 300.0;
  o.detail = "slope " + fmt(slope) + " (avg ||grad||_*" + per_t + "), " + fmt(secs) + "s";
  return o;
}

// ---- 7: minibatch variance scales as 1/B ----------------------------------

Outcome variance_scaling() {
  const auto problem = make_logistic_problem(4, 10, 512, 7);
  const Params w = problem->initial_params();
  const Matrix full = problem->full_gradient(w).at(0);
  std::vector<double> xs, ys;
  std::string per_b;
  for (std::size_t b : {1u, 4u, 16u, 64u}) {
    double acc = 0.0;
    const int draws = 10000;
    for (int d = 0; d < draws; ++d) {
      const auto s = mix_seed(mix_seed(77, b), static_cast<std::uint64_t>(d));
      const Matrix diff = problem->minibatch_gradient(w, b, s).at(0) - full;
      const double f = frobenius_norm(diff);
      acc += f * f;
    }
    const double var = acc / draws;
    xs.push_back(std::log(static_cast<double>(b)));
    ys.push_back(std::log(var));
    per_b += " B=" + std::to_string(b) + ":" + fmt(var);
  }
  const double slope = least_squares_slope(xs, ys);
  Outcome o;
  o.pass = std::abs(slope + 1.0) <= 0.1;
  o.detail = "slope " + fmt(slope) + " (variance" + per_b + ", sigma^2 " +
             fmt(problem->noise_sigma2().value_or(0.0)) + ")";
  return o;
}

// ---- 8 and 11: the MLP comparison run -------------------------------------

RunConfig mlp_comparison_config(const std::filesystem::path& dir) {
  RunConfig cfg;
  cfg.name = "mlp_comparison";
  cfg.problem.kind = ProblemKind::mlp;
  cfg.problem.seed = 0;
  cfg.problem.mlp = acceptance_mlp();
  cfg.horizon = 2000;
  cfg.batch_size = 64;
  cfg.seeds = {0, 1, 2, 3, 4};
  cfg.output_dir = dir;

  OptimizerConfig adamw;
  adamw.label = "adamw";
  adamw.kind = OptimizerKind::adamw;
  adamw.lr = 1e-3;
  auto fismo = fismo_config("fismo");
  OptimizerConfig ns5;
  ns5.label = "muon_ns5";
  ns5.kind = OptimizerKind::muon;
  auto ns7 = ns5;
  ns7.label = "muon_ns7";
  ns7.ns.iterations = 7;
  auto exact = ns5;
  exact.label = "muon_exact";
  exact.polar_backend = PolarBackend::exact;
  OptimizerConfig sgd;
  sgd.label = "sgd";
  sgd.kind = OptimizerKind::sgd;
  // lr 0.05 on the unscaled cross-entropy.
  sgd.lr = 0.05 / cfg.problem.mlp.loss_scale;
  cfg.optimizers = {adamw, fismo, ns5, ns7, exact, sgd};
  return cfg;
}

const RunResult& mlp_comparison(const std::filesystem::path& dir) {
  static std::map<std::filesystem::path, RunResult> cache;
  auto it = cache.find(dir);
  if (it == cache.end()) it = cache.emplace(dir, run(mlp_comparison_config(dir))).first;
  return it->second;
}

std::vector<LabeledRun> labeled(const RunResult& res, const std::vector<std::string>& labels) {
  std::vector<LabeledRun> out;
  for (const auto& l : labels) {
    for (const auto& c : res.cells) {
      if (c.label == l) out.push_back({c.label, c.seed, c.records});
    }
  }
  return out;
}

bool all_ok(const RunResult& res, std::string& why) {
  for (const auto& c : res.cells) {
    if (c.status != "OK") {
      why = c.label + " seed " + std::to_string(c.seed) + " " + c.failure;
      return false;
    }
  }
  return true;
}

Outcome kappa_ordering(const std::filesystem::path& dir) {
  const auto& res = mlp_comparison(dir);
  Outcome o;
  if (!all_ok(res, o.detail)) return o;
  const auto runs = labeled(res, {"adamw", "fismo", "muon_ns5", "muon_ns7", "muon_exact"});
  const auto entries = kappa_summary(runs);
  const std::vector<double> ratios{2.0, 2.0, 1.0, 0.0};
  const auto order = check_descending(entries, ratios);
  const double exact = entries.back().median_kappa;
  o.pass = order.pass && std::abs(exact - 1.0) <= 1e-6;
  for (const auto& e : entries) o.detail += e.label + "=" + fmt(e.median_kappa) + " ";
  o.detail += "| " + order.detail;
  return o;
}

double median_final_loss(const RunResult& res, const std::string& label) {
  std::vector<double> v;
  for (const auto& c : res.cells) {
    if (c.label == label) v.push_back(c.final_loss);
  }
  return median(v);
}

// ---- 9: Newton-Schulz against the SVD polar factor ------------------------

Outcome polar_accuracy() {
  Rng rng(mix_seed(2024, 9));
  NewtonSchulzConfig cubic;
  cubic.variant = NsVariant::cubic;
  cubic.iterations = 20;
  double worst_ns = 0.0;
  double worst_kappa = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t r = 2 + rng.index(7);
    const std::size_t c = 2 + rng.index(7);
    const double cond = 1.0 + 99.0 * rng.uniform();
    const Matrix a = rng.with_singular_values(r, c, 1.0, 1.0 / cond) * (0.1 + 10.0 * rng.uniform());
    const Matrix exact = polar_exact(a);
    worst_ns = std::max(worst_ns, max_abs_diff(polar_ns(a, cubic), exact));
    worst_kappa = std::max(worst_kappa, std::abs(condition_number(exact) - 1.0));
  }
  Outcome o;
  o.pass = worst_ns <= 1e-6 && worst_kappa <= 1e-9;
  o.detail = "max |NS - exact| = " + fmt(worst_ns) + ", max |kappa(exact) - 1| = " +
             fmt(worst_kappa);
  return o;
}

// ---- 10: byte-identical output and CSV schema -----------------------------

bool schema_ok(const std::string& text, long horizon, std::string& why) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    why = "header mismatch";
    return false;
  }
  long expect = 1;
  while (std::getline(in, line)) {
    if (line.find('\r') != std::string::npos) {
      why = "carriage return in row " + std::to_string(expect);
      return false;
    }
    if (std::count(line.begin(), line.end(), ',') != 7) {
      why = "row " + std::to_string(expect) + " does not have 8 fields";
      return false;
    }
    if (line.substr(0, line.find(',')) != std::to_string(expect)) {
      why = "step column out of order at row " + std::to_string(expect);
      return false;
    }
    ++expect;
  }
  if (expect != horizon + 1 || text.empty() || text.back() != '\n') {
    why = "row count or final newline";
    return false;
  }
  parse_metrics_csv(text);
  return true;
}

Outcome determinism(const std::filesystem::path& dir) {
  RunConfig cfg;
  cfg.name = "determinism";
  cfg.problem.kind = ProblemKind::logistic;
  cfg.problem.m = 4;
  cfg.problem.n = 10;
  cfg.problem.n_samples = 256;
  OptimizerConfig muon;
  muon.label = "muon";
  muon.kind = OptimizerKind::muon;
  OptimizerConfig adamw;
  adamw.label = "adamw";
  adamw.kind = OptimizerKind::adamw;
  adamw.lr = 1e-3;
  OptimizerConfig sgd;
  sgd.label = "sgd";
  sgd.kind = OptimizerKind::sgd;
  sgd.lr = 0.05;
  cfg.optimizers = {fismo_config("fismo"), muon, adamw, sgd};
  cfg.horizon = 60;
  cfg.batch_size = 16;
  cfg.seeds = {0, 1};

  cfg.output_dir = dir / "a";
  cfg.threads = 1;
  const auto a = run(cfg);
  cfg.output_dir = dir / "b";
  cfg.threads = 4;
  run(cfg);

  Outcome o;
  std::size_t compared = 0;
  for (const auto& cell : a.cells) {
    const auto name = cell.csv_path.filename();
    const std::string ta = read_file(dir / "a" / name);
    const std::string tb = read_file(dir / "b" / name);
    if (ta != tb) {
      o.detail = name.string() + " differs between executions";
      return o;
    }
    std::string why;
    if (!schema_ok(ta, cfg.horizon, why)) {
      o.detail = name.string() + ": " + why;
      return o;
    }
    ++compared;
  }
  load_run(dir / "a");
  o.pass = compared == cfg.optimizers.size() * cfg.seeds.size();
  o.detail = std::to_string(compared) + " CSVs byte-identical across executions; schema and "
             "manifest checksums verified";
  return o;
}

// ---- 11: final-loss ordering ----------------------------------------------

Outcome loss_ordering(const std::filesystem::path& dir) {
  RunConfig cfg;
  cfg.name = "quadratic_comparison";
  cfg.problem.kind = ProblemKind::quadratic;
  OptimizerConfig muon;
  muon.label = "muon";
  muon.kind = OptimizerKind::muon;
  OptimizerConfig adamw;
  adamw.label = "adamw";
  adamw.kind = OptimizerKind::adamw;
  adamw.lr = 1e-3;
  OptimizerConfig sgd;
  sgd.label = "sgd";
  sgd.kind = OptimizerKind::sgd;
  sgd.lr = 0.05;
  cfg.optimizers = {fismo_config("fismo"), muon, adamw, sgd};
  cfg.horizon = 500;
  cfg.seeds = {0, 1, 2, 3, 4};
  cfg.output_dir = dir / "quadratic";
  const auto quad = run(cfg);
  const auto& mlp = mlp_comparison(dir.parent_path() / "c08_mlp");

  Outcome o;
  std::string why;
  if (!all_ok(quad, why) || !all_ok(mlp, why)) {
    o.detail = why;
    return o;
  }
  const double qf = median_final_loss(quad, "fismo");
  const double qm = median_final_loss(quad, "muon");
  const double qs = median_final_loss(quad, "sgd");
  const double mf = median_final_loss(mlp, "fismo");
  const double mm = median_final_loss(mlp, "muon_ns5");
  const double ms = median_final_loss(mlp, "sgd");
  const bool quad_ok = qf <= qm && qm <= qs;
  const bool mlp_ok = mf <= mm && mm <= ms;
  o.pass = quad_ok && mlp_ok;
  o.detail = std::string("quadratic ") + (quad_ok ? "ok" : "FAIL") + " (fismo " + fmt(qf) +
             ", muon " + fmt(qm) + ", sgd " + fmt(qs) + "); mlp " + (mlp_ok ? "ok" : "FAIL") +
             " (fismo " + fmt(mf) + ", muon " + fmt(mm) + ", sgd " + fmt(ms) + ")";
  return o;
}

const char* criterion_name(int id) {
  switch (id) {
    case 1: return "lmo_closed_form_optimal";
    case 2: return "fisher_fixed_point_optimal";
    case 3: return "preconditioner_invariants";
    case 4: return "muon_reduction";
    case 5: return "one_step_descent_bound";
    case 6: return "nuclear_norm_rate";
    case 7: return "minibatch_variance_scaling";
    case 8: return "update_kappa_ordering";
    case 9: return "polar_newton_schulz_accuracy";
    case 10: return "harness_determinism";
    case 11: return "final_loss_ordering";
    default: return "unknown";
  }
}

Outcome dispatch(int id, const std::filesystem::path& work) {
  switch (id) {
    case 1: return lmo_optimality();
    case 2: return fixed_point_optimality();
    case 3: return preconditioner_invariants();
    case 4: return muon_reduction();
    case 5: return descent_bound(work / "c05_lemma1");
    case 6: return rate_slope(work / "c06_rate");
    case 7: return variance_scaling();
    case 8: return kappa_ordering(work / "c08_mlp");
    case 9: return polar_accuracy();
    case 10: return determinism(work / "c10_determinism");
    case 11: return loss_ordering(work / "c11_loss");
    default: throw InvalidInput("run_criterion: no criterion " + std::to_string(id));
  }
}

}  // namespace

CriterionResult run_criterion(int id, const AcceptanceOptions& opts) {
  CriterionResult r;
  r.id = id;
  r.name = criterion_name(id);
  const auto start = Clock::now();
  try {
    const Outcome o = dispatch(id, opts.work_dir);
    r.pass = o.pass;
    r.detail = o.detail;
  } catch (const Error& e) {
    if (id < 1 || id > kCriterionCount) throw;
    r.pass = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = seconds_since(start);
  return r;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts) {
  std::vector<CriterionResult> out;
  for (int id = 1; id <= kCriterionCount; ++id) {
    if (!opts.only.empty() && std::find(opts.only.begin(), opts.only.end(), id) == opts.only.end()) {
      continue;
    }
    out.push_back(run_criterion(id, opts));
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  char head[96];
  std::snprintf(head, sizeof head, "%s criterion %2d %-30s %8.1fs  ", r.pass ? "PASS" : "FAIL",
                r.id, r.name.c_str(), r.seconds);
  return head + r.detail;
}

}  // namespace fismo
