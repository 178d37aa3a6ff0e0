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

#include "fismo/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "fismo/error.hpp"
#include "fismo/matops.hpp"

namespace fismo {

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidInput("least_squares_slope: need at least two paired points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw InvalidInput("least_squares_slope: x values are all equal");
  return sxy / sxx;
}

double rate_fit(std::span<const HorizonRun> runs) {
  std::set<long> horizons;
  for (const auto& r : runs) horizons.insert(r.horizon);
  if (horizons.size() < 4) {
    throw InsufficientData("rate_fit: need at least 4 distinct horizons, got " +
                           std::to_string(horizons.size()));
  }
  std::vector<double> lx, ly;
  for (const auto& r : runs) {
    if (r.horizon < 1 || r.records.empty()) throw InvalidInput("rate_fit: empty run");
    double avg = 0.0;
    for (const auto& rec : r.records) avg += rec.grad_nuclear;
    avg /= static_cast<double>(r.records.size());
    if (!(avg > 0.0)) throw InvalidInput("rate_fit: non-positive average gradient norm");
    lx.push_back(std::log(static_cast<double>(r.horizon)));
    ly.push_back(std::log(avg));
  }
  return least_squares_slope(lx, ly);
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

double run_median_kappa(std::span<const MetricsRecord> records) {
  std::vector<double> k;
  for (const auto& r : records) {
    if (!std::isnan(r.update_kappa)) k.push_back(r.update_kappa);
  }
  return median(std::move(k));
}

std::vector<KappaEntry> kappa_summary(std::span<const LabeledRun> runs) {
  if (runs.empty()) throw InvalidInput("kappa_summary: no runs");
  const std::size_t len = runs.front().records.size();
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> per_label;
  for (const auto& r : runs) {
    if (r.records.size() != len) {
      throw InvalidInput("kappa_summary: run '" + r.label + "' has " +
                         std::to_string(r.records.size()) + " steps, expected " +
                         std::to_string(len));
    }
    if (!per_label.contains(r.label)) order.push_back(r.label);
    per_label[r.label].push_back(run_median_kappa(r.records));
  }
  std::vector<KappaEntry> out;
  for (const auto& label : order) {
    const auto& v = per_label[label];
    out.push_back({label, median(v), v.size()});
  }
  return out;
}

OrderingCheck check_descending(std::span<const KappaEntry> entries,
                               std::span<const double> min_ratios) {
  if (entries.size() < 2 || min_ratios.size() + 1 != entries.size()) {
    throw InvalidInput("check_descending: need n entries and n - 1 ratios");
  }
  OrderingCheck out{true, {}};
  std::ostringstream msg;
  for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
    const double hi = entries[i].median_kappa;
    const double lo = entries[i + 1].median_kappa;
    const double need = min_ratios[i];
    bool ok;
    if (need <= 0.0) {
      ok = hi >= lo;
    } else if (need <= 1.0) {
      ok = hi > lo;
    } else {
      ok = hi > lo && hi >= need * lo;
    }
    if (!ok) out.pass = false;
    msg << entries[i].label << "=" << hi << (ok ? " ok " : " FAIL ") << "vs "
        << entries[i + 1].label << "=" << lo << " (ratio " << hi / lo << ", need "
        << need << "); ";
  }
  out.detail = msg.str();
  return out;
}

bool AuditReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const LemmaCheck& c) { return c.pass; });
}

const LemmaCheck* AuditReport::find(const std::string& id) const {
  for (const auto& c : checks) {
    if (c.lemma_id == id) return &c;
  }
  return nullptr;
}

namespace {

struct Spectral {
  double min_eig = 0.0;
  Matrix inv_sqrt;  // empty unless min_eig > 0
  Matrix inverse;
};

Spectral spectral_of(const Matrix& a) {
  const SymEigen e = eigh(sym(a));
  Spectral s;
  s.min_eig = e.values.back();
  if (!(s.min_eig > 0.0)) return s;
  const std::size_t d = a.rows();
  Matrix vs(d, d), vi(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      vs(i, k) = e.vectors(i, k) / std::sqrt(e.values[k]);
      vi(i, k) = e.vectors(i, k) / e.values[k];
    }
  }
  s.inv_sqrt = sym(matmul_nt(vs, e.vectors));
  s.inverse = sym(matmul_nt(vi, e.vectors));
  return s;
}

Matrix add_identity(Matrix a, double s) {
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += s;
  return a;
}

class Tracker {
 public:
  Tracker(std::string id, double tol) : id_(std::move(id)), tol_(tol) {}

  void observe(double slack, long step) {
    if (!seen_ || slack < worst_) {
      worst_ = slack;
      step_ = step;
      seen_ = true;
    }
    if (!(slack >= -tol_)) pass_ = false;
  }

  LemmaCheck finish(std::string note = {}) const {
    return {id_, pass_ && seen_, seen_ ? worst_ : 0.0, step_, std::move(note)};
  }

 private:
  std::string id_;
  double tol_;
  bool pass_ = true;
  bool seen_ = false;
  double worst_ = 0.0;
  long step_ = 0;
};

void validate_snapshots(std::span<const Snapshot> snaps) {
  if (snaps.empty()) throw InsufficientData("lemma_audit: no snapshots");
  const std::size_t param = snaps.front().param;
  const std::size_t m = snaps.front().weights.rows();
  const std::size_t n = snaps.front().weights.cols();
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const Snapshot& s = snaps[i];
    if (s.step != static_cast<long>(i) + 1) {
      throw InsufficientData("lemma_audit: snapshots must cover every step from 1; step " +
                             std::to_string(i + 1) + " is missing");
    }
    if (s.param != param) throw InvalidInput("lemma_audit: snapshots mix parameters");
    const bool shapes = s.weights.rows() == m && s.weights.cols() == n &&
                        s.weights_prev.same_shape(s.weights) && s.grad.same_shape(s.weights) &&
                        s.full_grad.same_shape(s.weights) && s.momentum.same_shape(s.weights) &&
                        s.p.rows() == m && s.p.cols() == m && s.q.rows() == n && s.q.cols() == n;
    if (!shapes) throw ShapeError("lemma_audit: inconsistent snapshot shapes at step " +
                                  std::to_string(s.step));
  }
}

}  // namespace

AuditReport lemma_audit(std::span<const Snapshot> snaps, const AuditInputs& in) {
  validate_snapshots(snaps);
  if (in.single_parameter && !in.smoothness_L) {
    throw InvalidInput("lemma_audit: the problem declares no smoothness constant");
  }
  const std::size_t m = snaps.front().weights.rows();
  const std::size_t n = snaps.front().weights.cols();
  const double dm = static_cast<double>(m);
  const double dn = static_cast<double>(n);
  const double tol = in.tolerance;
  const std::size_t T = snaps.size();

  // Spectral data for t = 0..T, with P_0 = I_m and Q_0 = I_n.
  std::vector<Spectral> ps(T + 1), qs(T + 1);
  std::vector<Matrix> pmat(T + 1), qmat(T + 1);
  pmat[0] = Matrix::identity(m);
  qmat[0] = Matrix::identity(n);
  ps[0] = spectral_of(pmat[0]);
  qs[0] = spectral_of(qmat[0]);
  for (std::size_t t = 1; t <= T; ++t) {
    pmat[t] = snaps[t - 1].p;
    qmat[t] = snaps[t - 1].q;
    ps[t] = spectral_of(pmat[t]);
    qs[t] = spectral_of(qmat[t]);
  }

  AuditReport report;

  Tracker pd("pd", 0.0);
  bool all_pd = true;
  for (std::size_t t = 1; t <= T; ++t) {
    const double slack = std::min(ps[t].min_eig, qs[t].min_eig);
    // Strict positivity: a zero eigenvalue fails.
    pd.observe(slack > 0.0 ? slack : std::min(slack, -std::numeric_limits<double>::min()),
               static_cast<long>(t));
    if (!(slack > 0.0)) all_pd = false;
  }
  report.checks.push_back(pd.finish());
  if (!all_pd) {
    for (const char* id : {"lemma1", "lemma1_whitened", "kpq", "inv_sqrt_lipschitz", "drift",
                           "ema_tracking", "momentum_closed_form"}) {
      report.checks.push_back({id, false, -std::numeric_limits<double>::infinity(), 0,
                               "not evaluable: a preconditioner is not positive definite"});
    }
    return report;
  }

  std::vector<double> k(T + 1);
  std::vector<Matrix> gw(T + 1);  // whitened gradients, index 1..T
  for (std::size_t t = 0; t <= T; ++t) {
    k[t] = 1.0 / std::sqrt(ps[t].min_eig * qs[t].min_eig);
  }
  for (std::size_t t = 1; t <= T; ++t) {
    gw[t] = matmul(ps[t].inv_sqrt, snaps[t - 1].grad, qs[t].inv_sqrt);
  }

  // Descent inequality.
  const double rank = static_cast<double>(std::min(m, n));
  if (in.single_parameter) {
    const double L = *in.smoothness_L;
    Tracker stated("lemma1", tol);
    Tracker whitened("lemma1_whitened", tol);
    for (std::size_t t = 1; t <= T; ++t) {
      const Snapshot& s = snaps[t - 1];
      const double eta = s.eta;
      const double scale = std::max(1.0, std::abs(s.loss_prev));
      const double tracking = 2.0 * eta * nuclear_norm(gw[t] - s.momentum);
      const double curvature = 0.5 * L * eta * eta * rank * k[t] * k[t];
      const double rhs_stated = s.loss_prev - eta * k[t] * nuclear_norm(s.full_grad) +
                                2.0 * eta * k[t] * nuclear_norm(s.full_grad - s.grad) +
                                tracking + curvature;
      const Matrix h = matmul(ps[t].inv_sqrt, s.full_grad, qs[t].inv_sqrt);
      const double rhs_white = s.loss_prev - eta * nuclear_norm(h) +
                               2.0 * eta * nuclear_norm(h - gw[t]) + tracking + curvature;
      stated.observe((rhs_stated - s.loss) / scale, s.step);
      whitened.observe((rhs_white - s.loss) / scale, s.step);
    }
    report.checks.push_back(stated.finish("slack relative to max(1, L(W_{t-1}))"));
    report.checks.push_back(whitened.finish("slack relative to max(1, L(W_{t-1}))"));
  } else {
    report.checks.push_back({"lemma1", true, 0.0, 0, "skipped: loss depends on other parameters"});
    report.checks.push_back(
        {"lemma1_whitened", true, 0.0, 0, "skipped: loss depends on other parameters"});
  }

  // K_PQ range.
  {
    Tracker kt("kpq", tol);
    const double floor = 1.0 / std::sqrt(dm * dn);
    double kmax = 0.0;
    for (std::size_t t = 1; t <= T; ++t) kmax = std::max(kmax, k[t]);
    for (std::size_t t = 1; t <= T; ++t) {
      kt.observe(std::min(k[t] - floor, kmax - k[t]), static_cast<long>(t));
    }
    std::ostringstream note;
    note << "K_PQ range [" << floor << ", " << kmax << "]";
    report.checks.push_back(kt.finish(note.str()));
  }

  // Lipschitz bound for the inverse square root, and the drift cap.
  {
    Tracker lip("inv_sqrt_lipschitz", tol);
    double p_lo = std::numeric_limits<double>::infinity();
    double q_lo = p_lo;
    for (std::size_t t = 0; t <= T; ++t) {
      p_lo = std::min(p_lo, ps[t].min_eig);
      q_lo = std::min(q_lo, qs[t].min_eig);
    }
    double lp_max = 0.0, rq_max = 0.0, cl = 0.0, cr = 0.0, c_gamma = 0.0;
    std::vector<double> dp(T + 1), dq(T + 1);
    for (std::size_t t = 1; t <= T; ++t) {
      const Snapshot& s = snaps[t - 1];
      dp[t] = spectral_norm(ps[t].inv_sqrt - ps[t - 1].inv_sqrt);
      dq[t] = spectral_norm(qs[t].inv_sqrt - qs[t - 1].inv_sqrt);
      const double cp = std::min(ps[t].min_eig, ps[t - 1].min_eig);
      const double cq = std::min(qs[t].min_eig, qs[t - 1].min_eig);
      const double bp = spectral_norm(pmat[t] - pmat[t - 1]) / (2.0 * std::pow(cp, 1.5));
      const double bq = spectral_norm(qmat[t] - qmat[t - 1]) / (2.0 * std::pow(cq, 1.5));
      lip.observe(std::min(bp - dp[t], bq - dq[t]), s.step);

      const Matrix lt = add_identity(matmul_nt(matmul(s.grad, qs[t - 1].inverse), s.grad) / dn,
                                     s.mu * trace(pmat[t - 1]) / dm);
      const Matrix rt = add_identity(matmul(matmul_tn(s.grad, ps[t].inverse), s.grad) / dm,
                                     s.mu * trace(qmat[t - 1]) / dn);
      lp_max = std::max(lp_max, spectral_norm(lt));
      rq_max = std::max(rq_max, spectral_norm(rt));
      cl = std::max(cl, trace(lt) / dm);
      cr = std::max(cr, trace(rt) / dn);
      c_gamma = std::max(c_gamma, (1.0 - s.gamma) / s.eta);
    }
    report.checks.push_back(lip.finish());

    const double gamma = snaps.front().gamma;
    auto drift_constant = [&](double lo, double hi, double lbar, double c) {
      if (c_gamma == 0.0) return 0.0;
      if (gamma == 0.0) return std::numeric_limits<double>::infinity();
      const double cpq = (1.0 + c) * c_gamma * hi / (gamma * lo) +
                         c_gamma * (lbar + hi) / (gamma * lo);
      return cpq / (2.0 * std::pow(lo, 1.5));
    };
    const double c_p = drift_constant(p_lo, dm, lp_max, cl);
    const double c_q = drift_constant(q_lo, dn, rq_max, cr);
    Tracker drift("drift", tol);
    for (std::size_t t = 1; t <= T; ++t) {
      const double eta = snaps[t - 1].eta;
      drift.observe(std::min(c_p * eta - dp[t], c_q * eta - dq[t]), static_cast<long>(t));
    }
    std::ostringstream note;
    note << "C_P=" << c_p << " C_Q=" << c_q << " from measured p_min=" << p_lo
         << " q_min=" << q_lo;
    report.checks.push_back(drift.finish(note.str()));
  }

  // EMA tracking, every prefix.
  {
    Tracker ema("ema_tracking", tol);
    const double beta = snaps.front().beta;
    const double factor = beta / (1.0 - beta);
    double lhs = 0.0, var = 0.0, peak = 0.0;
    for (std::size_t t = 1; t <= T; ++t) {
      lhs += nuclear_norm(gw[t] - snaps[t - 1].momentum);
      if (t >= 2) var += nuclear_norm(gw[t] - gw[t - 1]);
      peak = std::max(peak, nuclear_norm(gw[t]));
      const double rhs = factor * (var + peak);
      ema.observe((rhs - lhs) / std::max(1.0, rhs), static_cast<long>(t));
    }
    report.checks.push_back(ema.finish("slack relative to max(1, bound)"));
  }

  // Momentum closed form against a direct sum.
  {
    Tracker closed("momentum_closed_form", 0.0);
    const double beta = snaps.front().beta;
    for (std::size_t t = 1; t <= T; ++t) {
      Matrix direct(m, n);
      double w = 1.0 - beta;
      for (std::size_t s = t; s >= 1; --s) {
        direct.add_scaled(gw[s], w);
        w *= beta;
        if (w == 0.0) break;
      }
      const Matrix& mt = snaps[t - 1].momentum;
      const double err = max_abs_diff(mt, direct);
      const double allowed = 1e-10 * std::max(1.0, frobenius_norm(direct));
      closed.observe(allowed - err, static_cast<long>(t));
    }
    report.checks.push_back(closed.finish("entrywise error against 1e-10 max(1, ||M||_F)"));
  }

  return report;
}

}  // namespace fismo
