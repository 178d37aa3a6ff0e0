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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fismo/matrix.hpp"

namespace fismo {

/// One CSV row. Row t describes step t: the update Delta W_t applied to
/// W_{t-1}, and loss and full-gradient norms at the resulting W_t.
/// Multi-matrix problems report the arithmetic mean over matrix parameters
/// for update_kappa, kpq and momentum_tracking; gradient norms are summed.
struct MetricsRecord {
  long step = 0;
  double loss = 0.0;
  double grad_nuclear = 0.0;
  double grad_frobenius = 0.0;
  double update_kappa = 0.0;  // NaN (empty CSV field) when the step was skipped
  std::optional<double> kpq;
  std::optional<double> momentum_tracking;
  std::int64_t wall_ns = 0;
};

/// Records of one run at horizon T.
struct HorizonRun {
  long horizon = 0;
  std::vector<MetricsRecord> records;
};

/// Least-squares slope of log(mean grad_nuclear over the run) against
/// log(T). Throws InsufficientData with fewer than 4 distinct horizons and
/// InvalidInput for empty runs or non-positive averages.
double rate_fit(std::span<const HorizonRun> runs);

/// Least-squares slope of y on x.
double least_squares_slope(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> values);

/// Per-run median of update_kappa over steps, skipping NaN entries.
double run_median_kappa(std::span<const MetricsRecord> records);

struct LabeledRun {
  std::string label;
  std::uint64_t seed = 0;
  std::vector<MetricsRecord> records;
};

struct KappaEntry {
  std::string label;
  double median_kappa = 0.0;  // median over seeds of per-run medians
  std::size_t runs = 0;
};

/// Median update condition number per label, in first-seen label order.
/// Throws InvalidInput when runs have different lengths or the input is empty.
std::vector<KappaEntry> kappa_summary(std::span<const LabeledRun> runs);

struct OrderingCheck {
  bool pass = false;
  std::string detail;
};

/// Checks values[i] > values[i+1] with values[i] / values[i+1] >= min_ratio[i]
/// for each adjacent pair (min_ratio[i] = 1 means "strictly ordered";
/// 0 means "ordered, ties allowed").
OrderingCheck check_descending(std::span<const KappaEntry> entries,
                               std::span<const double> min_ratios);

/// Full per-step state of one matrix parameter under FISMO.
struct Snapshot {
  long step = 0;
  std::size_t param = 0;
  double eta = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double mu = 0.0;
  double loss_prev = 0.0;   // L(W_{t-1})
  double loss = 0.0;        // L(W_t)
  Matrix weights_prev;      // W_{t-1}
  Matrix weights;           // W_t
  Matrix grad;              // G_t, the gradient used by the step
  Matrix full_grad;         // grad L(W_{t-1})
  Matrix p;                 // P_t
  Matrix q;                 // Q_t
  Matrix momentum;          // M_t
};

struct LemmaCheck {
  std::string lemma_id;
  bool pass = false;
  double worst_slack = 0.0;
  long step_of_worst = 0;
  std::string note;
};

struct AuditReport {
  std::vector<LemmaCheck> checks;
  bool all_pass() const;
  const LemmaCheck* find(const std::string& id) const;
};

struct AuditInputs {
  std::optional<double> smoothness_L;
  /// Whether L(W) depends only on the audited matrix parameter; the descent
  /// inequality is skipped otherwise.
  bool single_parameter = true;
  double tolerance = 1e-10;
};

/// Evaluates, from snapshots alone:
///   lemma1           one-step bound with the K_PQ-scaled gradient term
///   lemma1_whitened  the same bound with ||P^{-1/2} grad L Q^{-1/2}||_* in place
///                    of K_PQ ||grad L||_*
///   pd               lambda_min(P_t), lambda_min(Q_t) > 0
///   kpq              1/sqrt(mn) <= K_PQ(t) <= max_s K_PQ(s)
///   inv_sqrt_lipschitz ||A^{-1/2} - B^{-1/2}||_2 <= ||A - B||_2 / (2 c^{3/2})
///   drift            ||P_t^{-1/2} - P_{t-1}^{-1/2}||_2 <= C_P eta (and Q)
///   ema_tracking     prefix sums of ||G~_t - M_t||_* against the tracking bound
///   momentum_closed_form  M_t against (1 - beta) sum_s beta^{t-s} G~_s
/// Snapshots must cover steps 1..T of a single parameter contiguously;
/// otherwise InsufficientData. Without a declared smoothness constant the
/// descent checks cannot run and InvalidInput is thrown.
AuditReport lemma_audit(std::span<const Snapshot> snapshots, const AuditInputs& inputs);

}  // namespace fismo
