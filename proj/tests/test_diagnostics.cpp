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

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "fismo/diagnostics.hpp"
#include "fismo/error.hpp"
#include "fismo/harness.hpp"

using namespace fismo;

namespace {

using E = Eigen::MatrixXd;

E to_eigen(const Matrix& a) {
  E e(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) e(i, j) = a(i, j);
  return e;
}

double nuc(const E& a) { return Eigen::JacobiSVD<E>(a).singularValues().sum(); }

std::vector<MetricsRecord> constant_run(long horizon, double grad_nuclear, double kappa) {
  std::vector<MetricsRecord> out;
  for (long t = 1; t <= horizon; ++t) {
    MetricsRecord r;
    r.step = t;
    r.grad_nuclear = grad_nuclear;
    r.update_kappa = kappa;
    out.push_back(r);
  }
  return out;
}

CellResult quadratic_cell(long horizon, PolarBackend backend) {
  RunConfig cfg;
  cfg.problem.kind = ProblemKind::quadratic;
  cfg.problem.m = 5;
  cfg.problem.n = 3;
  OptimizerConfig o;
  o.label = "fismo";
  o.polar_backend = backend;
  cfg.optimizers = {o};
  cfg.horizon = horizon;
  cfg.snapshot_every = 1;
  return run_cell(cfg, o, 0);
}

double smoothness_for_seed0() {
  ProblemConfig p;
  p.m = 5;
  p.n = 3;
  return *make_problem(p, 0)->smoothness_L();
}

}  // namespace

TEST_CASE("rate_fit recovers a planted power law") {
  std::vector<HorizonRun> runs;
  for (long t : {100L, 200L, 400L, 800L, 1600L}) {
    runs.push_back({t, constant_run(t, 3.0 * std::pow(double(t), -0.5), 1.0)});
  }
  CHECK(rate_fit(runs) == doctest::Approx(-0.5).epsilon(1e-12));
  runs.resize(3);
  CHECK_THROWS_AS(rate_fit(runs), InsufficientData);
  std::vector<HorizonRun> dup{{10, constant_run(10, 1, 1)}, {10, constant_run(10, 1, 1)},
                              {20, constant_run(20, 1, 1)}, {40, constant_run(40, 1, 1)}};
  CHECK_THROWS_AS(rate_fit(dup), InsufficientData);
}

TEST_CASE("least squares slope and median") {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  CHECK(least_squares_slope(x, y) == doctest::Approx(2.0));
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(least_squares_slope(std::vector<double>{1, 1}, std::vector<double>{0, 1}),
                  InvalidInput);
}

TEST_CASE("kappa summary takes the median over seeds of per-run medians") {
  auto a1 = constant_run(5, 1, 10.0);
  a1[0].update_kappa = std::numeric_limits<double>::quiet_NaN();
  const std::vector<LabeledRun> runs{{"a", 0, a1},
                                     {"a", 1, constant_run(5, 1, 30.0)},
                                     {"a", 2, constant_run(5, 1, 20.0)},
                                     {"b", 0, constant_run(5, 1, 2.0)}};
  const auto s = kappa_summary(runs);
  REQUIRE(s.size() == 2);
  CHECK(s[0].label == "a");
  CHECK(s[0].median_kappa == 20.0);
  CHECK(s[0].runs == 3);
  CHECK(s[1].median_kappa == 2.0);

  const std::vector<LabeledRun> uneven{{"a", 0, constant_run(5, 1, 1)},
                                       {"b", 0, constant_run(4, 1, 1)}};
  CHECK_THROWS_AS(kappa_summary(uneven), InvalidInput);
  CHECK_THROWS_AS(kappa_summary(std::vector<LabeledRun>{}), InvalidInput);
}

TEST_CASE("descending checks with ratio requirements") {
  const std::vector<KappaEntry> e{{"a", 100, 1}, {"b", 40, 1}, {"c", 10, 1}, {"d", 10, 1}};
  CHECK(check_descending(e, std::vector<double>{2, 2, 0}).pass);
  CHECK_FALSE(check_descending(e, std::vector<double>{3, 2, 0}).pass);
  CHECK_FALSE(check_descending(e, std::vector<double>{2, 2, 1}).pass);
  CHECK_THROWS_AS(check_descending(e, std::vector<double>{2}), InvalidInput);
}

TEST_CASE("audit of an exact-polar quadratic run passes every check") {
  const auto cell = quadratic_cell(150, PolarBackend::exact);
  REQUIRE(cell.snapshots.size() == 150);
  const auto report = lemma_audit(cell.snapshots, {smoothness_for_seed0(), true, 1e-10});
  for (const auto& c : report.checks) {
    INFO(c.lemma_id << " worst " << c.worst_slack << " at " << c.step_of_worst);
    CHECK(c.pass);
  }
  CHECK(report.all_pass());
  REQUIRE(report.find("lemma1") != nullptr);
  CHECK(report.find("nope") == nullptr);
}

TEST_CASE("lemma1 slack agrees with an Eigen recomputation") {
  const auto cell = quadratic_cell(60, PolarBackend::exact);
  const double L = smoothness_for_seed0();
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& s : cell.snapshots) {
    const Eigen::SelfAdjointEigenSolver<E> ep(to_eigen(s.p)), eq(to_eigen(s.q));
    const double k = 1.0 / std::sqrt(ep.eigenvalues()(0) * eq.eigenvalues()(0));
    const E gw = ep.operatorInverseSqrt() * to_eigen(s.grad) * eq.operatorInverseSqrt();
    const E full = to_eigen(s.full_grad);
    const double rhs = s.loss_prev - s.eta * k * nuc(full) +
                       2 * s.eta * k * nuc(full - to_eigen(s.grad)) +
                       2 * s.eta * nuc(gw - to_eigen(s.momentum)) +
                       0.5 * L * s.eta * s.eta * 3.0 * k * k;
    worst = std::min(worst, (rhs - s.loss) / std::max(1.0, std::abs(s.loss_prev)));
  }
  const auto report = lemma_audit(cell.snapshots, {L, true, 1e-10});
  CHECK(report.find("lemma1")->worst_slack == doctest::Approx(worst).epsilon(1e-9));
}

TEST_CASE("tampered snapshots fail the right checks") {
  const auto cell = quadratic_cell(30, PolarBackend::exact);
  const AuditInputs in{smoothness_for_seed0(), true, 1e-10};

  SUBCASE("negative eigenvalue in P fails positive definiteness") {
    auto snaps = cell.snapshots;
    snaps[10].p(0, 0) = -5.0;
    const auto r = lemma_audit(snaps, in);
    CHECK_FALSE(r.find("pd")->pass);
    CHECK(r.find("pd")->step_of_worst == 11);
    CHECK_FALSE(r.find("lemma1")->pass);
    CHECK_FALSE(r.all_pass());
  }
  SUBCASE("corrupted momentum fails the closed form") {
    auto snaps = cell.snapshots;
    snaps[5].momentum(0, 0) += 1e-3;
    const auto r = lemma_audit(snaps, in);
    CHECK_FALSE(r.find("momentum_closed_form")->pass);
    CHECK(r.find("pd")->pass);
  }
  SUBCASE("a loss that rises too far fails the descent bound") {
    auto snaps = cell.snapshots;
    snaps[3].loss += 100.0;
    CHECK_FALSE(lemma_audit(snaps, in).find("lemma1")->pass);
  }
  SUBCASE("gaps and missing smoothness") {
    auto snaps = cell.snapshots;
    snaps.erase(snaps.begin() + 4);
    CHECK_THROWS_AS(lemma_audit(snaps, in), InsufficientData);
    CHECK_THROWS_AS(lemma_audit(cell.snapshots, AuditInputs{}), InvalidInput);
    CHECK_THROWS_AS(lemma_audit(std::vector<Snapshot>{}, in), InsufficientData);
  }
}

TEST_CASE("multi-parameter audits skip the descent inequality") {
  const auto cell = quadratic_cell(20, PolarBackend::exact);
  const auto r = lemma_audit(cell.snapshots, {std::nullopt, false, 1e-10});
  CHECK(r.find("lemma1")->pass);
  CHECK(r.find("lemma1")->note.find("skipped") != std::string::npos);
  CHECK(r.find("drift")->pass);
}
