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
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fismo/diagnostics.hpp"
#include "fismo/optimizers.hpp"
#include "fismo/problems.hpp"

namespace fismo {

inline constexpr const char* kMetricsHeader =
    "step,loss,grad_nuclear,grad_frobenius,update_kappa,kpq,momentum_tracking,wall_ns";

inline constexpr const char* kKappaConvention =
    "per step: arithmetic mean of kappa(Delta W) over matrix parameters; "
    "per run: median over steps; per optimizer: median over seeds";

std::string version_string();

enum class ProblemKind { quadratic, logistic, mlp };

struct ProblemConfig {
  ProblemKind kind = ProblemKind::quadratic;
  std::size_t m = 6;
  std::size_t n = 4;
  std::size_t n_samples = 512;
  std::uint64_t seed = 0;
  MlpOptions mlp;
};

enum class OptimizerKind { fismo, muon, adamw, sgd };

enum class Schedule { constant, inv_sqrt_horizon };

struct OptimizerConfig {
  std::string label;
  OptimizerKind kind = OptimizerKind::fismo;
  double lr = 0.02;  // eta for FISMO and Muon
  Schedule schedule = Schedule::constant;
  double schedule_c = 1.0;  // eta = C / sqrt(T)
  double beta = 0.95;       // FISMO and Muon momentum
  std::optional<double> gamma;
  double c_gamma = 1.0;
  double mu = 0.01;
  double momentum = 0.9;  // SGD
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  PolarBackend polar_backend = PolarBackend::newton_schulz;
  NewtonSchulzConfig ns;
  double bias_lr = 1e-3;  // element-wise AdamW fallback for vector parameters

  double resolved_lr(long horizon) const;
};

struct RunConfig {
  std::string name = "run";
  ProblemConfig problem;
  std::vector<OptimizerConfig> optimizers;
  long horizon = 100;
  std::size_t batch_size = 64;
  bool full_batch = false;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "runs/out";
  long snapshot_every = 0;
  bool record_wall_time = false;
  int threads = 0;  // 0 = hardware concurrency
};

/// Parses a JSON config. Unknown keys and invalid values raise ConfigError
/// carrying the dotted field path.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical JSON form of a config (all defaults filled in).
std::string config_to_json(const RunConfig& cfg, int indent = 2);

std::unique_ptr<Problem> make_problem(const ProblemConfig& cfg, std::uint64_t run_seed);

struct CellResult {
  std::string label;
  std::uint64_t seed = 0;
  std::string status;  // "OK" or "FAILED"
  std::string failure;
  std::vector<MetricsRecord> records;
  std::vector<Snapshot> snapshots;
  double final_loss = 0.0;
  std::filesystem::path csv_path;
  std::filesystem::path snapshot_path;
};

struct RunResult {
  RunConfig config;
  std::vector<CellResult> cells;
  std::filesystem::path manifest_path;
};

/// Runs every (optimizer, seed) cell and writes one CSV per cell, optional
/// snapshot JSONL files, and manifest.json into config.output_dir. Output
/// bytes depend only on the config.
RunResult run(const RunConfig& config);

/// Runs one cell in memory without touching the filesystem.
CellResult run_cell(const RunConfig& config, const OptimizerConfig& opt, std::uint64_t seed);

std::string format_double(double v);
std::string metrics_csv(std::span<const MetricsRecord> records);
std::vector<MetricsRecord> parse_metrics_csv(const std::string& text);
std::string snapshot_to_json_line(const Snapshot& s);
Snapshot snapshot_from_json_line(const std::string& line);

/// FNV-1a 64-bit checksum, hex encoded.
std::string checksum_hex(const std::string& bytes);

struct LoadedCell {
  std::string label;
  std::uint64_t seed = 0;
  std::string status;
  std::vector<MetricsRecord> records;
  std::filesystem::path snapshot_path;  // empty when absent
};

struct LoadedRun {
  std::filesystem::path dir;
  std::string problem_key;  // canonical problem description
  long horizon = 0;
  std::optional<double> smoothness_L;
  bool single_parameter = true;
  std::vector<LoadedCell> cells;
};

LoadedRun load_run(const std::filesystem::path& dir);

struct CompareRow {
  std::string label;
  std::size_t seeds = 0;
  double final_loss = 0.0;     // median over seeds
  double best_loss = 0.0;      // median over seeds of the per-run minimum
  double median_kappa = 0.0;   // median over seeds of per-run medians
  double avg_grad_nuclear = 0.0;  // median over seeds of the run mean
};

struct CompareSummary {
  std::vector<CompareRow> rows;
  std::string to_json() const;
  std::string to_table() const;
};

/// Throws InvalidInput for an empty list or runs over different problems or
/// horizons.
CompareSummary compare(std::span<const LoadedRun> runs);

/// Expands a glob over directory names; each match must contain
/// manifest.json. Supports '*' and '?' in the final path component.
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

struct CellAudit {
  std::string label;
  std::uint64_t seed = 0;
  std::size_t param = 0;
  AuditReport report;
};

/// Audits every FISMO cell of a run directory that has snapshots.
std::vector<CellAudit> audit_run(const std::filesystem::path& dir);
std::string audit_to_json(std::span<const CellAudit> audits);

}  // namespace fismo
