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

#include <algorithm>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fismo/acceptance.hpp"
#include "fismo/error.hpp"
#include "fismo/harness.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::uint64_t>& seeds,
            const std::string& out) {
  fismo::RunConfig cfg = fismo::load_config(config_path);
  if (!seeds.empty()) cfg.seeds = seeds;
  if (!out.empty()) cfg.output_dir = out;
  const auto result = fismo::run(cfg);
  std::size_t failed = 0;
  for (const auto& cell : result.cells) {
    std::cout << cell.label << " seed=" << cell.seed << " " << cell.status
              << " final_loss=" << fismo::format_double(cell.final_loss);
    if (!cell.failure.empty()) std::cout << " (" << cell.failure << ")";
    std::cout << '\n';
    if (cell.status != "OK") ++failed;
  }
  std::cout << "manifest: " << result.manifest_path.string() << '\n';
  return failed == 0 ? 0 : 3;
}

int cmd_compare(const std::string& pattern, const std::string& out) {
  const auto dirs = fismo::expand_glob(pattern);
  std::vector<fismo::LoadedRun> runs;
  for (const auto& d : dirs) runs.push_back(fismo::load_run(d));
  const auto summary = fismo::compare(runs);
  std::cout << summary.to_table();
  if (!out.empty()) {
    std::ofstream f(out);
    f << summary.to_json() << '\n';
  }
  return 0;
}

int cmd_audit(const std::string& dir, const std::string& out) {
  const auto audits = fismo::audit_run(dir);
  const std::string text = fismo::audit_to_json(audits);
  std::cout << text << '\n';
  const std::string path = out.empty() ? dir + "/audit.json" : out;
  std::ofstream f(path);
  f << text << '\n';
  bool ok = true;
  for (const auto& a : audits) ok = ok && a.report.all_pass();
  return ok ? 0 : 4;
}

int cmd_verify(const std::vector<int>& only, const std::string& out) {
  fismo::AcceptanceOptions opts;
  opts.only = only;
  if (!out.empty()) opts.work_dir = out;
  bool ok = true;
  for (int id = 1; id <= fismo::kCriterionCount; ++id) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto r = fismo::run_criterion(id, opts);
    std::cout << fismo::format_result(r) << std::endl;
    ok = ok && r.pass;
  }
  return ok ? 0 : 5;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FISMO optimizer experiments"};
  app.require_subcommand(1);

  std::vector<std::uint64_t> seeds;
  std::string out;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  std::string config;
  run->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seeds, "Override the seed list");
  run->add_option("--out", out, "Override output_dir");

  auto* cmp = app.add_subcommand("compare", "Summarize run directories matching a glob");
  std::string pattern;
  cmp->add_option("--glob", pattern, "Glob over run directories")->required();
  cmp->add_option("--out", out, "Write the JSON summary here");

  auto* aud = app.add_subcommand("audit", "Audit the lemma inequalities of a run");
  std::string run_dir;
  aud->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  aud->add_option("--out", out, "Report path (default <run>/audit.json)");

  auto* ver = app.add_subcommand("verify", "Run the acceptance suite");
  std::vector<int> only;
  ver->add_option("--only", only, "Criterion ids to run")->delimiter(',');
  ver->add_option("--out", out, "Working directory for acceptance runs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, seeds, out);
    if (*cmp) return cmd_compare(pattern, out);
    if (*aud) return cmd_audit(run_dir, out);
    if (*ver) return cmd_verify(only, out);
  } catch (const fismo::ConfigError& e) {
    std::cerr << "config error at " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
