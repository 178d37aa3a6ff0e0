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

#include <iostream>

#include "fismo/acceptance.hpp"

int main(int argc, char** argv) {
  fismo::AcceptanceOptions opts;
  if (argc > 1) opts.work_dir = argv[1];
  int failed = 0;
  for (int id = 1; id <= fismo::kCriterionCount; ++id) {
    const auto r = fismo::run_criterion(id, opts);
    std::cout << fismo::format_result(r) << std::endl;
    if (!r.pass) ++failed;
  }
  std::cout << (fismo::kCriterionCount - failed) << "/" << fismo::kCriterionCount
            << " acceptance criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
