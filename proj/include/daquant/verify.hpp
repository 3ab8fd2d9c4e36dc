// SPDX-License-Identifier: Apache-2.0
//
// CI-scale invariant suite behind the `verify` CLI command.
#pragma once

#include <string>
#include <vector>

namespace daquant {

struct VerifyCheck {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
};

// Runs every module's property suite; `module_filter` restricts to one
// module name (quant-core, grad-correct, sample-select, problems, sim).
// `fixtures_dir` locates the golden wire fixtures.
std::vector<VerifyCheck> run_verify(const std::string& module_filter,
                                    const std::string& fixtures_dir);

}  // namespace daquant
