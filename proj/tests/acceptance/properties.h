// Copyright 2026 The submi Authors.
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

#ifndef SUBMI_TESTS_ACCEPTANCE_PROPERTIES_H_
#define SUBMI_TESTS_ACCEPTANCE_PROPERTIES_H_

#include <string>
#include <vector>

namespace submi::acceptance {

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Randomized invariant checks across all modules, each with its own oracle.
std::vector<PropertyResult> RunPropertySuite();

}  // namespace submi::acceptance

#endif  // SUBMI_TESTS_ACCEPTANCE_PROPERTIES_H_
