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

#ifndef SUBMI_ERRORS_H_
#define SUBMI_ERRORS_H_

#include <stdexcept>
#include <string>

namespace submi {

// Base class for every error raised by the library. Each concrete subclass
// names one failure mode so callers (and the grid runner) can report it.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define SUBMI_DEFINE_ERROR(Name)                          \
  class Name : public Error {                             \
   public:                                                \
    explicit Name(const std::string& what) : Error(what) {} \
  }

SUBMI_DEFINE_ERROR(SeparationInfeasible);
SUBMI_DEFINE_ERROR(DimensionMismatch);
SUBMI_DEFINE_ERROR(ShapeMismatch);
SUBMI_DEFINE_ERROR(EmptyShard);
SUBMI_DEFINE_ERROR(NoiseRequired);
SUBMI_DEFINE_ERROR(EmptySamples);
SUBMI_DEFINE_ERROR(RoundOutOfRange);
SUBMI_DEFINE_ERROR(TooFewRounds);
SUBMI_DEFINE_ERROR(DegenerateValidation);
SUBMI_DEFINE_ERROR(InsufficientSubjects);
SUBMI_DEFINE_ERROR(ConfigError);
SUBMI_DEFINE_ERROR(FormatError);

#undef SUBMI_DEFINE_ERROR

}  // namespace submi

#endif  // SUBMI_ERRORS_H_
