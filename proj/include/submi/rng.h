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

#ifndef SUBMI_RNG_H_
#define SUBMI_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace submi {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr uint64_t Mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a master seed and a path of
// integer labels, e.g. DeriveSeed(seed, {round, user, kNoiseStream}).
// Order of the labels matters.
constexpr uint64_t DeriveSeed(uint64_t seed,
                              std::initializer_list<uint64_t> path) {
  uint64_t h = Mix64(seed);
  for (uint64_t label : path) h = Mix64(h ^ Mix64(label + 0x632be59bd9b4e019ULL));
  return h;
}

// Stream tags so that independent consumers never share a stream.
enum StreamTag : uint64_t {
  kSubjectsStream = 1,
  kAssignmentStream = 2,
  kSamplingStream = 3,
  kSplitStream = 4,
  kInitStream = 5,
  kClientStream = 6,
  kNoiseStream = 7,
  kSelectStream = 8,
  kTestSetStream = 9,
  kAttackSplitStream = 10,
};

}  // namespace submi

#endif  // SUBMI_RNG_H_
