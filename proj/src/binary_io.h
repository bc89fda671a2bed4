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

// Little helpers for the versioned binary formats (federation dumps and
// model checkpoints). Values are written in host byte order, which is
// little-endian on every supported platform.

#ifndef SUBMI_SRC_BINARY_IO_H_
#define SUBMI_SRC_BINARY_IO_H_

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "submi/errors.h"

namespace submi::io {

template <typename T>
void Put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T Get(std::istream& in) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("unexpected end of stream");
  return value;
}

inline void PutDoubles(std::ostream& out, std::span<const double> values) {
  Put<uint64_t>(out, values.size());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

inline std::vector<double> GetDoubles(std::istream& in,
                                      uint64_t max_len = uint64_t{1} << 34) {
  const auto n = Get<uint64_t>(in);
  if (n > max_len) throw FormatError("vector length out of range");
  std::vector<double> values(n);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw FormatError("unexpected end of stream");
  return values;
}

inline void PutMagic(std::ostream& out, const char (&magic)[9],
                     uint32_t version) {
  out.write(magic, 8);
  Put<uint32_t>(out, version);
}

inline uint32_t ExpectMagic(std::istream& in, const char (&magic)[9]) {
  char buf[8];
  in.read(buf, 8);
  if (!in || std::memcmp(buf, magic, 8) != 0) {
    throw FormatError(std::string("bad magic, expected ") + magic);
  }
  return Get<uint32_t>(in);
}

}  // namespace submi::io

#endif  // SUBMI_SRC_BINARY_IO_H_
