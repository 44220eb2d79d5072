// Copyright (c) 2026 The diarkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DIARKIT_SRC_BINARY_IO_H_
#define DIARKIT_SRC_BINARY_IO_H_

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "diarkit/types.h"

namespace diarkit::binary {

inline void WriteU32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b.data(), b.size());
}

inline void WriteU64(std::ostream& os, std::uint64_t v) {
  WriteU32(os, static_cast<std::uint32_t>(v & 0xffffffffu));
  WriteU32(os, static_cast<std::uint32_t>(v >> 32));
}

inline void WriteI32(std::ostream& os, std::int32_t v) {
  WriteU32(os, static_cast<std::uint32_t>(v));
}

inline void WriteF32(std::ostream& os, float v) {
  WriteU32(os, std::bit_cast<std::uint32_t>(v));
}

inline void WriteString(std::ostream& os, const std::string& s) {
  WriteU32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t ReadU32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), b.size());
  if (!is) throw Error("unexpected end of binary stream");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t ReadU64(std::istream& is) {
  const std::uint64_t lo = ReadU32(is);
  const std::uint64_t hi = ReadU32(is);
  return lo | (hi << 32);
}

inline std::int32_t ReadI32(std::istream& is) {
  return static_cast<std::int32_t>(ReadU32(is));
}

inline float ReadF32(std::istream& is) {
  return std::bit_cast<float>(ReadU32(is));
}

inline std::string ReadString(std::istream& is, std::uint32_t max_len = 1u << 24) {
  const std::uint32_t n = ReadU32(is);
  if (n > max_len) throw Error("string length " + std::to_string(n) + " too large");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw Error("unexpected end of binary stream");
  return s;
}

inline void ExpectMagic(std::istream& is, const char (&magic)[5]) {
  char got[4] = {};
  is.read(got, 4);
  if (!is || std::string(got, 4) != std::string(magic, 4)) {
    throw Error(std::string("bad magic, expected ") + magic);
  }
}

}  // namespace diarkit::binary

#endif  // DIARKIT_SRC_BINARY_IO_H_
