// Copyright 2026 The Guardian Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GUARDIAN_HASH_HPP_
#define GUARDIAN_HASH_HPP_

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>

namespace guardian {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

// 64-bit FNV-1a over the raw bytes of `data`. This hash is part of the
// on-disk format (rule identifiers, feature bucketing), so it must never
// change: fnv1a64("read_file") == 0xa216654b81c80068.
constexpr std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = kFnvOffsetBasis;
  for (char c : data) {
    h ^= static_cast<std::uint8_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

// Fixed-width lowercase hex, 16 digits, no prefix.
inline std::string to_hex16(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

// Canonical form used in identifiers and file names: lowercase, every run
// of non-alphanumeric characters collapsed to one '_', leading/trailing '_'
// trimmed. "Senior Data-Researcher" -> "senior_data_researcher".
inline std::string canonical_name(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  bool pending_sep = false;
  for (char c : name) {
    unsigned char uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      if (pending_sep && !out.empty()) out.push_back('_');
      pending_sep = false;
      out.push_back(static_cast<char>(std::tolower(uc)));
    } else {
      pending_sep = true;
    }
  }
  return out;
}

}  // namespace guardian

#endif  // GUARDIAN_HASH_HPP_
