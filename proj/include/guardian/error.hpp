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

#ifndef GUARDIAN_ERROR_HPP_
#define GUARDIAN_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace guardian {

// Single exception type for all recoverable failures (parse errors, schema
// violations, bad configuration). The message is the contract: callers that
// surface errors to users print what() verbatim, so messages name the thing
// that failed (line, field, file) rather than the code path.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

}  // namespace guardian

#endif  // GUARDIAN_ERROR_HPP_
