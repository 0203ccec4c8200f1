// Copyright 2026 PronScore contributors
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

#ifndef PRONSCORE_ERRORS_HPP
#define PRONSCORE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pronscore {

// Raised when an input file or configuration violates a documented format or
// invariant. The CLI maps this to exit code 1; everything else maps to 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pronscore

#endif  // PRONSCORE_ERRORS_HPP
