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

#include "pronscore/types.hpp"

#include "pronscore/errors.hpp"

namespace pronscore {

PhoneSet::PhoneSet(std::vector<std::string> symbols)
    : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i].empty()) {
      throw ValidationError("phone symbol at position " + std::to_string(i) +
                            " is empty");
    }
    auto [it, inserted] = index_.emplace(symbols_[i], static_cast<int>(i));
    if (!inserted) {
      throw ValidationError("duplicate phone symbol '" + symbols_[i] + "'");
    }
  }
}

std::optional<int> PhoneSet::find(const std::string& symbol) const {
  auto it = index_.find(symbol);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

}  // namespace pronscore
