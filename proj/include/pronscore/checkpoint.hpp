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

#ifndef PRONSCORE_CHECKPOINT_HPP
#define PRONSCORE_CHECKPOINT_HPP

#include <cstdint>
#include <string>

#include "pronscore/head.hpp"

namespace pronscore {

// A saved head: architecture, parameters, and the provenance needed to
// reproduce or resume a run. On disk: u32 little-endian header length, a
// JSON header (config, seed, stage, tensor table with offsets), then the
// tensors as concatenated FMAT blocks.
struct Checkpoint {
  HeadConfig config;
  HeadParams params;
  std::uint64_t seed = 0;
  std::string stage;  // free-form provenance, e.g. "layO" or "layO+1"
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pronscore

#endif  // PRONSCORE_CHECKPOINT_HPP
