// melfuse/common.hpp

// Copyright 2026 The melfuse authors
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

#ifndef MELFUSE_COMMON_HPP_
#define MELFUSE_COMMON_HPP_

#include <stdexcept>
#include <string>

namespace melfuse {

// Shape or size disagreement between operands.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad model/run configuration (wrong mode, incompatible vocabularies, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input data (corrupt file, invalid token, out-of-range target).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse (non-scalar backward, prefix past eos, ...).
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

// File system / serialization failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace melfuse

#endif  // MELFUSE_COMMON_HPP_
