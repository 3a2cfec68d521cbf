// Copyright 2026 The userdp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef USERDP_COMMON_HPP
#define USERDP_COMMON_HPP

#include <stdexcept>
#include <string>

namespace userdp {

inline constexpr const char* kVersion = "0.1.0";

// Sampling in the simulator is shuffle-based with fixed batch/cohort sizes,
// while the accountant assumes Poisson sampling. Emitted with every output
// file so downstream consumers see the gap.
inline constexpr const char* kSamplingCaveat =
    "accounting assumes Poisson sampling; the simulator uses shuffling with "
    "fixed batch/cohort sizes";

// A requested guarantee cannot be met (e.g. delta at or below the
// distribution's infinity mass, or a calibration bracket ran out).
class UnsatisfiableError : public std::runtime_error {
 public:
  explicit UnsatisfiableError(const std::string& what)
      : std::runtime_error(what) {}
};

// A computation would exceed a configured numeric capacity, typically the
// privacy-loss bucket cap. The fix is a coarser grid, not a retry.
class CapacityError : public std::runtime_error {
 public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// An (epsilon, delta) pair. epsilon >= 0 and delta in [0, 1].
struct PrivacyParams {
  double epsilon = 0.0;
  double delta = 0.0;

  void validate() const {
    if (!(epsilon >= 0.0)) {
      throw std::invalid_argument("PrivacyParams: epsilon must be >= 0");
    }
    if (!(delta >= 0.0 && delta <= 1.0)) {
      throw std::invalid_argument("PrivacyParams: delta must be in [0, 1]");
    }
  }
};

}  // namespace userdp

#endif  // USERDP_COMMON_HPP
