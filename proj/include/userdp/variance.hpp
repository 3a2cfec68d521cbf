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

#ifndef USERDP_VARIANCE_HPP
#define USERDP_VARIANCE_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "userdp/common.hpp"
#include "userdp/mechanisms.hpp"
#include "userdp/parallel.hpp"

namespace userdp {

// Fixed-compute comparison point: per-iteration budget B split as B = G * M
// for user-level sampling, against example-level sampling at rate
// p = B / (G_els * N).
struct BudgetSetting {
  std::size_t users = 1024;             // N
  std::size_t examples_per_user = 32;   // K
  std::uint64_t steps = 1000;           // T
  double budget = 64.0;                 // B (expected gradients/iteration)
  double cohort = 16.0;                 // M (ULS expected cohort size)
  int group_els = 32;
  int group_uls = 4;
  std::size_t dim = 1;                  // d
  double l_els = 10.0;
  double l_uls = 10.0;
  PrivacyParams target;

  double sampling_prob_els() const {
    return budget / (static_cast<double>(group_els) *
                     static_cast<double>(users));
  }
  double sampling_prob_uls() const {
    return cohort / static_cast<double>(users);
  }

  void validate() const {
    if (users < 1 || examples_per_user < 1 || steps < 1 || dim < 1 ||
        group_els < 1 || group_uls < 1) {
      throw std::invalid_argument("BudgetSetting: counts must be >= 1");
    }
    if (!(budget > 0.0) || !(cohort > 0.0)) {
      throw std::invalid_argument("BudgetSetting: budget and cohort > 0");
    }
    const double p = sampling_prob_els();
    const double q = sampling_prob_uls();
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("BudgetSetting: p = B/(G_els*N) not in [0,1]");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
      throw std::invalid_argument("BudgetSetting: q = M/N not in [0,1]");
    }
    if (std::abs(cohort * group_uls - budget) > 1e-9 * budget) {
      throw std::invalid_argument("BudgetSetting: B must equal G_uls * M");
    }
    if (!(l_uls <= l_els + 1e-12)) {
      throw std::invalid_argument("BudgetSetting: L_uls must be <= L_els");
    }
    target.validate();
  }
};

// Per-iteration noise variance of the example-level gradient estimate at a
// given noise multiplier: d * (sigma * L_els / B)^2.
inline double noise_variance_els_at_sigma(const BudgetSetting& s,
                                          double sigma) {
  const double scale = sigma * s.l_els / s.budget;
  return static_cast<double>(s.dim) * scale * scale;
}

// Same for the user-level estimate: d * (sigma * L_uls / M)^2.
inline double noise_variance_uls_at_sigma(const BudgetSetting& s,
                                          double sigma) {
  const double scale = sigma * s.l_uls / s.cohort;
  return static_cast<double>(s.dim) * scale * scale;
}

inline double calibrated_sigma_els(const BudgetSetting& s,
                                   const PldOptions& options = {},
                                   CalibrationCache* cache = nullptr) {
  const EventFamily family =
      EventFamily::els(s.sampling_prob_els(), s.group_els, s.steps);
  return cache ? cache->get(family, s.target, options)
               : calibrate_sigma(family, s.target, options);
}

inline double calibrated_sigma_uls(const BudgetSetting& s,
                                   const PldOptions& options = {},
                                   CalibrationCache* cache = nullptr) {
  const EventFamily family = EventFamily::uls(s.sampling_prob_uls(), s.steps);
  return cache ? cache->get(family, s.target, options)
               : calibrate_sigma(family, s.target, options);
}

inline double noise_variance_els(const BudgetSetting& s,
                                 const PldOptions& options = {},
                                 CalibrationCache* cache = nullptr) {
  s.validate();
  return noise_variance_els_at_sigma(s, calibrated_sigma_els(s, options, cache));
}

inline double noise_variance_uls(const BudgetSetting& s,
                                 const PldOptions& options = {},
                                 CalibrationCache* cache = nullptr) {
  s.validate();
  return noise_variance_uls_at_sigma(s, calibrated_sigma_uls(s, options, cache));
}

// One tabulated comparison row. The two ULS columns instantiate the paper-of-
// record diversity regimes: L_uls = L_els (equal) and L_uls = L_els /
// sqrt(G_uls) (maximal diversity).
struct VarianceRow {
  double budget = 0.0;
  double cohort = 0.0;
  double epsilon = 0.0;
  double var_els = 0.0;
  double var_uls_equal = 0.0;
  double var_uls_diverse = 0.0;
  double sigma_els = 0.0;
  double sigma_uls = 0.0;
};

inline constexpr const char* kVarianceCsvHeader =
    "budget,cohort,epsilon,var_els,var_uls_equal,var_uls_diverse";

// Evaluates the grid row by row (rows run in parallel, output order fixed by
// the input order).
inline std::vector<VarianceRow> variance_curves(
    const std::vector<BudgetSetting>& grid, const PldOptions& options = {},
    CalibrationCache* cache = nullptr) {
  std::vector<VarianceRow> rows(grid.size());
  CalibrationCache local_cache;
  CalibrationCache* effective = cache ? cache : &local_cache;
  parallel_for(grid.size(), [&](std::size_t i) {
    BudgetSetting s = grid[i];
    s.validate();
    VarianceRow& row = rows[i];
    row.budget = s.budget;
    row.cohort = s.cohort;
    row.epsilon = s.target.epsilon;
    row.sigma_els = calibrated_sigma_els(s, options, effective);
    row.sigma_uls = calibrated_sigma_uls(s, options, effective);
    row.var_els = noise_variance_els_at_sigma(s, row.sigma_els);
    BudgetSetting equal = s;
    equal.l_uls = s.l_els;
    row.var_uls_equal = noise_variance_uls_at_sigma(equal, row.sigma_uls);
    BudgetSetting diverse = s;
    diverse.l_uls = s.l_els / std::sqrt(static_cast<double>(s.group_uls));
    row.var_uls_diverse = noise_variance_uls_at_sigma(diverse, row.sigma_uls);
  });
  return rows;
}

}  // namespace userdp

#endif  // USERDP_VARIANCE_HPP
