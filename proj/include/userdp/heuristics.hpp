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

#ifndef USERDP_HEURISTICS_HPP
#define USERDP_HEURISTICS_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "userdp/mechanisms.hpp"
#include "userdp/numeric.hpp"
#include "userdp/simulate.hpp"

namespace userdp {

// Estimated per-user gradient norm bound L_uls(G) from sampled users.
struct LipschitzEstimate {
  int group_size = 1;
  double value = 0.0;
  std::size_t sample_size = 0;
  enum class Statistic { kMedian, kMax };
  Statistic statistic = Statistic::kMedian;
};

// Group size heuristic for example-level training: the median user dataset
// size (lower median on ties).
inline std::size_t els_group_size_heuristic(const UserDataset& data) {
  data.validate();
  std::vector<std::size_t> sizes;
  sizes.reserve(data.users.size());
  for (const auto& u : data.users) sizes.push_back(u.count);
  std::sort(sizes.begin(), sizes.end());
  return sizes[(sizes.size() - 1) / 2];
}

// Samples n_users users without replacement; for each, a without-replacement
// example subset of size min(G, |D_u|); rho_u is the norm of the subset-
// average gradient at theta. Returns the chosen statistic over {rho_u}
// (lower median by default).
inline LipschitzEstimate estimate_l_uls(
    const UserDataset& data, std::span<const double> params, int group_size,
    std::size_t n_users, std::uint64_t seed,
    LipschitzEstimate::Statistic statistic =
        LipschitzEstimate::Statistic::kMedian) {
  data.validate();
  if (group_size < 1) {
    throw std::invalid_argument("estimate_l_uls: G must be >= 1");
  }
  if (n_users < 1 || n_users > data.users.size()) {
    throw std::invalid_argument("estimate_l_uls: n_users must be in [1, N]");
  }
  if (params.size() != data.dim) {
    throw std::invalid_argument("estimate_l_uls: params dimension mismatch");
  }
  Rng rng(derive_seed(seed, {0x11B5u}));
  auto sampled = sample_without_replacement(data.users.size(), n_users, rng);
  std::vector<double> norms;
  norms.reserve(n_users);
  std::vector<double> grad(data.dim);
  for (std::size_t u : sampled) {
    const auto& user = data.users[u];
    const std::size_t take = std::min<std::size_t>(
        static_cast<std::size_t>(group_size), user.count);
    auto idx = sample_without_replacement(user.count, take, rng);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t j : idx) {
      auto z = user.row(j, data.dim);
      for (std::size_t k = 0; k < data.dim; ++k) {
        grad[k] += params[k] - z[k];
      }
    }
    const double inv = 1.0 / static_cast<double>(take);
    double norm_sq = 0.0;
    for (double g : grad) norm_sq += (g * inv) * (g * inv);
    norms.push_back(std::sqrt(norm_sq));
  }
  LipschitzEstimate est;
  est.group_size = group_size;
  est.sample_size = n_users;
  est.statistic = statistic;
  if (statistic == LipschitzEstimate::Statistic::kMax) {
    est.value = *std::max_element(norms.begin(), norms.end());
  } else {
    std::sort(norms.begin(), norms.end());
    est.value = norms[(norms.size() - 1) / 2];
  }
  return est;
}

struct DoublingStep {
  int step = 0;
  int group = 1;
  std::size_t cohort = 1;
  double tau_g = 0.0;
  double tau_m = 0.0;
  std::string decision;  // "double_G", "double_M", or "double_G (cohort capped)"
};

struct EstimateAndDoubleResult {
  int group = 1;
  std::size_t cohort = 1;
  std::vector<DoublingStep> trace;
};

inline bool is_power_of_two(std::size_t v) {
  return v != 0 && std::has_single_bit(v);
}

// Greedy budget allocation between group size and cohort size: while
// G*M < B, compare the marginal noise-reduction ratios
//   tau_G = L(2G)/L(G)   and   tau_M = sigma(2M)/(2 sigma(M)),
// the factors by which the noise proxy L(G) * sigma(M)/M shrinks when one
// side doubles (the calibrated multiplier itself grows with M; the effective
// per-update scale sigma/M is what falls), and double whichever side shrinks
// it more. Strict tau_G < tau_M doubles G; ties (within 1e-9) fall to the
// else branch and double M.
// When 2M would exceed the user count, G is doubled instead and the step is
// recorded as capped. Terminates in exactly log2(B/(G0*M0)) iterations.
inline EstimateAndDoubleResult estimate_and_double(
    const UserDataset& data, std::span<const double> params, int group0,
    std::size_t cohort0, std::size_t budget, PrivacyParams target,
    std::uint64_t steps, std::uint64_t seed,
    const PldOptions& accounting = {}, CalibrationCache* cache = nullptr,
    std::size_t probe_users = 128) {
  data.validate();
  target.validate();
  if (group0 < 1 || !is_power_of_two(static_cast<std::size_t>(group0)) ||
      !is_power_of_two(cohort0) || !is_power_of_two(budget)) {
    throw std::invalid_argument(
        "estimate_and_double: G0, M0, B must be powers of two");
  }
  if (static_cast<std::size_t>(group0) * cohort0 > budget) {
    throw std::invalid_argument("estimate_and_double: G0*M0 must be <= B");
  }
  if (cohort0 > data.users.size()) {
    throw std::invalid_argument("estimate_and_double: M0 exceeds user count");
  }
  const std::size_t n_probe = std::min(probe_users, data.users.size());
  CalibrationCache local_cache;
  CalibrationCache* effective = cache ? cache : &local_cache;
  auto sigma_at = [&](std::size_t m) {
    const double q =
        static_cast<double>(m) / static_cast<double>(data.users.size());
    return effective->get(EventFamily::uls(q, steps), target, accounting);
  };

  EstimateAndDoubleResult result;
  result.group = group0;
  result.cohort = cohort0;
  int step = 0;
  while (static_cast<std::size_t>(result.group) * result.cohort < budget) {
    DoublingStep record;
    record.step = step;
    record.group = result.group;
    record.cohort = result.cohort;
    const std::uint64_t probe_seed = derive_seed(seed, {0xADDu, static_cast<std::uint64_t>(step)});
    const double l_now =
        estimate_l_uls(data, params, result.group, n_probe, probe_seed).value;
    const double l_doubled =
        estimate_l_uls(data, params, 2 * result.group, n_probe, probe_seed)
            .value;
    record.tau_g = l_now > 0.0 ? l_doubled / l_now : 1.0;
    if (2 * result.cohort > data.users.size()) {
      record.tau_m = std::numeric_limits<double>::quiet_NaN();
      record.decision = "double_G (cohort capped)";
      result.group *= 2;
    } else {
      record.tau_m =
          sigma_at(2 * result.cohort) / (2.0 * sigma_at(result.cohort));
      if (record.tau_g < record.tau_m &&
          std::abs(record.tau_g - record.tau_m) > 1e-9) {
        record.decision = "double_G";
        result.group *= 2;
      } else {
        record.decision = "double_M";
        result.cohort *= 2;
      }
    }
    result.trace.push_back(std::move(record));
    ++step;
  }
  return result;
}

}  // namespace userdp

#endif  // USERDP_HEURISTICS_HPP
