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

#ifndef USERDP_RDP_HPP
#define USERDP_RDP_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "userdp/common.hpp"
#include "userdp/mechanisms.hpp"
#include "userdp/mog.hpp"
#include "userdp/numeric.hpp"

namespace userdp {

// Integer-order Renyi divergence query against a MoG mechanism pair.
struct RenyiQuery {
  int alpha = 2;
  MoGMechanism mech;

  void validate() const {
    if (alpha < 2) throw std::invalid_argument("RenyiQuery: alpha must be >= 2");
    mech.validate();
  }
};

// Exact integer-order Renyi divergence R_alpha(P, Q) for a MoG pair, from the
// expansion
//   exp((alpha-1) R_alpha) =
//     sum over tuples (c_1..c_alpha) of prod_i w_{c_i}
//       * exp(((sum_i c_i)^2 - sum_i c_i^2) / (2 sigma^2)).
// Tuples sharing a multiset are collapsed with a multinomial coefficient,
// keeping alpha = 8 with K = 16 tractable; accumulation is in log space since
// terms span hundreds of orders of magnitude at small sigma.
inline double renyi_mog(const RenyiQuery& query) {
  query.validate();
  if (query.mech.is_trivial()) return 0.0;

  std::vector<double> c;
  std::vector<double> log_w;
  for (std::size_t i = 0; i < query.mech.sensitivities.size(); ++i) {
    if (query.mech.weights[i] == 0.0) continue;
    c.push_back(query.mech.sensitivities[i]);
    log_w.push_back(std::log(query.mech.weights[i]));
  }
  const int alpha = query.alpha;
  const std::size_t support = c.size();
  const double multisets = std::exp(log_binomial_coefficient(
      static_cast<std::uint64_t>(support) + static_cast<std::uint64_t>(alpha) -
          1,
      static_cast<std::uint64_t>(alpha)));
  if (multisets > 1e7) {
    throw CapacityError(
        "renyi_mog: multiset enumeration too large; use a quadrature "
        "fallback");
  }

  const double inv_two_var = 1.0 / (2.0 * query.mech.sigma * query.mech.sigma);
  const double log_alpha_factorial =
      std::lgamma(static_cast<double>(alpha) + 1.0);
  LogSumExpAccumulator acc;

  // Depth-first enumeration of multiplicity vectors (k_0, ..., k_m) with
  // sum k_j == alpha.
  std::vector<int> counts(support, 0);
  auto recurse = [&](auto&& self, std::size_t j, int remaining, double sum_c,
                     double sum_c2, double log_weight_and_multinomial) -> void {
    if (j + 1 == support) {
      const int k = remaining;
      const double lw = log_weight_and_multinomial + k * log_w[j] -
                        std::lgamma(static_cast<double>(k) + 1.0);
      const double s = sum_c + k * c[j];
      const double s2 = sum_c2 + k * c[j] * c[j];
      acc.add(log_alpha_factorial + lw + (s * s - s2) * inv_two_var);
      return;
    }
    for (int k = 0; k <= remaining; ++k) {
      self(self, j + 1, remaining - k, sum_c + k * c[j],
           sum_c2 + k * c[j] * c[j],
           log_weight_and_multinomial + k * log_w[j] -
               std::lgamma(static_cast<double>(k) + 1.0));
    }
  };
  recurse(recurse, 0, alpha, 0.0, 0.0, 0.0);

  const double log_moment = acc.value();
  const double r = log_moment / static_cast<double>(alpha - 1);
  return r < 0.0 ? 0.0 : r;
}

struct Lemma1Result {
  double lhs = 0.0;  // R_alpha of the K-aggregated event at noise K*sigma
  double rhs = 0.0;  // R_alpha of the Bernoulli event at noise sigma
  bool holds = false;
};

// Numeric check of the group-aggregation inequality
//   R_alpha(N(Bin(K,p), (K sigma)^2) vs N(0, (K sigma)^2))
//     <= R_alpha(N(Bern(p), sigma^2) vs N(0, sigma^2)).
inline Lemma1Result check_lemma1(int alpha, int k, double p, double sigma) {
  if (k < 1) throw std::invalid_argument("check_lemma1: K must be >= 1");
  ElsEventSpec lhs_spec{k * sigma, p, k, 1};
  UlsEventSpec rhs_spec{sigma, p, 1};
  Lemma1Result out;
  out.lhs = renyi_mog({alpha, els_mechanism(lhs_spec)});
  out.rhs = renyi_mog({alpha, uls_mechanism(rhs_spec)});
  out.holds = out.lhs <= out.rhs + 1e-10;
  return out;
}

}  // namespace userdp

#endif  // USERDP_RDP_HPP
