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
//
// Test-only oracles. Everything here is independent of the library's
// accounting path: densities are integrated by quadrature, compositions are
// redone by naive convolution, and closed forms are evaluated directly.

#ifndef USERDP_TESTS_ORACLES_HPP
#define USERDP_TESTS_ORACLES_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "userdp/mog.hpp"
#include "userdp/numeric.hpp"
#include "userdp/pld.hpp"

namespace userdp::oracles {

// Hockey-stick divergence by trapezoid quadrature on a dense x-grid. The
// mixture and reference densities are tabulated once; each (epsilon,
// direction) query is a single pass.
class HockeyStickQuadrature {
 public:
  explicit HockeyStickQuadrature(const MoGMechanism& mech,
                                 std::size_t points = 2'000'001)
      : mech_(mech) {
    const double lo = std::min(0.0, mech.sensitivities.front()) -
                      14.0 * mech.sigma;
    const double hi = mech.sensitivities.back() + 14.0 * mech.sigma;
    step_ = (hi - lo) / static_cast<double>(points - 1);
    p_.resize(points);
    q_.resize(points);
    const double inv_sigma = 1.0 / mech.sigma;
    const double norm = 1.0 / (mech.sigma * std::sqrt(2.0 * M_PI));
    for (std::size_t i = 0; i < points; ++i) {
      const double x = lo + step_ * static_cast<double>(i);
      double p = 0.0;
      for (std::size_t c = 0; c < mech.sensitivities.size(); ++c) {
        const double z = (x - mech.sensitivities[c]) * inv_sigma;
        p += mech.weights[c] * std::exp(-0.5 * z * z);
      }
      p_[i] = p * norm;
      const double z0 = x * inv_sigma;
      q_[i] = std::exp(-0.5 * z0 * z0) * norm;
    }
  }

  // integral of max(P - e^eps Q, 0) for kAdd, max(Q - e^eps P, 0) for kRemove.
  double delta(double epsilon, Direction direction) const {
    const double alpha = std::exp(epsilon);
    double sum = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) {
      const double f = direction == Direction::kAdd ? p_[i] - alpha * q_[i]
                                                    : q_[i] - alpha * p_[i];
      const double v = f > 0.0 ? f : 0.0;
      sum += (i == 0 || i + 1 == p_.size()) ? 0.5 * v : v;
    }
    return sum * step_;
  }

  double symmetric_delta(double epsilon) const {
    return std::max(delta(epsilon, Direction::kAdd),
                    delta(epsilon, Direction::kRemove));
  }

 private:
  MoGMechanism mech_;
  double step_ = 0.0;
  std::vector<double> p_, q_;
};

// Closed-form delta of the pure Gaussian mechanism with sensitivity 1:
// Phi(1/(2 sigma) - eps sigma) - e^eps Phi(-1/(2 sigma) - eps sigma).
inline double analytic_gaussian_delta(double sigma, double epsilon) {
  const double a = 1.0 / (2.0 * sigma);
  const double b = epsilon * sigma;
  return standard_normal_cdf(a - b) -
         std::exp(epsilon) * standard_normal_cdf(-a - b);
}

// t-fold self-composition by naive dense convolution: no pruning, no
// transform, no squaring. Deliberately the dumbest correct implementation.
inline PrivacyLossDistribution dense_self_compose(
    const PrivacyLossDistribution& pld, std::uint64_t t) {
  PrivacyLossDistribution out = pld;
  for (std::uint64_t step = 1; step < t; ++step) {
    std::vector<double> next(out.masses.size() + pld.masses.size() - 1, 0.0);
    for (std::size_t i = 0; i < out.masses.size(); ++i) {
      for (std::size_t j = 0; j < pld.masses.size(); ++j) {
        next[i + j] += out.masses[i] * pld.masses[j];
      }
    }
    out.masses = std::move(next);
    out.origin_index += pld.origin_index;
    out.infinity_mass =
        out.infinity_mass + pld.infinity_mass -
        out.infinity_mass * pld.infinity_mass;
  }
  return out;
}

// Binomial pmf in long double via the exact binomial coefficient recurrence;
// reference for the log-space production path.
inline std::vector<double> exact_binomial_pmf(int k, double p) {
  std::vector<double> pmf(static_cast<std::size_t>(k) + 1);
  long double coeff = 1.0L;
  const long double lp = static_cast<long double>(p);
  const long double l1p = 1.0L - lp;
  for (int i = 0; i <= k; ++i) {
    pmf[static_cast<std::size_t>(i)] = static_cast<double>(
        coeff * std::pow(lp, static_cast<long double>(i)) *
        std::pow(l1p, static_cast<long double>(k - i)));
    coeff = coeff * static_cast<long double>(k - i) /
            static_cast<long double>(i + 1);
  }
  return pmf;
}

// Grid options for a single-round oracle comparison. The pessimistic
// rounding bias of delta at epsilon is about
//   (spacing / 2) * e^eps * Q(L >= eps)      (add direction)
//   (spacing / 2) * e^eps * P(L <= -eps)     (remove direction)
// so the spacing is sized to keep the worst bias across the queried epsilons
// under bias_budget, and the loss support is capped just above the largest
// epsilon (the fold-off slack is e^{eps - cap}).
inline PldOptions oracle_grid(const MoGMechanism& mech,
                              const std::vector<double>& epsilons,
                              double bias_budget = 2.5e-7) {
  PldOptions opts;
  opts.max_buckets = std::size_t{1} << 25;
  if (mech.is_trivial()) return opts;
  const internal::LossEvaluator ev(mech);
  double x_lo = mech.mixture_quantile(1e-16) - mech.sigma;
  double x_hi = mech.mixture_quantile(1.0 - 1e-16) + mech.sigma;
  double eps_max = 0.0;
  double worst = 0.0;
  for (double eps : epsilons) {
    eps_max = std::max(eps_max, eps);
    // Add direction: Q mass at or above the loss level eps.
    if (ev.loss(x_hi) >= eps) {
      const double x = internal::invert_loss(ev, eps, x_lo, x_hi,
                                             0.5 * (x_lo + x_hi));
      worst = std::max(worst,
                       std::exp(eps) * standard_normal_sf(x / mech.sigma));
    }
    // Remove direction: P mass at or below the loss level -eps.
    if (ev.loss(x_lo) <= -eps) {
      const double x = internal::invert_loss(ev, -eps, x_lo, x_hi,
                                             0.5 * (x_lo + x_hi));
      worst = std::max(worst, std::exp(eps) * mech.mixture_cdf(x));
    }
  }
  const double spacing = 2.0 * bias_budget / std::max(worst, 1e-9);
  opts.grid_spacing = std::clamp(spacing, 5e-7, 1e-4);
  opts.loss_cap = eps_max + 30.0;
  return opts;
}

// Renyi divergence R_alpha(P, Q) (or the reverse ordering) by trapezoid
// quadrature of exp(alpha log num + (1-alpha) log den).
inline double renyi_quadrature(const MoGMechanism& mech, double alpha,
                               bool reverse, std::size_t points = 2'000'001) {
  const double lo =
      std::min(0.0, mech.sensitivities.front()) - 16.0 * mech.sigma;
  const double hi = mech.sensitivities.back() + 16.0 * mech.sigma;
  const double step = (hi - lo) / static_cast<double>(points - 1);
  const double inv_var = 1.0 / (mech.sigma * mech.sigma);
  const double log_norm =
      -std::log(mech.sigma) - 0.5 * std::log(2.0 * M_PI);
  double sum = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = lo + step * static_cast<double>(i);
    // log densities of the mixture and the reference Gaussian
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < mech.sensitivities.size(); ++c) {
      if (mech.weights[c] == 0.0) continue;
      const double d = x - mech.sensitivities[c];
      m = std::max(m, std::log(mech.weights[c]) - 0.5 * d * d * inv_var);
    }
    double acc = 0.0;
    for (std::size_t c = 0; c < mech.sensitivities.size(); ++c) {
      if (mech.weights[c] == 0.0) continue;
      const double d = x - mech.sensitivities[c];
      acc += std::exp(std::log(mech.weights[c]) - 0.5 * d * d * inv_var - m);
    }
    const double log_p = log_norm + m + std::log(acc);
    const double log_q = log_norm - 0.5 * x * x * inv_var;
    const double log_num = reverse ? log_q : log_p;
    const double log_den = reverse ? log_p : log_q;
    const double v = std::exp(alpha * log_num + (1.0 - alpha) * log_den);
    sum += (i == 0 || i + 1 == points) ? 0.5 * v : v;
  }
  return std::log(sum * step) / (alpha - 1.0);
}

}  // namespace userdp::oracles

#endif  // USERDP_TESTS_ORACLES_HPP
