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

#ifndef USERDP_MOG_HPP
#define USERDP_MOG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "userdp/numeric.hpp"

namespace userdp {

// A Mixture-of-Gaussians mechanism pair in one dimension:
//   P = sum_i weights[i] * N(sensitivities[i], sigma^2)   vs   Q = N(0, sigma^2).
// Sensitivities are strictly increasing and non-negative; weights sum to 1.
// When sensitivities == {0}, P and Q coincide and every divergence is zero.
struct MoGMechanism {
  double sigma = 1.0;
  std::vector<double> sensitivities;
  std::vector<double> weights;

  void validate() const {
    if (!(sigma > 0.0)) {
      throw std::invalid_argument("MoGMechanism: sigma must be > 0");
    }
    if (sensitivities.empty() || sensitivities.size() != weights.size()) {
      throw std::invalid_argument(
          "MoGMechanism: sensitivities and weights must be non-empty and have "
          "equal length");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < sensitivities.size(); ++i) {
      if (!(sensitivities[i] >= 0.0)) {
        throw std::invalid_argument("MoGMechanism: sensitivities must be >= 0");
      }
      if (i > 0 && !(sensitivities[i] > sensitivities[i - 1])) {
        throw std::invalid_argument(
            "MoGMechanism: sensitivities must be strictly increasing");
      }
      if (!(weights[i] >= 0.0)) {
        throw std::invalid_argument("MoGMechanism: weights must be >= 0");
      }
      total += weights[i];
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("MoGMechanism: weights must sum to 1");
    }
  }

  bool is_trivial() const {
    return sensitivities.size() == 1 && sensitivities[0] == 0.0;
  }

  // CDF of the mixture P at x.
  double mixture_cdf(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < sensitivities.size(); ++i) {
      s += weights[i] * standard_normal_cdf((x - sensitivities[i]) / sigma);
    }
    return s;
  }

  // Upper-tail probability of the mixture, P(X > x), kept in full precision
  // for tiny tails.
  double mixture_sf(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < sensitivities.size(); ++i) {
      s += weights[i] * standard_normal_sf((x - sensitivities[i]) / sigma);
    }
    return s;
  }

  // Quantile of the mixture by bisection between component-wise bounds.
  double mixture_quantile(double p) const {
    const double z = standard_normal_quantile(p);
    double lo = sensitivities.front() + sigma * z;
    double hi = sensitivities.back() + sigma * z;
    if (hi <= lo) return lo;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + std::abs(lo)); ++it) {
      double mid = 0.5 * (lo + hi);
      if (mixture_cdf(mid) < p) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }
};

namespace internal {

// Precomputed per-component affine exponents for the likelihood ratio:
//   P(x)/Q(x) = sum_i exp(slope_i * x + intercept_i)
// with slope_i = c_i / sigma^2 and intercept_i = ln(w_i) - c_i^2 / (2 sigma^2).
// Zero-weight components are dropped.
struct LossEvaluator {
  std::vector<double> slopes;
  std::vector<double> intercepts;

  explicit LossEvaluator(const MoGMechanism& mech) {
    const double inv_var = 1.0 / (mech.sigma * mech.sigma);
    slopes.reserve(mech.sensitivities.size());
    intercepts.reserve(mech.sensitivities.size());
    for (std::size_t i = 0; i < mech.sensitivities.size(); ++i) {
      if (mech.weights[i] == 0.0) continue;
      const double c = mech.sensitivities[i];
      slopes.push_back(c * inv_var);
      intercepts.push_back(std::log(mech.weights[i]) -
                           0.5 * c * c * inv_var);
    }
  }

  double loss(double x) const {
    double m = kNegInf;
    for (std::size_t i = 0; i < slopes.size(); ++i) {
      m = std::max(m, slopes[i] * x + intercepts[i]);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < slopes.size(); ++i) {
      s += std::exp(slopes[i] * x + intercepts[i] - m);
    }
    return m + std::log(s);
  }

  // Loss and its derivative in one pass; the derivative is the
  // softmax-weighted average slope, positive whenever some c_i > 0.
  void loss_and_derivative(double x, double& value, double& deriv) const {
    double m = kNegInf;
    for (std::size_t i = 0; i < slopes.size(); ++i) {
      m = std::max(m, slopes[i] * x + intercepts[i]);
    }
    double s = 0.0, sd = 0.0;
    for (std::size_t i = 0; i < slopes.size(); ++i) {
      const double e = std::exp(slopes[i] * x + intercepts[i] - m);
      s += e;
      sd += slopes[i] * e;
    }
    value = m + std::log(s);
    deriv = sd / s;
  }
};

// Solves loss(x) = target on [lo, hi] (loss monotone non-decreasing).
// Newton from a warm start, safeguarded by the shrinking bracket; falls back
// to a bisection step whenever Newton leaves the bracket or stalls.
inline double invert_loss(const LossEvaluator& ev, double target, double lo,
                          double hi, double x0) {
  double x = std::clamp(x0, lo, hi);
  for (int it = 0; it < 200; ++it) {
    double f, df;
    ev.loss_and_derivative(x, f, df);
    if (f > target) {
      hi = x;
    } else {
      lo = x;
    }
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(lo))) break;
    double step_x = (df > 0.0) ? x - (f - target) / df : kNegInf;
    if (step_x > lo && step_x < hi) {
      if (std::abs(step_x - x) <= 1e-13 * std::max(1.0, std::abs(x))) {
        return step_x;
      }
      x = step_x;
    } else {
      x = 0.5 * (lo + hi);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace internal

// Log-likelihood ratio ln(P(x)/Q(x)) of the mechanism pair at x, computed in
// log space. Non-decreasing in x since all sensitivities are >= 0.
inline double privacy_loss(const MoGMechanism& mech, double x) {
  mech.validate();
  return internal::LossEvaluator(mech).loss(x);
}

}  // namespace userdp

#endif  // USERDP_MOG_HPP
