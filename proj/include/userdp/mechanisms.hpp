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

#ifndef USERDP_MECHANISMS_HPP
#define USERDP_MECHANISMS_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "userdp/common.hpp"
#include "userdp/numeric.hpp"
#include "userdp/pld.hpp"

namespace userdp {

// DP event of T steps of example-level-sampled DP-SGD on a pool with at most
// K examples per user: per step the dominating pair is
// (N(0, sigma^2), N(Bin(K, p), sigma^2)).
struct ElsEventSpec {
  double sigma = 1.0;
  double sampling_prob = 0.0;  // p
  int group_size = 1;          // K
  std::uint64_t steps = 1;     // T

  void validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("ElsEventSpec: sigma > 0");
    if (!(sampling_prob >= 0.0 && sampling_prob <= 1.0)) {
      throw std::invalid_argument("ElsEventSpec: p must be in [0, 1]");
    }
    if (group_size < 1) throw std::invalid_argument("ElsEventSpec: K >= 1");
    if (steps < 1) throw std::invalid_argument("ElsEventSpec: T >= 1");
  }
};

// DP event of T steps of user-level-sampled DP-SGD: per step the dominating
// pair is (N(0, sigma^2), N(Bern(q), sigma^2)).
struct UlsEventSpec {
  double sigma = 1.0;
  double sampling_prob = 0.0;  // q
  std::uint64_t steps = 1;     // T

  void validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("UlsEventSpec: sigma > 0");
    if (!(sampling_prob >= 0.0 && sampling_prob <= 1.0)) {
      throw std::invalid_argument("UlsEventSpec: q must be in [0, 1]");
    }
    if (steps < 1) throw std::invalid_argument("UlsEventSpec: T >= 1");
  }
};

// Binomial pmf computed in log space then exponentiated; avoids underflow
// for K up to 2^10 and p down to 1e-6. For K <= 62 the coefficient fits a
// long double mantissa exactly, above that log-gamma takes over.
inline std::vector<double> binomial_weights(int k, double p) {
  std::vector<double> w(static_cast<std::size_t>(k) + 1, 0.0);
  if (p <= 0.0) {
    w[0] = 1.0;
    return w;
  }
  if (p >= 1.0) {
    w.back() = 1.0;
    return w;
  }
  const long double log_p = std::log(static_cast<long double>(p));
  const long double log_1mp = std::log1p(static_cast<long double>(-p));
  long double coeff = 1.0L;  // exact while it fits the mantissa
  for (int i = 0; i <= k; ++i) {
    const long double log_coeff =
        k <= 62 ? std::log(coeff)
                : static_cast<long double>(log_binomial_coefficient(
                      static_cast<std::uint64_t>(k),
                      static_cast<std::uint64_t>(i)));
    w[static_cast<std::size_t>(i)] =
        static_cast<double>(std::exp(log_coeff + i * log_p + (k - i) * log_1mp));
    coeff = coeff * static_cast<long double>(k - i) /
            static_cast<long double>(i + 1);
  }
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  return w;
}

inline MoGMechanism els_mechanism(const ElsEventSpec& spec) {
  spec.validate();
  MoGMechanism mech;
  mech.sigma = spec.sigma;
  mech.sensitivities.resize(static_cast<std::size_t>(spec.group_size) + 1);
  for (int i = 0; i <= spec.group_size; ++i) {
    mech.sensitivities[static_cast<std::size_t>(i)] = static_cast<double>(i);
  }
  mech.weights = binomial_weights(spec.group_size, spec.sampling_prob);
  return mech;
}

inline MoGMechanism uls_mechanism(const UlsEventSpec& spec) {
  spec.validate();
  MoGMechanism mech;
  mech.sigma = spec.sigma;
  mech.sensitivities = {0.0, 1.0};
  mech.weights = {1.0 - spec.sampling_prob, spec.sampling_prob};
  return mech;
}

// Family of events parameterized by the noise multiplier; the calibration
// target.
struct EventFamily {
  enum class Kind { kEls, kUls };
  Kind kind = Kind::kUls;
  double sampling_prob = 0.0;
  int group_size = 1;  // ELS only
  std::uint64_t steps = 1;

  static EventFamily els(double p, int k, std::uint64_t t) {
    return EventFamily{Kind::kEls, p, k, t};
  }
  static EventFamily uls(double q, std::uint64_t t) {
    return EventFamily{Kind::kUls, q, 1, t};
  }

  MoGMechanism mechanism_at(double sigma) const {
    if (kind == Kind::kEls) {
      return els_mechanism({sigma, sampling_prob, group_size, steps});
    }
    return uls_mechanism({sigma, sampling_prob, steps});
  }
};

// Symmetric delta of the family's composed event at a given noise multiplier.
inline double family_delta(const EventFamily& family, double sigma,
                           double epsilon, const PldOptions& options = {}) {
  return symmetric_delta(family.mechanism_at(sigma), family.steps, epsilon,
                         options);
}

// Smallest sigma (relative tolerance 1e-3) whose symmetric delta at the
// target epsilon is <= the target delta. Bisection on log(sigma) over an
// expanding bracket starting at [1e-3, 1e3]; throws UnsatisfiableError once
// the bracket passes 1e6. A bucket-cap overflow during probing is treated as
// "sigma too small" (overflow only occurs when the loss range explodes, where
// delta is near 1 anyway).
inline double calibrate_sigma(const EventFamily& family, PrivacyParams target,
                              const PldOptions& options = {}) {
  target.validate();
  if (!(target.delta > 0.0 && target.delta < 1.0)) {
    throw std::invalid_argument("calibrate_sigma: delta must be in (0, 1)");
  }
  auto exceeds = [&](double sigma) {
    return internal::symmetric_delta_exceeds(family.mechanism_at(sigma),
                                             family.steps, target.epsilon,
                                             target.delta, options);
  };
  double lo = 1e-3;
  double hi = 1e3;
  if (!exceeds(lo)) {
    // Even the smallest initial sigma satisfies the target; shrink until the
    // bracket straddles or the noise is effectively zero.
    while (lo > 1e-9) {
      hi = lo;
      lo /= 10.0;
      if (exceeds(lo)) break;
    }
    if (!exceeds(lo)) return lo;
  } else {
    while (exceeds(hi)) {
      lo = hi;
      hi *= 10.0;
      if (hi > 1e6) {
        throw UnsatisfiableError(
            "calibrate_sigma: bracket exhausted, no sigma <= 1e6 meets the "
            "target");
      }
    }
  }
  while (hi > lo * (1.0 + 1e-3)) {
    const double mid = std::sqrt(lo * hi);
    if (exceeds(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

// Thread-safe memo for repeated calibrations over a grid.
class CalibrationCache {
 public:
  double get(const EventFamily& family, const PrivacyParams& target,
             const PldOptions& options = {}) {
    Key key{static_cast<int>(family.kind), family.sampling_prob,
            family.group_size, family.steps, target.epsilon, target.delta,
            options.grid_spacing};
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = memo_.find(key);
      if (it != memo_.end()) return it->second;
    }
    const double sigma = calibrate_sigma(family, target, options);
    std::lock_guard<std::mutex> lock(mu_);
    memo_.emplace(key, sigma);
    return sigma;
  }

 private:
  using Key =
      std::tuple<int, double, int, std::uint64_t, double, double, double>;
  std::mutex mu_;
  std::map<Key, double> memo_;
};

// Black-box group-privacy promotion of an example-level guarantee:
//   (eps, delta) -> (G * eps, delta * (e^{G eps} - 1) / (e^{eps} - 1)).
// The multiplicative-delta variant; the promoted delta may exceed 1, which
// callers report as "diverged". Computed in log space to survive large G*eps.
inline PrivacyParams blackbox_group_epsilon(double example_eps,
                                            double example_delta,
                                            int group_size) {
  if (!(example_eps > 0.0)) {
    throw std::invalid_argument("blackbox_group_epsilon: epsilon must be > 0");
  }
  if (group_size < 1) {
    throw std::invalid_argument("blackbox_group_epsilon: G must be >= 1");
  }
  if (group_size == 1) return {example_eps, example_delta};
  auto log_expm1 = [](double x) {
    return x > 30.0 ? x + std::log1p(-std::exp(-x))
                    : std::log(std::expm1(x));
  };
  const double g = static_cast<double>(group_size);
  const double log_delta = std::log(example_delta) + log_expm1(g * example_eps) -
                           log_expm1(example_eps);
  return {g * example_eps, std::exp(log_delta)};
}

// Outcome of promoting an example-level accountant answer to the user level
// through the black-box reduction. diverged means the promoted delta left
// (0, 1], i.e. the reduction gives no usable guarantee.
struct BlackboxUserLevel {
  double user_epsilon = 0.0;
  double user_delta = 0.0;
  bool diverged = false;
};

// Single-shot variant: reads the example-level epsilon at the user-level
// delta target, then promotes. This is the comparison baseline; it reports
// "diverged" as soon as the promoted delta exceeds 1.
inline BlackboxUserLevel blackbox_user_level_single_shot(
    const PrivacyLossDistribution& composed_example_pld, double delta_target,
    int group_size) {
  BlackboxUserLevel out;
  double eps_ex;
  try {
    eps_ex = epsilon_at_delta(composed_example_pld, delta_target);
  } catch (const UnsatisfiableError&) {
    out.diverged = true;
    return out;
  }
  if (eps_ex <= 0.0) eps_ex = 1e-9;
  const PrivacyParams promoted =
      blackbox_group_epsilon(eps_ex, delta_target, group_size);
  out.user_epsilon = promoted.epsilon;
  out.user_delta = promoted.delta;
  out.diverged = !(promoted.delta <= 1.0) || !std::isfinite(promoted.delta);
  return out;
}

// Fixed-point variant: splits the user-level delta budget so the promoted
// delta lands on the target, iterating epsilon(delta_ex) against the
// promotion factor. Returns nullopt when the iteration diverges (the usual
// outcome for large G).
inline std::optional<double> blackbox_user_level_fixed_point(
    const PrivacyLossDistribution& composed_example_pld, double user_delta,
    int group_size, int max_iterations = 40) {
  const double g = static_cast<double>(group_size);
  auto log_expm1 = [](double x) {
    return x > 30.0 ? x + std::log1p(-std::exp(-x))
                    : std::log(std::expm1(x));
  };
  double delta_ex = user_delta;
  double eps_ex = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    if (delta_ex <= composed_example_pld.infinity_mass || delta_ex < 1e-290) {
      return std::nullopt;
    }
    eps_ex = epsilon_at_delta(composed_example_pld, delta_ex);
    if (eps_ex <= 0.0) eps_ex = 1e-9;
    if (g * eps_ex > 700.0 && user_delta < 1.0) {
      // The promotion factor alone dwarfs any representable delta split.
      return std::nullopt;
    }
    const double log_next = std::log(user_delta) + log_expm1(eps_ex) -
                            log_expm1(g * eps_ex);
    const double next = std::exp(log_next);
    if (std::abs(std::log(next) - std::log(delta_ex)) < 1e-3) {
      return g * epsilon_at_delta(composed_example_pld, next);
    }
    delta_ex = next;
  }
  return std::nullopt;
}

// ----------------------------------------------------------------------------
// CLI-facing JSON schema: {"kind":"els"|"uls","sigma":..,"p"|"q":..,"K":..,
// "T":..}; calibration requests add {"epsilon":..,"delta":..}.
// ----------------------------------------------------------------------------

struct EventJson {
  EventFamily family;
  double sigma = 0.0;

  MoGMechanism mechanism() const { return family.mechanism_at(sigma); }
};

inline EventJson parse_event_json(const nlohmann::json& j) {
  EventJson out;
  const std::string kind = j.at("kind").get<std::string>();
  out.family.steps = j.at("T").get<std::uint64_t>();
  if (j.contains("sigma")) out.sigma = j.at("sigma").get<double>();
  if (kind == "els") {
    out.family.kind = EventFamily::Kind::kEls;
    out.family.sampling_prob = j.at("p").get<double>();
    out.family.group_size = j.at("K").get<int>();
  } else if (kind == "uls") {
    out.family.kind = EventFamily::Kind::kUls;
    out.family.sampling_prob = j.at("q").get<double>();
  } else {
    throw std::invalid_argument("event kind must be \"els\" or \"uls\"");
  }
  return out;
}

}  // namespace userdp

#endif  // USERDP_MECHANISMS_HPP
