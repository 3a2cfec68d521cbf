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

#ifndef USERDP_PLD_HPP
#define USERDP_PLD_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "userdp/common.hpp"
#include "userdp/fft.hpp"
#include "userdp/mog.hpp"
#include "userdp/numeric.hpp"

namespace userdp {

// Which ordering of the dominating pair the loss distribution describes:
//   kAdd    -> distribution of  ln(P(x)/Q(x)) under x ~ P, yields H(P, Q);
//   kRemove -> distribution of -ln(P(x)/Q(x)) under x ~ Q, yields H(Q, P).
enum class Direction { kAdd, kRemove };

struct PldOptions {
  // Width of a loss bucket. 1e-3 is the production default; oracle
  // cross-checks use finer grids.
  double grid_spacing = 1e-3;
  // Sampling-distribution probability left outside the discretized x-range,
  // per side. Upper side is charged to infinity_mass, so keep it small enough
  // that T-fold composition stays below the delta regime of interest.
  double tail_mass = 1e-15;
  // Hard cap on bucket counts; exceeding it raises CapacityError.
  std::size_t max_buckets = std::size_t{1} << 22;
  // Loss values beyond +/- loss_cap are folded to infinity_mass (above) or
  // the bottom bucket (below). Both are pessimistic; the fold is exact to
  // within exp(epsilon - loss_cap) for any queried epsilon.
  double loss_cap = 250.0;
  // Loss-space upper tail beyond this cumulative mass is charged to
  // infinity_mass at build time, and compose() folds support-edge runs up to
  // this cumulative mass per convolution. Pessimistic; inflates delta by at
  // most tail_fold per fold, far below every accounting tolerance, while
  // keeping composed supports near the mass that matters.
  double tail_fold = 1e-13;
  // compose() sweeps sub-floor bucket runs at the support edges.
  double prune_floor = 1e-30;
  enum class Convolution { kAuto, kDirect, kFft };
  Convolution convolution = Convolution::kAuto;
};

// Discretized distribution of the privacy loss random variable. Bucket i
// carries loss value (origin_index + i) * grid_spacing. With pessimistic set,
// realized losses were rounded up to bucket edges, so any delta computed from
// this object upper-bounds the true delta.
struct PrivacyLossDistribution {
  double grid_spacing = 1e-3;
  std::int64_t origin_index = 0;
  std::vector<double> masses;
  double infinity_mass = 0.0;
  bool pessimistic = true;

  double loss_value(std::size_t i) const {
    return (static_cast<double>(origin_index) + static_cast<double>(i)) *
           grid_spacing;
  }

  double total_mass() const {
    double s = infinity_mass;
    for (double m : masses) s += m;
    return s;
  }

  void validate() const {
    if (!(grid_spacing > 0.0)) {
      throw std::invalid_argument("PLD: grid_spacing must be > 0");
    }
    if (!(infinity_mass >= 0.0)) {
      throw std::invalid_argument("PLD: infinity_mass must be >= 0");
    }
    for (double m : masses) {
      if (!(m >= 0.0)) throw std::invalid_argument("PLD: masses must be >= 0");
    }
    const double total = total_mass();
    if (std::abs(total - 1.0) > 1e-9) {
      throw std::invalid_argument("PLD: masses + infinity_mass must sum to 1");
    }
  }
};

inline void to_json(nlohmann::json& j, const PrivacyLossDistribution& pld) {
  j = nlohmann::json{{"grid_spacing", pld.grid_spacing},
                     {"origin_index", pld.origin_index},
                     {"masses", pld.masses},
                     {"infinity_mass", pld.infinity_mass},
                     {"pessimistic", pld.pessimistic}};
}

inline void from_json(const nlohmann::json& j, PrivacyLossDistribution& pld) {
  j.at("grid_spacing").get_to(pld.grid_spacing);
  j.at("origin_index").get_to(pld.origin_index);
  j.at("masses").get_to(pld.masses);
  j.at("infinity_mass").get_to(pld.infinity_mass);
  j.at("pessimistic").get_to(pld.pessimistic);
}

namespace internal {

inline std::int64_t ceil_bucket(double loss, double spacing) {
  return static_cast<std::int64_t>(std::ceil(loss / spacing));
}

// Sweeps the monotone loss function over ascending bucket boundaries,
// returning the x positions where the loss crosses each boundary. Targets
// must be ascending; roots are ascending as well.
class BoundarySweeper {
 public:
  BoundarySweeper(const LossEvaluator& ev, double x_lo, double x_hi)
      : ev_(ev), lo_(x_lo), hi_(x_hi), prev_(x_lo), step_((x_hi - x_lo)) {}

  double solve(double target) {
    double guess = prev_ + step_;
    double x = invert_loss(ev_, target, prev_, hi_, guess);
    step_ = std::max(x - prev_, 1e-300);
    prev_ = x;
    return x;
  }

 private:
  const LossEvaluator& ev_;
  double lo_, hi_, prev_, step_;
};

}  // namespace internal

// Discretizes the privacy loss of a Mixture-of-Gaussians pair in the given
// direction. Exploits monotonicity of the loss in x: each bucket's mass is a
// CDF difference of the sampling distribution between consecutive loss-level
// crossings. Masses are rounded to upper bucket edges (pessimistic); x-range
// tail mass goes to infinity_mass (upper) or the bottom bucket (lower).
inline PrivacyLossDistribution build_pld(const MoGMechanism& mech,
                                         Direction direction,
                                         const PldOptions& options = {}) {
  mech.validate();
  if (!(options.grid_spacing > 0.0)) {
    throw std::invalid_argument("build_pld: grid_spacing must be > 0");
  }
  if (!(options.tail_mass > 0.0 && options.tail_mass < 1e-6)) {
    throw std::invalid_argument("build_pld: tail_mass must be in (0, 1e-6)");
  }
  const double spacing = options.grid_spacing;

  PrivacyLossDistribution pld;
  pld.grid_spacing = spacing;
  pld.pessimistic = true;

  if (mech.is_trivial()) {
    pld.origin_index = 0;
    pld.masses = {1.0};
    pld.infinity_mass = 0.0;
    return pld;
  }

  const internal::LossEvaluator ev(mech);
  const double sigma = mech.sigma;
  const bool add = (direction == Direction::kAdd);

  // The PLD's upper loss tail is truncated at the larger fold mass (charged
  // to infinity); the lower tail keeps the fine tail_mass since it only
  // rolls into the bottom bucket. For the remove direction the upper loss
  // tail sits at small x.
  const double upper_tail = std::max(options.tail_mass, options.tail_fold);
  double x_lo, x_hi;
  if (add) {
    x_lo = mech.mixture_quantile(options.tail_mass);
    x_hi = mech.mixture_quantile(1.0 - upper_tail);
  } else {
    x_lo = sigma * standard_normal_quantile(upper_tail);
    x_hi = -sigma * standard_normal_quantile(options.tail_mass);
  }

  // Loss (in PLD coordinates) attained at the retained x-range ends. For the
  // remove direction the PLD variable is -loss(x), which decreases in x.
  const double loss_at_xlo = ev.loss(x_lo);
  const double loss_at_xhi = ev.loss(x_hi);
  const double lmin_raw = add ? loss_at_xlo : -loss_at_xhi;
  const double lmax_raw = add ? loss_at_xhi : -loss_at_xlo;

  const double lmin = std::max(lmin_raw, -options.loss_cap);
  const double lmax = std::min(lmax_raw, options.loss_cap);

  if (lmin_raw > options.loss_cap) {
    // Even the smallest retained loss exceeds the cap: everything is charged
    // to infinity (delta == 1 for any queryable epsilon).
    pld.origin_index = 0;
    pld.masses.clear();
    pld.infinity_mass = 1.0;
    return pld;
  }

  auto cdf_sampling = [&](double x) {
    return add ? mech.mixture_cdf(x) : standard_normal_cdf(x / sigma);
  };
  auto sf_sampling = [&](double x) {
    return add ? mech.mixture_sf(x) : standard_normal_sf(x / sigma);
  };

  if (lmax_raw < -options.loss_cap) {
    // All retained mass sits below the lower cap; it collapses into one
    // bucket at the cap. The unbounded-loss end of the x-range still goes to
    // infinity_mass.
    pld.origin_index = internal::ceil_bucket(-options.loss_cap, spacing);
    if (add) {
      pld.masses = {cdf_sampling(x_hi)};
      pld.infinity_mass = sf_sampling(x_hi);
    } else {
      pld.masses = {sf_sampling(x_lo)};
      pld.infinity_mass = cdf_sampling(x_lo);
    }
    return pld;
  }

  std::int64_t i_lo = internal::ceil_bucket(lmin, spacing);
  std::int64_t i_hi = internal::ceil_bucket(lmax, spacing);
  if (i_hi < i_lo) i_hi = i_lo;
  const std::size_t count = static_cast<std::size_t>(i_hi - i_lo + 1);
  if (count > options.max_buckets) {
    throw CapacityError(
        "build_pld: " + std::to_string(count) +
        " buckets would exceed the cap of " +
        std::to_string(options.max_buckets) + "; use a coarser grid");
  }

  pld.origin_index = i_lo;
  pld.masses.assign(count, 0.0);

  internal::BoundarySweeper sweeper(ev, x_lo, x_hi);
  if (add) {
    // Boundaries ascend in both loss and x. Bucket i collects sampling mass
    // between consecutive crossings; the bottom bucket absorbs the lower
    // tail and any mass below the lower cap.
    double cum_prev = 0.0;
    for (std::int64_t i = i_lo; i < i_hi; ++i) {
      const double x = sweeper.solve(static_cast<double>(i) * spacing);
      const double cum = cdf_sampling(x);
      pld.masses[static_cast<std::size_t>(i - i_lo)] =
          std::max(0.0, cum - cum_prev);
      cum_prev = cum;
    }
    const double x_end =
        (lmax_raw > options.loss_cap) ? sweeper.solve(lmax) : x_hi;
    pld.masses[count - 1] = std::max(0.0, cdf_sampling(x_end) - cum_prev);
    pld.infinity_mass = sf_sampling(x_end);
  } else {
    // PLD loss decreases in x, so sweep boundaries from the top loss bucket
    // (smallest x) downward. The region below x_end_low carries loss above
    // the cap and is charged to infinity.
    const double x_end_low =
        (lmax_raw > options.loss_cap)
            ? internal::invert_loss(ev, -lmax, x_lo, x_hi,
                                    0.5 * (x_lo + x_hi))
            : x_lo;
    pld.infinity_mass = cdf_sampling(x_end_low);
    internal::BoundarySweeper down_sweeper(ev, x_end_low, x_hi);
    double cdf_prev = pld.infinity_mass;
    double x_last = x_end_low;
    for (std::int64_t i = i_hi - 1; i >= i_lo; --i) {
      x_last =
          down_sweeper.solve(-(static_cast<double>(i) * spacing));
      const double c = cdf_sampling(x_last);
      pld.masses[static_cast<std::size_t>(i - i_lo + 1)] =
          std::max(0.0, c - cdf_prev);
      cdf_prev = c;
    }
    if (count == 1) {
      pld.masses[0] = std::max(0.0, sf_sampling(x_end_low));
    } else {
      pld.masses[0] = std::max(0.0, sf_sampling(x_last));
    }
  }
  return pld;
}

namespace internal {

// Sweeps support-edge runs: per-bucket masses below the floor, plus edge
// runs whose cumulative mass is at most `fold`. The leading run collapses
// into the first retained bucket (mass moves up in loss), the trailing run
// into infinity_mass. Both keep the pessimistic upper bound; each fold
// inflates delta by at most `fold`.
inline void prune_pld(PrivacyLossDistribution& pld, double floor,
                      double fold) {
  if (pld.masses.size() <= 1) return;
  std::size_t first = 0;
  double leading = 0.0;
  while (first + 1 < pld.masses.size() &&
         (pld.masses[first] < floor || leading + pld.masses[first] <= fold)) {
    leading += pld.masses[first];
    ++first;
  }
  std::size_t last = pld.masses.size() - 1;
  double trailing = 0.0;
  while (last > first &&
         (pld.masses[last] < floor || trailing + pld.masses[last] <= fold)) {
    trailing += pld.masses[last];
    --last;
  }
  if (first == 0 && last == pld.masses.size() - 1) return;
  std::vector<double> kept(pld.masses.begin() + first,
                           pld.masses.begin() + last + 1);
  kept.front() += leading;
  pld.infinity_mass += trailing;
  pld.masses = std::move(kept);
  pld.origin_index += static_cast<std::int64_t>(first);
}

inline std::vector<double> convolve(const std::vector<double>& a,
                                    const std::vector<double>& b,
                                    PldOptions::Convolution mode) {
  const bool use_fft =
      mode == PldOptions::Convolution::kFft ||
      (mode == PldOptions::Convolution::kAuto &&
       a.size() * b.size() > (std::size_t{1} << 21) && a.size() > 16 &&
       b.size() > 16);
  return use_fft ? convolve_fft(a, b) : convolve_direct(a, b);
}

inline PrivacyLossDistribution convolve_plds(const PrivacyLossDistribution& a,
                                             const PrivacyLossDistribution& b,
                                             const PldOptions& options) {
  PrivacyLossDistribution out;
  out.grid_spacing = a.grid_spacing;
  out.origin_index = a.origin_index + b.origin_index;
  out.pessimistic = a.pessimistic && b.pessimistic;
  out.infinity_mass =
      a.infinity_mass + b.infinity_mass - a.infinity_mass * b.infinity_mass;
  if (a.masses.empty() || b.masses.empty()) {
    // One side carries no finite mass; the product has none either.
    out.masses.clear();
    return out;
  }
  out.masses = convolve(a.masses, b.masses, options.convolution);
  prune_pld(out, options.prune_floor, options.tail_fold);
  if (out.masses.size() > options.max_buckets) {
    throw CapacityError("compose: composed support of " +
                        std::to_string(out.masses.size()) +
                        " buckets exceeds the cap; use a coarser grid");
  }
  return out;
}

}  // namespace internal

// t-fold self-composition by discrete convolution with
// exponentiation-by-squaring. Grid spacing and the pessimistic flag are
// preserved; infinity mass composes as 1 - (1 - m)^t.
inline PrivacyLossDistribution compose(const PrivacyLossDistribution& pld,
                                       std::uint64_t t,
                                       const PldOptions& options = {}) {
  pld.validate();
  if (t == 0) throw std::invalid_argument("compose: t must be >= 1");
  if (t == 1) return pld;
  PrivacyLossDistribution result;
  PrivacyLossDistribution base = pld;
  bool have_result = false;
  std::uint64_t remaining = t;
  while (remaining > 0) {
    if (remaining & 1) {
      result = have_result ? internal::convolve_plds(result, base, options)
                           : base;
      have_result = true;
    }
    remaining >>= 1;
    if (remaining > 0) {
      base = internal::convolve_plds(base, base, options);
    }
  }
  return result;
}

// delta(epsilon) = m_inf + sum_j mass_j * max(0, 1 - e^{epsilon - loss_j}).
// Non-increasing in epsilon; tends to infinity_mass as epsilon -> inf.
inline double delta_at_epsilon(const PrivacyLossDistribution& pld,
                               double epsilon) {
  double delta = pld.infinity_mass;
  // Buckets with loss <= epsilon contribute nothing; skip straight past them.
  const double first_relevant = epsilon / pld.grid_spacing;
  std::int64_t start = 0;
  if (first_relevant > static_cast<double>(pld.origin_index)) {
    start = static_cast<std::int64_t>(
                std::floor(first_relevant)) - pld.origin_index;
    if (start < 0) start = 0;
  }
  for (std::size_t i = static_cast<std::size_t>(start); i < pld.masses.size();
       ++i) {
    const double loss = pld.loss_value(i);
    if (loss <= epsilon) continue;
    delta += pld.masses[i] * (-std::expm1(epsilon - loss));
  }
  return std::clamp(delta, 0.0, 1.0);
}

// Smallest epsilon >= 0 with delta_at_epsilon(pld, epsilon) <= delta, to
// 1e-6 absolute. Throws UnsatisfiableError when delta <= infinity_mass.
inline double epsilon_at_delta(const PrivacyLossDistribution& pld,
                               double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("epsilon_at_delta: delta must be in (0, 1)");
  }
  if (delta <= pld.infinity_mass) {
    throw UnsatisfiableError(
        "epsilon_at_delta: delta <= infinity_mass, no finite epsilon exists");
  }
  if (delta_at_epsilon(pld, 0.0) <= delta) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (delta_at_epsilon(pld, hi) > delta) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) {
      throw UnsatisfiableError("epsilon_at_delta: bracket exhausted");
    }
  }
  while (hi - lo > 1e-7) {
    const double mid = 0.5 * (lo + hi);
    if (delta_at_epsilon(pld, mid) > delta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

// Single-direction delta of the t-fold composed mechanism.
inline double mog_delta(const MoGMechanism& mech, std::uint64_t t,
                        double epsilon, Direction direction,
                        const PldOptions& options = {}) {
  return delta_at_epsilon(compose(build_pld(mech, direction, options), t,
                                  options),
                          epsilon);
}

// Symmetrized hockey-stick divergence: the max of the add and remove
// direction deltas of the composed mechanism.
inline double symmetric_delta(const MoGMechanism& mech, std::uint64_t t,
                              double epsilon, const PldOptions& options = {}) {
  const double d_add = mog_delta(mech, t, epsilon, Direction::kAdd, options);
  const double d_remove =
      mog_delta(mech, t, epsilon, Direction::kRemove, options);
  return std::max(d_add, d_remove);
}

namespace internal {

// Calibration helper: true iff the symmetric delta exceeds the threshold.
// Short-circuits in two ways: delta is non-decreasing in the number of
// rounds, so a single-round exceedance settles the question without
// composing; and the add direction is checked before the remove direction.
// A bucket cap overflow is treated as "exceeds" (overflow only happens when
// sigma is far too small for the grid, where delta is near 1).
inline bool symmetric_delta_exceeds(const MoGMechanism& mech, std::uint64_t t,
                                    double epsilon, double threshold,
                                    const PldOptions& options) {
  try {
    for (Direction dir : {Direction::kAdd, Direction::kRemove}) {
      const auto single = build_pld(mech, dir, options);
      if (delta_at_epsilon(single, epsilon) > threshold) return true;
      if (t > 1 &&
          delta_at_epsilon(compose(single, t, options), epsilon) > threshold) {
        return true;
      }
    }
    return false;
  } catch (const CapacityError&) {
    return true;
  }
}

}  // namespace internal

}  // namespace userdp

#endif  // USERDP_PLD_HPP
