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

#include "userdp/mechanisms.hpp"

#include <cmath>

#include "gtest/gtest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "userdp/pld.hpp"

namespace userdp {
namespace {

TEST(ElsMechanism, SmallBinomialWeights) {
  const auto mech = els_mechanism({1.0, 0.5, 2, 1});
  ASSERT_EQ(mech.sensitivities.size(), 3u);
  EXPECT_DOUBLE_EQ(mech.sensitivities[1], 1.0);
  EXPECT_NEAR(mech.weights[0], 0.25, 1e-15);
  EXPECT_NEAR(mech.weights[1], 0.5, 1e-15);
  EXPECT_NEAR(mech.weights[2], 0.25, 1e-15);
}

TEST(ElsMechanism, WeightsMatchExactBinomialOracle) {
  for (auto [k, p] : {std::pair{8, 0.01}, {16, 0.3}, {32, 1e-4}}) {
    const auto mech = els_mechanism({1.0, p, k, 1});
    const auto exact = oracles::exact_binomial_pmf(k, p);
    ASSERT_EQ(mech.weights.size(), exact.size());
    for (std::size_t i = 0; i < exact.size(); ++i) {
      EXPECT_NEAR(mech.weights[i] / exact[i], 1.0, 1e-14)
          << "K=" << k << " p=" << p << " i=" << i;
    }
  }
}

TEST(ElsMechanism, GroupSizeOneIsBernoulli) {
  const auto els = els_mechanism({1.3, 0.07, 1, 10});
  const auto uls = uls_mechanism({1.3, 0.07, 10});
  ASSERT_EQ(els.sensitivities, uls.sensitivities);
  ASSERT_EQ(els.weights.size(), uls.weights.size());
  for (std::size_t i = 0; i < els.weights.size(); ++i) {
    EXPECT_NEAR(els.weights[i], uls.weights[i], 1e-15);
  }
}

TEST(UlsMechanism, NoParticipationMeansNoLoss) {
  const auto mech = uls_mechanism({1.0, 0.0, 5});
  for (double eps : {0.0, 0.5, 2.0}) {
    EXPECT_NEAR(symmetric_delta(mech, 5, eps), 0.0, 1e-12);
  }
}

TEST(UlsMechanism, FullParticipationIsPlainGaussian) {
  for (double sigma : {0.8, 1.5}) {
    const auto mech = uls_mechanism({sigma, 1.0, 1});
    const PldOptions opts = oracles::oracle_grid(mech, {0.5, 1.0});
    for (double eps : {0.5, 1.0}) {
      EXPECT_NEAR(mog_delta(mech, 1, eps, Direction::kAdd, opts),
                  oracles::analytic_gaussian_delta(sigma, eps), 1e-6);
    }
  }
}

TEST(UlsMechanism, DeltaMatchesQuadrature) {
  const auto mech = uls_mechanism({1.0, 0.1, 1});
  const PldOptions opts = oracles::oracle_grid(mech, {1.0});
  const oracles::HockeyStickQuadrature oracle(mech);
  EXPECT_NEAR(symmetric_delta(mech, 1, 1.0, opts), oracle.symmetric_delta(1.0),
              1e-6);
}

// ---------------------------------------------------------------------------
// calibrate_sigma
// ---------------------------------------------------------------------------

TEST(Calibrate, ElsGroupOneMatchesUls) {
  const PrivacyParams target{1.0, 1e-5};
  const double sigma_els =
      calibrate_sigma(EventFamily::els(0.05, 1, 16), target);
  const double sigma_uls = calibrate_sigma(EventFamily::uls(0.05, 16), target);
  EXPECT_NEAR(sigma_els / sigma_uls, 1.0, 2.5e-3);
}

TEST(Calibrate, WeakerTargetNeedsLessNoise) {
  const EventFamily family = EventFamily::uls(0.1, 16);
  const double tight = calibrate_sigma(family, {1.0, 1e-5});
  const double loose = calibrate_sigma(family, {2.0, 1e-5});
  EXPECT_GE(tight, loose);
}

TEST(Calibrate, StraddleSelfConsistency) {
  const EventFamily family = EventFamily::uls(16.0 / 256.0, 256);
  const PrivacyParams target{1.0, 1e-6};
  const double sigma = calibrate_sigma(family, target);
  EXPECT_GT(sigma, 0.0);
  EXPECT_LE(family_delta(family, sigma, target.epsilon), target.delta);
  EXPECT_GT(family_delta(family, sigma / (1.0 + 2e-3), target.epsilon),
            target.delta);
}

TEST(Calibrate, BracketExhaustedSignals) {
  // Delta below the composed infinity mass cannot be met by any sigma.
  PldOptions opts;
  opts.tail_mass = 1e-9;
  EXPECT_THROW(
      calibrate_sigma(EventFamily::uls(0.5, 1000), {0.1, 1e-8}, opts),
      UnsatisfiableError);
}

// ---------------------------------------------------------------------------
// Accountant monotonicity across event parameters
// ---------------------------------------------------------------------------

double event_epsilon(const EventFamily& family, double sigma, double delta) {
  const auto mech = family.mechanism_at(sigma);
  const auto add = compose(build_pld(mech, Direction::kAdd), family.steps);
  const auto remove =
      compose(build_pld(mech, Direction::kRemove), family.steps);
  return std::max(epsilon_at_delta(add, delta),
                  epsilon_at_delta(remove, delta));
}

TEST(AccountantMonotonicity, EpsilonRespondsToEventParameters) {
  const double delta = 1e-6;
  double prev = 0.0;
  for (int k : {1, 2, 4, 8}) {
    const double e = event_epsilon(EventFamily::els(0.05, k, 8), 1.0, delta);
    EXPECT_GE(e, prev - 1e-9) << "K=" << k;
    prev = e;
  }
  prev = 0.0;
  for (double p : {0.01, 0.05, 0.2}) {
    const double e = event_epsilon(EventFamily::els(p, 4, 8), 1.0, delta);
    EXPECT_GE(e, prev - 1e-9) << "p=" << p;
    prev = e;
  }
  prev = 0.0;
  for (double q : {0.01, 0.05, 0.2}) {
    const double e = event_epsilon(EventFamily::uls(q, 8), 1.0, delta);
    EXPECT_GE(e, prev - 1e-9) << "q=" << q;
    prev = e;
  }
  prev = 0.0;
  for (std::uint64_t t : {1u, 4u, 16u}) {
    const double e = event_epsilon(EventFamily::uls(0.1, t), 1.0, delta);
    EXPECT_GE(e, prev - 1e-9) << "T=" << t;
    prev = e;
  }
  prev = 1e300;
  for (double sigma : {0.75, 1.0, 1.5}) {
    const double e = event_epsilon(EventFamily::uls(0.1, 8), sigma, delta);
    EXPECT_LE(e, prev + 1e-9) << "sigma=" << sigma;
    prev = e;
  }
}

// ---------------------------------------------------------------------------
// Black-box group privacy baseline
// ---------------------------------------------------------------------------

TEST(Blackbox, GroupOneIsIdentity) {
  const auto out = blackbox_group_epsilon(0.3, 1e-7, 1);
  EXPECT_DOUBLE_EQ(out.epsilon, 0.3);
  EXPECT_DOUBLE_EQ(out.delta, 1e-7);
}

TEST(Blackbox, FormulaInstantiation) {
  const auto out = blackbox_group_epsilon(0.1, 1e-8, 2);
  EXPECT_NEAR(out.epsilon, 0.2, 1e-15);
  const double expected =
      1e-8 * (std::exp(0.2) - 1.0) / (std::exp(0.1) - 1.0);
  EXPECT_NEAR(out.delta / expected, 1.0, 1e-12);
}

TEST(Blackbox, LargeGroupOverflowsToDiverged) {
  const auto out = blackbox_group_epsilon(1.0, 1e-6, 64);
  EXPECT_FALSE(out.delta <= 1.0);  // reported as diverged by callers
  const auto mech = els_mechanism({1.0, 0.01, 1, 1});
  const auto pld = compose(build_pld(mech, Direction::kAdd), 100);
  const auto promoted = blackbox_user_level_single_shot(pld, 1e-6, 64);
  EXPECT_TRUE(promoted.diverged);
}

TEST(Blackbox, TightAccountingNeverWorseThanBlackbox) {
  // At the same user-level delta, the tight accountant's epsilon must not
  // exceed the black-box promotion (a diverged promotion counts as infinite).
  const double delta = 1e-6;
  const double sigma = 1.0;
  const std::uint64_t t = 16;
  const double p = 0.02;
  const auto example_pld = compose(
      build_pld(els_mechanism({sigma, p, 1, t}), Direction::kAdd), t);
  for (int g : {2, 4, 8}) {
    const double eps_g =
        event_epsilon(EventFamily::els(p, g, t), sigma, delta);
    const auto bb = blackbox_user_level_fixed_point(example_pld, delta, g);
    if (bb.has_value()) {
      EXPECT_LE(eps_g, *bb + 1e-6) << "G=" << g;
    }
  }
}

// ---------------------------------------------------------------------------
// JSON event schema
// ---------------------------------------------------------------------------

TEST(EventJson, ParsesBothKinds) {
  const auto els = parse_event_json(nlohmann::json{
      {"kind", "els"}, {"sigma", 4.0}, {"p", 0.01}, {"K", 8}, {"T", 2000}});
  EXPECT_EQ(els.family.kind, EventFamily::Kind::kEls);
  EXPECT_EQ(els.family.group_size, 8);
  EXPECT_EQ(els.family.steps, 2000u);
  EXPECT_DOUBLE_EQ(els.sigma, 4.0);
  EXPECT_EQ(els.mechanism().sensitivities.size(), 9u);

  const auto uls = parse_event_json(
      nlohmann::json{{"kind", "uls"}, {"sigma", 1.0}, {"q", 0.1}, {"T", 5}});
  EXPECT_EQ(uls.family.kind, EventFamily::Kind::kUls);
  EXPECT_DOUBLE_EQ(uls.family.sampling_prob, 0.1);

  EXPECT_THROW(parse_event_json(nlohmann::json{{"kind", "bad"}, {"T", 1}}),
               std::invalid_argument);
}

}  // namespace
}  // namespace userdp
