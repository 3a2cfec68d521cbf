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

#ifndef USERDP_SIMULATE_HPP
#define USERDP_SIMULATE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "userdp/common.hpp"
#include "userdp/mechanisms.hpp"
#include "userdp/numeric.hpp"
#include "userdp/parallel.hpp"

namespace userdp {

// Generative parameters of the synthetic mean-estimation task: a population
// mean mu ~ N(0, I_d); per user a mean mu_u ~ N(mu, sigma1^2 I_d); per user
// K examples x ~ N(mu_u, sigma2^2 I_d). The loss is f(theta, z) =
// ||theta - z||^2 / 2, so gradients are theta - z.
struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t users = 256;             // N
  std::size_t examples_per_user = 16;  // K
  std::size_t dim = 32;                // d
  double sigma1 = 1.0;                 // between-user std
  double sigma2 = 1.0;                 // within-user std

  void validate() const {
    if (users < 1 || examples_per_user < 1 || dim < 1) {
      throw std::invalid_argument("SyntheticSpec: N, K, d must be >= 1");
    }
    if (!(sigma1 >= 0.0) || !(sigma2 >= 0.0)) {
      throw std::invalid_argument("SyntheticSpec: sigma1, sigma2 must be >= 0");
    }
  }
};

// One user's examples, row-major count x dim.
struct UserExamples {
  std::size_t count = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i, std::size_t dim) const {
    return {data.data() + i * dim, dim};
  }
};

struct UserDataset {
  std::size_t dim = 0;
  std::vector<double> true_mean;
  std::vector<UserExamples> users;

  void validate() const {
    if (dim < 1 || users.empty() || true_mean.size() != dim) {
      throw std::invalid_argument("UserDataset: inconsistent dimensions");
    }
    for (const auto& u : users) {
      if (u.count == 0 || u.data.size() != u.count * dim) {
        throw std::invalid_argument("UserDataset: every user must be non-empty");
      }
    }
  }
};

// Deterministic given the seed: the draw order is (mu, then per user in
// index order: mu_u, then that user's examples row by row).
inline UserDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, {0x5D47Au}));
  UserDataset data;
  data.dim = spec.dim;
  data.true_mean.resize(spec.dim);
  for (auto& v : data.true_mean) v = rng.next_normal();
  data.users.resize(spec.users);
  std::vector<double> user_mean(spec.dim);
  for (auto& user : data.users) {
    for (std::size_t k = 0; k < spec.dim; ++k) {
      user_mean[k] = data.true_mean[k] + spec.sigma1 * rng.next_normal();
    }
    user.count = spec.examples_per_user;
    user.data.resize(spec.examples_per_user * spec.dim);
    for (std::size_t j = 0; j < spec.examples_per_user; ++j) {
      for (std::size_t k = 0; k < spec.dim; ++k) {
        user.data[j * spec.dim + k] =
            user_mean[k] + spec.sigma2 * rng.next_normal();
      }
    }
  }
  return data;
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// v * min(1, C / ||v||_2); norm of the result is <= C, direction preserved,
// and the zero vector maps to itself.
inline std::vector<double> clip(std::span<const double> v, double clip_norm) {
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip: C must be > 0");
  std::vector<double> out(v.begin(), v.end());
  const double norm = l2_norm(v);
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (double& x : out) x *= scale;
  }
  return out;
}

enum class Variant { kEls, kUls };

enum class EvalMetric {
  kTrueMean,  // ||theta - mu||^2 / d against the generating population mean
  kDataFit,   // average of f(theta, z) over the dataset
};

struct TrainConfig {
  Variant variant = Variant::kEls;
  std::uint64_t steps = 256;          // T
  double learning_rate = 0.125;       // eta
  double clip_norm = 1.0;             // C
  int group_size = 16;                // G
  std::size_t batch_or_cohort = 64;   // B for ELS, M for ULS
  std::uint64_t seed = 0;
  EvalMetric metric = EvalMetric::kTrueMean;

  void validate() const {
    if (steps < 1) throw std::invalid_argument("TrainConfig: T must be >= 1");
    if (!(learning_rate > 0.0)) {
      throw std::invalid_argument("TrainConfig: eta must be > 0");
    }
    if (!(clip_norm > 0.0)) {
      throw std::invalid_argument("TrainConfig: C must be > 0");
    }
    if (group_size < 1) {
      throw std::invalid_argument("TrainConfig: G must be >= 1");
    }
    if (batch_or_cohort < 1) {
      throw std::invalid_argument("TrainConfig: batch/cohort must be >= 1");
    }
  }
};

struct RunResult {
  std::vector<double> final_params;
  double eval_loss = 0.0;
  TrainConfig config;
};

namespace internal {

inline double evaluate(std::span<const double> theta, const UserDataset& data,
                       EvalMetric metric) {
  const std::size_t d = data.dim;
  if (metric == EvalMetric::kTrueMean) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = theta[k] - data.true_mean[k];
      s += diff * diff;
    }
    return s / static_cast<double>(d);
  }
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& user : data.users) {
    for (std::size_t j = 0; j < user.count; ++j) {
      auto z = user.row(j, d);
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = theta[k] - z[k];
        s += diff * diff;
      }
      total += 0.5 * s;
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

// Adds clip(theta - z, C) into sum; returns the clipped norm so callers can
// keep the per-contribution bound instrumented.
inline double add_clipped_gradient(std::span<const double> theta,
                                   std::span<const double> z, double clip_norm,
                                   std::vector<double>& sum) {
  double norm_sq = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double g = theta[k] - z[k];
    norm_sq += g * g;
  }
  const double norm = std::sqrt(norm_sq);
  const double scale = norm > clip_norm ? clip_norm / norm : 1.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    sum[k] += scale * (theta[k] - z[k]);
  }
  return norm * scale;
}

inline void check_contribution_norm(double norm, double clip_norm) {
  if (norm > clip_norm * (1.0 + 1e-9)) {
    throw std::logic_error("clipped contribution exceeds the clip norm");
  }
}

}  // namespace internal

// Per-user subsampled pool for example-level training: each user contributes
// min(G, |D_u|) examples drawn without replacement. Exposed so the
// contribution bound is testable directly.
inline std::vector<std::pair<std::size_t, std::size_t>> build_els_pool(
    const UserDataset& data, int group_size, Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> pool;
  for (std::size_t u = 0; u < data.users.size(); ++u) {
    const std::size_t take = std::min<std::size_t>(
        static_cast<std::size_t>(group_size), data.users[u].count);
    auto idx = sample_without_replacement(data.users[u].count, take, rng);
    for (std::size_t j : idx) pool.emplace_back(u, j);
  }
  return pool;
}

// Example-level DP-SGD on the subsampled pool: shuffled fixed-size batches
// (reshuffled each epoch, trailing partial batch dropped), per-example
// clipping, Gaussian noise C*sigma per coordinate, step scaled by 1/B.
inline RunResult dp_sgd_els(const UserDataset& data, const TrainConfig& cfg,
                            double sigma) {
  data.validate();
  cfg.validate();
  if (cfg.variant != Variant::kEls) {
    throw std::invalid_argument("dp_sgd_els: config variant must be ELS");
  }
  Rng rng(derive_seed(cfg.seed, {0xE15u}));
  const std::size_t d = data.dim;
  const std::size_t batch = cfg.batch_or_cohort;

  auto pool = build_els_pool(data, cfg.group_size, rng);
  if (batch > pool.size()) {
    throw std::invalid_argument("dp_sgd_els: batch size exceeds |D_sub|");
  }

  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t pos = order.size();  // forces a shuffle before the first batch

  std::vector<double> theta(d, 0.0);
  std::vector<double> grad_sum(d);
  for (std::uint64_t t = 0; t < cfg.steps; ++t) {
    if (pos + batch > order.size()) {
      shuffle(order, rng);
      pos = 0;
    }
    std::fill(grad_sum.begin(), grad_sum.end(), 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto [u, j] = pool[order[pos + b]];
      const double norm = internal::add_clipped_gradient(
          theta, data.users[u].row(j, d), cfg.clip_norm, grad_sum);
      internal::check_contribution_norm(norm, cfg.clip_norm);
    }
    pos += batch;
    const double noise_scale = cfg.clip_norm * sigma;
    const double step = cfg.learning_rate / static_cast<double>(batch);
    for (std::size_t k = 0; k < d; ++k) {
      theta[k] -= step * (grad_sum[k] + noise_scale * rng.next_normal());
    }
  }

  RunResult result;
  result.eval_loss = internal::evaluate(theta, data, cfg.metric);
  result.final_params = std::move(theta);
  result.config = cfg;
  return result;
}

// User-level DP-SGD: cohorts of exactly M users taken sequentially from a
// shuffled user order (reshuffled when exhausted); each sampled user
// contributes the clipped average gradient over a fresh without-replacement
// sample of min(G, |D_u|) of its examples.
inline RunResult dp_sgd_uls(const UserDataset& data, const TrainConfig& cfg,
                            double sigma) {
  data.validate();
  cfg.validate();
  if (cfg.variant != Variant::kUls) {
    throw std::invalid_argument("dp_sgd_uls: config variant must be ULS");
  }
  const std::size_t n_users = data.users.size();
  const std::size_t cohort = cfg.batch_or_cohort;
  if (cohort > n_users) {
    throw std::invalid_argument("dp_sgd_uls: cohort size exceeds user count");
  }
  Rng rng(derive_seed(cfg.seed, {0x0415u}));
  const std::size_t d = data.dim;

  std::vector<std::size_t> order(n_users);
  for (std::size_t i = 0; i < n_users; ++i) order[i] = i;
  std::size_t pos = order.size();

  std::vector<double> theta(d, 0.0);
  std::vector<double> grad_sum(d);
  std::vector<double> user_grad(d);
  for (std::uint64_t t = 0; t < cfg.steps; ++t) {
    if (pos + cohort > order.size()) {
      shuffle(order, rng);
      pos = 0;
    }
    std::fill(grad_sum.begin(), grad_sum.end(), 0.0);
    for (std::size_t m = 0; m < cohort; ++m) {
      const std::size_t u = order[pos + m];
      const auto& user = data.users[u];
      const std::size_t take = std::min<std::size_t>(
          static_cast<std::size_t>(cfg.group_size), user.count);
      auto idx = sample_without_replacement(user.count, take, rng);
      std::fill(user_grad.begin(), user_grad.end(), 0.0);
      for (std::size_t j : idx) {
        auto z = user.row(j, d);
        for (std::size_t k = 0; k < d; ++k) {
          user_grad[k] += theta[k] - z[k];
        }
      }
      double norm_sq = 0.0;
      const double inv_take = 1.0 / static_cast<double>(take);
      for (std::size_t k = 0; k < d; ++k) {
        user_grad[k] *= inv_take;
        norm_sq += user_grad[k] * user_grad[k];
      }
      const double norm = std::sqrt(norm_sq);
      const double scale = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
      internal::check_contribution_norm(norm * scale, cfg.clip_norm);
      for (std::size_t k = 0; k < d; ++k) {
        grad_sum[k] += scale * user_grad[k];
      }
    }
    pos += cohort;
    const double noise_scale = cfg.clip_norm * sigma;
    const double step = cfg.learning_rate / static_cast<double>(cohort);
    for (std::size_t k = 0; k < d; ++k) {
      theta[k] -= step * (grad_sum[k] + noise_scale * rng.next_normal());
    }
  }

  RunResult result;
  result.eval_loss = internal::evaluate(theta, data, cfg.metric);
  result.final_params = std::move(theta);
  result.config = cfg;
  return result;
}

inline RunResult run_dp_sgd(const UserDataset& data, const TrainConfig& cfg,
                            double sigma) {
  return cfg.variant == Variant::kEls ? dp_sgd_els(data, cfg, sigma)
                                      : dp_sgd_uls(data, cfg, sigma);
}

// Default hyperparameter grids: learning rate 2^-6 .. 2^3, clip norm
// 2^-2 .. 2^5, both log-2 spaced.
inline std::vector<double> default_lr_grid() {
  std::vector<double> g;
  for (int e = -6; e <= 3; ++e) g.push_back(std::ldexp(1.0, e));
  return g;
}

inline std::vector<double> default_clip_grid() {
  std::vector<double> g;
  for (int e = -2; e <= 5; ++e) g.push_back(std::ldexp(1.0, e));
  return g;
}

struct SweepSpec {
  SyntheticSpec data;  // its seed field is ignored; trials derive their own
  Variant variant = Variant::kUls;
  PrivacyParams target{1.0, 1e-6};
  std::size_t budget = 64;  // B
  std::vector<int> group_sizes{1};
  std::vector<double> lr_grid = default_lr_grid();
  std::vector<double> clip_grid = default_clip_grid();
  std::size_t trials = 128;
  std::uint64_t steps = 256;
  std::uint64_t master_seed = 0;
  PldOptions accounting;
  EvalMetric metric = EvalMetric::kTrueMean;
};

struct SweepCell {
  Variant variant = Variant::kUls;
  int group = 1;
  std::size_t m_or_b = 0;  // cohort size M (ULS) or batch size B (ELS)
  double learning_rate = 0.0;
  double clip_norm = 0.0;
  double sigma = 0.0;
  double mean_loss = 0.0;
  double std_error = 0.0;
  std::vector<double> trial_losses;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::size_t best_index = 0;

  const SweepCell& best() const { return cells[best_index]; }
};

// Full (G, eta, C) sweep with `trials` independent trials per cell. Data is
// regenerated per trial from seeds derived off the master seed and shared
// across cells, so cells are compared on paired datasets. Deterministic for
// a fixed master seed; trials run in parallel.
inline SweepResult sweep(const SweepSpec& spec,
                         CalibrationCache* cache = nullptr) {
  spec.data.validate();
  spec.target.validate();
  if (spec.trials < 1) throw std::invalid_argument("sweep: trials must be >= 1");
  if (spec.group_sizes.empty() || spec.lr_grid.empty() ||
      spec.clip_grid.empty()) {
    throw std::invalid_argument("sweep: grids must be non-empty");
  }

  const std::size_t n_users = spec.data.users;
  struct GroupPlan {
    int group;
    std::size_t m_or_b;
    double sigma;
  };
  std::vector<GroupPlan> plans;
  CalibrationCache local_cache;
  CalibrationCache* effective = cache ? cache : &local_cache;
  for (int g : spec.group_sizes) {
    if (g < 1) throw std::invalid_argument("sweep: group sizes must be >= 1");
    GroupPlan plan;
    plan.group = g;
    if (spec.variant == Variant::kUls) {
      if (spec.budget % static_cast<std::size_t>(g) != 0) {
        throw std::invalid_argument("sweep: budget must be divisible by G");
      }
      plan.m_or_b = spec.budget / static_cast<std::size_t>(g);
      if (plan.m_or_b < 1 || plan.m_or_b > n_users) {
        throw std::invalid_argument("sweep: cohort M = B/G must be in [1, N]");
      }
      const double q = static_cast<double>(plan.m_or_b) /
                       static_cast<double>(n_users);
      plan.sigma = effective->get(EventFamily::uls(q, spec.steps), spec.target,
                                  spec.accounting);
    } else {
      plan.m_or_b = spec.budget;
      const double p = static_cast<double>(spec.budget) /
                       (static_cast<double>(g) * static_cast<double>(n_users));
      if (!(p <= 1.0)) {
        throw std::invalid_argument("sweep: p = B/(G*N) exceeds 1");
      }
      plan.sigma = effective->get(EventFamily::els(p, g, spec.steps),
                                  spec.target, spec.accounting);
    }
    plans.push_back(plan);
  }

  SweepResult result;
  for (const auto& plan : plans) {
    for (double lr : spec.lr_grid) {
      for (double clip_norm : spec.clip_grid) {
        SweepCell cell;
        cell.variant = spec.variant;
        cell.group = plan.group;
        cell.m_or_b = plan.m_or_b;
        cell.learning_rate = lr;
        cell.clip_norm = clip_norm;
        cell.sigma = plan.sigma;
        cell.trial_losses.assign(spec.trials, 0.0);
        result.cells.push_back(std::move(cell));
      }
    }
  }

  parallel_for(spec.trials, [&](std::size_t trial) {
    SyntheticSpec data_spec = spec.data;
    data_spec.seed = derive_seed(spec.master_seed, {0xDA7Au, trial});
    const UserDataset data = generate_synthetic(data_spec);
    for (std::size_t ci = 0; ci < result.cells.size(); ++ci) {
      SweepCell& cell = result.cells[ci];
      TrainConfig cfg;
      cfg.variant = spec.variant;
      cfg.steps = spec.steps;
      cfg.learning_rate = cell.learning_rate;
      cfg.clip_norm = cell.clip_norm;
      cfg.group_size = cell.group;
      cfg.batch_or_cohort = cell.m_or_b;
      cfg.seed = derive_seed(spec.master_seed, {0x7EA1u, trial, ci});
      cfg.metric = spec.metric;
      cell.trial_losses[trial] = run_dp_sgd(data, cfg, cell.sigma).eval_loss;
    }
  });

  for (auto& cell : result.cells) {
    double mean = 0.0;
    for (double loss : cell.trial_losses) mean += loss;
    mean /= static_cast<double>(spec.trials);
    double var = 0.0;
    for (double loss : cell.trial_losses) {
      var += (loss - mean) * (loss - mean);
    }
    cell.mean_loss = mean;
    cell.std_error = spec.trials > 1
                         ? std::sqrt(var / static_cast<double>(spec.trials - 1) /
                                     static_cast<double>(spec.trials))
                         : 0.0;
  }
  result.best_index = 0;
  for (std::size_t i = 1; i < result.cells.size(); ++i) {
    if (result.cells[i].mean_loss < result.cells[result.best_index].mean_loss) {
      result.best_index = i;
    }
  }
  return result;
}

}  // namespace userdp

#endif  // USERDP_SIMULATE_HPP
