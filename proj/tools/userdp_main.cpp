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

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "userdp/heuristics.hpp"
#include "userdp/io.hpp"
#include "userdp/mechanisms.hpp"
#include "userdp/parallel.hpp"
#include "userdp/pld.hpp"
#include "userdp/rdp.hpp"
#include "userdp/simulate.hpp"
#include "userdp/variance.hpp"

namespace {

using nlohmann::json;

struct EventFlags {
  std::string kind;
  double sigma = 1.0;
  double p = 0.0;
  double q = 0.0;
  int k = 1;
  std::uint64_t t = 1;

  userdp::EventFamily family() const {
    if (kind == "els") return userdp::EventFamily::els(p, k, t);
    if (kind == "uls") return userdp::EventFamily::uls(q, t);
    throw std::invalid_argument("--kind must be els or uls");
  }
};

void add_event_options(CLI::App* cmd, EventFlags* flags, bool with_sigma) {
  cmd->add_option("--kind", flags->kind, "Event kind: els or uls")
      ->required()
      ->check(CLI::IsMember({"els", "uls"}));
  if (with_sigma) {
    cmd->add_option("--sigma", flags->sigma, "Noise multiplier")->required();
  }
  cmd->add_option("--p", flags->p, "Example sampling probability (els)");
  cmd->add_option("--q", flags->q, "User sampling probability (uls)");
  cmd->add_option("--K", flags->k, "Group size (els)");
  cmd->add_option("--T", flags->t, "Number of steps")->required();
}

struct AccountingFlags {
  double grid_spacing = 1e-3;
  double tail_mass = 1e-15;

  userdp::PldOptions options() const {
    userdp::PldOptions opts;
    opts.grid_spacing = grid_spacing;
    opts.tail_mass = tail_mass;
    return opts;
  }
};

void add_accounting_options(CLI::App* cmd, AccountingFlags* flags) {
  cmd->add_option("--grid-spacing", flags->grid_spacing,
                  "Loss discretization interval");
  cmd->add_option("--tail-mass", flags->tail_mass,
                  "Per-side sampling tail mass left off the grid");
}

std::string invocation_string(int argc, char** argv) {
  std::ostringstream out;
  for (int i = 0; i < argc; ++i) {
    if (i) out << ' ';
    out << argv[i];
  }
  return out.str();
}

// Prints a single value to stdout and optionally writes it (with the
// metadata header) to a file.
void emit_scalar(const std::string& name, double value,
                 const std::string& format, const std::string& out_path,
                 const std::string& invocation) {
  std::string body;
  if (format == "json") {
    json j;
    j[name] = value;
    body = j.dump();
  } else {
    body = userdp::format_double(value);
  }
  std::cout << body << "\n";
  if (!out_path.empty()) {
    userdp::write_file_atomic(out_path, userdp::metadata_header(invocation) +
                                            body + "\n");
  }
}

// Symmetrized epsilon: both directions must satisfy delta, so take the max of
// the per-direction inversions on the composed distributions.
double symmetric_epsilon(const userdp::MoGMechanism& mech, std::uint64_t t,
                         double delta, const userdp::PldOptions& opts) {
  const auto add =
      userdp::compose(userdp::build_pld(mech, userdp::Direction::kAdd, opts),
                      t, opts);
  const auto remove = userdp::compose(
      userdp::build_pld(mech, userdp::Direction::kRemove, opts), t, opts);
  return std::max(userdp::epsilon_at_delta(add, delta),
                  userdp::epsilon_at_delta(remove, delta));
}

}  // namespace

int main(int argc, char** argv) {
  const std::string invocation = invocation_string(argc, argv);

  CLI::App app{
      "userdp: accounting, calibration and simulation for user-level "
      "differential privacy"};
  app.footer(
      "Exit codes: 0 success, 2 usage error, 3 unsatisfiable target, "
      "4 numeric capacity exceeded.\n"
      "UDP_THREADS caps internal worker parallelism.");
  app.require_subcommand(1);

  // ---- epsilon ----
  EventFlags eps_event;
  AccountingFlags eps_acc;
  double eps_delta = 1e-6;
  std::string eps_format = "plain", eps_out;
  auto* eps_cmd = app.add_subcommand(
      "epsilon", "Epsilon at a target delta for a composed event");
  add_event_options(eps_cmd, &eps_event, /*with_sigma=*/true);
  add_accounting_options(eps_cmd, &eps_acc);
  eps_cmd->add_option("--delta", eps_delta, "Target delta")->required();
  eps_cmd->add_option("--format", eps_format)
      ->check(CLI::IsMember({"plain", "json"}));
  eps_cmd->add_option("--out", eps_out, "Optional output file");

  // ---- delta ----
  EventFlags delta_event;
  AccountingFlags delta_acc;
  double delta_epsilon = 1.0;
  std::string delta_format = "plain", delta_out;
  auto* delta_cmd = app.add_subcommand(
      "delta", "Symmetric delta at a given epsilon for a composed event");
  add_event_options(delta_cmd, &delta_event, /*with_sigma=*/true);
  add_accounting_options(delta_cmd, &delta_acc);
  delta_cmd->add_option("--epsilon", delta_epsilon, "Epsilon")->required();
  delta_cmd->add_option("--format", delta_format)
      ->check(CLI::IsMember({"plain", "json"}));
  delta_cmd->add_option("--out", delta_out, "Optional output file");

  // ---- calibrate ----
  EventFlags cal_event;
  AccountingFlags cal_acc;
  double cal_epsilon = 1.0, cal_delta = 1e-6;
  std::string cal_format = "plain", cal_out;
  auto* cal_cmd = app.add_subcommand(
      "calibrate", "Smallest noise multiplier meeting an (epsilon, delta) "
                   "target");
  add_event_options(cal_cmd, &cal_event, /*with_sigma=*/false);
  add_accounting_options(cal_cmd, &cal_acc);
  cal_cmd->add_option("--epsilon", cal_epsilon, "Target epsilon")->required();
  cal_cmd->add_option("--delta", cal_delta, "Target delta")->required();
  cal_cmd->add_option("--format", cal_format)
      ->check(CLI::IsMember({"plain", "json"}));
  cal_cmd->add_option("--out", cal_out, "Optional output file");

  // ---- renyi-check ----
  std::vector<int> renyi_alphas{2, 3, 4, 8};
  std::vector<int> renyi_ks{2, 4, 8, 16};
  std::vector<double> renyi_ps{0.01, 0.1, 0.5};
  std::vector<double> renyi_sigmas{0.5, 1.0, 2.0};
  std::string renyi_out;
  auto* renyi_cmd = app.add_subcommand(
      "renyi-check",
      "Group-aggregation Renyi inequality check over a parameter grid (CSV)");
  renyi_cmd->add_option("--alphas", renyi_alphas, "Renyi orders")
      ->delimiter(',');
  renyi_cmd->add_option("--Ks", renyi_ks, "Group sizes")->delimiter(',');
  renyi_cmd->add_option("--ps", renyi_ps, "Sampling probabilities")
      ->delimiter(',');
  renyi_cmd->add_option("--sigmas", renyi_sigmas, "Noise multipliers")
      ->delimiter(',');
  renyi_cmd->add_option("--out", renyi_out, "Output CSV path")->required();

  // ---- compare-variance ----
  std::size_t var_users = 1024, var_k = 32, var_dim = 1;
  std::uint64_t var_steps = 1000;
  double var_l_els = 10.0, var_delta = 1e-6, var_cohort = 16.0;
  int var_g_els = 0;
  std::vector<double> var_epsilons{0.25, 1.0, 4.0, 16.0, 64.0};
  std::vector<double> var_budgets{16, 32, 64, 128, 256, 512};
  std::string var_format = "csv", var_out;
  AccountingFlags var_acc;
  auto* var_cmd = app.add_subcommand(
      "compare-variance",
      "Per-iteration noise variance of ELS vs ULS under fixed compute");
  var_cmd->add_option("--n-users", var_users, "N");
  var_cmd->add_option("--examples-per-user", var_k, "K");
  var_cmd->add_option("--steps", var_steps, "T");
  var_cmd->add_option("--l-els", var_l_els, "Per-example gradient bound");
  var_cmd->add_option("--delta", var_delta, "Target delta");
  var_cmd->add_option("--cohort", var_cohort, "Fixed ULS cohort size M");
  var_cmd->add_option("--g-els", var_g_els,
                      "ELS group size (default: examples per user)");
  var_cmd->add_option("--dim", var_dim, "Dimension d");
  var_cmd->add_option("--epsilons", var_epsilons, "Epsilon grid")
      ->delimiter(',');
  var_cmd->add_option("--budgets", var_budgets, "Compute budget grid")
      ->delimiter(',');
  var_cmd->add_option("--format", var_format)
      ->check(CLI::IsMember({"csv", "json"}));
  var_cmd->add_option("--out", var_out, "Output path")->required();
  add_accounting_options(var_cmd, &var_acc);

  // ---- simulate-mean ----
  std::string sim_variant = "uls";
  double sim_epsilon = 1.0, sim_delta = 1e-6, sim_sigma1 = 1.0,
         sim_sigma2 = 1.0;
  std::size_t sim_budget = 64, sim_trials = 128, sim_users = 256, sim_k = 16,
              sim_dim = 32;
  std::uint64_t sim_steps = 256, sim_seed = 0;
  std::vector<int> sim_groups{1};
  std::vector<double> sim_lr_grid, sim_clip_grid;
  std::string sim_out;
  AccountingFlags sim_acc;
  auto* sim_cmd = app.add_subcommand(
      "simulate-mean",
      "Seeded DP-SGD sweep on the synthetic mean-estimation task (CSV)");
  sim_cmd->add_option("--variant", sim_variant)
      ->required()
      ->check(CLI::IsMember({"els", "uls"}));
  sim_cmd->add_option("--epsilon", sim_epsilon, "Target epsilon");
  sim_cmd->add_option("--delta", sim_delta, "Target delta");
  sim_cmd->add_option("--budget", sim_budget, "Per-iteration compute budget B");
  sim_cmd->add_option("--sigma1", sim_sigma1, "Between-user std");
  sim_cmd->add_option("--sigma2", sim_sigma2, "Within-user std");
  sim_cmd->add_option("--group-sizes", sim_groups, "Group sizes to sweep")
      ->delimiter(',');
  sim_cmd->add_option("--trials", sim_trials, "Trials per cell");
  sim_cmd->add_option("--master-seed", sim_seed, "Master seed (required)")
      ->required();
  sim_cmd->add_option("--steps", sim_steps, "T");
  sim_cmd->add_option("--n-users", sim_users, "N");
  sim_cmd->add_option("--examples-per-user", sim_k, "K");
  sim_cmd->add_option("--dim", sim_dim, "d");
  sim_cmd->add_option("--lr-grid", sim_lr_grid, "Learning-rate grid override")
      ->delimiter(',');
  sim_cmd->add_option("--clip-grid", sim_clip_grid, "Clip-norm grid override")
      ->delimiter(',');
  sim_cmd->add_option("--out", sim_out, "Output CSV path")->required();
  add_accounting_options(sim_cmd, &sim_acc);

  // ---- configure-uls ----
  std::size_t cfg_budget = 256, cfg_m0 = 32, cfg_users = 256, cfg_k = 16,
              cfg_dim = 32;
  int cfg_g0 = 1;
  double cfg_epsilon = 1.0, cfg_delta = 1e-6, cfg_sigma1 = 1.0,
         cfg_sigma2 = 1.0;
  std::uint64_t cfg_steps = 256, cfg_seed = 0;
  std::string cfg_out;
  AccountingFlags cfg_acc;
  auto* cfg_cmd = app.add_subcommand(
      "configure-uls",
      "Allocate a compute budget between group and cohort size by "
      "estimate-and-double (JSON lines trace)");
  cfg_cmd->add_option("--budget", cfg_budget, "Compute budget B")->required();
  cfg_cmd->add_option("--epsilon", cfg_epsilon, "Target epsilon");
  cfg_cmd->add_option("--delta", cfg_delta, "Target delta");
  cfg_cmd->add_option("--steps", cfg_steps, "T");
  cfg_cmd->add_option("--g0", cfg_g0, "Initial group size");
  cfg_cmd->add_option("--m0", cfg_m0, "Initial cohort size");
  cfg_cmd->add_option("--seed", cfg_seed, "Master seed (required)")
      ->required();
  cfg_cmd->add_option("--n-users", cfg_users, "N");
  cfg_cmd->add_option("--examples-per-user", cfg_k, "K");
  cfg_cmd->add_option("--dim", cfg_dim, "d");
  cfg_cmd->add_option("--sigma1", cfg_sigma1, "Between-user std");
  cfg_cmd->add_option("--sigma2", cfg_sigma2, "Within-user std");
  cfg_cmd->add_option("--out", cfg_out, "Optional JSONL output path");
  add_accounting_options(cfg_cmd, &cfg_acc);

  try {
    app.parse(argc, argv);

    if (eps_cmd->parsed()) {
      const auto family = eps_event.family();
      const double eps = symmetric_epsilon(family.mechanism_at(eps_event.sigma),
                                           family.steps, eps_delta,
                                           eps_acc.options());
      emit_scalar("epsilon", eps, eps_format, eps_out, invocation);
    } else if (delta_cmd->parsed()) {
      const auto family = delta_event.family();
      const double d =
          userdp::symmetric_delta(family.mechanism_at(delta_event.sigma),
                                  family.steps, delta_epsilon,
                                  delta_acc.options());
      emit_scalar("delta", d, delta_format, delta_out, invocation);
    } else if (cal_cmd->parsed()) {
      const double sigma = userdp::calibrate_sigma(
          cal_event.family(), {cal_epsilon, cal_delta}, cal_acc.options());
      emit_scalar("sigma", sigma, cal_format, cal_out, invocation);
    } else if (renyi_cmd->parsed()) {
      struct Point {
        int alpha, k;
        double p, sigma;
      };
      std::vector<Point> grid;
      for (int a : renyi_alphas)
        for (int k : renyi_ks)
          for (double p : renyi_ps)
            for (double s : renyi_sigmas) grid.push_back({a, k, p, s});
      std::vector<userdp::Lemma1Result> results(grid.size());
      userdp::parallel_for(grid.size(), [&](std::size_t i) {
        results[i] = userdp::check_lemma1(grid[i].alpha, grid[i].k, grid[i].p,
                                          grid[i].sigma);
      });
      std::ostringstream csv;
      csv << userdp::metadata_header(invocation);
      csv << "alpha,K,p,sigma,lhs,rhs,holds\n";
      for (std::size_t i = 0; i < grid.size(); ++i) {
        csv << grid[i].alpha << ',' << grid[i].k << ','
            << userdp::format_double(grid[i].p) << ','
            << userdp::format_double(grid[i].sigma) << ','
            << userdp::format_double(results[i].lhs) << ','
            << userdp::format_double(results[i].rhs) << ','
            << (results[i].holds ? "true" : "false") << '\n';
      }
      userdp::write_file_atomic(renyi_out, csv.str());
      std::cout << "wrote " << grid.size() << " rows to " << renyi_out << "\n";
    } else if (var_cmd->parsed()) {
      if (var_g_els <= 0) var_g_els = static_cast<int>(var_k);
      std::vector<userdp::BudgetSetting> grid;
      for (double eps : var_epsilons) {
        for (double b : var_budgets) {
          userdp::BudgetSetting s;
          s.users = var_users;
          s.examples_per_user = var_k;
          s.steps = var_steps;
          s.budget = b;
          s.cohort = var_cohort;
          s.group_els = var_g_els;
          const double g_uls = b / var_cohort;
          if (g_uls < 1.0 || std::abs(g_uls - std::round(g_uls)) > 1e-9) {
            throw std::invalid_argument(
                "compare-variance: budget must be an integer multiple of the "
                "cohort size");
          }
          s.group_uls = static_cast<int>(std::lround(g_uls));
          s.dim = var_dim;
          s.l_els = var_l_els;
          s.l_uls = var_l_els;
          s.target = {eps, var_delta};
          grid.push_back(s);
        }
      }
      const auto rows = userdp::variance_curves(grid, var_acc.options());
      if (var_format == "json") {
        json arr = json::array();
        for (const auto& r : rows) {
          arr.push_back({{"budget", r.budget},
                         {"cohort", r.cohort},
                         {"epsilon", r.epsilon},
                         {"var_els", r.var_els},
                         {"var_uls_equal", r.var_uls_equal},
                         {"var_uls_diverse", r.var_uls_diverse}});
        }
        json doc{{"metadata",
                  {{"version", userdp::kVersion},
                   {"invocation", invocation},
                   {"caveat", userdp::kSamplingCaveat}}},
                 {"rows", arr}};
        userdp::write_file_atomic(var_out, doc.dump(2) + "\n");
      } else {
        std::ostringstream csv;
        csv << userdp::metadata_header(invocation);
        csv << userdp::kVarianceCsvHeader << '\n';
        for (const auto& r : rows) {
          csv << userdp::format_double(r.budget) << ','
              << userdp::format_double(r.cohort) << ','
              << userdp::format_double(r.epsilon) << ','
              << userdp::format_double(r.var_els) << ','
              << userdp::format_double(r.var_uls_equal) << ','
              << userdp::format_double(r.var_uls_diverse) << '\n';
        }
        userdp::write_file_atomic(var_out, csv.str());
      }
      std::cout << "wrote " << rows.size() << " rows to " << var_out << "\n";
    } else if (sim_cmd->parsed()) {
      userdp::SweepSpec spec;
      spec.data.users = sim_users;
      spec.data.examples_per_user = sim_k;
      spec.data.dim = sim_dim;
      spec.data.sigma1 = sim_sigma1;
      spec.data.sigma2 = sim_sigma2;
      spec.variant =
          sim_variant == "els" ? userdp::Variant::kEls : userdp::Variant::kUls;
      spec.target = {sim_epsilon, sim_delta};
      spec.budget = sim_budget;
      spec.group_sizes = sim_groups;
      if (!sim_lr_grid.empty()) spec.lr_grid = sim_lr_grid;
      if (!sim_clip_grid.empty()) spec.clip_grid = sim_clip_grid;
      spec.trials = sim_trials;
      spec.steps = sim_steps;
      spec.master_seed = sim_seed;
      spec.accounting = sim_acc.options();
      const auto result = userdp::sweep(spec);
      std::ostringstream csv;
      csv << userdp::metadata_header(invocation);
      csv << "variant,G,M_or_B,eta,C,sigma,mean_loss,stderr\n";
      for (const auto& cell : result.cells) {
        csv << (cell.variant == userdp::Variant::kEls ? "els" : "uls") << ','
            << cell.group << ',' << cell.m_or_b << ','
            << userdp::format_double(cell.learning_rate) << ','
            << userdp::format_double(cell.clip_norm) << ','
            << userdp::format_double(cell.sigma) << ','
            << userdp::format_double(cell.mean_loss) << ','
            << userdp::format_double(cell.std_error) << '\n';
      }
      userdp::write_file_atomic(sim_out, csv.str());
      const auto& best = result.best();
      std::cout << "best: G=" << best.group << " eta="
                << userdp::format_double(best.learning_rate)
                << " C=" << userdp::format_double(best.clip_norm)
                << " mean_loss=" << userdp::format_double(best.mean_loss)
                << " stderr=" << userdp::format_double(best.std_error) << "\n";
    } else if (cfg_cmd->parsed()) {
      userdp::SyntheticSpec data_spec;
      data_spec.seed = userdp::derive_seed(cfg_seed, {0xDA7Au});
      data_spec.users = cfg_users;
      data_spec.examples_per_user = cfg_k;
      data_spec.dim = cfg_dim;
      data_spec.sigma1 = cfg_sigma1;
      data_spec.sigma2 = cfg_sigma2;
      const auto data = userdp::generate_synthetic(data_spec);
      const std::vector<double> theta(cfg_dim, 0.0);
      const auto result = userdp::estimate_and_double(
          data, theta, cfg_g0, cfg_m0, cfg_budget, {cfg_epsilon, cfg_delta},
          cfg_steps, cfg_seed, cfg_acc.options());
      std::ostringstream lines;
      for (const auto& step : result.trace) {
        json j{{"step", step.step},     {"G", step.group},
               {"M", step.cohort},      {"tau_G", step.tau_g},
               {"tau_M", step.tau_m},   {"decision", step.decision}};
        if (std::isnan(step.tau_m)) j["tau_M"] = nullptr;
        lines << j.dump() << '\n';
      }
      json final{{"final", {{"G", result.group}, {"M", result.cohort}}}};
      lines << final.dump() << '\n';
      std::cout << lines.str();
      if (!cfg_out.empty()) {
        userdp::write_file_atomic(cfg_out, lines.str());
      }
    }
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump()
              << "\n";
    return 2;
  } catch (const userdp::UnsatisfiableError& e) {
    std::cerr << json{{"error", "unsatisfiable"}, {"message", e.what()}}.dump()
              << "\n";
    return 3;
  } catch (const userdp::CapacityError& e) {
    std::cerr << json{{"error", "numeric-capacity"}, {"message", e.what()}}
                     .dump()
              << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump()
              << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump()
              << "\n";
    return 1;
  }
}
