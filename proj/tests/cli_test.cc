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

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "gtest/gtest.h"
#include "userdp/mechanisms.hpp"
#include "userdp/pld.hpp"

namespace {

std::string cli_path() {
  const char* env = std::getenv("USERDP_CLI");
  if (env) return env;
  return "./tools/userdp";
}

struct CommandResult {
  int exit_code = -1;
  std::string stdout_text;
};

CommandResult run_cli(const std::string& args) {
  const std::string out_file = ::testing::TempDir() + "/cli_stdout.txt";
  const std::string cmd =
      cli_path() + " " + args + " > " + out_file + " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  CommandResult result;
  result.exit_code = WEXITSTATUS(status);
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  result.stdout_text = ss.str();
  return result;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Cli, HugeNoiseDeltaIsNearZero) {
  const auto r =
      run_cli("delta --kind uls --sigma 1e9 --q 0.1 --T 100 --epsilon 1");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_LE(std::stod(r.stdout_text), 1e-9);
}

TEST(Cli, EpsilonMatchesLibrary) {
  const auto r = run_cli(
      "epsilon --kind els --sigma 4 --p 0.01 --K 8 --T 50 --delta 1e-6");
  ASSERT_EQ(r.exit_code, 0);
  const auto mech = userdp::els_mechanism({4.0, 0.01, 8, 50});
  const auto add = userdp::compose(
      userdp::build_pld(mech, userdp::Direction::kAdd), 50);
  const auto remove = userdp::compose(
      userdp::build_pld(mech, userdp::Direction::kRemove), 50);
  const double expected = std::max(userdp::epsilon_at_delta(add, 1e-6),
                                   userdp::epsilon_at_delta(remove, 1e-6));
  EXPECT_NEAR(std::stod(r.stdout_text), expected, 1e-9);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli("epsilon --kind els --sigma 1").exit_code, 2);
  EXPECT_EQ(run_cli("delta --kind uls --sigma 1 --q 0.1 --T 4 --epsilon 1 "
                    "--bogus-flag 3")
                .exit_code,
            2);
  EXPECT_EQ(run_cli("simulate-mean --variant uls --out /tmp/x.csv").exit_code,
            2);  // --master-seed is required
  EXPECT_EQ(run_cli("no-such-command").exit_code, 2);
}

TEST(Cli, UnsatisfiableTargetExitsThree) {
  const auto r = run_cli(
      "calibrate --kind uls --q 0.5 --T 1000 --epsilon 0.1 --delta 1e-8 "
      "--tail-mass 1e-9");
  EXPECT_EQ(r.exit_code, 3);
}

TEST(Cli, CapacityOverflowExitsFour) {
  const auto r = run_cli(
      "delta --kind els --sigma 0.5 --p 0.3 --K 16 --T 1 --epsilon 1 "
      "--grid-spacing 1e-9");
  EXPECT_EQ(r.exit_code, 4);
}

TEST(Cli, RenyiCheckWritesCsvWithMetadata) {
  const std::string out = ::testing::TempDir() + "/renyi.csv";
  const auto r = run_cli("renyi-check --alphas 2 --Ks 2 --ps 0.1 --sigmas 1 "
                         "--out " +
                         out);
  ASSERT_EQ(r.exit_code, 0);
  const std::string text = read_file(out);
  EXPECT_EQ(text.rfind("# userdp", 0), 0u);
  EXPECT_NE(text.find("alpha,K,p,sigma,lhs,rhs,holds"), std::string::npos);
  EXPECT_NE(text.find("true"), std::string::npos);
}

TEST(Cli, SimulateMeanDeterministicOutputs) {
  const std::string out1 = ::testing::TempDir() + "/sim1.csv";
  const std::string out2 = ::testing::TempDir() + "/sim2.csv";
  const std::string args =
      "simulate-mean --variant uls --epsilon 1 --delta 1e-5 --budget 8 "
      "--group-sizes 1,2 --trials 2 --steps 4 --n-users 16 "
      "--examples-per-user 4 --dim 4 --lr-grid 0.25,0.5 --clip-grid 1 "
      "--master-seed 7 --out ";
  ASSERT_EQ(run_cli(args + out1).exit_code, 0);
  ASSERT_EQ(run_cli(args + out2).exit_code, 0);
  const std::string a = read_file(out1);
  const std::string b = read_file(out2);
  // Identical bytes apart from the self-referencing output path in the
  // metadata line.
  auto strip_invocation = [](std::string s) {
    const auto pos = s.find("# invocation:");
    const auto end = s.find('\n', pos);
    s.erase(pos, end - pos);
    return s;
  };
  EXPECT_EQ(strip_invocation(a), strip_invocation(b));
  EXPECT_NE(a.find("variant,G,M_or_B,eta,C,sigma,mean_loss,stderr"),
            std::string::npos);
}

TEST(Cli, ConfigureUlsEmitsTrace) {
  const auto r = run_cli(
      "configure-uls --budget 16 --epsilon 1 --delta 1e-5 --steps 4 --g0 1 "
      "--m0 4 --n-users 16 --examples-per-user 4 --dim 4 --seed 3");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_NE(r.stdout_text.find("\"tau_G\""), std::string::npos);
  EXPECT_NE(r.stdout_text.find("\"decision\""), std::string::npos);
  EXPECT_NE(r.stdout_text.find("\"final\""), std::string::npos);
}

}  // namespace
