// Copyright 2026 The shadowperc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SHADOWPERC_CLI_HPP_
#define SHADOWPERC_CLI_HPP_

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "shadowperc/kernel.hpp"

namespace shadowperc {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kInvalidConfig = 2;
inline constexpr int kBudget = 3;
inline constexpr int kCertificationFail = 4;
}  // namespace exit_code

// Every flag of the front end. Reals that may be infinite are kept as text
// ("inf") and parsed on use.
struct RunConfig {
  std::string command;

  // Kernel.
  std::string kernel = "bf";  // "bf" or a path to a radial table (r,value)
  double kernel_beta = 20.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  bool normalize = false;

  // Grid.
  double h = 0.25;
  std::string window = "0,0,8,8";  // x0,y0,x1,y1
  double pad = 0.0;                // extra noise margin on every side
  std::string horizon = "inf";
  double horizon_factor = 1.0;     // scan: R = factor * lambda when horizon is inf
  std::string trunc = "inf";
  int stride = 0;                  // 0: 1/h for the discrete variant, else 1
  std::string variant = "discrete";

  // Shadow.
  std::string field;               // optional input grid file
  std::string gradient;
  double ell = 0.3;
  bool csv = false;

  // Scan.
  double ell_min = 0.0;
  double ell_max = 3.0;
  int ell_steps = 13;
  std::string lambdas;
  std::string budget = "inf";      // seconds

  // Shared MC.
  std::int64_t trials = 0;         // 0: command default
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  unsigned workers = 0;            // 0: available parallelism
  std::string out = "out";

  // Certify.
  int d = 2;
  std::int64_t lambda0 = 1;
  std::string mu = "1000000";
  std::string sigma = "100";
  int levels = 64;
  std::string log2_p0 = "auto";    // auto: log2(epsilon0 / 2)
  std::string epsilon = "auto";    // auto: epsilon0
  std::string scale_lambda;        // optional lambda for the scale index
  std::string scale_convention = "strict";
  bool skip_bootstrap = false;
  double boot_a = 1.0;
  double boot_b = 2.0;
  double boot_lambda0 = 100.0;
  double boot_ell = 0.0;
  double boot_ell_prime = 1.0;
  double boot_u0 = 0.5;
  double boot_C1 = 1.0;
  double boot_c1 = 1.0;
  int boot_levels = 40;

  // Order.
  std::string sites;               // CSV file with x,y per line
  std::string row = "0,4,8";       // x coordinates on row 0 when no file
  std::string perm;                // default identity
  bool iid = false;
  std::int64_t peierls_R = 0;      // 0: largest gap of the row
};

const char* version();

// CLI11 application bound to cfg; flags override values read by --config.
std::unique_ptr<CLI::App> build_app(RunConfig& cfg);

// Kernel described by the kernel flags.
Kernel make_kernel(const RunConfig& cfg);

// Runs cfg.command and writes its outputs and manifest into cfg.out.
int run_command(const RunConfig& cfg, const std::string& manifest, std::ostream& log);

// Parses argv, resolves command defaults, runs, and maps errors to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& log, std::ostream& err);

}  // namespace shadowperc

#endif  // SHADOWPERC_CLI_HPP_
