// Copyright 2026 The asepdist authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "asepdist/cli.hpp"

namespace {

struct Args {
  std::string config;
  std::int64_t seed = -1;
  int kmax = -1;
  std::int64_t trials = -1;
  std::string out;
  std::string format;
};

void add_common_options(CLI::App* sub, Args& args) {
  sub->add_option("--config", args.config, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", args.seed, "override sim.seed");
  sub->add_option("--kmax", args.kmax, "override eval.k_max");
  sub->add_option("--trials", args.trials, "override sim.trials");
  sub->add_option("--out", args.out, "override output.path");
  sub->add_option("--format", args.format, "override output.format (json|csv)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact and Monte Carlo particle-position distributions for the "
               "asymmetric simple exclusion process"};
  app.require_subcommand(1);
  Args args;
  app.add_subcommand("identities",
                     "run the exact rational identity suite (JSONL reports)");
  app.add_subcommand("cdf", "evaluate P(x_l(t) <= x) over the x range");
  app.add_subcommand("pmf", "evaluate P(x_l(t) = x) over the x range");
  app.add_subcommand("simulate", "Monte Carlo empirical CDF of x_l(t)");
  app.add_subcommand("compare", "formula vs simulation report");
  for (auto* sub : app.get_subcommands({})) add_common_options(sub, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string mode = app.get_subcommands().front()->get_name();

  try {
    std::ifstream in(args.config);
    if (!in) {
      std::cerr << "config error: cannot read '" << args.config << "'\n";
      return 2;
    }
    asepdist::cli::json j;
    try {
      j = asepdist::cli::json::parse(in);
    } catch (const std::exception& e) {
      std::cerr << "config error: invalid JSON in '" << args.config
                << "': " << e.what() << "\n";
      return 2;
    }

    auto cfg = asepdist::cli::parse_run_config(j, mode);
    asepdist::cli::CliOverrides ov;
    if (args.seed >= 0) ov.seed = static_cast<std::uint64_t>(args.seed);
    if (args.kmax >= 0) ov.kmax = args.kmax;
    if (args.trials >= 0) ov.trials = args.trials;
    if (!args.out.empty()) ov.out = args.out;
    if (!args.format.empty()) ov.format = args.format;
    asepdist::cli::apply_overrides(cfg, ov);
    return asepdist::cli::run(cfg);
  } catch (const asepdist::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
