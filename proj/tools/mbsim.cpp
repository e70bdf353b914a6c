// Copyright 2026 The mbsyn Authors
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


// mbsim: run one experiment described by a JSON config.
//
//   mbsim --config configs/rabi_m5.json --out runs/rabi_m5
//   mbsim --config configs/plan_m5.json --validate
//
// Exit codes: 0 success, 2 invalid config, 3 planner found no placement,
// 4 numerical failure (hybridized bright pair, failed fit), 1 anything else.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mbsyn/mbsyn.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPlanner = 3;
constexpr int kExitNumerical = 4;

std::filesystem::path default_out(const std::filesystem::path& config) {
  const char* root = std::getenv("MBSIM_OUT_ROOT");
  return std::filesystem::path(root && *root ? root : "mbsim-out") / config.stem();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulse-level simulator for qudit-mediated many-body spin exchange"};
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  bool validate_only = false;
  app.add_option("--config", config_path, "experiment config (JSON)")->required();
  app.add_option("--out", out_dir, "output directory (default $MBSIM_OUT_ROOT/<config name>)");
  app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--mode", mode, "overrides the config mode")->check(CLI::IsMember({"pure", "lindblad"}));
  app.add_flag("--validate", validate_only, "check the config without simulating");
  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config file " << config_path << "\n";
      return kExitConfig;
    }
    mbsyn::Json j;
    try {
      j = mbsyn::Json::parse(in);
    } catch (const mbsyn::Json::parse_error& e) {
      std::cerr << "error: " << config_path << " is not valid JSON: " << e.what() << "\n";
      return kExitConfig;
    }
    if (j.is_object()) {
      if (seed) j["seed"] = *seed;
      if (mode) j["mode"] = *mode;
    }
    const auto config = mbsyn::parse_config(j, std::filesystem::path(config_path).parent_path());
    if (validate_only) {
      std::cout << config_path << ": ok\n";
      return 0;
    }
    const std::filesystem::path out = out_dir.empty() ? default_out(config_path) : std::filesystem::path(out_dir);
    const auto summary = mbsyn::run_experiment(config, out);
    std::cout << "wrote " << out.string() << "\n";
    return 0;
  } catch (const mbsyn::ConfigError& e) {
    if (validate_only) {
      for (const auto& issue : e.issues()) std::cout << config_path << ": " << issue << "\n";
    } else {
      for (const auto& issue : e.issues()) std::cerr << "error: " << issue << "\n";
    }
    return kExitConfig;
  } catch (const mbsyn::PlanError& e) {
    std::cerr << "error: planner: " << e.what() << "\n";
    return kExitPlanner;
  } catch (const mbsyn::NumericalError& e) {
    std::cerr << "error: numerical: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
