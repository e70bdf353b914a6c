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


#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mbsyn/config.hpp"

namespace mbsyn {
namespace {

namespace fs = std::filesystem;

const fs::path kSource = MBSYN_SOURCE_DIR;

bool mentions(const std::vector<std::string>& issues, const std::string& needle) {
  return std::any_of(issues.begin(), issues.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

std::vector<std::string> issues_of(const Json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.issues();
  }
  return {};
}

Json small_device() {
  return Json::parse(R"({
    "circuits": [
      {"name": "Q0", "levels": 3, "base_freq_ghz": 5.0, "anharmonicity_ghz": -0.25, "t1_ns": 30000, "t2_star_ns": 3000},
      {"name": "Q1", "levels": 2, "base_freq_ghz": 4.6},
      {"name": "Q2", "levels": 2, "base_freq_ghz": 5.15}
    ],
    "couplings_ghz": [0.023, 0.023]
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct CliRun {
  int code = -1;
  std::string output;
};

CliRun mbsim(const std::string& args, const fs::path& scratch) {
  const fs::path log = scratch / "mbsim.log";
  const std::string cmd = std::string("\"") + MBSIM_EXE + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

class Scratch : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("mbsyn_config_test_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path write(const std::string& name, const Json& j) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }
  fs::path dir_;
};

TEST(Config, MinimalConfigGetsDefaults) {
  const RunConfig c = parse_config(Json{{"experiment", "rabi"}, {"device", small_device()}});
  EXPECT_EQ(c.seed, 0u);
  EXPECT_EQ(c.solver.mode, EvolutionMode::Pure);
  EXPECT_EQ(c.solver.frame, ReadoutFrame::Dressed);
  EXPECT_TRUE(c.calibrate);
  ASSERT_TRUE(c.device.has_value());
  EXPECT_EQ(c.device->bodies(), 3);
}

TEST(Config, ModeReachesSolver) {
  const RunConfig c = parse_config(Json{{"experiment", "rabi"}, {"mode", "lindblad"}, {"device", small_device()}});
  EXPECT_EQ(c.solver.mode, EvolutionMode::Lindblad);
  EXPECT_EQ(resolved_config(c)["mode"], "lindblad");
}

TEST(Config, ResolvedConfigParsesBackToItself) {
  Json j{{"experiment", "interferometer"}, {"seed", 7}, {"device", small_device()},
         {"interferometer", {{"tau_i_ns", "auto"}, {"delta_b_ghz", 0.004}}}};
  const Json resolved = resolved_config(parse_config(j));
  EXPECT_EQ(resolved_config(parse_config(resolved)), resolved);
  EXPECT_EQ(resolved["interferometer"]["tau_i_ns"], "auto");
}

TEST(Config, ReportsFieldPaths) {
  Json j{{"experiment", "rabi"}, {"device", small_device()}, {"solvr", 1}};
  j["device"]["circuits"][1]["t1_ns"] = 1000.0;
  j["device"]["circuits"][1]["t2_star_ns"] = 5000.0;
  auto issues = issues_of(j);
  EXPECT_TRUE(mentions(issues, "config.solvr: unknown field"));

  j.erase("solvr");
  issues = issues_of(j);
  ASSERT_EQ(issues.size(), 1u);
  EXPECT_EQ(issues[0], "config.device.circuits[1].t2_star_ns: T2* must not exceed 2*T1");

  Json k{{"experiment", "rabi"}, {"device", small_device()}};
  k["device"]["couplings_ghz"] = {0.023};
  EXPECT_TRUE(mentions(issues_of(k), "couplings_ghz: has 1 entries for 2 qubits"));
}

TEST(Config, RejectsInconsistentSources) {
  EXPECT_TRUE(mentions(issues_of(Json{{"experiment", "rabi"}}), "exactly one of device, device_file, planner"));
  EXPECT_TRUE(mentions(issues_of(Json{{"device", small_device()}}), "config.experiment: required"));
  EXPECT_TRUE(mentions(issues_of(Json{{"experiment", "plan"}, {"device", small_device()}}), "config.planner"));
  EXPECT_TRUE(mentions(issues_of(Json{{"experiment", "bogus"}, {"device", small_device()}}), "config.experiment: must be one of"));
  EXPECT_TRUE(mentions(issues_of(Json{{"experiment", "rabi"}, {"mode", "quantum"}, {"device", small_device()}}), "config.mode"));
  EXPECT_TRUE(mentions(issues_of(Json{{"experiment", "rabi"}, {"device", small_device()}, {"seed", -1}}), "config.seed"));
  EXPECT_TRUE(mentions(issues_of(Json{{"experiment", "rabi"}, {"device", small_device()}, {"solver", {{"dt_ns", 0}}}}),
                       "config.solver.dt_ns"));
  EXPECT_TRUE(mentions(issues_of(Json{{"experiment", "noise"}, {"device", small_device()},
                                      {"noise", {{"delta_max_ghz", {0.001, 0.002}}}}}),
                       "config.noise.delta_max_ghz"));
  EXPECT_TRUE(mentions(issues_of(Json{{"experiment", "rabi"}, {"planner", {{"m", 7}}}}), "config.planner.m"));
}

TEST(Config, ShippedConfigsAreValid) {
  int count = 0;
  for (const auto& e : fs::directory_iterator(kSource / "configs")) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(e.path())) << e.path();
    ++count;
  }
  EXPECT_GE(count, 10);
}

TEST_F(Scratch, DeviceFileResolvesRelativeToConfig) {
  write("dev.json", small_device());
  const fs::path cfg = write("cfg.json", Json{{"experiment", "lambda"}, {"device_file", "dev.json"}});
  EXPECT_EQ(load_config(cfg).device->qubits.size(), 2u);
}

TEST_F(Scratch, CliMissingConfigNamesThePath) {
  const CliRun r = mbsim("--config " + (dir_ / "nope.json").string(), dir_);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("nope.json"), std::string::npos) << r.output;
}

TEST_F(Scratch, CliValidateReportsEveryIssue) {
  Json bad{{"experiment", "rabi"}, {"device", small_device()}};
  bad["device"]["circuits"][2]["t1_ns"] = 100.0;
  bad["device"]["circuits"][2]["t2_star_ns"] = 300.0;
  bad["device"]["couplings_ghz"] = {0.02};
  const CliRun r = mbsim("--validate --config " + write("bad.json", bad).string(), dir_);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("circuits[2].t2_star_ns"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("couplings_ghz"), std::string::npos) << r.output;
  const CliRun ok = mbsim("--validate --config " + (kSource / "configs" / "rabi_m5.json").string(), dir_);
  EXPECT_EQ(ok.code, 0) << ok.output;
}

TEST_F(Scratch, CliPlannerFailureHasItsOwnExitCode) {
  const Json j{{"experiment", "plan"},
               {"planner", {{"m", 5}, {"threshold_ghz", 0.24}, {"f_min_ghz", 4.6}, {"f_max_ghz", 4.9}, {"budget", 200}}}};
  const CliRun r = mbsim("--config " + write("plan.json", j).string() + " --out " + (dir_ / "out").string(), dir_);
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_NE(r.output.find("planner"), std::string::npos);
}

TEST_F(Scratch, CliNumericalFailureHasItsOwnExitCode) {
  // Qubits resonant with single rungs hybridize the bright pair.
  Json dev = small_device();
  dev["circuits"][1]["base_freq_ghz"] = 5.0;
  dev["circuits"][2]["base_freq_ghz"] = 4.75;
  const Json j{{"experiment", "rabi"}, {"device", dev}, {"calibrate", {{"enabled", false}}}};
  const CliRun r = mbsim("--config " + write("hyb.json", j).string() + " --out " + (dir_ / "out").string(), dir_);
  EXPECT_EQ(r.code, 4) << r.output;
}

TEST_F(Scratch, CliPlanWritesResonantDevice) {
  const fs::path out = dir_ / "plan";
  const CliRun r = mbsim("--config " + (kSource / "configs" / "plan_m5.json").string() + " --out " + out.string(), dir_);
  ASSERT_EQ(r.code, 0) << r.output;
  const Json dev = Json::parse(slurp(out / "device.json"));
  const DeviceSpec d = device_from_json(dev);
  double sum_w = 0.0;
  for (const auto& q : d.qubits) sum_w += q.base_freq;
  double sum_nu = 0.0;
  for (int k = 1; k <= 4; ++k) sum_nu += transition_frequency(d.qudit, k);
  EXPECT_NEAR(sum_w, sum_nu, 1e-6);
  EXPECT_TRUE(fs::exists(out / "config.resolved.json"));
  EXPECT_TRUE(fs::exists(out / "summary.json"));
}

TEST_F(Scratch, CliRabiWritesOutputsAndOverrides) {
  Json j{{"experiment", "rabi"}, {"device", small_device()}, {"rabi", {{"samples_per_period", 20}}}};
  const fs::path cfg = write("rabi.json", j);
  const fs::path out = dir_ / "rabi";
  const CliRun r = mbsim("--config " + cfg.string() + " --out " + out.string() + " --seed 9 --mode lindblad", dir_);
  ASSERT_EQ(r.code, 0) << r.output;
  const Json s = Json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(s["seed"], 9);
  EXPECT_EQ(s["mode"], "lindblad");
  EXPECT_TRUE(s.contains("lambda_rabi_fit_mhz"));
  EXPECT_EQ(Json::parse(slurp(out / "config.resolved.json"))["seed"], 9);
  EXPECT_EQ(slurp(out / "trace.csv").rfind("time_ns,011,200\n", 0), 0u);
}

}  // namespace
}  // namespace mbsyn
