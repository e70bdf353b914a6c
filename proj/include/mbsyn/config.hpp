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

#pragma once

// Run configuration: parsing with field-path diagnostics, defaults, and the
// dispatcher that runs one experiment and writes its outputs.
//
// Outputs in the run directory:
//   config.resolved.json  the configuration with every default filled in
//   device.json           the simulated device (after planning/calibration)
//   trace.csv             time series (not written by "plan")
//   summary.json          fitted quantities and solver diagnostics

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbsyn/device.hpp"
#include "mbsyn/device_json.hpp"
#include "mbsyn/dynamics.hpp"
#include "mbsyn/effective.hpp"
#include "mbsyn/errors.hpp"
#include "mbsyn/experiments.hpp"
#include "mbsyn/planner.hpp"

namespace mbsyn {

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"rabi", "noise", "interferometer", "ghz", "plan", "lambda"};
  return names;
}

/// Interaction window used when the config gives no tau_i_ns.
inline double default_tau_i(int m) {
  switch (m) {
    case 3: return 60.0;
    case 4: return 55.0;
    default: return 170.0;
  }
}

struct TimeGrid {
  std::optional<double> max;   // ns; unset: `periods` nominal periods
  std::optional<double> step;  // ns; unset: period / samples_per_period
  double periods = 2.5;  // margin over the two periods a fit needs
  int samples_per_period = 100;
};

struct RunConfig {
  std::string experiment;
  std::uint64_t seed = 0;

  std::optional<DeviceSpec> device;
  std::optional<PlanRequest> planner;
  bool calibrate = true;
  double calibration_span = 0.05;  // GHz

  ExperimentOptions solver;  // carries the evolution mode
  TimeGrid rabi;
  TimeGrid noise_grid;
  NoiseEnsembleSpec noise{{0.005}, 20, 0};
  std::optional<double> tau_i;  // ns; unset with tau_i_auto=false: per-m default
  bool tau_i_auto = false;
  double delta_b = 0.005;
  std::optional<double> tau_b_max;
  std::optional<double> tau_b_step;
  std::optional<double> ghz_tau;  // ns; unset: pi / (4 * 2 pi lambda)
};

namespace detail {

class Reader {
 public:
  explicit Reader(std::vector<std::string>& issues) : issues_(issues) {}

  const Json* object(const Json& parent, const char* key, const std::string& path,
                     const std::set<std::string>& known) {
    if (!parent.contains(key)) return nullptr;
    const Json& j = parent.at(key);
    if (!j.is_object()) {
      issues_.push_back(path + "." + key + ": must be an object");
      return nullptr;
    }
    reject_unknown_keys(j, known, path + "." + key, issues_);
    return &j;
  }

  void number(const Json* obj, const char* key, const std::string& path, double& out) {
    if (!obj || !obj->contains(key)) return;
    if (!obj->at(key).is_number()) {
      issues_.push_back(path + "." + key + ": must be a number");
      return;
    }
    out = obj->at(key).get<double>();
  }

  void number(const Json* obj, const char* key, const std::string& path, std::optional<double>& out) {
    if (!obj || !obj->contains(key) || obj->at(key).is_null()) return;
    double v = 0.0;
    number(obj, key, path, v);
    out = v;
  }

  // A number or the string "auto" (reported through `is_auto`).
  void number_or_auto(const Json* obj, const char* key, const std::string& path, std::optional<double>& out,
                      bool& is_auto) {
    if (!obj || !obj->contains(key) || obj->at(key).is_null()) return;
    const Json& v = obj->at(key);
    if (v.is_string() && v.get<std::string>() == "auto") {
      is_auto = true;
      return;
    }
    if (!v.is_number()) {
      issues_.push_back(path + "." + key + ": must be a number or \"auto\"");
      return;
    }
    out = v.get<double>();
  }

  template <class Int>
  void integer(const Json* obj, const char* key, const std::string& path, Int& out) {
    if (!obj || !obj->contains(key)) return;
    const Json& v = obj->at(key);
    if (!v.is_number_integer() || (std::is_unsigned_v<Int> && v.get<long long>() < 0)) {
      issues_.push_back(path + "." + key + (std::is_unsigned_v<Int> ? ": must be a non-negative integer"
                                                                      : ": must be an integer"));
      return;
    }
    out = v.get<Int>();
  }

  void boolean(const Json* obj, const char* key, const std::string& path, bool& out) {
    if (!obj || !obj->contains(key)) return;
    if (!obj->at(key).is_boolean()) {
      issues_.push_back(path + "." + key + ": must be true or false");
      return;
    }
    out = obj->at(key).get<bool>();
  }

  std::optional<std::string> choice(const Json* obj, const char* key, const std::string& path,
                                    const std::vector<std::string>& allowed) {
    if (!obj || !obj->contains(key)) return std::nullopt;
    const Json& v = obj->at(key);
    if (v.is_string() && std::find(allowed.begin(), allowed.end(), v.get<std::string>()) != allowed.end()) {
      return v.get<std::string>();
    }
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : "|") + a;
    issues_.push_back(path + "." + key + ": must be one of " + list);
    return std::nullopt;
  }

  void require(bool ok, const std::string& msg) {
    if (!ok) issues_.push_back(msg);
  }

 private:
  std::vector<std::string>& issues_;
};

inline void read_grid(Reader& rd, const Json* obj, const std::string& path, TimeGrid& g) {
  rd.number(obj, "tau_max_ns", path, g.max);
  rd.number(obj, "tau_step_ns", path, g.step);
  rd.number(obj, "periods", path, g.periods);
  rd.integer(obj, "samples_per_period", path, g.samples_per_period);
  rd.require(!g.max || *g.max > 0.0, path + ".tau_max_ns: must be > 0");
  rd.require(!g.step || *g.step > 0.0, path + ".tau_step_ns: must be > 0");
  rd.require(g.periods > 0.0, path + ".periods: must be > 0");
  rd.require(g.samples_per_period >= 4, path + ".samples_per_period: must be >= 4");
}

inline Json grid_to_json(const TimeGrid& g) {
  Json j;
  j["tau_max_ns"] = g.max ? Json(*g.max) : Json(nullptr);
  j["tau_step_ns"] = g.step ? Json(*g.step) : Json(nullptr);
  j["periods"] = g.periods;
  j["samples_per_period"] = g.samples_per_period;
  return j;
}

inline std::optional<Json> load_json_file(const std::filesystem::path& path, const std::string& field,
                                          std::vector<std::string>& issues) {
  std::ifstream in(path);
  if (!in) {
    issues.push_back(field + ": cannot open " + path.string());
    return std::nullopt;
  }
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    issues.push_back(field + ": " + path.string() + " is not valid JSON (" + e.what() + ")");
    return std::nullopt;
  }
}

}  // namespace detail

/// Parses and checks a config document. Relative "device_file" paths are
/// resolved against `base_dir`. Throws ConfigError listing every problem.
inline RunConfig parse_config(const Json& j, const std::filesystem::path& base_dir = {}) {
  std::vector<std::string> issues;
  detail::Reader rd(issues);
  RunConfig c;
  const std::string root = "config";
  if (!j.is_object()) throw ConfigError({root + ": must be a JSON object"});
  detail::reject_unknown_keys(j, {"experiment", "mode", "seed", "device", "device_file", "planner", "calibrate",
                                  "solver", "rabi", "noise", "interferometer", "ghz"},
                              root, issues);

  if (auto e = rd.choice(&j, "experiment", root, experiment_names())) {
    c.experiment = *e;
  } else if (!j.contains("experiment")) {
    issues.push_back(root + ".experiment: required");
  }
  if (auto m = rd.choice(&j, "mode", root, {"pure", "lindblad"})) {
    c.solver.mode = *m == "pure" ? EvolutionMode::Pure : EvolutionMode::Lindblad;
  }
  rd.integer(&j, "seed", root, c.seed);

  const int sources = static_cast<int>(j.contains("device")) + static_cast<int>(j.contains("device_file")) +
                      static_cast<int>(j.contains("planner"));
  if (c.experiment == "plan") {
    rd.require(j.contains("planner"), root + ".planner: required for the plan experiment");
    rd.require(!j.contains("device") && !j.contains("device_file"),
               root + ".device: the plan experiment produces a device and takes none");
  } else if (sources != 1) {
    issues.push_back(root + ": give exactly one of device, device_file, planner");
  }
  if (j.contains("device")) {
    c.device = device_from_json(j.at("device"), root + ".device", issues);
  }
  if (j.contains("device_file")) {
    if (!j.at("device_file").is_string()) {
      issues.push_back(root + ".device_file: must be a path string");
    } else {
      std::filesystem::path p = j.at("device_file").get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      if (auto dj = detail::load_json_file(p, root + ".device_file", issues)) {
        c.device = device_from_json(*dj, root + ".device_file", issues);
      }
    }
  }
  if (const Json* p = rd.object(j, "planner", root,
                                {"m", "qudit_base_ghz", "alpha_ghz", "g_ghz", "threshold_ghz", "budget",
                                 "lambda_target_ghz", "lambda_weight", "f_min_ghz", "f_max_ghz", "qudit_levels",
                                 "qubit_levels", "qubit_anharmonicity_ghz", "t1_ns", "t2_star_ns"})) {
    PlanRequest r;
    const std::string path = root + ".planner";
    rd.integer(p, "m", path, r.m);
    rd.number(p, "qudit_base_ghz", path, r.qudit_base);
    rd.number(p, "alpha_ghz", path, r.alpha);
    rd.number(p, "g_ghz", path, r.g);
    rd.number(p, "threshold_ghz", path, r.threshold);
    rd.integer(p, "budget", path, r.budget);
    rd.number(p, "lambda_target_ghz", path, r.lambda_target);
    rd.number(p, "lambda_weight", path, r.lambda_weight);
    rd.number(p, "f_min_ghz", path, r.f_min);
    rd.number(p, "f_max_ghz", path, r.f_max);
    rd.integer(p, "qudit_levels", path, r.qudit_levels);
    rd.integer(p, "qubit_levels", path, r.qubit_levels);
    rd.number(p, "qubit_anharmonicity_ghz", path, r.qubit_anharmonicity);
    if (p->contains("t1_ns") && p->at("t1_ns").is_null()) r.t1.reset();
    if (p->contains("t2_star_ns") && p->at("t2_star_ns").is_null()) r.t2_star.reset();
    rd.number(p, "t1_ns", path, r.t1);
    rd.number(p, "t2_star_ns", path, r.t2_star);
    for (auto& msg : r.validate()) issues.push_back(root + "." + msg);
    if (r.t1 && !(*r.t1 > 0.0)) issues.push_back(path + ".t1_ns: must be > 0");
    if (r.t2_star && !(*r.t2_star > 0.0)) issues.push_back(path + ".t2_star_ns: must be > 0");
    if (r.t1 && r.t2_star && *r.t2_star > 2.0 * *r.t1) {
      issues.push_back(path + ".t2_star_ns: T2* must not exceed 2*T1");
    }
    c.planner = r;
  }

  if (const Json* cal = rd.object(j, "calibrate", root, {"enabled", "span_ghz"})) {
    rd.boolean(cal, "enabled", root + ".calibrate", c.calibrate);
    rd.number(cal, "span_ghz", root + ".calibrate", c.calibration_span);
    rd.require(c.calibration_span > 0.0, root + ".calibrate.span_ghz: must be > 0");
  }
  if (const Json* s = rd.object(j, "solver", root, {"dt_ns", "frame", "check_positivity", "threads"})) {
    const std::string path = root + ".solver";
    rd.number(s, "dt_ns", path, c.solver.dt);
    rd.require(c.solver.dt > 0.0 && c.solver.dt <= 1.0, path + ".dt_ns: must be in (0, 1]");
    if (auto f = rd.choice(s, "frame", path, {"bare", "dressed"})) {
      c.solver.frame = *f == "bare" ? ReadoutFrame::Bare : ReadoutFrame::Dressed;
    }
    rd.boolean(s, "check_positivity", path, c.solver.check_positivity);
    rd.integer(s, "threads", path, c.solver.threads);
  }
  if (const Json* r = rd.object(j, "rabi", root, {"tau_max_ns", "tau_step_ns", "periods", "samples_per_period"})) {
    detail::read_grid(rd, r, root + ".rabi", c.rabi);
  }
  if (const Json* n = rd.object(j, "noise", root, {"tau_max_ns", "tau_step_ns", "periods", "samples_per_period",
                                                   "delta_max_ghz", "ensemble_size"})) {
    const std::string path = root + ".noise";
    detail::read_grid(rd, n, path, c.noise_grid);
    if (n->contains("delta_max_ghz")) {
      const Json& d = n->at("delta_max_ghz");
      c.noise.delta_max.clear();
      if (d.is_number()) {
        c.noise.delta_max.push_back(d.get<double>());
      } else if (d.is_array() && !d.empty() && std::all_of(d.begin(), d.end(), [](const Json& x) { return x.is_number(); })) {
        for (const auto& x : d) c.noise.delta_max.push_back(x.get<double>());
      } else {
        issues.push_back(path + ".delta_max_ghz: must be a number or a non-empty array of numbers");
      }
      for (double x : c.noise.delta_max) rd.require(x >= 0.0, path + ".delta_max_ghz: entries must be >= 0");
    }
    rd.integer(n, "ensemble_size", path, c.noise.ensemble_size);
    rd.require(c.noise.ensemble_size >= 1, path + ".ensemble_size: must be >= 1");
  }
  if (const Json* in = rd.object(j, "interferometer", root, {"tau_i_ns", "delta_b_ghz", "tau_b_max_ns", "tau_b_step_ns"})) {
    const std::string path = root + ".interferometer";
    rd.number_or_auto(in, "tau_i_ns", path, c.tau_i, c.tau_i_auto);
    rd.number(in, "delta_b_ghz", path, c.delta_b);
    rd.number(in, "tau_b_max_ns", path, c.tau_b_max);
    rd.number(in, "tau_b_step_ns", path, c.tau_b_step);
    rd.require(!c.tau_i || *c.tau_i > 0.0, path + ".tau_i_ns: must be > 0");
    rd.require(c.delta_b != 0.0 && std::isfinite(c.delta_b), path + ".delta_b_ghz: must be nonzero");
    rd.require(!c.tau_b_max || *c.tau_b_max > 0.0, path + ".tau_b_max_ns: must be > 0");
    rd.require(!c.tau_b_step || *c.tau_b_step > 0.0, path + ".tau_b_step_ns: must be > 0");
  }
  if (const Json* g = rd.object(j, "ghz", root, {"tau_ns"})) {
    bool is_auto = false;
    rd.number_or_auto(g, "tau_ns", root + ".ghz", c.ghz_tau, is_auto);
    rd.require(!c.ghz_tau || *c.ghz_tau > 0.0, root + ".ghz.tau_ns: must be > 0");
  }
  if (c.device && c.noise.delta_max.size() != 1 && c.noise.delta_max.size() != c.device->num_circuits()) {
    issues.push_back(root + ".noise.delta_max_ghz: needs one entry or one per circuit (" +
                     std::to_string(c.device->num_circuits()) + ")");
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  c.noise.seed = c.seed;
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::vector<std::string> issues;
  auto j = detail::load_json_file(path, "--config", issues);
  if (!j) throw ConfigError(std::move(issues));
  return parse_config(*j, path.parent_path());
}

/// The config with every default written out.
inline Json resolved_config(const RunConfig& c) {
  Json j;
  j["experiment"] = c.experiment;
  j["mode"] = to_string(c.solver.mode);
  j["seed"] = c.seed;
  if (c.device) j["device"] = device_to_json(*c.device);
  if (c.planner) {
    const PlanRequest& r = *c.planner;
    j["planner"] = {{"m", r.m},
                    {"qudit_base_ghz", r.qudit_base},
                    {"alpha_ghz", r.alpha},
                    {"g_ghz", r.g},
                    {"threshold_ghz", r.threshold},
                    {"budget", r.budget},
                    {"lambda_target_ghz", r.lambda_target.value_or(default_lambda_target(r.m))},
                    {"lambda_weight", r.lambda_weight},
                    {"f_min_ghz", r.f_min},
                    {"f_max_ghz", r.f_max},
                    {"qudit_levels", r.qudit_levels},
                    {"qubit_levels", r.qubit_levels},
                    {"qubit_anharmonicity_ghz", r.qubit_anharmonicity},
                    {"t1_ns", r.t1 ? Json(*r.t1) : Json(nullptr)},
                    {"t2_star_ns", r.t2_star ? Json(*r.t2_star) : Json(nullptr)}};
  }
  j["calibrate"] = {{"enabled", c.calibrate}, {"span_ghz", c.calibration_span}};
  j["solver"] = {{"dt_ns", c.solver.dt},
                 {"frame", to_string(c.solver.frame)},
                 {"check_positivity", c.solver.check_positivity},
                 {"threads", c.solver.threads}};
  j["rabi"] = detail::grid_to_json(c.rabi);
  Json noise = detail::grid_to_json(c.noise_grid);
  noise["delta_max_ghz"] = c.noise.delta_max;
  noise["ensemble_size"] = c.noise.ensemble_size;
  j["noise"] = noise;
  j["interferometer"] = {{"tau_i_ns", c.tau_i_auto ? Json("auto") : (c.tau_i ? Json(*c.tau_i) : Json(nullptr))},
                         {"delta_b_ghz", c.delta_b},
                         {"tau_b_max_ns", c.tau_b_max ? Json(*c.tau_b_max) : Json(nullptr)},
                         {"tau_b_step_ns", c.tau_b_step ? Json(*c.tau_b_step) : Json(nullptr)}};
  j["ghz"] = {{"tau_ns", c.ghz_tau ? Json(*c.ghz_tau) : Json("auto")}};
  return j;
}

namespace detail {

struct Grid {
  double max = 0.0;
  double step = 0.0;
};

inline Grid resolve_grid(const TimeGrid& g, double period) {
  return {g.max.value_or(g.periods * period), g.step.value_or(period / g.samples_per_period)};
}

inline Json diagnostics_json(const SolverDiagnostics& d, EvolutionMode mode) {
  Json j;
  j["steps"] = d.steps;
  if (mode == EvolutionMode::Pure) {
    j["max_norm_drift"] = d.max_norm_drift;
    j["max_excitation_drift"] = d.max_excitation_drift;
  } else {
    j["max_trace_drift"] = d.max_trace_drift;
    j["max_hermiticity_error"] = d.max_hermiticity_error;
    j["min_eigenvalue"] = d.min_eigenvalue;
  }
  return j;
}

inline Json fit_json(const CosineFit& f) {
  return {{"frequency_mhz", f.frequency * 1e3},
          {"amplitude", f.amplitude},
          {"phase_rad", f.phase},
          {"offset", f.offset},
          {"rms", f.rms}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

inline void write_csv(const std::filesystem::path& path, const TraceResult& r) {
  std::ostringstream os;
  write_trace_csv(os, r);
  write_text(path, os.str());
}

}  // namespace detail

struct PreparedDevice {
  DeviceSpec device;
  std::optional<FrequencyPlan> plan;
  double qubit_offset = 0.0;  // GHz, from resonance calibration
  EffectiveCoupling splitting;
};

/// Plans (if asked), calibrates the resonance (if enabled) and measures the
/// splitting lambda of the device that will be simulated.
inline PreparedDevice prepare_device(const RunConfig& c) {
  PreparedDevice p;
  if (c.planner) {
    PlanRequest req = *c.planner;
    req.seed = c.seed;
    p.plan = plan_frequencies(req);
    p.device = to_device(*p.plan, req);
  } else {
    p.device = *c.device;
  }
  if (c.calibrate) {
    const ResonanceCalibration cal = calibrate_resonance(p.device, c.calibration_span);
    p.device = cal.device;
    p.qubit_offset = cal.qubit_offset;
    p.splitting = cal.coupling;
  } else {
    p.splitting = lambda_from_splitting(p.device);
  }
  return p;
}

/// Runs the configured experiment and writes its outputs into `out_dir`.
/// Returns the summary document.
inline Json run_experiment(const RunConfig& c, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  detail::write_json(out_dir / "config.resolved.json", resolved_config(c));

  Json s;
  s["experiment"] = c.experiment;
  s["seed"] = c.seed;

  if (c.experiment == "plan") {
    PlanRequest req = *c.planner;
    req.seed = c.seed;
    const FrequencyPlan plan = plan_frequencies(req);
    Json dev = device_to_json(to_device(plan, req));
    dev["plan"] = plan_to_json(plan);
    detail::write_json(out_dir / "device.json", dev);
    s["plan"] = plan_to_json(plan);
    detail::write_json(out_dir / "summary.json", s);
    return s;
  }

  const PreparedDevice prep = prepare_device(c);
  const DeviceSpec& dev = prep.device;
  const int m = dev.bodies();
  const double lambda = prep.splitting.lambda;
  const BrightPair pair = bright_pair(m);
  {
    Json dj = device_to_json(dev);
    if (prep.plan) dj["plan"] = plan_to_json(*prep.plan);
    detail::write_json(out_dir / "device.json", dj);
  }

  s["mode"] = to_string(c.solver.mode);
  s["frame"] = to_string(c.solver.frame);
  s["dt_ns"] = c.solver.dt;
  s["m"] = m;
  s["bright_pair"] = {pair.collective, pair.excited};
  s["calibration"] = {{"enabled", c.calibrate}, {"qubit_offset_mhz", prep.qubit_offset * 1e3}};
  s["lambda_splitting_mhz"] = lambda * 1e3;
  s["splitting_overlaps"] = prep.splitting.overlaps;
  const double period = rabi_period(lambda);

  if (c.experiment == "rabi" || c.experiment == "lambda") {
    const auto g = detail::resolve_grid(c.rabi, period);
    const RabiResult r = rabi_scan(dev, g.max, g.step, c.solver);
    detail::write_csv(out_dir / "trace.csv", r.trace);
    s["tau_max_ns"] = g.max;
    s["tau_step_ns"] = g.step;
    s["contrast"] = r.contrast;
    try {
      const EffectiveCoupling fit = lambda_from_rabi_fit(r.trace, pair);
      s["lambda_rabi_fit_mhz"] = fit.lambda * 1e3;
      s["rabi_fit_rms"] = fit.fit_rms;
      s["lambda_fit_vs_splitting"] = fit.lambda / lambda - 1.0;
    } catch (const NumericalError& e) {
      // A decaying envelope is expected under decoherence; only noiseless runs must fit.
      if (c.solver.mode == EvolutionMode::Pure) throw;
      s["lambda_rabi_fit_mhz"] = nullptr;
      s["rabi_fit_error"] = e.what();
    }
    s["final_populations"] = {r.trace.series(pair.collective).back(), r.trace.series(pair.excited).back()};
    s["solver"] = detail::diagnostics_json(r.trace.diagnostics, c.solver.mode);
    if (c.experiment == "lambda") {
      const EffectiveCoupling pert = lambda_perturbative(dev);
      s["lambda_perturbative_mhz"] = pert.lambda * 1e3;
      s["perturbative_regime"] = pert.perturbative_regime;
      if (!pert.warning.empty()) s["perturbative_warning"] = pert.warning;
    }
  } else if (c.experiment == "noise") {
    const auto g = detail::resolve_grid(c.noise_grid, period);
    NoiseEnsembleSpec spec = c.noise;
    spec.seed = c.seed;
    const NoiseResult r = noise_scan(dev, g.max, g.step, spec, c.solver, period);
    detail::write_csv(out_dir / "trace.csv", r.mean);
    TraceResult sd = r.mean;
    sd.populations = r.stddev;
    detail::write_csv(out_dir / "trace_std.csv", sd);
    s["tau_max_ns"] = g.max;
    s["tau_step_ns"] = g.step;
    s["nominal_period_ns"] = period;
    s["ensemble_size"] = spec.ensemble_size;
    s["delta_max_ghz"] = spec.delta_max;
    s["contrast_after_period"] = r.contrast_after_period;
    s["offsets_ghz"] = r.offsets;
    s["solver"] = detail::diagnostics_json(r.mean.diagnostics, c.solver.mode);
  } else {
    InterferometerSpec spec;
    spec.delta_b = c.delta_b;
    const double fringe = 1.0 / (m * std::abs(c.delta_b));
    spec.tau_b_max = c.tau_b_max.value_or(3.0 * fringe);
    spec.tau_b_step = c.tau_b_step.value_or(fringe / 20.0);
    const double expected = m * std::abs(c.delta_b);
    // Gap of the bright pair while biased. The coupling stays on and the bias
    // moves dispersive shifts, so this differs from m * delta_b at finite g.
    Json dressed = nullptr;
    try {
      dressed = 2.0 * lambda_from_splitting(dev, interferometer_bias(dev, c.delta_b)).lambda * 1e3;
    } catch (const HybridizationError&) {
    }
    const auto interferometer_json = [&](const InterferometerResult& r) {
      return Json{{"tau_i_ns", spec.tau_i},
                  {"delta_b_ghz", spec.delta_b},
                  {"tau_b_max_ns", spec.tau_b_max},
                  {"tau_b_step_ns", spec.tau_b_step},
                  {"frequency_mhz", r.frequency * 1e3},
                  {"expected_mhz", expected * 1e3},
                  {"relative_error", r.frequency / expected - 1.0},
                  {"dressed_gap_mhz", dressed},
                  {"rho_off", r.rho_off},
                  {"fit_collective", detail::fit_json(r.fit_collective)},
                  {"fit_excited", detail::fit_json(r.fit_excited)}};
    };
    if (c.experiment == "interferometer") {
      spec.tau_i = c.tau_i_auto ? ghz_time(lambda) : c.tau_i.value_or(default_tau_i(m));
      const InterferometerResult r = interferometer_scan(dev, spec, c.solver);
      detail::write_csv(out_dir / "trace.csv", r.trace);
      s["interferometer"] = interferometer_json(r);
      s["solver"] = detail::diagnostics_json(r.trace.diagnostics, c.solver.mode);
    } else {
      const double tau = c.ghz_tau.value_or(ghz_time(lambda));
      spec.tau_i = tau;
      const GhzEstimate r = ghz_estimate(dev, tau, spec, c.solver);
      detail::write_csv(out_dir / "trace.csv", r.interferometer.trace);
      s["tau_ns"] = tau;
      s["p_collective"] = r.p_collective;
      s["p_excited"] = r.p_excited;
      s["rho_off_abs"] = r.rho_off_abs;
      s["phase_rad"] = r.phase;
      s["fidelity"] = r.fidelity;
      s["rho_off_interferometric"] = r.rho_off_interferometric;
      s["fidelity_interferometric"] = r.fidelity_interferometric;
      s["rho_off_relative_difference"] = r.rho_off_interferometric / r.rho_off_abs - 1.0;
      s["interferometer"] = interferometer_json(r.interferometer);
      s["solver"] = detail::diagnostics_json(r.interferometer.trace.diagnostics, c.solver.mode);
    }
  }
  detail::write_json(out_dir / "summary.json", s);
  return s;
}

}  // namespace mbsyn
