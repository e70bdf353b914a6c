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

// JSON form of DeviceSpec:
//
//   {
//     "circuits": [                       // circuits[0] is the qudit
//       {"name": "Q0", "levels": 5, "base_freq_ghz": 5.0,
//        "anharmonicity_ghz": -0.25, "t1_ns": 30000, "t2_star_ns": 3000},
//       {"name": "Q1", "levels": 2, "base_freq_ghz": 4.8}, ...
//     ],
//     "couplings_ghz": [0.023, ...],       // qudit <-> circuits[j+1]
//     "qubit_couplings": [{"first": 1, "second": 2, "g_ghz": 0.0005}]   // optional
//   }
//
// "t1_ns"/"t2_star_ns" may be omitted or null to switch that channel off.
// Unknown keys are rejected so typos surface as errors.

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbsyn/device.hpp"
#include "mbsyn/errors.hpp"

namespace mbsyn {

using Json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const Json& obj, const std::set<std::string>& known,
                                const std::string& path, std::vector<std::string>& issues) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) issues.push_back(path + "." + it.key() + ": unknown field");
  }
}

inline bool read_number(const Json& obj, const char* key, const std::string& path,
                        std::vector<std::string>& issues, double& out, bool required) {
  if (!obj.contains(key) || obj.at(key).is_null()) {
    if (required) issues.push_back(path + "." + key + ": required");
    return false;
  }
  if (!obj.at(key).is_number()) {
    issues.push_back(path + "." + key + ": must be a number");
    return false;
  }
  out = obj.at(key).get<double>();
  return true;
}

inline bool read_int(const Json& obj, const char* key, const std::string& path,
                     std::vector<std::string>& issues, int& out, bool required) {
  if (!obj.contains(key) || obj.at(key).is_null()) {
    if (required) issues.push_back(path + "." + key + ": required");
    return false;
  }
  if (!obj.at(key).is_number_integer()) {
    issues.push_back(path + "." + key + ": must be an integer");
    return false;
  }
  out = obj.at(key).get<int>();
  return true;
}

inline CircuitSpec circuit_from_json(const Json& j, const std::string& path,
                                     std::vector<std::string>& issues) {
  CircuitSpec c;
  if (!j.is_object()) {
    issues.push_back(path + ": must be an object");
    return c;
  }
  reject_unknown_keys(j, {"name", "levels", "base_freq_ghz", "anharmonicity_ghz", "t1_ns", "t2_star_ns"},
                      path, issues);
  if (j.contains("name")) {
    if (j.at("name").is_string()) {
      c.name = j.at("name").get<std::string>();
    } else {
      issues.push_back(path + ".name: must be a string");
    }
  }
  read_int(j, "levels", path, issues, c.levels, true);
  read_number(j, "base_freq_ghz", path, issues, c.base_freq, true);
  read_number(j, "anharmonicity_ghz", path, issues, c.anharmonicity, false);
  double v = 0.0;
  if (read_number(j, "t1_ns", path, issues, v, false)) c.t1 = v;
  if (read_number(j, "t2_star_ns", path, issues, v, false)) c.t2_star = v;
  return c;
}

inline Json circuit_to_json(const CircuitSpec& c) {
  Json j;
  if (!c.name.empty()) j["name"] = c.name;
  j["levels"] = c.levels;
  j["base_freq_ghz"] = c.base_freq;
  j["anharmonicity_ghz"] = c.anharmonicity;
  j["t1_ns"] = c.t1 ? Json(*c.t1) : Json(nullptr);
  j["t2_star_ns"] = c.t2_star ? Json(*c.t2_star) : Json(nullptr);
  return j;
}

}  // namespace detail

/// Parses without throwing; structural and invariant problems go to `issues`.
inline DeviceSpec device_from_json(const Json& j, const std::string& path,
                                   std::vector<std::string>& issues) {
  DeviceSpec d;
  const std::size_t before = issues.size();
  if (!j.is_object()) {
    issues.push_back(path + ": must be an object");
    return d;
  }
  detail::reject_unknown_keys(j, {"circuits", "couplings_ghz", "qubit_couplings", "plan"}, path, issues);
  if (!j.contains("circuits") || !j.at("circuits").is_array()) {
    issues.push_back(path + ".circuits: required array");
  } else {
    const Json& cs = j.at("circuits");
    if (cs.size() < 2) issues.push_back(path + ".circuits: need a qudit and at least one qubit");
    for (std::size_t i = 0; i < cs.size(); ++i) {
      CircuitSpec c = detail::circuit_from_json(cs[i], path + ".circuits[" + std::to_string(i) + "]", issues);
      if (i == 0) {
        d.qudit = c;
      } else {
        d.qubits.push_back(c);
      }
    }
  }
  if (!j.contains("couplings_ghz") || !j.at("couplings_ghz").is_array()) {
    issues.push_back(path + ".couplings_ghz: required array");
  } else {
    const Json& gs = j.at("couplings_ghz");
    for (std::size_t i = 0; i < gs.size(); ++i) {
      if (!gs[i].is_number()) {
        issues.push_back(path + ".couplings_ghz[" + std::to_string(i) + "]: must be a number");
      } else {
        d.couplings.push_back(gs[i].get<double>());
      }
    }
  }
  if (j.contains("qubit_couplings")) {
    const Json& qcs = j.at("qubit_couplings");
    if (!qcs.is_array()) {
      issues.push_back(path + ".qubit_couplings: must be an array");
    } else {
      for (std::size_t i = 0; i < qcs.size(); ++i) {
        const std::string p = path + ".qubit_couplings[" + std::to_string(i) + "]";
        if (!qcs[i].is_object()) {
          issues.push_back(p + ": must be an object");
          continue;
        }
        detail::reject_unknown_keys(qcs[i], {"first", "second", "g_ghz"}, p, issues);
        QubitCoupling qc;
        int a = 0;
        int b = 0;
        if (detail::read_int(qcs[i], "first", p, issues, a, true)) qc.first = static_cast<std::size_t>(std::max(a, 0));
        if (detail::read_int(qcs[i], "second", p, issues, b, true)) qc.second = static_cast<std::size_t>(std::max(b, 0));
        detail::read_number(qcs[i], "g_ghz", p, issues, qc.g, true);
        d.qubit_couplings.push_back(qc);
      }
    }
  }
  if (issues.size() == before) {
    for (auto& msg : d.validate()) issues.push_back(path + "." + msg);
  }
  return d;
}

inline DeviceSpec device_from_json(const Json& j) {
  std::vector<std::string> issues;
  DeviceSpec d = device_from_json(j, "device", issues);
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return d;
}

inline Json device_to_json(const DeviceSpec& d) {
  Json j;
  j["circuits"] = Json::array();
  j["circuits"].push_back(detail::circuit_to_json(d.qudit));
  for (const auto& q : d.qubits) j["circuits"].push_back(detail::circuit_to_json(q));
  j["couplings_ghz"] = d.couplings;
  if (!d.qubit_couplings.empty()) {
    j["qubit_couplings"] = Json::array();
    for (const auto& qc : d.qubit_couplings) {
      j["qubit_couplings"].push_back({{"first", qc.first}, {"second", qc.second}, {"g_ghz", qc.g}});
    }
  }
  return j;
}

}  // namespace mbsyn
