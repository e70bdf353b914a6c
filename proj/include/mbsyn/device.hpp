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

// Star-topology device: a multilevel qudit (circuit 0) exchange-coupled to
// m-1 surrounding transmons, plus the Hamiltonian and Lindblad operators
// built from it.
//
// Units: frequencies in GHz (ordinary, not angular), times in ns. Operators
// returned from this header are in angular units, rad/ns = 2*pi*GHz.

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbsyn/operators.hpp"

namespace mbsyn {

// Empirical ratio between pure dephasing time and Ramsey T2*.
inline constexpr double kDephasingPerT2Star = 6.0;

struct CircuitSpec {
  std::string name;
  int levels = 2;
  double base_freq = 5.0;      // 0->1 transition, GHz
  double anharmonicity = 0.0;  // GHz; transition k is base_freq + (k-1)*anharmonicity
  std::optional<double> t1;       // ns, absent = no relaxation
  std::optional<double> t2_star;  // ns, absent = no dephasing
};

/// Frequency of the |k-1> -> |k> transition, 1 <= k < levels.
inline double transition_frequency(const CircuitSpec& circuit, int k) {
  if (k < 1 || k >= circuit.levels) {
    throw std::out_of_range("transition_frequency: k=" + std::to_string(k) +
                            " outside [1, " + std::to_string(circuit.levels - 1) + "]");
  }
  return circuit.base_freq + (k - 1) * circuit.anharmonicity;
}

/// Energy of level n with every transition shifted by `offset` (GHz).
inline double level_energy(const CircuitSpec& circuit, int n, double offset = 0.0) {
  double e = 0.0;
  for (int k = 1; k <= n; ++k) e += transition_frequency(circuit, k) + offset;
  return e;
}

inline std::optional<double> pure_dephasing_time(const CircuitSpec& circuit) {
  if (!circuit.t2_star) return std::nullopt;
  return kDephasingPerT2Star * *circuit.t2_star;
}

struct QubitCoupling {
  std::size_t first = 1;   // circuit indices, both >= 1
  std::size_t second = 2;
  double g = 0.0;          // GHz
};

struct DeviceSpec {
  CircuitSpec qudit;
  std::vector<CircuitSpec> qubits;
  std::vector<double> couplings;               // g_j, GHz, qudit <-> qubit j
  std::vector<QubitCoupling> qubit_couplings;  // zero unless configured

  std::size_t num_circuits() const noexcept { return qubits.size() + 1; }
  int bodies() const noexcept { return static_cast<int>(qubits.size()) + 1; }

  const CircuitSpec& circuit(std::size_t i) const { return i == 0 ? qudit : qubits.at(i - 1); }
  CircuitSpec& circuit(std::size_t i) { return i == 0 ? qudit : qubits.at(i - 1); }

  std::vector<int> dims() const {
    std::vector<int> d{qudit.levels};
    for (const auto& q : qubits) d.push_back(q.levels);
    return d;
  }

  BasisPtr basis() const { return make_basis(dims()); }

  /// Violated invariants, one "path: message" entry each; empty when valid.
  std::vector<std::string> validate() const {
    std::vector<std::string> issues;
    const auto check_circuit = [&](const CircuitSpec& c, const std::string& path) {
      if (c.levels < 2) issues.push_back(path + ".levels: must be >= 2");
      if (c.levels > 10) issues.push_back(path + ".levels: at most 10 levels supported");
      if (!std::isfinite(c.base_freq) || c.base_freq <= 0.0) {
        issues.push_back(path + ".base_freq_ghz: must be positive");
      }
      if (c.t1 && !(*c.t1 > 0.0)) issues.push_back(path + ".t1_ns: must be > 0");
      if (c.t2_star && !(*c.t2_star > 0.0)) issues.push_back(path + ".t2_star_ns: must be > 0");
      if (c.t1 && c.t2_star && *c.t2_star > 2.0 * *c.t1) {
        issues.push_back(path + ".t2_star_ns: T2* must not exceed 2*T1");
      }
    };
    check_circuit(qudit, "circuits[0]");
    for (std::size_t j = 0; j < qubits.size(); ++j) {
      check_circuit(qubits[j], "circuits[" + std::to_string(j + 1) + "]");
    }
    if (qubits.empty()) issues.push_back("circuits: need at least one qubit besides the qudit");
    if (qudit.levels < static_cast<int>(qubits.size()) + 1) {
      issues.push_back("circuits[0].levels: qudit needs at least " + std::to_string(qubits.size() + 1) +
                       " levels to hold the bright state");
    }
    if (couplings.size() != qubits.size()) {
      issues.push_back("couplings_ghz: has " + std::to_string(couplings.size()) +
                       " entries for " + std::to_string(qubits.size()) + " qubits");
    }
    for (std::size_t j = 0; j < couplings.size(); ++j) {
      if (!(couplings[j] > 0.0)) {
        issues.push_back("couplings_ghz[" + std::to_string(j) + "]: must be > 0");
      }
    }
    for (std::size_t k = 0; k < qubit_couplings.size(); ++k) {
      const auto& qc = qubit_couplings[k];
      const std::string path = "qubit_couplings[" + std::to_string(k) + "]";
      if (qc.first < 1 || qc.second < 1 || qc.first > qubits.size() ||
          qc.second > qubits.size() || qc.first == qc.second) {
        issues.push_back(path + ": must join two distinct qubits (circuit indices 1.." +
                         std::to_string(qubits.size()) + ")");
      }
      if (!std::isfinite(qc.g)) issues.push_back(path + ".g_ghz: must be finite");
    }
    return issues;
  }
};

/// Per-circuit additive offsets to base_freq (GHz) during a control segment.
struct DetuningVector {
  std::vector<double> offsets;

  static DetuningVector zeros(std::size_t circuits) {
    return DetuningVector{std::vector<double>(circuits, 0.0)};
  }
  bool is_zero() const {
    for (double d : offsets) {
      if (d != 0.0) return false;
    }
    return true;
  }
};

/// Offsets for a bias that moves the qudit's 0 -> (m-1) transition by
/// `qudit_total_shift` (spread evenly over its m-1 rungs) and each qubit by
/// the matching entry of `qubit_shifts`.
inline DetuningVector bias_offsets(const DeviceSpec& device, double qudit_total_shift,
                                   const std::vector<double>& qubit_shifts) {
  if (qubit_shifts.size() != device.qubits.size()) {
    throw std::invalid_argument("bias_offsets: one shift per qubit required");
  }
  DetuningVector d;
  d.offsets.push_back(qudit_total_shift / static_cast<double>(device.qubits.size()));
  d.offsets.insert(d.offsets.end(), qubit_shifts.begin(), qubit_shifts.end());
  return d;
}

/// Applies offsets to base frequencies, returning the shifted device.
inline DeviceSpec with_detuning(DeviceSpec device, const DetuningVector& detuning) {
  if (detuning.offsets.empty()) return device;
  if (detuning.offsets.size() != device.num_circuits()) {
    throw std::invalid_argument("with_detuning: detuning length does not match device");
  }
  for (std::size_t c = 0; c < device.num_circuits(); ++c) {
    device.circuit(c).base_freq += detuning.offsets[c];
  }
  return device;
}

/// Rotating-wave Hamiltonian of the star device, angular units.
///
/// Diagonal: cumulative level energies sum_{k<=n}(nu_k + delta). Off-diagonal:
/// 2*pi*g_j (a_0^dag a_j + a_0 a_j^dag) with bosonic sqrt(n) ladder weights, which
/// reduces to sqrt(n) g_j (S_n^+ sigma_j^- + h.c.) for two-level qubits.
inline Operator build_hamiltonian(const DeviceSpec& device, const DetuningVector& detuning = {}) {
  if (!detuning.offsets.empty() && detuning.offsets.size() != device.num_circuits()) {
    throw std::invalid_argument("build_hamiltonian: detuning length does not match device");
  }
  if (device.couplings.size() != device.qubits.size()) {
    throw std::invalid_argument("build_hamiltonian: one coupling per qubit required");
  }
  const BasisPtr basis = device.basis();
  const std::size_t n = basis->total_dim();

  SparseMatrix diag(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  diag.reserve(Eigen::VectorXi::Constant(static_cast<Eigen::Index>(n), 1));
  for (std::size_t i = 0; i < n; ++i) {
    double e = 0.0;
    for (std::size_t c = 0; c < device.num_circuits(); ++c) {
      const double off = detuning.offsets.empty() ? 0.0 : detuning.offsets[c];
      e += level_energy(device.circuit(c), basis->level(i, c), off);
    }
    diag.insert(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = kTwoPi * e;
  }
  Operator h(basis, std::move(diag));

  const auto exchange = [&](std::size_t a, std::size_t b, double g) {
    const LadderOps la = ladder_ops(basis->dims()[a]);
    const LadderOps lb = ladder_ops(basis->dims()[b]);
    const Operator hop = embed_local(basis, a, la.bosonic_raise) * embed_local(basis, b, lb.bosonic_lower);
    h += Complex(kTwoPi * g) * (hop + hop.dagger());
  };
  for (std::size_t j = 0; j < device.qubits.size(); ++j) exchange(0, j + 1, device.couplings[j]);
  for (const auto& qc : device.qubit_couplings) {
    if (qc.g != 0.0) exchange(qc.first, qc.second, qc.g);
  }
  return h;
}

/// Lindblad operators, per circuit: sqrt(1/T1) a (bosonic lowering) and
/// sqrt(2/T_phi) n with T_phi = 6 T2*. Absent times contribute nothing.
inline std::vector<Operator> collapse_operators(const DeviceSpec& device) {
  const BasisPtr basis = device.basis();
  std::vector<Operator> out;
  for (std::size_t c = 0; c < device.num_circuits(); ++c) {
    const CircuitSpec& spec = device.circuit(c);
    if (spec.t1) {
      const LadderOps l = ladder_ops(spec.levels);
      out.push_back(Complex(std::sqrt(1.0 / *spec.t1)) * embed_local(basis, c, l.bosonic_lower));
    }
    if (const auto tphi = pure_dephasing_time(spec)) {
      out.push_back(Complex(std::sqrt(2.0 / *tphi)) * embed_local(basis, c, number_op(spec.levels)));
    }
  }
  return out;
}

/// Mean qudit transition frequency over the cascade used by an m-body process.
inline double cascade_mean_frequency(const DeviceSpec& device) {
  const int rungs = static_cast<int>(device.qubits.size());
  double s = 0.0;
  for (int k = 1; k <= rungs; ++k) s += transition_frequency(device.qudit, k);
  return s / rungs;
}

}  // namespace mbsyn
