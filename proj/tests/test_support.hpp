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

// Shared fixtures for the unit tests: reference devices and an independent
// Kronecker product used as an oracle for operator embedding.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mbsyn/device.hpp"

namespace mbsyn::testing {

inline DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return out;
}

inline CircuitSpec circuit(std::string name, int levels, double f, double alpha = 0.0) {
  CircuitSpec c;
  c.name = std::move(name);
  c.levels = levels;
  c.base_freq = f;
  c.anharmonicity = alpha;
  return c;
}

/// Noiseless star device: 5-level qudit at 5.0 GHz / -0.25 GHz and one
/// two-level qubit per frequency.
inline DeviceSpec star_device(const std::vector<double>& qubit_freqs, double g = 0.023, int qudit_levels = 5) {
  DeviceSpec d;
  d.qudit = circuit("Q0", qudit_levels, 5.0, -0.25);
  for (std::size_t j = 0; j < qubit_freqs.size(); ++j) {
    d.qubits.push_back(circuit("Q" + std::to_string(j + 1), 2, qubit_freqs[j]));
    d.couplings.push_back(g);
  }
  return d;
}

/// Frequencies found by the planner with its default settings for m = 4,
/// rounded; used as a ready-made resonant layout.
inline DeviceSpec four_body_device(double g = 0.023) { return star_device({4.7, 4.85, 4.7}, g); }

/// A three-body layout with the bright pair resonant: 4.6 + 5.15 = 5.0 + 4.75.
inline DeviceSpec three_body_device(double g = 0.023) { return star_device({4.6, 5.15}, g); }

}  // namespace mbsyn::testing
