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

// The effective m-body coupling lambda between the bright pair
// |m-1, 0...0> and |0, 1...1>, three ways: exact splitting of the
// excitation sector, a cosine fit to simulated Rabi dynamics, and the
// lowest-order perturbative path sum.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mbsyn/device.hpp"
#include "mbsyn/dynamics.hpp"
#include "mbsyn/errors.hpp"
#include "mbsyn/fit.hpp"
#include "mbsyn/operators.hpp"

namespace mbsyn {

enum class LambdaMethod { Splitting, RabiFit, Perturbative };

inline const char* to_string(LambdaMethod m) {
  switch (m) {
    case LambdaMethod::Splitting: return "splitting";
    case LambdaMethod::RabiFit: return "rabi-fit";
    case LambdaMethod::Perturbative: return "perturbative";
  }
  return "?";
}

struct BrightPair {
  std::string collective;  // |0, 1...1>, the starting state
  std::string excited;     // |m-1, 0...0>
};

inline BrightPair bright_pair(int m) {
  if (m < 2 || m > 10) throw std::invalid_argument("bright_pair: m must be in 2..10");
  return {"0" + std::string(static_cast<std::size_t>(m - 1), '1'),
          std::to_string(m - 1) + std::string(static_cast<std::size_t>(m - 1), '0')};
}

struct EffectiveCoupling {
  int m = 0;
  double lambda = 0.0;  // GHz (lambda / 2 pi)
  LambdaMethod method = LambdaMethod::Splitting;
  BrightPair pair;
  std::array<double, 2> overlaps{};  // splitting: weight of each hybrid on the pair
  double fit_rms = 0.0;              // rabi-fit only
  bool perturbative_regime = true;   // perturbative only
  std::string warning;
};

/// The bright pair mixes with spectator states; carries the diagnostic.
class HybridizationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// lambda as half the gap between the two sector eigenstates with the most
/// weight on the bright pair.
inline EffectiveCoupling lambda_from_splitting(const DeviceSpec& device, const DetuningVector& detuning = {},
                                               double min_overlap = 0.8) {
  if (auto issues = device.validate(); !issues.empty()) throw ConfigError(issues);
  const int m = device.bodies();
  const BrightPair pair = bright_pair(m);
  const BasisPtr basis = device.basis();
  const Subspace sector = Subspace::sector(basis, m - 1);
  const DenseMatrix h(sector.restrict(build_hamiltonian(device, detuning).matrix()));
  const Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h);
  const auto a = static_cast<Eigen::Index>(*sector.position(basis->index_of(pair.collective)));
  const auto b = static_cast<Eigen::Index>(*sector.position(basis->index_of(pair.excited)));
  const DenseMatrix& v = es.eigenvectors();

  std::vector<std::pair<double, Eigen::Index>> weight;
  for (Eigen::Index k = 0; k < v.cols(); ++k) weight.emplace_back(std::norm(v(a, k)) + std::norm(v(b, k)), k);
  std::stable_sort(weight.begin(), weight.end(), [](const auto& x, const auto& y) { return x.first > y.first; });

  EffectiveCoupling out;
  out.m = m;
  out.method = LambdaMethod::Splitting;
  out.pair = pair;
  out.overlaps = {weight[0].first, weight[1].first};
  for (int k = 0; k < 2; ++k) {
    if (weight[static_cast<std::size_t>(k)].first >= min_overlap) continue;
    const Eigen::Index col = weight[static_cast<std::size_t>(k)].second;
    std::ostringstream msg;
    msg << "hybridized with spectators: eigenvector " << col << " (E/2pi = " << es.eigenvalues()(col) / kTwoPi
        << " GHz) has only " << weight[static_cast<std::size_t>(k)].first << " weight on the bright pair; largest components:";
    std::vector<std::pair<double, Eigen::Index>> comp;
    for (Eigen::Index r = 0; r < v.rows(); ++r) comp.emplace_back(std::norm(v(r, col)), r);
    std::sort(comp.begin(), comp.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    for (std::size_t i = 0; i < std::min<std::size_t>(3, comp.size()); ++i) {
      msg << ' ' << basis->label(sector.indices()[static_cast<std::size_t>(comp[i].second)]) << '=' << comp[i].first;
    }
    throw HybridizationError(msg.str());
  }
  out.lambda = std::abs(es.eigenvalues()(weight[0].second) - es.eigenvalues()(weight[1].second)) / (2.0 * kTwoPi);
  return out;
}

struct ResonanceCalibration {
  double qubit_offset = 0.0;  // GHz, added to every qubit's base frequency
  EffectiveCoupling coupling;
  DeviceSpec device;          // with the offset applied
};

/// Dispersive shifts move the bright pair off the bare resonance. Sweep a
/// common qubit-frequency offset and keep the point where the pair's
/// splitting is smallest, i.e. where the two bright states are degenerate.
inline ResonanceCalibration calibrate_resonance(const DeviceSpec& device, double span = 0.05, int points = 201,
                                                int rounds = 4) {
  if (points < 3 || rounds < 1 || !(span > 0.0)) throw std::invalid_argument("calibrate_resonance: bad sweep");
  double center = 0.0;
  std::optional<std::pair<double, EffectiveCoupling>> best;
  for (int r = 0; r < rounds; ++r) {
    for (int i = 0; i < points; ++i) {
      const double d = center - span + 2.0 * span * i / (points - 1);
      DeviceSpec trial = device;
      for (auto& q : trial.qubits) q.base_freq += d;
      try {
        EffectiveCoupling c = lambda_from_splitting(trial);
        if (!best || c.lambda < best->second.lambda) best.emplace(d, std::move(c));
      } catch (const HybridizationError&) {
        // spectator crossing at this offset; not a candidate
      }
    }
    if (!best) break;
    center = best->first;
    span = 8.0 * span / (points - 1);
  }
  if (!best) throw HybridizationError("calibrate_resonance: no offset keeps the bright pair two-level-like");
  ResonanceCalibration out;
  out.qubit_offset = best->first;
  out.coupling = best->second;
  out.device = device;
  for (auto& q : out.device.qubits) q.base_freq += best->first;
  return out;
}

/// lambda = f / 2 from a joint cosine fit to both bright-state series
/// (a full transfer takes half a period of the 2*lambda Rabi frequency).
inline EffectiveCoupling lambda_from_rabi_fit(const TraceResult& trace, const BrightPair& pair,
                                              const FitOptions& opt = {}) {
  const auto fits = fit_cosine_joint(trace.times, {trace.series(pair.collective), trace.series(pair.excited)}, opt);
  EffectiveCoupling out;
  out.m = static_cast<int>(pair.collective.size());
  out.method = LambdaMethod::RabiFit;
  out.pair = pair;
  out.lambda = fits.front().frequency / 2.0;
  out.fit_rms = std::max(fits[0].rms, fits[1].rms);
  return out;
}

struct SpuriousProcess {
  double detuning = std::numeric_limits<double>::infinity();  // GHz
  std::vector<std::size_t> qubits;                            // 0-based qubit indices
  std::vector<int> transitions;                               // qudit transitions k (1-based)
};

namespace detail {

inline void for_each_combination(std::size_t n, std::size_t r, const auto& fn) {
  std::vector<std::size_t> idx(r);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (r > n) return;
  while (true) {
    fn(idx);
    std::size_t i = r;
    while (i > 0 && idx[i - 1] == n - r + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < r; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace detail

/// Closest lower-order resonance: every r-photon combination
/// |sum_J omega - sum_K nu| with |J| = |K| = r, for r = 1 .. min(3, m-2).
/// The full (m-1)-photon process is the wanted one and is excluded.
inline SpuriousProcess closest_spurious(const std::vector<double>& qubit_freqs, const std::vector<double>& transitions) {
  SpuriousProcess best;
  const std::size_t q = qubit_freqs.size();
  const std::size_t max_order = std::min<std::size_t>(3, q >= 1 ? q - 1 : 0);
  for (std::size_t r = 1; r <= max_order; ++r) {
    detail::for_each_combination(q, r, [&](const std::vector<std::size_t>& jj) {
      double w = 0.0;
      for (auto j : jj) w += qubit_freqs[j];
      detail::for_each_combination(transitions.size(), r, [&](const std::vector<std::size_t>& kk) {
        double nu = 0.0;
        for (auto k : kk) nu += transitions[k];
        const double d = std::abs(w - nu);
        if (d < best.detuning) {
          best.detuning = d;
          best.qubits = jj;
          best.transitions.clear();
          for (auto k : kk) best.transitions.push_back(static_cast<int>(k) + 1);
        }
      });
    });
  }
  return best;
}

inline std::vector<double> cascade_transitions(const DeviceSpec& device) {
  std::vector<double> nu;
  for (int k = 1; k <= static_cast<int>(device.qubits.size()); ++k) nu.push_back(transition_frequency(device.qudit, k));
  return nu;
}

inline std::vector<double> qubit_frequencies(const DeviceSpec& device) {
  std::vector<double> w;
  for (const auto& q : device.qubits) w.push_back(q.base_freq);
  return w;
}

inline SpuriousProcess closest_spurious(const DeviceSpec& device) {
  return closest_spurious(qubit_frequencies(device), cascade_transitions(device));
}

/// Signed lowest-order amplitude. Each step of the cascade raises the qudit
/// by one level, so a path is fixed by the order in which the qubits give up
/// their photons; step k carries sqrt(k) g_j and the k-th intermediate state
/// sits sum_{i<=k} (omega_{j_i} - nu_i) below the initial energy.
inline double perturbative_path_sum(const std::vector<double>& qubit_freqs, const std::vector<double>& transitions,
                                    const std::vector<double>& g) {
  const std::size_t q = qubit_freqs.size();
  std::vector<std::size_t> order(q);
  std::iota(order.begin(), order.end(), std::size_t{0});
  double total = 0.0;
  do {
    double amp = 1.0;
    double defect = 0.0;
    for (std::size_t k = 0; k < q; ++k) {
      amp *= std::sqrt(static_cast<double>(k + 1)) * g[order[k]];
      if (k + 1 < q) {
        defect += qubit_freqs[order[k]] - transitions[k];
        amp /= defect;
      }
    }
    total += amp;
  } while (std::next_permutation(order.begin(), order.end()));
  return total;
}

inline EffectiveCoupling lambda_perturbative(const DeviceSpec& device) {
  if (auto issues = device.validate(); !issues.empty()) throw ConfigError(issues);
  EffectiveCoupling out;
  out.m = device.bodies();
  out.method = LambdaMethod::Perturbative;
  out.pair = bright_pair(out.m);
  out.lambda = std::abs(perturbative_path_sum(qubit_frequencies(device), cascade_transitions(device), device.couplings));
  const double g_max = *std::max_element(device.couplings.begin(), device.couplings.end());
  const SpuriousProcess sp = closest_spurious(device);
  out.perturbative_regime = sp.detuning >= 10.0 * g_max;
  if (!out.perturbative_regime) {
    std::ostringstream msg;
    msg << "outside the perturbative regime: closest spurious resonance " << sp.detuning << " GHz < 10 g = "
        << 10.0 * g_max << " GHz";
    out.warning = msg.str();
  }
  return out;
}

}  // namespace mbsyn
