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

// The measurement protocols: Rabi scan, noise-averaged Rabi scan,
// Ramsey-style many-body interferometer and GHZ fidelity.
//
// Every protocol starts from |0, 1...1> (ideal pi pulses on the qubits) and
// then biases into the interaction point given by `device`. In the dressed
// frame the prepared state is the adiabatic continuation of |0, 1...1> at the
// first bias point, and populations are read in the eigenbasis of whichever
// segment was running.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "mbsyn/device.hpp"
#include "mbsyn/dynamics.hpp"
#include "mbsyn/effective.hpp"
#include "mbsyn/errors.hpp"
#include "mbsyn/fit.hpp"
#include "mbsyn/parallel.hpp"
#include "mbsyn/rng.hpp"

namespace mbsyn {

struct ExperimentOptions {
  EvolutionMode mode = EvolutionMode::Pure;
  double dt = 0.01;  // ns
  ReadoutFrame frame = ReadoutFrame::Dressed;
  bool check_positivity = false;
  unsigned threads = 0;  // 0: hardware concurrency
};

/// Time at which |0,1..1> has evolved into the equal superposition:
/// pi / (4 * 2 pi lambda), in ns for lambda in GHz.
inline double ghz_time(double lambda) { return 1.0 / (8.0 * lambda); }

/// Full-transfer Rabi period 1 / (2 lambda), ns.
inline double rabi_period(double lambda) { return 1.0 / (2.0 * lambda); }

inline ScheduleOptions schedule_options(const DeviceSpec& device, const ExperimentOptions& opt) {
  const BrightPair pair = bright_pair(device.bodies());
  ScheduleOptions s;
  s.mode = opt.mode;
  s.dt = opt.dt;
  s.frame = opt.frame;
  s.tracked = {pair.collective, pair.excited};
  s.check_positivity = opt.check_positivity;
  return s;
}

/// |0, 1...1> prepared at the bias point `detuning`.
inline QuantumState prepare_collective(const DeviceSpec& device, const DetuningVector& detuning, ReadoutFrame frame) {
  const BrightPair pair = bright_pair(device.bodies());
  const BasisPtr basis = device.basis();
  if (frame == ReadoutFrame::Bare) return QuantumState::basis_state(basis, pair.collective);
  const auto kets = dressed_kets(device, detuning, {pair.collective, pair.excited});
  return QuantumState::pure(basis, kets.front());
}

/// max - min of a series restricted to t in [t_from, t_to].
inline double window_contrast(const std::vector<double>& t, const std::vector<double>& y, double t_from,
                              double t_to = std::numeric_limits<double>::infinity()) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_from - 1e-9 || t[i] > t_to + 1e-9) continue;
    lo = std::min(lo, y[i]);
    hi = std::max(hi, y[i]);
  }
  return hi >= lo ? hi - lo : 0.0;
}

struct RabiResult {
  TraceResult trace;
  BrightPair pair;
  double contrast = 0.0;  // max - min of the |m-1,0..0> population
};

inline RabiResult rabi_scan(const DeviceSpec& device, double tau_max, double tau_step, const ExperimentOptions& opt,
                            const DetuningVector& detuning = {}) {
  if (!(tau_max > 0.0) || !(tau_step > 0.0)) throw std::invalid_argument("rabi_scan: tau grid must be positive");
  RabiResult out;
  out.pair = bright_pair(device.bodies());
  const QuantumState s0 = prepare_collective(device, detuning, opt.frame);
  out.trace = run_schedule(device, {{tau_max, detuning, "interaction", tau_step}}, s0, schedule_options(device, opt));
  const auto& p = out.trace.series(out.pair.excited);
  out.contrast = window_contrast(out.trace.times, p, 0.0);
  return out;
}

struct NoiseEnsembleSpec {
  std::vector<double> delta_max;  // GHz, per circuit (qudit first); one entry applies to all
  int ensemble_size = 20;
  std::uint64_t seed = 0;
};

struct NoiseResult {
  TraceResult mean;                          // ensemble-averaged populations
  std::vector<std::vector<double>> stddev;   // [label][sample]
  std::vector<std::vector<double>> offsets;  // [member][circuit], raw draws in GHz
  BrightPair pair;
  double nominal_period = 0.0;               // ns
  double contrast_after_period = 0.0;        // averaged |0,1..1> contrast over [T, 2T]
};

/// Member k draws its offsets from its own stream (seed, k), circuit 0 first,
/// so devices with different qubit counts share their leading draws.
inline std::vector<double> draw_offsets(const NoiseEnsembleSpec& spec, std::size_t circuits, int member) {
  Rng rng(spec.seed, static_cast<std::uint64_t>(member));
  std::vector<double> d(circuits);
  for (std::size_t c = 0; c < circuits; ++c) {
    const double dm = spec.delta_max.size() == 1 ? spec.delta_max[0] : spec.delta_max.at(c);
    d[c] = rng.uniform(-dm, dm);
  }
  return d;
}

/// The qudit draw is its total shift across the bright transition
/// 0 -> m-1, spread evenly over the ladder.
inline DetuningVector noise_detuning(const DeviceSpec& device, const std::vector<double>& offsets) {
  return bias_offsets(device, offsets.front(), std::vector<double>(offsets.begin() + 1, offsets.end()));
}

inline NoiseResult noise_scan(const DeviceSpec& device, double tau_max, double tau_step, const NoiseEnsembleSpec& spec,
                              const ExperimentOptions& opt, double nominal_period) {
  if (spec.ensemble_size < 1) throw std::invalid_argument("noise_scan: ensemble_size must be >= 1");
  if (spec.delta_max.size() != 1 && spec.delta_max.size() != device.num_circuits()) {
    throw std::invalid_argument("noise_scan: delta_max needs one entry or one per circuit");
  }
  for (double d : spec.delta_max) {
    if (!(d >= 0.0)) throw std::invalid_argument("noise_scan: delta_max must be >= 0");
  }
  const auto k = static_cast<std::size_t>(spec.ensemble_size);
  NoiseResult out;
  out.pair = bright_pair(device.bodies());
  out.nominal_period = nominal_period;
  for (int i = 0; i < spec.ensemble_size; ++i) out.offsets.push_back(draw_offsets(spec, device.num_circuits(), i));

  std::vector<TraceResult> runs(k);
  parallel_for(k, opt.threads, [&](std::size_t i) {
    runs[i] = rabi_scan(device, tau_max, tau_step, opt, noise_detuning(device, out.offsets[i])).trace;
  });

  out.mean = runs.front();
  out.mean.final_state.reset();
  out.stddev.assign(out.mean.labels.size(), std::vector<double>(out.mean.times.size(), 0.0));
  for (std::size_t l = 0; l < out.mean.labels.size(); ++l) {
    for (std::size_t s = 0; s < out.mean.times.size(); ++s) {
      // Welford update: identical members give their exact value and zero spread.
      double mean = 0.0;
      double m2 = 0.0;
      double n = 0.0;
      for (const auto& r : runs) {
        const double x = r.populations[l][s];
        n += 1.0;
        const double delta = x - mean;
        mean += delta / n;
        m2 += delta * (x - mean);
      }
      out.mean.populations[l][s] = mean;
      out.stddev[l][s] = std::sqrt(std::max(0.0, m2 / n));
    }
  }
  for (const auto& r : runs) {
    auto& d = out.mean.diagnostics;
    d.max_norm_drift = std::max(d.max_norm_drift, r.diagnostics.max_norm_drift);
    d.max_trace_drift = std::max(d.max_trace_drift, r.diagnostics.max_trace_drift);
    d.max_hermiticity_error = std::max(d.max_hermiticity_error, r.diagnostics.max_hermiticity_error);
    d.min_eigenvalue = std::min(d.min_eigenvalue, r.diagnostics.min_eigenvalue);
    d.max_excitation_drift = std::max(d.max_excitation_drift, r.diagnostics.max_excitation_drift);
  }
  out.mean.diagnostics.steps = 0;
  for (const auto& r : runs) out.mean.diagnostics.steps += r.diagnostics.steps;
  out.contrast_after_period = window_contrast(out.mean.times, out.mean.series(out.pair.collective), nominal_period,
                                              2.0 * nominal_period);
  return out;
}

struct InterferometerSpec {
  double tau_i = 0.0;        // ns, each interaction window
  double delta_b = 0.005;    // GHz
  double tau_b_max = 0.0;    // ns
  double tau_b_step = 0.0;   // ns
};

struct InterferometerResult {
  TraceResult trace;  // time axis is tau_B
  BrightPair pair;
  CosineFit fit_collective;
  CosineFit fit_excited;
  double frequency = 0.0;  // GHz
  double rho_off = 0.0;    // amplitude of the |0,1..1> fringe
};

/// The bias that shifts the qudit's 0 -> m-1 transition by -delta_b and every
/// qubit by +delta_b, so the two branches of the superposition dephase at
/// m * delta_b.
inline DetuningVector interferometer_bias(const DeviceSpec& device, double delta_b) {
  return bias_offsets(device, -delta_b, std::vector<double>(device.qubits.size(), delta_b));
}

inline InterferometerResult interferometer_scan(const DeviceSpec& device, const InterferometerSpec& spec,
                                                const ExperimentOptions& opt, const FitOptions& fit = {}) {
  if (!(spec.tau_i > 0.0)) throw std::invalid_argument("interferometer: tau_i must be > 0");
  if (spec.delta_b == 0.0) throw std::invalid_argument("interferometer: delta_b must be nonzero");
  if (!(spec.tau_b_max > 0.0) || !(spec.tau_b_step > 0.0)) {
    throw std::invalid_argument("interferometer: tau_B grid must be positive");
  }
  InterferometerResult out;
  out.pair = bright_pair(device.bodies());
  const ScheduleOptions sched = schedule_options(device, opt);
  const DetuningVector idle;
  const DetuningVector bias = interferometer_bias(device, spec.delta_b);

  const QuantumState s0 = prepare_collective(device, idle, opt.frame);
  const auto n = static_cast<std::size_t>(std::floor(spec.tau_b_max / spec.tau_b_step + 1e-9)) + 1;

  // States after the first window and tau_B of free phase, built by chaining.
  std::vector<QuantumState> waiting;
  waiting.reserve(n);
  TraceResult first = run_schedule(device, {{spec.tau_i, idle, "interaction"}}, s0, sched);
  waiting.push_back(*first.final_state);
  for (std::size_t i = 1; i < n; ++i) {
    TraceResult z = run_schedule(device, {{spec.tau_b_step, bias, "phase"}}, waiting.back(), sched);
    waiting.push_back(*z.final_state);
  }
  std::vector<TraceResult> closes(n);
  parallel_for(n, opt.threads, [&](std::size_t i) {
    closes[i] = run_schedule(device, {{spec.tau_i, idle, "interaction"}}, waiting[i], sched);
  });

  out.trace.labels = sched.tracked;
  out.trace.populations.assign(sched.tracked.size(), {});
  out.trace.diagnostics = first.diagnostics;
  for (std::size_t i = 0; i < n; ++i) {
    out.trace.times.push_back(static_cast<double>(i) * spec.tau_b_step);
    for (std::size_t l = 0; l < sched.tracked.size(); ++l) {
      out.trace.populations[l].push_back(closes[i].populations[l].back());
    }
    out.trace.total_population.push_back(closes[i].total_population.back());
    auto& d = out.trace.diagnostics;
    const auto& c = closes[i].diagnostics;
    d.max_norm_drift = std::max(d.max_norm_drift, c.max_norm_drift);
    d.max_trace_drift = std::max(d.max_trace_drift, c.max_trace_drift);
    d.max_hermiticity_error = std::max(d.max_hermiticity_error, c.max_hermiticity_error);
    d.min_eigenvalue = std::min(d.min_eigenvalue, c.min_eigenvalue);
    d.max_excitation_drift = std::max(d.max_excitation_drift, c.max_excitation_drift);
    d.steps += c.steps;
  }
  out.trace.final_state = closes.back().final_state;
  out.trace.tracked_density = closes.back().tracked_density;

  const auto fits = fit_cosine_joint(out.trace.times,
                                     {out.trace.series(out.pair.collective), out.trace.series(out.pair.excited)}, fit);
  out.fit_collective = fits[0];
  out.fit_excited = fits[1];
  out.frequency = fits[0].frequency;
  out.rho_off = fits[0].amplitude;
  return out;
}

struct GhzEstimate {
  double tau = 0.0;              // ns
  double p_collective = 0.0;     // |0,1..1>
  double p_excited = 0.0;        // |m-1,0..0>
  double rho_off_abs = 0.0;      // read from the density matrix
  double phase = 0.0;            // arg <m-1,0..0|rho|0,1..1>, rad
  double fidelity = 0.0;
  double rho_off_interferometric = 0.0;
  double fidelity_interferometric = 0.0;
  InterferometerResult interferometer;
};

/// Both estimates: the coherence read directly from the simulated state, and
/// the fringe amplitude of an interferometer whose windows equal tau.
inline GhzEstimate ghz_estimate(const DeviceSpec& device, double tau, InterferometerSpec interf,
                                const ExperimentOptions& opt, const FitOptions& fit = {}) {
  if (!(tau > 0.0)) throw std::invalid_argument("ghz_estimate: tau must be > 0");
  GhzEstimate out;
  out.tau = tau;
  const QuantumState s0 = prepare_collective(device, {}, opt.frame);
  const TraceResult r = run_schedule(device, {{tau, {}, "interaction"}}, s0, schedule_options(device, opt));
  const DenseMatrix& rho = r.tracked_density;
  out.p_collective = rho(0, 0).real();
  out.p_excited = rho(1, 1).real();
  out.rho_off_abs = std::abs(rho(1, 0));
  out.phase = std::arg(rho(1, 0));
  out.fidelity = 0.5 * (out.p_collective + out.p_excited) + out.rho_off_abs;

  interf.tau_i = tau;
  out.interferometer = interferometer_scan(device, interf, opt, fit);
  out.rho_off_interferometric = out.interferometer.rho_off;
  out.fidelity_interferometric = 0.5 * (out.p_collective + out.p_excited) + out.rho_off_interferometric;
  return out;
}

}  // namespace mbsyn
