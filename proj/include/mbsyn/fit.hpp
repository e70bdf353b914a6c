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

// Single-frequency cosine fits, y(t) = A cos(2 pi f t + phi) + C.
//
// For a fixed f the model is linear in (A cos phi, -A sin phi, C), so we scan
// f on a uniform grid with a closed-form least-squares solve at each point,
// keep the best (lowest f on ties), then polish f with a golden-section
// search inside the winning grid cell. No initial guess is needed.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mbsyn/errors.hpp"

namespace mbsyn {

struct CosineFit {
  double frequency = 0.0;  // cycles per time unit of the input grid
  double amplitude = 0.0;  // >= 0
  double phase = 0.0;      // rad
  double offset = 0.0;
  double rms = 0.0;        // root-mean-square residual
};

struct FitOptions {
  double min_frequency = 0.0;  // 0: half a cycle over the record
  double max_frequency = 0.0;  // 0: Nyquist of the mean spacing
  int oversample = 20;         // grid points per 1/T
  double max_rms = 0.05;
  double min_periods = 2.0;
  double min_amplitude = 1e-6;
};

namespace detail {

struct LinearCosine {
  std::array<double, 3> coef{};  // cos, sin, const
  double sse = 0.0;
};

inline LinearCosine solve_cosine(std::span<const double> t, std::span<const double> y, double f) {
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d aty = Eigen::Vector3d::Zero();
  const double w = 2.0 * 3.14159265358979323846 * f;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Eigen::Vector3d row(std::cos(w * t[i]), std::sin(w * t[i]), 1.0);
    ata += row * row.transpose();
    aty += row * y[i];
  }
  const Eigen::Vector3d c = ata.ldlt().solve(aty);
  LinearCosine out;
  out.coef = {c(0), c(1), c(2)};
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = c(0) * std::cos(w * t[i]) + c(1) * std::sin(w * t[i]) + c(2) - y[i];
    out.sse += r * r;
  }
  return out;
}

inline double joint_sse(std::span<const double> t, const std::vector<std::vector<double>>& ys, double f) {
  double s = 0.0;
  for (const auto& y : ys) s += solve_cosine(t, y, f).sse;
  return s;
}

}  // namespace detail

/// Fits every series with one shared frequency (amplitudes, phases and
/// offsets are per series). Throws NumericalError when the data are not a
/// clean oscillation.
inline std::vector<CosineFit> fit_cosine_joint(const std::vector<double>& t,
                                               const std::vector<std::vector<double>>& ys,
                                               const FitOptions& opt = {}) {
  if (t.size() < 8) throw NumericalError("cosine fit: need at least 8 samples");
  if (ys.empty()) throw NumericalError("cosine fit: no series");
  for (const auto& y : ys) {
    if (y.size() != t.size()) throw NumericalError("cosine fit: series length differs from time grid");
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (*hi - *lo < opt.min_amplitude) throw NumericalError("cosine fit: trace is constant, no oscillation");
  }
  const double span = t.back() - t.front();
  if (!(span > 0.0)) throw NumericalError("cosine fit: time grid must increase");
  const double f_lo = opt.min_frequency > 0.0 ? opt.min_frequency : 0.5 / span;
  const double f_hi = opt.max_frequency > 0.0 ? opt.max_frequency
                                              : 0.5 * static_cast<double>(t.size() - 1) / span;
  const double df = 1.0 / (span * std::max(1, opt.oversample));

  double best_f = f_lo;
  double best = std::numeric_limits<double>::infinity();
  for (double f = f_lo; f <= f_hi + 1e-15; f += df) {
    const double s = detail::joint_sse(t, ys, f);
    if (s < best) {
      best = s;
      best_f = f;
    }
  }

  // Golden-section polish inside the winning cell.
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = std::max(f_lo, best_f - df);
  double b = std::min(f_hi, best_f + df);
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = detail::joint_sse(t, ys, c);
  double fd = detail::joint_sse(t, ys, d);
  for (int it = 0; it < 80 && b - a > 1e-13 * std::max(1.0, b); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = detail::joint_sse(t, ys, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = detail::joint_sse(t, ys, d);
    }
  }
  const double f_mid = 0.5 * (a + b);
  if (detail::joint_sse(t, ys, f_mid) < best) best_f = f_mid;

  std::vector<CosineFit> out;
  for (const auto& y : ys) {
    const auto lin = detail::solve_cosine(t, y, best_f);
    CosineFit fit;
    fit.frequency = best_f;
    fit.amplitude = std::hypot(lin.coef[0], lin.coef[1]);
    fit.phase = std::atan2(-lin.coef[1], lin.coef[0]);
    fit.offset = lin.coef[2];
    fit.rms = std::sqrt(lin.sse / static_cast<double>(t.size()));
    if (fit.rms > opt.max_rms) {
      throw NumericalError("not two-level dynamics: cosine fit residual " + std::to_string(fit.rms) +
                           " RMS exceeds " + std::to_string(opt.max_rms));
    }
    if (fit.amplitude < opt.min_amplitude) throw NumericalError("cosine fit: no oscillation");
    out.push_back(fit);
  }
  if (best_f * span < opt.min_periods - 1e-9) {
    throw NumericalError("cosine fit: record spans " + std::to_string(best_f * span) + " periods, need " +
                         std::to_string(opt.min_periods));
  }
  return out;
}

inline CosineFit fit_cosine(const std::vector<double>& t, const std::vector<double>& y, const FitOptions& opt = {}) {
  return fit_cosine_joint(t, {y}, opt).front();
}

}  // namespace mbsyn
