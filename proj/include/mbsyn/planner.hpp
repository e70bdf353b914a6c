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

// Qubit frequency placement for an m-photon cascade resonance.
//
// Hard constraints: every qubit in [f_min, f_max], sum(omega) = sum(nu)
// (the last qubit is solved for), and every lower-order resonance at least
// `threshold` away. Among feasible placements we minimize
//
//   leakage + lambda_weight * |ln(lambda_pert / lambda_target)|
//
// where leakage estimates how much the two bright states are dressed by
// their single-photon neighbours. Low leakage keeps the dynamics two-level;
// the lambda term keeps the interaction strong enough to see. Search: half
// the budget on uniform random candidates, the rest on coordinate descent
// from the best one.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mbsyn/device.hpp"
#include "mbsyn/device_json.hpp"
#include "mbsyn/effective.hpp"
#include "mbsyn/errors.hpp"
#include "mbsyn/rng.hpp"

namespace mbsyn {

/// Default lambda targets (GHz) per body count; the magnitudes reported for
/// the reference device.
inline double default_lambda_target(int m) {
  switch (m) {
    case 3: return 0.00225;
    case 4: return 0.00229;
    case 5: return 0.0008;
    default: return 0.001;
  }
}

struct PlanRequest {
  int m = 5;
  double qudit_base = 5.0;     // GHz
  double alpha = -0.25;        // GHz, qudit anharmonicity
  double g = 0.023;            // GHz, every qudit-qubit coupling
  double threshold = 0.05;     // GHz, minimum spurious detuning
  std::uint64_t seed = 0;
  int budget = 10000;          // objective evaluations
  std::optional<double> lambda_target;  // GHz; default_lambda_target(m) when unset
  double lambda_weight = 0.05;
  double f_min = 4.0;
  double f_max = 6.0;
  // Device template for to_device().
  int qudit_levels = 5;
  int qubit_levels = 2;
  double qubit_anharmonicity = -0.22;
  std::optional<double> t1 = 30000.0;       // ns
  std::optional<double> t2_star = 3000.0;   // ns

  std::vector<std::string> validate() const {
    std::vector<std::string> issues;
    if (m < 3 || m > 5) issues.push_back("planner.m: must be 3, 4 or 5");
    if (!(std::abs(alpha) > threshold)) issues.push_back("planner.alpha_ghz: |alpha| must exceed the threshold");
    if (!(g > 0.0)) issues.push_back("planner.g_ghz: must be > 0");
    if (!(threshold >= 0.0)) issues.push_back("planner.threshold_ghz: must be >= 0");
    if (budget < 10) issues.push_back("planner.budget: must be >= 10");
    if (!(f_max > f_min)) issues.push_back("planner.f_max_ghz: must exceed f_min_ghz");
    if (lambda_target && !(*lambda_target > 0.0)) issues.push_back("planner.lambda_target_ghz: must be > 0");
    if (!(lambda_weight >= 0.0)) issues.push_back("planner.lambda_weight: must be >= 0");
    if (qudit_levels < m) issues.push_back("planner.qudit_levels: must be >= m");
    if (qubit_levels < 2 || qubit_levels > 3) issues.push_back("planner.qubit_levels: must be 2 or 3");
    return issues;
  }
};

struct FrequencyPlan {
  int m = 0;
  double qudit_base = 0.0;
  double alpha = 0.0;
  std::vector<double> qubit_freqs;   // GHz
  double min_spurious_detuning = 0.0;
  SpuriousProcess closest;
  double resonance_residual = 0.0;   // |sum nu - sum omega|, GHz
  double lambda_perturbative = 0.0;  // GHz
  double leakage = 0.0;
  double objective = 0.0;
  int evaluations = 0;
  std::uint64_t seed = 0;
};

/// Estimated bright-state dressing: second-order weight that |m-1,0..0> and
/// |0,1..1> lose to their single-hop neighbours, averaged over the pair.
inline double bright_leakage(const std::vector<double>& qubit_freqs, const std::vector<double>& nu, double g) {
  const auto q = static_cast<double>(qubit_freqs.size());
  double from_collective = 0.0;  // |0,1..1> -> |1, one qubit down>
  double from_excited = 0.0;     // |m-1,0..0> -> |m-2, one qubit up>, sqrt(m-1) enhanced
  for (double w : qubit_freqs) {
    from_collective += g * g / ((w - nu.front()) * (w - nu.front()));
    from_excited += q * g * g / ((nu.back() - w) * (nu.back() - w));
  }
  return 0.5 * (from_collective + from_excited);
}

namespace detail {

struct PlanScore {
  bool in_box = false;
  double spurious = 0.0;
  double objective = std::numeric_limits<double>::infinity();
  double lambda = 0.0;
  double leakage = 0.0;

  // Feasible beats infeasible; among infeasible, larger spurious gap wins.
  bool better_than(const PlanScore& o, double threshold) const {
    const bool fa = in_box && spurious >= threshold;
    const bool fb = o.in_box && o.spurious >= threshold;
    if (fa != fb) return fa;
    if (fa) return objective < o.objective;
    if (in_box != o.in_box) return in_box;
    return spurious > o.spurious;
  }
};

}  // namespace detail

inline std::vector<double> cascade_transitions(int m, double base, double alpha) {
  std::vector<double> nu;
  for (int k = 1; k < m; ++k) nu.push_back(base + (k - 1) * alpha);
  return nu;
}

inline FrequencyPlan plan_frequencies(const PlanRequest& req) {
  if (auto issues = req.validate(); !issues.empty()) throw ConfigError(issues);
  const int q = req.m - 1;
  const std::vector<double> nu = cascade_transitions(req.m, req.qudit_base, req.alpha);
  const double total = std::accumulate(nu.begin(), nu.end(), 0.0);
  const double target = req.lambda_target.value_or(default_lambda_target(req.m));
  const std::vector<double> gs(static_cast<std::size_t>(q), req.g);

  const auto complete = [&](const std::vector<double>& free) {
    std::vector<double> w(free);
    w.push_back(total - std::accumulate(free.begin(), free.end(), 0.0));
    return w;
  };
  int evals = 0;
  const auto score = [&](const std::vector<double>& free) {
    ++evals;
    detail::PlanScore s;
    const auto w = complete(free);
    s.in_box = std::all_of(w.begin(), w.end(), [&](double x) { return x >= req.f_min && x <= req.f_max; });
    if (!s.in_box) return s;
    s.spurious = closest_spurious(w, nu).detuning;
    if (s.spurious < req.threshold) return s;
    s.lambda = std::abs(perturbative_path_sum(w, nu, gs));
    s.leakage = bright_leakage(w, nu, req.g);
    const double log_ratio = s.lambda > 0.0 ? std::abs(std::log(s.lambda / target)) : 1e3;
    s.objective = s.leakage + req.lambda_weight * log_ratio;
    return s;
  };

  Rng rng(req.seed);
  std::vector<double> best_x(static_cast<std::size_t>(q - 1));
  detail::PlanScore best;
  bool have = false;
  const int random_budget = req.budget / 2;
  for (int i = 0; i < random_budget; ++i) {
    std::vector<double> x(static_cast<std::size_t>(q - 1));
    for (auto& v : x) v = rng.uniform(req.f_min, req.f_max);
    const auto s = score(x);
    if (!have || s.better_than(best, req.threshold)) {  // strict: earliest candidate wins ties
      best = s;
      best_x = x;
      have = true;
    }
  }
  double step = 0.05;
  while (evals < req.budget && step > 1e-7) {
    bool improved = false;
    for (std::size_t i = 0; i < best_x.size() && evals < req.budget; ++i) {
      for (double dir : {1.0, -1.0}) {
        if (evals >= req.budget) break;
        auto y = best_x;
        y[i] += dir * step;
        const auto s = score(y);
        if (s.better_than(best, req.threshold)) {
          best = s;
          best_x = y;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }

  FrequencyPlan plan;
  plan.m = req.m;
  plan.qudit_base = req.qudit_base;
  plan.alpha = req.alpha;
  plan.qubit_freqs = complete(best_x);
  plan.closest = closest_spurious(plan.qubit_freqs, nu);
  plan.min_spurious_detuning = plan.closest.detuning;
  plan.resonance_residual =
      std::abs(total - std::accumulate(plan.qubit_freqs.begin(), plan.qubit_freqs.end(), 0.0));
  plan.lambda_perturbative = best.lambda;
  plan.leakage = best.leakage;
  plan.objective = best.objective;
  plan.evaluations = evals;
  plan.seed = req.seed;
  if (!best.in_box || best.spurious < req.threshold) {
    std::ostringstream msg;
    msg << "no placement found with spurious detuning >= " << req.threshold << " GHz after " << evals
        << " evaluations; best found: qubits [";
    for (std::size_t j = 0; j < plan.qubit_freqs.size(); ++j) msg << (j ? ", " : "") << plan.qubit_freqs[j];
    msg << "] GHz, closest spurious resonance " << plan.min_spurious_detuning << " GHz"
        << (best.in_box ? "" : ", outside the tunable band");
    throw PlanError(msg.str());
  }
  return plan;
}

/// A simulatable device at the plan's bare frequencies (no dispersive
/// correction; see calibrate_resonance).
inline DeviceSpec to_device(const FrequencyPlan& plan, const PlanRequest& req) {
  DeviceSpec d;
  d.qudit = {"Q0", req.qudit_levels, plan.qudit_base, plan.alpha, req.t1, req.t2_star};
  for (std::size_t j = 0; j < plan.qubit_freqs.size(); ++j) {
    d.qubits.push_back({"Q" + std::to_string(j + 1), req.qubit_levels, plan.qubit_freqs[j],
                        req.qubit_levels > 2 ? req.qubit_anharmonicity : 0.0, req.t1, req.t2_star});
    d.couplings.push_back(req.g);
  }
  return d;
}

inline Json plan_to_json(const FrequencyPlan& plan) {
  Json j;
  j["m"] = plan.m;
  j["qubit_freqs_ghz"] = plan.qubit_freqs;
  j["min_spurious_detuning_ghz"] = plan.min_spurious_detuning;
  j["closest_spurious"] = {{"qubits", plan.closest.qubits}, {"transitions", plan.closest.transitions}};
  j["resonance_residual_ghz"] = plan.resonance_residual;
  j["lambda_perturbative_ghz"] = plan.lambda_perturbative;
  j["leakage_estimate"] = plan.leakage;
  j["objective"] = plan.objective;
  j["evaluations"] = plan.evaluations;
  j["seed"] = plan.seed;
  return j;
}

}  // namespace mbsyn
