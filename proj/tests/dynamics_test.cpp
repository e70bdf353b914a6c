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

#include <cmath>
#include <numbers>
#include <sstream>

#include "mbsyn/dynamics.hpp"
#include "test_support.hpp"

namespace mbsyn {
namespace {

constexpr double kPi = std::numbers::pi;

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  EXPECT_EQ(a.size(), b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

DeviceSpec jaynes_cummings(double g) {
  DeviceSpec d;
  d.qudit = testing::circuit("Q0", 2, 5.0);
  d.qubits = {testing::circuit("Q1", 2, 5.0)};
  d.couplings = {g};
  return d;
}

TEST(Dynamics, ResonantSwapFollowsSineSquared) {
  const double g = 0.023;
  const DeviceSpec d = jaynes_cummings(g);
  ScheduleOptions opt;
  opt.tracked = {"10", "01"};
  const auto r = run_schedule(d, {{200.0, {}, "swap", 0.5}}, QuantumState::basis_state(d.basis(), "10"), opt);
  ASSERT_EQ(r.times.size(), 401u);
  double worst = 0.0;
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    const double s = std::sin(2.0 * kPi * g * r.times[i]);
    worst = std::max(worst, std::abs(r.series("01")[i] - s * s));
    worst = std::max(worst, std::abs(r.series("10")[i] - (1.0 - s * s)));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Dynamics, SampleTimesLandOnRequestedGrid) {
  const DeviceSpec d = jaynes_cummings(0.01);
  ScheduleOptions opt;
  opt.dt = 0.07;
  opt.tracked = {"10"};
  const auto r = run_schedule(d, {{10.0, {}, "a", 0.3}, {1.0, {}, "b", 0.0}}, QuantumState::basis_state(d.basis(), "10"), opt);
  // 0, 0.3 .. 9.9, 10.0, then the end of segment b.
  ASSERT_EQ(r.times.size(), 1u + 33u + 1u + 1u);
  for (std::size_t i = 0; i <= 33; ++i) EXPECT_NEAR(r.times[i], 0.3 * static_cast<double>(i), 1e-12);
  EXPECT_DOUBLE_EQ(r.times[34], 10.0);
  EXPECT_DOUBLE_EQ(r.times[35], 11.0);
}

TEST(Dynamics, RelaxationMatchesRateEquations) {
  DeviceSpec d = testing::star_device({5.0}, 0.001, 3);
  d.qudit.t1 = 100.0;
  const BasisPtr b = d.basis();
  const Operator h = Operator::zero(b);
  EvolveOptions opt;
  opt.sample_interval = 10.0;
  opt.tracked = {"20", "10", "00"};
  const auto r = evolve_lindblad(h, collapse_operators(d), QuantumState::basis_state(b, "20"), 200.0, 0.05, opt);
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    const double e1 = std::exp(-r.times[i] / 100.0);
    EXPECT_NEAR(r.series("20")[i], e1 * e1, 1e-9);
    EXPECT_NEAR(r.series("10")[i], 2.0 * (e1 - e1 * e1), 1e-9);
    EXPECT_NEAR(r.series("00")[i], 1.0 - 2.0 * e1 + e1 * e1, 1e-9);
  }
}

TEST(Dynamics, DephasingDecaysCoherenceAtOneOverTphi) {
  DeviceSpec d = testing::star_device({5.0}, 0.001, 2);
  d.qudit.t2_star = 50.0;  // T_phi = 300 ns
  const BasisPtr b = d.basis();
  Ket k = Ket::Zero(4);
  k(static_cast<Eigen::Index>(b->index_of("00"))) = 1.0 / std::sqrt(2.0);
  k(static_cast<Eigen::Index>(b->index_of("10"))) = 1.0 / std::sqrt(2.0);
  const auto r = evolve_lindblad(Operator::zero(b), collapse_operators(d), QuantumState::pure(b, k), 150.0, 0.05);
  const DenseMatrix& rho = r.final_state->rho();
  const double coh = std::abs(rho(static_cast<Eigen::Index>(b->index_of("10")), static_cast<Eigen::Index>(b->index_of("00"))));
  EXPECT_NEAR(coh, 0.5 * std::exp(-150.0 / 300.0), 1e-10);
  EXPECT_NEAR(r.final_state->population("10"), 0.5, 1e-12);
}

TEST(Dynamics, LindbladWithoutCollapseEqualsPure) {
  const DeviceSpec d = testing::three_body_device();
  const auto s0 = QuantumState::basis_state(d.basis(), "011");
  ScheduleOptions opt;
  opt.tracked = {"011", "200", "110"};
  const auto pure = run_schedule(d, {{80.0, {}, "x", 4.0}}, s0, opt);
  opt.mode = EvolutionMode::Lindblad;
  opt.check_positivity = true;
  const auto mixed = run_schedule(d, {{80.0, {}, "x", 4.0}}, s0, opt);
  for (const auto& l : opt.tracked) EXPECT_LT(max_abs_diff(pure.series(l), mixed.series(l)), 1e-9) << l;
  EXPECT_LT(mixed.diagnostics.max_trace_drift, 1e-12);
  EXPECT_GT(mixed.diagnostics.min_eigenvalue, -1e-6);
  // RK4 does not preserve positivity exactly; the negative part is truncation
  // error and must shrink like dt^4 (16x per halving, allow 10x).
  opt.dt *= 0.5;
  const auto half = run_schedule(d, {{80.0, {}, "x", 4.0}}, s0, opt);
  EXPECT_GT(half.diagnostics.min_eigenvalue, mixed.diagnostics.min_eigenvalue / 10.0);
}

TEST(Dynamics, SubspaceRestrictionIsExact) {
  DeviceSpec d = testing::three_body_device();
  d.qudit.t1 = 2000.0;
  d.qubits[0].t2_star = 500.0;
  const auto s0 = QuantumState::basis_state(d.basis(), "011");
  for (auto mode : {EvolutionMode::Pure, EvolutionMode::Lindblad}) {
    ScheduleOptions opt;
    opt.mode = mode;
    opt.tracked = {"011", "200", "010", "000"};
    const auto small = run_schedule(d, {{60.0, {}, "x", 5.0}}, s0, opt);
    opt.restrict_subspace = false;
    const auto full = run_schedule(d, {{60.0, {}, "x", 5.0}}, s0, opt);
    for (const auto& l : opt.tracked) EXPECT_LT(max_abs_diff(small.series(l), full.series(l)), 1e-10) << l;
  }
}

TEST(Dynamics, PropagationComposes) {
  const DeviceSpec d = testing::three_body_device();
  const auto s0 = QuantumState::basis_state(d.basis(), "011");
  ScheduleOptions opt;
  const auto once = run_schedule(d, {{20.0, {}, "x"}}, s0, opt);
  const auto half = run_schedule(d, {{10.0, {}, "x"}}, s0, opt);
  const auto twice = run_schedule(d, {{10.0, {}, "x"}}, *half.final_state, opt);
  EXPECT_LT((once.final_state->ket() - twice.final_state->ket()).norm(), 1e-11);
  // Two segments in one schedule give the same state again.
  const auto split = run_schedule(d, {{10.0, {}, "x"}, {10.0, {}, "y"}}, s0, opt);
  EXPECT_LT((once.final_state->ket() - split.final_state->ket()).norm(), 1e-11);
}

TEST(Dynamics, EnergyReferenceOnlyChangesTheFrame) {
  const DeviceSpec d = testing::three_body_device();
  const auto s0 = QuantumState::basis_state(d.basis(), "011");
  ScheduleOptions a;
  a.dt = 0.01;
  ScheduleOptions b = a;
  b.energy_reference = 4.9;
  const auto ra = run_schedule(d, {{5.0, {}, "x"}}, s0, a);
  const auto rb = run_schedule(d, {{5.0, {}, "x"}}, s0, b);
  EXPECT_LT((ra.final_state->ket() - rb.final_state->ket()).norm(), 1e-6);
}

TEST(Dynamics, InvariantsHoldAndStepHalvingConverges) {
  const DeviceSpec d = testing::four_body_device();
  const auto s0 = QuantumState::basis_state(d.basis(), "0111");
  ScheduleOptions opt;
  opt.tracked = {"0111", "3000"};
  const auto coarse = run_schedule(d, {{100.0, {}, "x", 2.0}}, s0, opt);
  opt.dt = 0.025;
  const auto fine = run_schedule(d, {{100.0, {}, "x", 2.0}}, s0, opt);
  EXPECT_LT(coarse.diagnostics.max_excitation_drift, 1e-8);
  EXPECT_LT(coarse.diagnostics.max_norm_drift, 1e-6);
  for (const auto& l : opt.tracked) EXPECT_LT(max_abs_diff(coarse.series(l), fine.series(l)), 1e-6) << l;
}

TEST(Dynamics, DressedKetsAreOrthonormalAndNearBare) {
  const DeviceSpec d = testing::three_body_device();
  const auto kets = dressed_kets(d, {}, {"011", "200"});
  ASSERT_EQ(kets.size(), 2u);
  EXPECT_NEAR(kets[0].norm(), 1.0, 1e-12);
  EXPECT_NEAR(kets[1].norm(), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(kets[0].dot(kets[1])), 0.0, 1e-12);
  const auto b = d.basis();
  EXPECT_GT(std::norm(kets[0](static_cast<Eigen::Index>(b->index_of("011")))), 0.9);
  EXPECT_GT(std::norm(kets[1](static_cast<Eigen::Index>(b->index_of("200")))), 0.9);
}

TEST(Dynamics, DressedReadoutStartsAtUnity) {
  const DeviceSpec d = testing::three_body_device();
  const auto kets = dressed_kets(d, {}, {"011", "200"});
  ScheduleOptions opt;
  opt.frame = ReadoutFrame::Dressed;
  opt.tracked = {"011", "200"};
  const auto r = run_schedule(d, {{1.0, {}, "x"}}, QuantumState::pure(d.basis(), kets[0]), opt);
  EXPECT_NEAR(r.series("011").front(), 1.0, 1e-12);
  EXPECT_NEAR(r.series("200").front(), 0.0, 1e-12);
}

TEST(Dynamics, RejectsBadInput) {
  const auto b = make_basis({2, 2});
  DenseMatrix m = DenseMatrix::Zero(4, 4);
  m(0, 1) = 1.0;
  const Operator h(b, SparseMatrix(m.sparseView()));
  const auto s0 = QuantumState::basis_state(b, "00");
  EXPECT_THROW(evolve_pure(h, s0, 1.0, 0.1), std::invalid_argument);
  EXPECT_THROW(evolve_pure(Operator::zero(b), s0, 1.0, 2.0), std::invalid_argument);
  EXPECT_THROW(evolve_pure(Operator::zero(b), s0, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(evolve_pure(Operator::zero(b), s0.to_density(), 1.0, 0.1), std::invalid_argument);
  const DeviceSpec d = jaynes_cummings(0.01);
  EXPECT_THROW(run_schedule(d, {}, QuantumState::basis_state(d.basis(), "10"), {}), std::invalid_argument);
}

TEST(Dynamics, CsvHasHeaderAndTwelveDigits) {
  TraceResult r;
  r.times = {0.0, 1.0 / 3.0};
  r.labels = {"011", "200"};
  r.populations = {{1.0, 2.0 / 3.0}, {0.0, 1e-20}};
  std::ostringstream os;
  write_trace_csv(os, r);
  EXPECT_EQ(os.str(), "time_ns,011,200\n0,1,0\n0.333333333333,0.666666666667,1e-20\n");
}

}  // namespace
}  // namespace mbsyn
