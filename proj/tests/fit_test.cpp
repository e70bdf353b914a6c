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
#include <random>

#include "mbsyn/errors.hpp"
#include "mbsyn/fit.hpp"

namespace mbsyn {
namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> grid(double t_max, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = t_max * i / (n - 1);
  return t;
}

std::vector<double> cosine(const std::vector<double>& t, double a, double f, double phi, double c) {
  std::vector<double> y;
  for (double x : t) y.push_back(a * std::cos(2.0 * kPi * f * x + phi) + c);
  return y;
}

TEST(Fit, RecoversExactCosine) {
  const auto t = grid(200.0, 201);
  const auto fit = fit_cosine(t, cosine(t, 0.3, 0.0371, 0.7, 0.5));
  EXPECT_NEAR(fit.frequency, 0.0371, 1e-10);
  EXPECT_NEAR(fit.amplitude, 0.3, 1e-9);
  EXPECT_NEAR(fit.phase, 0.7, 1e-8);
  EXPECT_NEAR(fit.offset, 0.5, 1e-9);
  EXPECT_LT(fit.rms, 1e-9);
}

TEST(Fit, ToleratesSmallNoise) {
  const auto t = grid(300.0, 301);
  auto y = cosine(t, 0.45, 0.025, -2.0, 0.5);
  std::mt19937_64 gen(7);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (auto& v : y) v += noise(gen);
  const auto fit = fit_cosine(t, y);
  EXPECT_NEAR(fit.frequency, 0.025, 2e-5);
  EXPECT_NEAR(fit.amplitude, 0.45, 5e-3);
  EXPECT_NEAR(fit.rms, 0.01, 2e-3);
}

TEST(Fit, JointFitSharesFrequency) {
  const auto t = grid(120.0, 121);
  const auto fits = fit_cosine_joint(t, {cosine(t, 0.5, 0.05, 0.0, 0.5), cosine(t, 0.4, 0.05, kPi, 0.45)});
  ASSERT_EQ(fits.size(), 2u);
  EXPECT_DOUBLE_EQ(fits[0].frequency, fits[1].frequency);
  EXPECT_NEAR(fits[0].frequency, 0.05, 1e-10);
  EXPECT_NEAR(fits[1].amplitude, 0.4, 1e-9);
  EXPECT_NEAR(std::abs(fits[1].phase), kPi, 1e-8);
}

TEST(Fit, RejectsConstantTrace) {
  const auto t = grid(100.0, 101);
  EXPECT_THROW(fit_cosine(t, std::vector<double>(t.size(), 0.5)), NumericalError);
}

TEST(Fit, RejectsNonSinusoidalTrace) {
  const auto t = grid(100.0, 101);
  std::vector<double> y;
  for (double x : t) y.push_back(std::fmod(x, 20.0) < 10.0 ? 1.0 : 0.0);
  EXPECT_THROW(fit_cosine(t, y), NumericalError);
}

TEST(Fit, RejectsRecordShorterThanTwoPeriods) {
  const auto t = grid(100.0, 101);
  EXPECT_THROW(fit_cosine(t, cosine(t, 0.5, 0.012, 0.3, 0.5)), NumericalError);
  FitOptions loose;
  loose.min_periods = 1.0;
  EXPECT_NEAR(fit_cosine(t, cosine(t, 0.5, 0.012, 0.3, 0.5), loose).frequency, 0.012, 1e-9);
}

TEST(Fit, RejectsTooFewSamples) {
  const auto t = grid(10.0, 5);
  EXPECT_THROW(fit_cosine(t, cosine(t, 0.5, 0.2, 0.0, 0.5)), NumericalError);
}

}  // namespace
}  // namespace mbsyn
