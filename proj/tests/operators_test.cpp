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

#include <set>
#include <string>

#include "mbsyn/operators.hpp"
#include "test_support.hpp"

namespace mbsyn {
namespace {

using testing::kron;

TEST(ProductBasis, EnumeratesEveryProductStateOnce) {
  const auto b = make_basis({5, 2, 2, 2, 2});
  ASSERT_EQ(b->total_dim(), 80u);
  std::set<std::string> labels;
  for (std::size_t i = 0; i < b->total_dim(); ++i) {
    const std::string l = b->label(i);
    EXPECT_EQ(b->index_of(l), i);
    labels.insert(l);
  }
  EXPECT_EQ(labels.size(), 80u);
  // Qudit is the most significant digit.
  EXPECT_EQ(b->label(0), "00000");
  EXPECT_EQ(b->label(1), "00001");
  EXPECT_EQ(b->label(79), "41111");
}

TEST(ProductBasis, ExcitationIsDigitSum) {
  const auto b = make_basis({5, 2, 3});
  for (std::size_t i = 0; i < b->total_dim(); ++i) {
    int sum = 0;
    for (char c : b->label(i)) sum += c - '0';
    EXPECT_EQ(b->excitation(i), sum) << b->label(i);
  }
}

TEST(ProductBasis, RejectsBadInput) {
  EXPECT_THROW(ProductBasis({}), std::invalid_argument);
  EXPECT_THROW(ProductBasis({5, 1}), std::invalid_argument);
  const auto b = make_basis({3, 2});
  EXPECT_THROW(b->index_of("31"), std::out_of_range);
  EXPECT_THROW(b->index_of("0"), std::invalid_argument);
  EXPECT_THROW(b->index_of("a1"), std::invalid_argument);
  EXPECT_THROW(b->label(6), std::out_of_range);
}

TEST(EmbedLocal, MatchesKroneckerProduct) {
  const auto b = make_basis({3, 2, 4});
  const DenseMatrix a3 = ladder_ops(3).bosonic_lower;
  const DenseMatrix n2 = number_op(2);
  const DenseMatrix r4 = ladder_ops(4).raise;
  const DenseMatrix i2 = DenseMatrix::Identity(2, 2);
  const DenseMatrix i3 = DenseMatrix::Identity(3, 3);
  const DenseMatrix i4 = DenseMatrix::Identity(4, 4);
  EXPECT_LT((embed_local(b, 0, a3).dense() - kron(kron(a3, i2), i4)).norm(), 1e-15);
  EXPECT_LT((embed_local(b, 1, n2).dense() - kron(kron(i3, n2), i4)).norm(), 1e-15);
  EXPECT_LT((embed_local(b, 2, r4).dense() - kron(kron(i3, i2), r4)).norm(), 1e-15);
  EXPECT_THROW(embed_local(b, 3, n2), std::invalid_argument);
  EXPECT_THROW(embed_local(b, 0, n2), std::invalid_argument);
}

TEST(Ladder, BosonicCommutatorIsIdentityBelowTruncation) {
  const int d = 6;
  const auto l = ladder_ops(d);
  const DenseMatrix c = l.bosonic_lower * l.bosonic_raise - l.bosonic_raise * l.bosonic_lower;
  for (int k = 0; k < d - 1; ++k) EXPECT_NEAR(c(k, k).real(), 1.0, 1e-14);
  EXPECT_NEAR(c(d - 1, d - 1).real(), -(d - 1.0), 1e-14);
  EXPECT_LT((l.bosonic_raise * l.bosonic_lower - number_op(d)).norm(), 1e-14);
}

TEST(Operator, AlgebraAndHermiticity) {
  const auto b = make_basis({3, 2});
  const Operator a = embed_local(b, 0, ladder_ops(3).bosonic_lower);
  const Operator x = a + a.dagger();
  EXPECT_LT(x.hermiticity_error(), 1e-15);
  EXPECT_GT((a - a.dagger()).hermiticity_error(), 1.0);
  const Operator comm = commutator(total_excitation(b), a);
  // [N, a] = -a
  EXPECT_LT(max_abs_entry(comm + a), 1e-14);
  const auto other = make_basis({2, 3});
  EXPECT_THROW(a + Operator::identity(other), std::invalid_argument);
}

TEST(QuantumState, ChecksInvariants) {
  const auto b = make_basis({2, 2});
  const QuantumState s = QuantumState::basis_state(b, "10");
  EXPECT_FALSE(s.check());
  EXPECT_DOUBLE_EQ(s.population("10"), 1.0);
  Ket bad = Ket::Zero(4);
  bad(0) = 2.0;
  EXPECT_TRUE(QuantumState::pure(b, bad).check());
  DenseMatrix rho = DenseMatrix::Zero(4, 4);
  rho(0, 0) = 1.5;
  rho(1, 1) = -0.5;
  const auto d = QuantumState::density(b, rho);
  EXPECT_TRUE(d.check());
  EXPECT_THROW(d.validate(), std::domain_error);
  EXPECT_THROW(QuantumState::pure(b, Ket::Zero(3)), std::invalid_argument);
}

TEST(QuantumState, ExpectationOfNumberOperator) {
  const auto b = make_basis({3, 2});
  Ket k = Ket::Zero(6);
  k(b->index_of("21")) = std::sqrt(0.25);
  k(b->index_of("00")) = std::sqrt(0.75);
  const QuantumState s = QuantumState::pure(b, k);
  EXPECT_NEAR(expectation(s, total_excitation(b)).real(), 0.25 * 3.0, 1e-14);
  EXPECT_NEAR(expectation(s.to_density(), total_excitation(b)).real(), 0.75, 1e-14);
}

TEST(Subspace, SectorSizesMatchCounting) {
  const auto b = make_basis({5, 2, 2, 2, 2});
  // Independent count: qudit level n0, then choose(4, N - n0) qubit excitations.
  const auto choose = [](int n, int k) {
    if (k < 0 || k > n) return 0;
    int r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  };
  for (int n = 0; n <= 8; ++n) {
    int expected = 0;
    for (int n0 = 0; n0 <= 4; ++n0) expected += choose(4, n - n0);
    EXPECT_EQ(Subspace::sector(b, n).dim(), static_cast<std::size_t>(expected)) << "N=" << n;
  }
  EXPECT_EQ(Subspace::at_most(b, 8).dim(), 80u);
  EXPECT_TRUE(Subspace::full(b).is_full());
}

TEST(Subspace, RestrictLiftRoundTrip) {
  const auto b = make_basis({3, 2, 2});
  const Subspace s = Subspace::sector(b, 2);
  Ket k = Ket::Zero(static_cast<Eigen::Index>(b->total_dim()));
  k(static_cast<Eigen::Index>(b->index_of("011"))) = 0.6;
  k(static_cast<Eigen::Index>(b->index_of("200"))) = Complex(0.0, 0.8);
  EXPECT_NEAR(s.leakage(k), 0.0, 1e-15);
  EXPECT_LT((s.lift(s.restrict(k)) - k).norm(), 1e-15);
  k(static_cast<Eigen::Index>(b->index_of("000"))) = 1.0;
  EXPECT_NEAR(s.leakage(k), 1.0, 1e-15);
}

}  // namespace
}  // namespace mbsyn
