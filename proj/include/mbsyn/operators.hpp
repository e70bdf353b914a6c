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

// Tensor-product Hilbert spaces over mixed-dimension circuits and the
// operator/state arithmetic used by every other module.
//
// Index convention: circuit 0 (the qudit) is the most-significant subsystem,
// so the flat index of |n_0 n_1 ... n_{k-1}> is
//   sum_c n_c * stride_c,  stride_{k-1} = 1,  stride_c = stride_{c+1} * dims_{c+1}.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace mbsyn {

using Complex = std::complex<double>;
using SparseMatrix = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using DenseMatrix = Eigen::MatrixXcd;
using Ket = Eigen::VectorXcd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

class ProductBasis {
 public:
  explicit ProductBasis(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw std::invalid_argument("ProductBasis: no circuits");
    for (std::size_t c = 0; c < dims_.size(); ++c) {
      if (dims_[c] < 2) {
        throw std::invalid_argument("ProductBasis: circuit " + std::to_string(c) +
                                    " has fewer than 2 levels");
      }
    }
    strides_.assign(dims_.size(), 1);
    for (std::size_t c = dims_.size() - 1; c > 0; --c) {
      strides_[c - 1] = strides_[c] * static_cast<std::size_t>(dims_[c]);
    }
    total_ = strides_[0] * static_cast<std::size_t>(dims_[0]);
  }

  const std::vector<int>& dims() const noexcept { return dims_; }
  std::size_t total_dim() const noexcept { return total_; }
  std::size_t num_circuits() const noexcept { return dims_.size(); }
  std::size_t stride(std::size_t circuit) const { return strides_.at(circuit); }

  std::size_t index(std::span<const int> levels) const {
    if (levels.size() != dims_.size()) {
      throw std::invalid_argument("ProductBasis::index: wrong number of levels");
    }
    std::size_t idx = 0;
    for (std::size_t c = 0; c < dims_.size(); ++c) {
      if (levels[c] < 0 || levels[c] >= dims_[c]) {
        throw std::out_of_range("ProductBasis::index: level out of range on circuit " +
                                std::to_string(c));
      }
      idx += static_cast<std::size_t>(levels[c]) * strides_[c];
    }
    return idx;
  }

  std::vector<int> levels(std::size_t index) const {
    check_index(index);
    std::vector<int> out(dims_.size());
    for (std::size_t c = 0; c < dims_.size(); ++c) {
      out[c] = static_cast<int>(index / strides_[c]);
      index %= strides_[c];
    }
    return out;
  }

  int level(std::size_t index, std::size_t circuit) const {
    check_index(index);
    return static_cast<int>((index / strides_.at(circuit)) %
                            static_cast<std::size_t>(dims_[circuit]));
  }

  // Total excitation number sum_c n_c.
  int excitation(std::size_t index) const {
    check_index(index);
    int n = 0;
    for (std::size_t c = 0; c < dims_.size(); ++c) {
      n += static_cast<int>(index / strides_[c]);
      index %= strides_[c];
    }
    return n;
  }

  // "01111"-style label, one digit per circuit.
  std::string label(std::size_t index) const {
    std::string out;
    for (int n : levels(index)) {
      if (n > 9) throw std::out_of_range("ProductBasis::label: level above 9");
      out.push_back(static_cast<char>('0' + n));
    }
    return out;
  }

  std::size_t index_of(std::string_view label) const {
    if (label.size() != dims_.size()) {
      throw std::invalid_argument("ProductBasis: label '" + std::string(label) +
                                  "' does not match " + std::to_string(dims_.size()) +
                                  " circuits");
    }
    std::vector<int> lv(label.size());
    for (std::size_t c = 0; c < label.size(); ++c) {
      if (label[c] < '0' || label[c] > '9') {
        throw std::invalid_argument("ProductBasis: bad label '" + std::string(label) + "'");
      }
      lv[c] = label[c] - '0';
    }
    return index(lv);
  }

  friend bool operator==(const ProductBasis& a, const ProductBasis& b) {
    return a.dims_ == b.dims_;
  }

 private:
  void check_index(std::size_t index) const {
    if (index >= total_) throw std::out_of_range("ProductBasis: index out of range");
  }

  std::vector<int> dims_;
  std::vector<std::size_t> strides_;
  std::size_t total_ = 0;
};

using BasisPtr = std::shared_ptr<const ProductBasis>;

inline BasisPtr make_basis(std::vector<int> dims) {
  return std::make_shared<const ProductBasis>(std::move(dims));
}

inline bool same_basis(const BasisPtr& a, const BasisPtr& b) {
  return a == b || (a && b && *a == *b);
}

class Operator {
 public:
  Operator(BasisPtr basis, SparseMatrix matrix)
      : basis_(std::move(basis)), matrix_(std::move(matrix)) {
    if (!basis_) throw std::invalid_argument("Operator: null basis");
    const auto n = static_cast<Eigen::Index>(basis_->total_dim());
    if (matrix_.rows() != n || matrix_.cols() != n) {
      throw std::invalid_argument("Operator: matrix size does not match basis");
    }
    matrix_.makeCompressed();
  }

  static Operator zero(BasisPtr basis) {
    const auto n = static_cast<Eigen::Index>(basis->total_dim());
    return Operator(basis, SparseMatrix(n, n));
  }

  static Operator identity(BasisPtr basis) {
    const auto n = static_cast<Eigen::Index>(basis->total_dim());
    SparseMatrix m(n, n);
    m.setIdentity();
    return Operator(std::move(basis), std::move(m));
  }

  const ProductBasis& basis() const noexcept { return *basis_; }
  const BasisPtr& basis_ptr() const noexcept { return basis_; }
  const SparseMatrix& matrix() const noexcept { return matrix_; }
  DenseMatrix dense() const { return DenseMatrix(matrix_); }

  Operator dagger() const { return Operator(basis_, SparseMatrix(matrix_.adjoint())); }

  // max |A_ij - conj(A_ji)|
  double hermiticity_error() const {
    SparseMatrix diff = matrix_ - SparseMatrix(matrix_.adjoint());
    double worst = 0.0;
    for (Eigen::Index r = 0; r < diff.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(diff, r); it; ++it) {
        worst = std::max(worst, std::abs(it.value()));
      }
    }
    return worst;
  }

  Operator& operator+=(const Operator& other) {
    require_same(other);
    matrix_ += other.matrix_;
    return *this;
  }
  Operator& operator-=(const Operator& other) {
    require_same(other);
    matrix_ -= other.matrix_;
    return *this;
  }
  Operator& operator*=(Complex s) {
    matrix_ *= s;
    return *this;
  }

  friend Operator operator+(Operator a, const Operator& b) { return a += b; }
  friend Operator operator-(Operator a, const Operator& b) { return a -= b; }
  friend Operator operator*(Complex s, Operator a) { return a *= s; }
  friend Operator operator*(Operator a, Complex s) { return a *= s; }
  friend Operator operator*(const Operator& a, const Operator& b) {
    a.require_same(b);
    return Operator(a.basis_, SparseMatrix(a.matrix_ * b.matrix_));
  }

 private:
  void require_same(const Operator& other) const {
    if (!same_basis(basis_, other.basis_)) {
      throw std::invalid_argument("Operator: basis mismatch");
    }
  }

  BasisPtr basis_;
  SparseMatrix matrix_;
};

inline Operator commutator(const Operator& a, const Operator& b) { return a * b - b * a; }

// Largest |entry| of a sparse operator.
inline double max_abs_entry(const Operator& op) {
  double worst = 0.0;
  const auto& m = op.matrix();
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) worst = std::max(worst, std::abs(it.value()));
  }
  return worst;
}

/// Embeds a single-circuit operator as I ⊗ … ⊗ local ⊗ … ⊗ I.
inline Operator embed_local(const BasisPtr& basis, std::size_t circuit,
                            const DenseMatrix& local) {
  if (!basis) throw std::invalid_argument("embed_local: null basis");
  if (circuit >= basis->num_circuits()) {
    throw std::invalid_argument("embed_local: circuit index out of range");
  }
  const int d = basis->dims()[circuit];
  if (local.rows() != d || local.cols() != d) {
    throw std::invalid_argument("embed_local: local operator is " +
                                std::to_string(local.rows()) + "x" +
                                std::to_string(local.cols()) + ", circuit " +
                                std::to_string(circuit) + " has " + std::to_string(d) +
                                " levels");
  }
  const std::size_t n = basis->total_dim();
  const std::size_t stride = basis->stride(circuit);
  std::vector<Eigen::Triplet<Complex>> trips;
  for (std::size_t i = 0; i < n; ++i) {
    const int col_level = basis->level(i, circuit);
    const std::size_t base = i - static_cast<std::size_t>(col_level) * stride;
    for (int r = 0; r < d; ++r) {
      const Complex v = local(r, col_level);
      if (v != Complex{}) {
        trips.emplace_back(static_cast<int>(base + static_cast<std::size_t>(r) * stride),
                           static_cast<int>(i), v);
      }
    }
  }
  SparseMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m.setFromTriplets(trips.begin(), trips.end());
  return Operator(basis, std::move(m));
}

struct LadderOps {
  DenseMatrix raise;           // sum_n |n><n-1|
  DenseMatrix lower;           // raise^dagger
  DenseMatrix bosonic_raise;   // sum_n sqrt(n) |n><n-1|
  DenseMatrix bosonic_lower;   // bosonic_raise^dagger
};

inline LadderOps ladder_ops(int levels) {
  if (levels < 2) throw std::invalid_argument("ladder_ops: levels must be >= 2");
  LadderOps ops;
  ops.raise = DenseMatrix::Zero(levels, levels);
  ops.bosonic_raise = DenseMatrix::Zero(levels, levels);
  for (int n = 1; n < levels; ++n) {
    ops.raise(n, n - 1) = 1.0;
    ops.bosonic_raise(n, n - 1) = std::sqrt(static_cast<double>(n));
  }
  ops.lower = ops.raise.adjoint();
  ops.bosonic_lower = ops.bosonic_raise.adjoint();
  return ops;
}

inline DenseMatrix number_op(int levels) {
  DenseMatrix n = DenseMatrix::Zero(levels, levels);
  for (int k = 0; k < levels; ++k) n(k, k) = static_cast<double>(k);
  return n;
}

// |row><col| on a single circuit.
inline DenseMatrix local_projector(int levels, int row, int col) {
  DenseMatrix m = DenseMatrix::Zero(levels, levels);
  m(row, col) = 1.0;
  return m;
}

inline Operator total_excitation(const BasisPtr& basis) {
  const auto n = static_cast<Eigen::Index>(basis->total_dim());
  SparseMatrix m(n, n);
  m.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    m.insert(i, i) = static_cast<double>(basis->excitation(static_cast<std::size_t>(i)));
  }
  return Operator(basis, std::move(m));
}

inline Operator basis_projector(const BasisPtr& basis, std::size_t index) {
  const auto n = static_cast<Eigen::Index>(basis->total_dim());
  SparseMatrix m(n, n);
  m.insert(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(index)) = 1.0;
  return Operator(basis, std::move(m));
}

class QuantumState {
 public:
  enum class Kind { Pure, Density };

  static QuantumState pure(BasisPtr basis, Ket ket) {
    check_size(basis, ket.size());
    return QuantumState(std::move(basis), std::move(ket));
  }

  static QuantumState density(BasisPtr basis, DenseMatrix rho) {
    check_size(basis, rho.rows());
    if (rho.rows() != rho.cols()) throw std::invalid_argument("QuantumState: rho not square");
    return QuantumState(std::move(basis), std::move(rho));
  }

  static QuantumState basis_state(BasisPtr basis, std::string_view label) {
    Ket ket = Ket::Zero(static_cast<Eigen::Index>(basis->total_dim()));
    ket(static_cast<Eigen::Index>(basis->index_of(label))) = 1.0;
    return pure(std::move(basis), std::move(ket));
  }

  Kind kind() const noexcept { return std::holds_alternative<Ket>(data_) ? Kind::Pure : Kind::Density; }
  bool is_pure() const noexcept { return kind() == Kind::Pure; }
  const ProductBasis& basis() const noexcept { return *basis_; }
  const BasisPtr& basis_ptr() const noexcept { return basis_; }

  const Ket& ket() const {
    if (!is_pure()) throw std::logic_error("QuantumState: not a pure state");
    return std::get<Ket>(data_);
  }
  const DenseMatrix& rho() const {
    if (is_pure()) throw std::logic_error("QuantumState: not a density matrix");
    return std::get<DenseMatrix>(data_);
  }

  DenseMatrix density_matrix() const {
    if (is_pure()) {
      const Ket& k = std::get<Ket>(data_);
      return k * k.adjoint();
    }
    return std::get<DenseMatrix>(data_);
  }

  QuantumState to_density() const { return density(basis_, density_matrix()); }

  double population(std::size_t index) const {
    const auto i = static_cast<Eigen::Index>(index);
    if (is_pure()) return std::norm(std::get<Ket>(data_)(i));
    return std::get<DenseMatrix>(data_)(i, i).real();
  }

  double population(std::string_view label) const { return population(basis_->index_of(label)); }

  // Norm squared (pure) or trace (density).
  double total_population() const {
    if (is_pure()) return std::get<Ket>(data_).squaredNorm();
    return std::get<DenseMatrix>(data_).trace().real();
  }

  // Empty when the state satisfies its invariants, otherwise a description.
  std::optional<std::string> check(double tol = 1e-9, double positivity_tol = -1e-6) const {
    if (is_pure()) {
      const double err = std::abs(std::get<Ket>(data_).norm() - 1.0);
      if (err > tol) return "pure state norm off by " + std::to_string(err);
      return std::nullopt;
    }
    const auto& r = std::get<DenseMatrix>(data_);
    const double tr_err = std::abs(r.trace() - Complex(1.0));
    if (tr_err > tol) return "density trace off by " + std::to_string(tr_err);
    const double herm = (r - r.adjoint()).cwiseAbs().maxCoeff();
    if (herm > tol) return "density matrix not Hermitian (" + std::to_string(herm) + ")";
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(r, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < positivity_tol) return "density matrix eigenvalue " + std::to_string(min_eig);
    return std::nullopt;
  }

  void validate(double tol = 1e-9, double positivity_tol = -1e-6) const {
    if (auto err = check(tol, positivity_tol)) throw std::domain_error("QuantumState: " + *err);
  }

 private:
  QuantumState(BasisPtr basis, Ket ket) : basis_(std::move(basis)), data_(std::move(ket)) {}
  QuantumState(BasisPtr basis, DenseMatrix rho) : basis_(std::move(basis)), data_(std::move(rho)) {}

  static void check_size(const BasisPtr& basis, Eigen::Index n) {
    if (!basis) throw std::invalid_argument("QuantumState: null basis");
    if (n != static_cast<Eigen::Index>(basis->total_dim())) {
      throw std::invalid_argument("QuantumState: data size does not match basis");
    }
  }

  BasisPtr basis_;
  std::variant<Ket, DenseMatrix> data_;
};

inline Complex expectation(const QuantumState& state, const Operator& op) {
  if (!same_basis(state.basis_ptr(), op.basis_ptr())) {
    throw std::invalid_argument("expectation: basis mismatch");
  }
  if (state.is_pure()) {
    const Ket& k = state.ket();
    return k.dot(op.matrix() * k);  // dot conjugates the left argument
  }
  const DenseMatrix prod = op.matrix() * state.rho();
  return prod.trace();
}

/// Ordered set of basis indices spanning an invariant subspace (e.g. an
/// excitation-number sector). Used to shrink simulations without changing them.
class Subspace {
 public:
  Subspace(BasisPtr basis, std::vector<std::size_t> indices)
      : basis_(std::move(basis)), indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
    position_.assign(basis_->total_dim(), -1);
    for (std::size_t p = 0; p < indices_.size(); ++p) {
      if (indices_[p] >= basis_->total_dim()) throw std::out_of_range("Subspace: index out of range");
      position_[indices_[p]] = static_cast<long>(p);
    }
  }

  static Subspace full(BasisPtr basis) {
    std::vector<std::size_t> idx(basis->total_dim());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return Subspace(std::move(basis), std::move(idx));
  }

  template <class Pred>
  static Subspace where(BasisPtr basis, Pred keep_excitation) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < basis->total_dim(); ++i) {
      if (keep_excitation(basis->excitation(i))) idx.push_back(i);
    }
    return Subspace(std::move(basis), std::move(idx));
  }

  static Subspace sector(BasisPtr basis, int n) {
    return where(std::move(basis), [n](int e) { return e == n; });
  }

  static Subspace at_most(BasisPtr basis, int n_max) {
    return where(std::move(basis), [n_max](int e) { return e <= n_max; });
  }

  const BasisPtr& basis_ptr() const noexcept { return basis_; }
  std::size_t dim() const noexcept { return indices_.size(); }
  const std::vector<std::size_t>& indices() const noexcept { return indices_; }
  bool is_full() const noexcept { return indices_.size() == basis_->total_dim(); }

  std::optional<std::size_t> position(std::size_t full_index) const {
    if (full_index >= position_.size() || position_[full_index] < 0) return std::nullopt;
    return static_cast<std::size_t>(position_[full_index]);
  }

  // Block P^T A P; entries leaving the subspace are dropped.
  SparseMatrix restrict(const SparseMatrix& a) const {
    std::vector<Eigen::Triplet<Complex>> trips;
    for (std::size_t p = 0; p < indices_.size(); ++p) {
      const auto row = static_cast<Eigen::Index>(indices_[p]);
      for (SparseMatrix::InnerIterator it(a, row); it; ++it) {
        const long q = position_[static_cast<std::size_t>(it.col())];
        if (q >= 0) trips.emplace_back(static_cast<int>(p), static_cast<int>(q), it.value());
      }
    }
    const auto n = static_cast<Eigen::Index>(indices_.size());
    SparseMatrix out(n, n);
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
    return out;
  }

  // Weight of a full-space vector outside the subspace.
  double leakage(const Ket& full) const {
    double inside = 0.0;
    for (std::size_t i : indices_) inside += std::norm(full(static_cast<Eigen::Index>(i)));
    return std::max(0.0, full.squaredNorm() - inside);
  }

  Ket restrict(const Ket& full) const {
    Ket out(static_cast<Eigen::Index>(indices_.size()));
    for (std::size_t p = 0; p < indices_.size(); ++p) {
      out(static_cast<Eigen::Index>(p)) = full(static_cast<Eigen::Index>(indices_[p]));
    }
    return out;
  }

  DenseMatrix restrict(const DenseMatrix& full) const {
    const auto n = static_cast<Eigen::Index>(indices_.size());
    DenseMatrix out(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      for (Eigen::Index r = 0; r < n; ++r) {
        out(r, c) = full(static_cast<Eigen::Index>(indices_[static_cast<std::size_t>(r)]),
                         static_cast<Eigen::Index>(indices_[static_cast<std::size_t>(c)]));
      }
    }
    return out;
  }

  Ket lift(const Ket& sub) const {
    Ket out = Ket::Zero(static_cast<Eigen::Index>(basis_->total_dim()));
    for (std::size_t p = 0; p < indices_.size(); ++p) {
      out(static_cast<Eigen::Index>(indices_[p])) = sub(static_cast<Eigen::Index>(p));
    }
    return out;
  }

  DenseMatrix lift(const DenseMatrix& sub) const {
    const auto total = static_cast<Eigen::Index>(basis_->total_dim());
    DenseMatrix out = DenseMatrix::Zero(total, total);
    const auto n = static_cast<Eigen::Index>(indices_.size());
    for (Eigen::Index c = 0; c < n; ++c) {
      for (Eigen::Index r = 0; r < n; ++r) {
        out(static_cast<Eigen::Index>(indices_[static_cast<std::size_t>(r)]),
            static_cast<Eigen::Index>(indices_[static_cast<std::size_t>(c)])) = sub(r, c);
      }
    }
    return out;
  }

 private:
  BasisPtr basis_;
  std::vector<std::size_t> indices_;
  std::vector<long> position_;
};

}  // namespace mbsyn
