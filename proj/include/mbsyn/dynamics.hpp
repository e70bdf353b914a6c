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

// Fixed-step RK4 propagation of kets (Schroedinger) and density matrices
// (Lindblad) over piecewise-constant segments.
//
// run_schedule() is the workhorse. It restricts the problem to the
// excitation-number sectors the initial state can reach (exact for the RWA
// model, whose Hamiltonian conserves N and whose jump operators lower it by
// at most one), and subtracts 2*pi*ref*N from H. The shift commutes with
// everything, so populations are untouched, but the integrator only has to
// resolve detuning-scale frequencies instead of ~20 GHz level energies. The
// final state is rotated back to the unshifted frame before it is returned.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mbsyn/device.hpp"
#include "mbsyn/errors.hpp"
#include "mbsyn/operators.hpp"

namespace mbsyn {

enum class EvolutionMode { Pure, Lindblad };

/// Bare: populations of the tracked product states. Dressed: populations of
/// their adiabatic continuations in the current segment's eigenbasis (see
/// DressedFrame).
enum class ReadoutFrame { Bare, Dressed };

inline const char* to_string(EvolutionMode m) { return m == EvolutionMode::Pure ? "pure" : "lindblad"; }
inline const char* to_string(ReadoutFrame f) { return f == ReadoutFrame::Bare ? "bare" : "dressed"; }

struct Segment {
  double duration = 0.0;  // ns
  DetuningVector detuning;
  std::string label;
  double sample_interval = 0.0;  // ns; 0 records only the segment end
};

/// Worst-case integrator health over a run.
struct SolverDiagnostics {
  double max_norm_drift = 0.0;          // pure: | |psi|^2 - 1 | before renormalization
  double max_trace_drift = 0.0;         // lindblad: |Tr rho - 1|
  double max_hermiticity_error = 0.0;   // lindblad: max |rho - rho^dag| before symmetrization
  double min_eigenvalue = 0.0;          // lindblad: smallest eigenvalue at sampled times
  double max_excitation_drift = 0.0;    // pure: |<N>(t) - <N>(0)|
  std::size_t steps = 0;
};

struct TraceResult {
  std::vector<double> times;                     // ns
  std::vector<std::string> labels;               // tracked states, e.g. "01111"
  std::vector<std::vector<double>> populations;  // [label][sample]
  std::vector<double> total_population;          // over the complete basis
  std::optional<QuantumState> final_state;
  DenseMatrix tracked_density;                   // <s_i|rho|s_j> in the readout frame at the end
  SolverDiagnostics diagnostics;

  const std::vector<double>& series(std::string_view label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) return populations[i];
    }
    throw std::out_of_range("TraceResult: state " + std::string(label) + " is not tracked");
  }
};

namespace detail {

inline void check_step(double duration, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be > 0");
  if (!(duration >= 0.0)) throw std::invalid_argument("duration must be >= 0");
  if (dt > duration) throw std::invalid_argument("time step exceeds duration");
}

// Splits `duration` into n equal steps no longer than dt.
inline std::pair<std::size_t, double> step_grid(double duration, double dt) {
  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(duration / dt - 1e-9)));
  return {n, duration / static_cast<double>(n)};
}

// Segment-relative recording times: every multiple of sample_interval
// inside the segment, then its end. Steps are fitted between marks so the
// samples land exactly on the requested grid for any dt.
inline std::vector<double> sample_marks(double duration, double sample_interval) {
  std::vector<double> marks;
  if (sample_interval > 0.0) {
    for (std::size_t j = 1;; ++j) {
      const double t = static_cast<double>(j) * sample_interval;
      if (t >= duration * (1.0 - 1e-12)) break;
      marks.push_back(t);
    }
  }
  marks.push_back(duration);
  return marks;
}

class PureEngine {
 public:
  explicit PureEngine(SparseMatrix h) : h_(std::move(h)) {}

  // One RK4 step of dpsi/dt = -i H psi; returns the norm drift it removed.
  double step(Ket& psi, double dt) {
    const Complex mi(0.0, -1.0);
    k1_.noalias() = mi * (h_ * psi);
    tmp_ = psi + (0.5 * dt) * k1_;
    k2_.noalias() = mi * (h_ * tmp_);
    tmp_ = psi + (0.5 * dt) * k2_;
    k3_.noalias() = mi * (h_ * tmp_);
    tmp_ = psi + dt * k3_;
    k4_.noalias() = mi * (h_ * tmp_);
    psi += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    const double n2 = psi.squaredNorm();
    psi /= std::sqrt(n2);
    return std::abs(n2 - 1.0);
  }

 private:
  SparseMatrix h_;
  Ket k1_, k2_, k3_, k4_, tmp_;
};

// Lindblad RK4 on a graded space. States carry an integer grade (the
// excitation number); H must preserve it and every jump operator must shift
// it by a fixed amount. Then a block rho_{pq} only ever feeds blocks with the
// same grade offset, so only the offsets present initially are integrated.
// Operators that break the grading fall back to a single block.
class LindbladEngine {
 public:
  LindbladEngine(const SparseMatrix& h, const std::vector<SparseMatrix>& collapse,
                 std::vector<int> grade) {
    const auto n = static_cast<Eigen::Index>(grade.size());
    if (h.rows() != n) throw std::invalid_argument("LindbladEngine: grade size mismatch");

    std::vector<int> shift(collapse.size(), 0);
    std::vector<bool> diagonal(collapse.size(), true);
    bool graded = preserves(h, grade, 0);
    for (std::size_t c = 0; c < collapse.size(); ++c) {
      const auto& l = collapse[c];
      std::optional<int> s;
      for (Eigen::Index r = 0; r < l.outerSize(); ++r) {
        for (SparseMatrix::InnerIterator it(l, r); it; ++it) {
          if (it.value() == Complex(0.0)) continue;
          if (it.row() != it.col()) diagonal[c] = false;
          const int d = grade[static_cast<std::size_t>(it.row())] - grade[static_cast<std::size_t>(it.col())];
          if (!s) s = d;
          if (*s != d) graded = false;
        }
      }
      shift[c] = s.value_or(0);
    }
    if (!graded) std::fill(grade.begin(), grade.end(), 0);

    // Order states by (grade, index) so every grade is a contiguous block.
    order_.resize(grade.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::size_t a, std::size_t b) { return grade[a] < grade[b]; });
    inverse_.assign(order_.size(), 0);
    for (std::size_t p = 0; p < order_.size(); ++p) inverse_[order_[p]] = p;
    for (std::size_t p = 0; p < order_.size(); ++p) {
      const int g = grade[order_[p]];
      if (grades_.empty() || grades_.back() != g) {
        grades_.push_back(g);
        offset_.push_back(static_cast<Eigen::Index>(p));
        size_.push_back(0);
      }
      ++size_.back();
    }

    const DenseMatrix hp = permute(DenseMatrix(h));
    DenseMatrix decay = DenseMatrix::Zero(n, n);  // sum L^dag L
    diag_rates_ = Eigen::MatrixXcd::Zero(n, n);
    for (std::size_t c = 0; c < collapse.size(); ++c) {
      const DenseMatrix lp = permute(DenseMatrix(collapse[c]));
      decay += lp.adjoint() * lp;
      if (diagonal[c]) {
        const Eigen::VectorXcd d = lp.diagonal();
        diag_rates_ += d * d.adjoint();
        continue;
      }
      // Jump blocks L[target <- source]; keep only those with nonzero entries.
      for (std::size_t src = 0; src < grades_.size(); ++src) {
        const auto tgt = block_of(grades_[src] + shift[c]);
        if (!tgt) continue;
        const DenseMatrix blk = lp.block(offset_[*tgt], offset_[src], size_[*tgt], size_[src]);
        if (blk.cwiseAbs().maxCoeff() == 0.0) continue;
        SparseMatrix sp = blk.sparseView();
        SparseMatrix spd = sp.adjoint();
        jumps_.push_back({c, src, *tgt, std::move(sp), std::move(spd)});
      }
    }
    heff_.resize(grades_.size());
    for (std::size_t b = 0; b < grades_.size(); ++b) {
      heff_[b] = hp.block(offset_[b], offset_[b], size_[b], size_[b]) -
                 Complex(0.0, 0.5) * decay.block(offset_[b], offset_[b], size_[b], size_[b]);
    }
  }

  Eigen::Index dim() const { return static_cast<Eigen::Index>(order_.size()); }

  DenseMatrix to_internal(const DenseMatrix& rho) const { return permute(rho); }

  DenseMatrix from_internal(const DenseMatrix& rho) const {
    const Eigen::Index n = dim();
    DenseMatrix out(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      for (Eigen::Index r = 0; r < n; ++r) {
        out(r, c) = rho(static_cast<Eigen::Index>(inverse_[static_cast<std::size_t>(r)]),
                        static_cast<Eigen::Index>(inverse_[static_cast<std::size_t>(c)]));
      }
    }
    return out;
  }

  // Decides which (row-block, col-block) pairs can ever be nonzero, given
  // the (internal-order) initial state.
  void activate(const DenseMatrix& rho) {
    std::vector<int> offsets;
    for (std::size_t p = 0; p < grades_.size(); ++p) {
      for (std::size_t q = 0; q <= p; ++q) {
        if (rho.block(offset_[p], offset_[q], size_[p], size_[q]).cwiseAbs().maxCoeff() > 0.0) {
          offsets.push_back(grades_[p] - grades_[q]);
        }
      }
    }
    active_.clear();
    for (std::size_t p = 0; p < grades_.size(); ++p) {
      for (std::size_t q = 0; q <= p; ++q) {
        if (std::find(offsets.begin(), offsets.end(), grades_[p] - grades_[q]) != offsets.end()) {
          active_.emplace_back(p, q);
        }
      }
    }
    // L rho L^dag terms: both factors must come from the same operator.
    feeds_.clear();
    for (std::size_t a = 0; a < jumps_.size(); ++a) {
      for (std::size_t b = 0; b < jumps_.size(); ++b) {
        const Jump& jp = jumps_[a];
        const Jump& jq = jumps_[b];
        if (jp.op != jq.op) continue;
        if (is_active(jp.target, jq.target) && is_active(jp.source, jq.source)) feeds_.emplace_back(a, b);
      }
    }
  }

  // One RK4 step on the internal-order density matrix. Returns the
  // anti-Hermitian part that integration produced before symmetrization.
  double step(DenseMatrix& rho, double dt) {
    if (k1_.rows() != rho.rows()) {
      k1_ = k2_ = k3_ = k4_ = tmp_ = DenseMatrix::Zero(rho.rows(), rho.cols());
    }
    derivative(rho, k1_);
    tmp_ = rho + (0.5 * dt) * k1_;
    derivative(tmp_, k2_);
    tmp_ = rho + (0.5 * dt) * k2_;
    derivative(tmp_, k3_);
    tmp_ = rho + dt * k3_;
    derivative(tmp_, k4_);
    rho += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    tmp_ = 0.5 * (rho + rho.adjoint());
    rho.swap(tmp_);
    return herm;
  }

 private:
  struct Jump {
    std::size_t op;
    std::size_t source;
    std::size_t target;
    SparseMatrix matrix;   // ladder operators: one entry per column, so keep them sparse
    SparseMatrix adjoint;
  };

  static bool preserves(const SparseMatrix& m, const std::vector<int>& grade, int shift) {
    for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
        if (it.value() == Complex(0.0)) continue;
        if (grade[static_cast<std::size_t>(it.row())] - grade[static_cast<std::size_t>(it.col())] != shift) {
          return false;
        }
      }
    }
    return true;
  }

  std::optional<std::size_t> block_of(int grade) const {
    const auto it = std::lower_bound(grades_.begin(), grades_.end(), grade);
    if (it == grades_.end() || *it != grade) return std::nullopt;
    return static_cast<std::size_t>(it - grades_.begin());
  }

  DenseMatrix permute(const DenseMatrix& m) const {
    const Eigen::Index n = dim();
    DenseMatrix out(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      for (Eigen::Index r = 0; r < n; ++r) {
        out(r, c) = m(static_cast<Eigen::Index>(order_[static_cast<std::size_t>(r)]),
                      static_cast<Eigen::Index>(order_[static_cast<std::size_t>(c)]));
      }
    }
    return out;
  }

  void derivative(const DenseMatrix& rho, DenseMatrix& out) {
    const Complex mi(0.0, -1.0);
    for (const auto& [p, q] : active_) {
      auto blk = rho.block(offset_[p], offset_[q], size_[p], size_[q]);
      auto dst = out.block(offset_[p], offset_[q], size_[p], size_[q]);
      // -i(Heff rho - rho Heff^dag) + diagonal-jump term
      dst.noalias() = mi * (heff_[p] * blk);
      dst.noalias() -= mi * (blk * heff_[q].adjoint());
      dst += diag_rates_.block(offset_[p], offset_[q], size_[p], size_[q]).cwiseProduct(blk);
    }
    for (const auto& [a, b] : feeds_) {
      const Jump& jp = jumps_[a];
      const Jump& jq = jumps_[b];
      scratch_.noalias() = jp.matrix * rho.block(offset_[jp.source], offset_[jq.source], size_[jp.source],
                                                 size_[jq.source]);
      out.block(offset_[jp.target], offset_[jq.target], size_[jp.target], size_[jq.target]).noalias() +=
          scratch_ * jq.adjoint;
    }
    // Mirror the lower-triangular blocks.
    for (const auto& [p, q] : active_) {
      if (p == q) continue;
      out.block(offset_[q], offset_[p], size_[q], size_[p]) =
          out.block(offset_[p], offset_[q], size_[p], size_[q]).adjoint();
    }
  }

  bool is_active(std::size_t p, std::size_t q) const {
    if (p < q) return false;  // only the lower triangle is integrated
    return std::find(active_.begin(), active_.end(), std::make_pair(p, q)) != active_.end();
  }

  std::vector<std::size_t> order_, inverse_;
  std::vector<int> grades_;
  std::vector<Eigen::Index> offset_, size_;
  std::vector<DenseMatrix> heff_;
  DenseMatrix diag_rates_;
  std::vector<Jump> jumps_;
  std::vector<std::pair<std::size_t, std::size_t>> active_;
  std::vector<std::pair<std::size_t, std::size_t>> feeds_;
  DenseMatrix scratch_;
  DenseMatrix k1_, k2_, k3_, k4_, tmp_;
};

}  // namespace detail

namespace detail {

// Orthonormal readout vectors for the tracked states in `positions` (all in
// one excitation sector of `h`). Takes the |group| eigenvectors with the most
// weight on the group's span, projects each bare state onto them, and
// symmetrically orthonormalizes (Loewdin), which is the rotation of the bare
// frame closest to the identity.
inline DenseMatrix dressed_group(const DenseMatrix& h, const std::vector<Eigen::Index>& positions) {
  const Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h);
  const DenseMatrix& v = es.eigenvectors();
  const auto g = static_cast<Eigen::Index>(positions.size());
  std::vector<std::pair<double, Eigen::Index>> weight;
  for (Eigen::Index k = 0; k < v.cols(); ++k) {
    double w = 0.0;
    for (auto p : positions) w += std::norm(v(p, k));
    weight.emplace_back(-w, k);
  }
  std::stable_sort(weight.begin(), weight.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  DenseMatrix q(v.rows(), g);
  for (Eigen::Index k = 0; k < g; ++k) q.col(k) = v.col(weight[static_cast<std::size_t>(k)].second);
  DenseMatrix u(v.rows(), g);
  for (Eigen::Index k = 0; k < g; ++k) u.col(k) = q * q.row(positions[static_cast<std::size_t>(k)]).adjoint();
  const DenseMatrix s = u.adjoint() * u;
  const Eigen::SelfAdjointEigenSolver<DenseMatrix> ss(s);
  if (ss.eigenvalues().minCoeff() < 1e-8) {
    throw NumericalError("dressed frame: tracked states are not resolved by the segment eigenbasis");
  }
  const DenseMatrix s_inv_sqrt = ss.eigenvectors() *
                                 ss.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                                 ss.eigenvectors().adjoint();
  return u * s_inv_sqrt;
}

// Columns are the readout vectors of the tracked states, in the coordinates
// of `sub`. States outside the subspace get a zero column.
inline DenseMatrix readout_vectors(const SparseMatrix& h_sub, const Subspace& sub,
                                   const std::vector<std::size_t>& tracked, ReadoutFrame frame) {
  const auto n = static_cast<Eigen::Index>(sub.dim());
  DenseMatrix out = DenseMatrix::Zero(n, static_cast<Eigen::Index>(tracked.size()));
  if (frame == ReadoutFrame::Bare) {
    for (std::size_t t = 0; t < tracked.size(); ++t) {
      if (auto p = sub.position(tracked[t])) out(static_cast<Eigen::Index>(*p), static_cast<Eigen::Index>(t)) = 1.0;
    }
    return out;
  }
  const ProductBasis& basis = *sub.basis_ptr();
  std::map<int, std::vector<std::size_t>> groups;  // excitation -> tracked slots
  for (std::size_t t = 0; t < tracked.size(); ++t) {
    if (sub.position(tracked[t])) groups[basis.excitation(tracked[t])].push_back(t);
  }
  const DenseMatrix hd(h_sub);
  for (const auto& [exc, slots] : groups) {
    std::vector<Eigen::Index> sector;  // subspace positions in this excitation sector
    for (std::size_t p = 0; p < sub.dim(); ++p) {
      if (basis.excitation(sub.indices()[p]) == exc) sector.push_back(static_cast<Eigen::Index>(p));
    }
    const auto m = static_cast<Eigen::Index>(sector.size());
    DenseMatrix hs(m, m);
    for (Eigen::Index c = 0; c < m; ++c) {
      for (Eigen::Index r = 0; r < m; ++r) hs(r, c) = hd(sector[static_cast<std::size_t>(r)], sector[static_cast<std::size_t>(c)]);
    }
    std::vector<Eigen::Index> local;
    for (std::size_t t : slots) {
      const auto p = static_cast<Eigen::Index>(*sub.position(tracked[t]));
      local.push_back(static_cast<Eigen::Index>(std::find(sector.begin(), sector.end(), p) - sector.begin()));
    }
    const DenseMatrix vecs = dressed_group(hs, local);
    for (std::size_t k = 0; k < slots.size(); ++k) {
      for (Eigen::Index r = 0; r < m; ++r) {
        out(sector[static_cast<std::size_t>(r)], static_cast<Eigen::Index>(slots[k])) = vecs(r, static_cast<Eigen::Index>(k));
      }
    }
  }
  return out;
}

struct CompiledSegment {
  SparseMatrix h;       // subspace coordinates, energy reference already removed
  DenseMatrix readout;  // subspace coordinates
  double duration = 0.0;
  double sample_interval = 0.0;
};

struct RunSetup {
  Subspace sub;
  std::vector<CompiledSegment> segments;
  std::vector<SparseMatrix> collapse;  // subspace coordinates; lindblad only
  std::vector<std::string> labels;
  EvolutionMode mode = EvolutionMode::Pure;
  double dt = 0.0;
  double energy_reference = 0.0;  // GHz, removed as 2*pi*ref*N
  bool check_positivity = false;
};

inline TraceResult execute(const RunSetup& setup, const QuantumState& initial) {
  const Subspace& sub = setup.sub;
  const ProductBasis& basis = *sub.basis_ptr();
  const auto n = static_cast<Eigen::Index>(sub.dim());
  std::vector<int> grade(sub.dim());
  Eigen::VectorXd exc(n);
  for (std::size_t p = 0; p < sub.dim(); ++p) {
    grade[p] = basis.excitation(sub.indices()[p]);
    exc(static_cast<Eigen::Index>(p)) = grade[p];
  }

  TraceResult out;
  out.labels = setup.labels;
  out.populations.assign(setup.labels.size(), {});
  auto& diag = out.diagnostics;

  const bool pure = setup.mode == EvolutionMode::Pure;
  Ket psi;
  DenseMatrix rho;
  if (pure) {
    if (!initial.is_pure()) throw std::invalid_argument("pure evolution needs a ket");
    psi = sub.restrict(initial.ket());
    if (sub.leakage(initial.ket()) > 1e-12) throw std::invalid_argument("initial state leaves the simulated subspace");
  } else {
    const DenseMatrix full = initial.density_matrix();
    rho = sub.restrict(full);
    const double outside = std::abs(full.trace() - rho.trace());
    if (outside > 1e-12) throw std::invalid_argument("initial state leaves the simulated subspace");
  }
  const double n0 = pure ? psi.cwiseAbs2().dot(exc) : 0.0;

  double t = 0.0;
  const DenseMatrix* frame = setup.segments.empty() ? nullptr : &setup.segments.front().readout;
  std::optional<detail::LindbladEngine> engine;

  const auto record = [&](const DenseMatrix& v) {
    out.times.push_back(t);
    if (pure) {
      const Ket c = v.adjoint() * psi;
      for (std::size_t k = 0; k < setup.labels.size(); ++k) {
        out.populations[k].push_back(std::norm(c(static_cast<Eigen::Index>(k))));
      }
      out.total_population.push_back(psi.squaredNorm());
      diag.max_excitation_drift = std::max(diag.max_excitation_drift, std::abs(psi.cwiseAbs2().dot(exc) - n0));
    } else {
      const DenseMatrix r = engine ? engine->from_internal(rho) : rho;
      const DenseMatrix proj = v.adjoint() * r * v;
      for (std::size_t k = 0; k < setup.labels.size(); ++k) {
        out.populations[k].push_back(proj(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)).real());
      }
      const double tr = r.trace().real();
      out.total_population.push_back(tr);
      diag.max_trace_drift = std::max(diag.max_trace_drift, std::abs(tr - 1.0));
      if (setup.check_positivity) {
        const Eigen::SelfAdjointEigenSolver<DenseMatrix> es(r, Eigen::EigenvaluesOnly);
        diag.min_eigenvalue = std::min(diag.min_eigenvalue, es.eigenvalues().minCoeff());
      }
    }
  };

  if (frame) record(*frame);
  for (const auto& seg : setup.segments) {
    if (seg.duration <= 0.0) continue;
    const double t_start = t;
    const std::vector<double> marks = sample_marks(seg.duration, seg.sample_interval);
    std::optional<PureEngine> pure_engine;
    if (pure) {
      pure_engine.emplace(seg.h);
    } else {
      engine.emplace(seg.h, setup.collapse, grade);
      rho = engine->to_internal(rho);
      engine->activate(rho);
    }
    double from = 0.0;
    for (double mark : marks) {
      const auto [steps, h] = step_grid(mark - from, setup.dt);
      for (std::size_t k = 1; k <= steps; ++k) {
        if (pure) {
          diag.max_norm_drift = std::max(diag.max_norm_drift, pure_engine->step(psi, h));
        } else {
          diag.max_hermiticity_error = std::max(diag.max_hermiticity_error, engine->step(rho, h));
          diag.max_trace_drift = std::max(diag.max_trace_drift, std::abs(rho.trace().real() - 1.0));
        }
      }
      diag.steps += steps;
      from = mark;
      t = t_start + mark;
      record(seg.readout);
    }
    if (!pure) {
      rho = engine->from_internal(rho);
      engine.reset();
    }
    frame = &seg.readout;
  }

  // Back to the unshifted frame: psi_lab = exp(-i 2 pi ref N t) psi.
  const double theta = kTwoPi * setup.energy_reference * t;
  if (pure) {
    for (Eigen::Index p = 0; p < n; ++p) psi(p) *= std::polar(1.0, -theta * exc(p));
    out.final_state = QuantumState::pure(sub.basis_ptr(), sub.lift(psi));
    if (frame) {
      const Ket c = frame->adjoint() * psi;
      out.tracked_density = c * c.adjoint();
    }
  } else {
    for (Eigen::Index c = 0; c < n; ++c) {
      for (Eigen::Index r = 0; r < n; ++r) rho(r, c) *= std::polar(1.0, -theta * (exc(r) - exc(c)));
    }
    out.final_state = QuantumState::density(sub.basis_ptr(), sub.lift(rho));
    if (frame) out.tracked_density = frame->adjoint() * rho * *frame;
  }
  return out;
}

inline std::vector<std::size_t> resolve_labels(const ProductBasis& basis, const std::vector<std::string>& labels) {
  std::vector<std::size_t> idx;
  for (const auto& l : labels) idx.push_back(basis.index_of(l));
  return idx;
}

inline SparseMatrix shift_reference(SparseMatrix h, const Subspace& sub, double ref) {
  if (ref == 0.0) return h;
  for (std::size_t p = 0; p < sub.dim(); ++p) {
    const auto i = static_cast<Eigen::Index>(p);
    h.coeffRef(i, i) -= kTwoPi * ref * sub.basis_ptr()->excitation(sub.indices()[p]);
  }
  h.makeCompressed();
  return h;
}

}  // namespace detail

struct EvolveOptions {
  double sample_interval = 0.0;      // ns; 0 records only t = 0 and the end
  std::vector<std::string> tracked;  // labels; empty tracks every basis state
  bool check_positivity = false;
};

namespace detail {

inline std::vector<std::string> tracked_or_all(const ProductBasis& basis, const std::vector<std::string>& tracked) {
  if (!tracked.empty()) return tracked;
  std::vector<std::string> all;
  for (std::size_t i = 0; i < basis.total_dim(); ++i) all.push_back(basis.label(i));
  return all;
}

inline void check_hermitian(const Operator& h) {
  const double scale = std::max(1.0, max_abs_entry(h));
  if (h.hermiticity_error() > 1e-9 * scale) throw std::invalid_argument("Hamiltonian is not Hermitian");
}

inline TraceResult evolve_full(const Operator& h, const std::vector<Operator>& collapse, const QuantumState& s0,
                               double duration, double dt, const EvolveOptions& opt, EvolutionMode mode) {
  check_step(duration, dt);
  check_hermitian(h);
  if (!same_basis(h.basis_ptr(), s0.basis_ptr())) throw std::invalid_argument("state and Hamiltonian bases differ");
  s0.validate();
  RunSetup setup{Subspace::full(h.basis_ptr()), {}, {}, {}, mode, dt, 0.0, opt.check_positivity};
  setup.labels = tracked_or_all(*h.basis_ptr(), opt.tracked);
  const auto idx = resolve_labels(*h.basis_ptr(), setup.labels);
  setup.segments.push_back({h.matrix(), readout_vectors(h.matrix(), setup.sub, idx, ReadoutFrame::Bare), duration,
                            opt.sample_interval});
  for (const auto& l : collapse) {
    if (!same_basis(l.basis_ptr(), h.basis_ptr())) throw std::invalid_argument("collapse operator basis differs");
    setup.collapse.push_back(l.matrix());
  }
  return execute(setup, s0);
}

}  // namespace detail

/// Solves i dpsi/dt = H psi with fixed-step RK4 on the full space.
inline TraceResult evolve_pure(const Operator& h, const QuantumState& psi0, double duration, double dt,
                               const EvolveOptions& opt = {}) {
  if (!psi0.is_pure()) throw std::invalid_argument("evolve_pure: initial state must be a ket");
  return detail::evolve_full(h, {}, psi0, duration, dt, opt, EvolutionMode::Pure);
}

/// Integrates the Lindblad master equation with fixed-step RK4 on the full space.
inline TraceResult evolve_lindblad(const Operator& h, const std::vector<Operator>& collapse, const QuantumState& rho0,
                                   double duration, double dt, const EvolveOptions& opt = {}) {
  return detail::evolve_full(h, collapse, rho0.to_density(), duration, dt, opt, EvolutionMode::Lindblad);
}

struct ScheduleOptions {
  EvolutionMode mode = EvolutionMode::Pure;
  double dt = 0.01;  // ns
  ReadoutFrame frame = ReadoutFrame::Bare;
  std::vector<std::string> tracked;
  std::optional<double> energy_reference;  // GHz; defaults to the mean cascade transition
  bool restrict_subspace = true;
  bool check_positivity = false;
};

/// The simulated subspace: every excitation sector the initial state
/// touches (pure), or all sectors up to its highest one (lindblad, since
/// relaxation only lowers N).
inline Subspace simulation_subspace(const BasisPtr& basis, const QuantumState& s, EvolutionMode mode) {
  std::vector<bool> present(64, false);
  int highest = 0;
  const DenseMatrix rho = s.is_pure() ? DenseMatrix() : s.rho();
  for (std::size_t i = 0; i < basis->total_dim(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    const double w = s.is_pure() ? std::norm(s.ket()(e)) : std::abs(rho(e, e));
    if (w > 0.0) {
      const int n = basis->excitation(i);
      present[static_cast<std::size_t>(n)] = true;
      highest = std::max(highest, n);
    }
  }
  if (mode == EvolutionMode::Lindblad) return Subspace::at_most(basis, highest);
  return Subspace::where(basis, [&](int n) { return present[static_cast<std::size_t>(n)]; });
}

/// Readout vectors of `labels` for the device biased by `detuning`, as
/// full-space kets (what an adiabatic ramp into that bias point prepares).
inline std::vector<Ket> dressed_kets(const DeviceSpec& device, const DetuningVector& detuning,
                                     const std::vector<std::string>& labels) {
  const BasisPtr basis = device.basis();
  const auto idx = detail::resolve_labels(*basis, labels);
  const Subspace sub = Subspace::where(basis, [&](int n) {
    return std::any_of(idx.begin(), idx.end(), [&](std::size_t i) { return basis->excitation(i) == n; });
  });
  const SparseMatrix h = sub.restrict(build_hamiltonian(device, detuning).matrix());
  const DenseMatrix v = detail::readout_vectors(h, sub, idx, ReadoutFrame::Dressed);
  std::vector<Ket> out;
  for (Eigen::Index k = 0; k < v.cols(); ++k) out.push_back(sub.lift(Ket(v.col(k))));
  return out;
}

/// Evolves through the segments in order, rebuilding H for each.
inline TraceResult run_schedule(const DeviceSpec& device, const std::vector<Segment>& segments,
                                const QuantumState& initial, const ScheduleOptions& opt) {
  if (segments.empty()) throw std::invalid_argument("run_schedule: no segments");
  if (!(opt.dt > 0.0)) throw std::invalid_argument("run_schedule: time step must be > 0");
  if (auto issues = device.validate(); !issues.empty()) throw ConfigError(issues);
  const BasisPtr basis = device.basis();
  if (!same_basis(basis, initial.basis_ptr())) throw std::invalid_argument("run_schedule: state basis differs from device");
  initial.validate();
  const QuantumState start = opt.mode == EvolutionMode::Lindblad ? initial.to_density() : initial;
  if (opt.mode == EvolutionMode::Pure && !start.is_pure()) {
    throw std::invalid_argument("run_schedule: pure mode needs a ket");
  }

  detail::RunSetup setup{opt.restrict_subspace ? simulation_subspace(basis, start, opt.mode) : Subspace::full(basis),
                         {}, {}, {}, opt.mode, opt.dt, 0.0, opt.check_positivity};
  setup.energy_reference = opt.energy_reference.value_or(cascade_mean_frequency(device));
  setup.labels = detail::tracked_or_all(*basis, opt.tracked);
  const auto idx = detail::resolve_labels(*basis, setup.labels);
  for (const auto& seg : segments) {
    if (!(seg.duration >= 0.0)) throw std::invalid_argument("run_schedule: negative segment duration");
    const SparseMatrix h = setup.sub.restrict(build_hamiltonian(device, seg.detuning).matrix());
    setup.segments.push_back({detail::shift_reference(h, setup.sub, setup.energy_reference),
                              detail::readout_vectors(h, setup.sub, idx, opt.frame), seg.duration,
                              seg.sample_interval});
  }
  if (opt.mode == EvolutionMode::Lindblad) {
    for (const auto& l : collapse_operators(device)) setup.collapse.push_back(setup.sub.restrict(l.matrix()));
  }
  return detail::execute(setup, start);
}

/// CSV: time_ns, then one column per tracked state; 12 significant digits.
inline void write_trace_csv(std::ostream& os, const TraceResult& r) {
  os << "time_ns";
  for (const auto& l : r.labels) os << ',' << l;
  os << '\n';
  char buf[64];
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g", r.times[i]);
    os << buf;
    for (const auto& s : r.populations) {
      std::snprintf(buf, sizeof buf, "%.12g", s[i]);
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace mbsyn
