#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <unordered_map>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include "models.hpp"
#include "pauli.hpp"
#include "series.hpp"

namespace qspin {

struct SpectrumLevel {
  double energy = 0.0;
  int degeneracy = 1;  // number of degenerate multiplets
  int two_s = -1;      // 2S, or -1 when unlabeled
  int multiplet_size() const { return two_s >= 0 ? two_s + 1 : 1; }
};

struct LabeledSpectrum {
  std::vector<SpectrumLevel> levels;
  Eigen::Index dim = 0;

  double ground_energy() const { return levels.empty() ? 0.0 : levels.front().energy; }

  std::vector<SpectrumLevel> excitations() const {
    std::vector<SpectrumLevel> out = levels;
    for (auto& l : out) l.energy -= ground_energy();
    return out;
  }

  // Levels whose excitation energy is within tol of e.
  std::vector<SpectrumLevel> at_excitation(double e, double tol = 1e-3) const {
    std::vector<SpectrumLevel> out;
    for (const auto& l : excitations())
      if (std::abs(l.energy - e) <= tol) out.push_back(l);
    return out;
  }
};

namespace detail {

inline std::vector<std::pair<Eigen::Index, Eigen::Index>> cluster_levels(const Eigen::VectorXd& e, double rel_tol) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> groups;
  if (e.size() == 0) return groups;
  const double width = std::max(e.maxCoeff() - e.minCoeff(), 1.0);
  Eigen::Index start = 0;
  for (Eigen::Index k = 1; k <= e.size(); ++k)
    if (k == e.size() || e(k) - e(k - 1) > rel_tol * width) {
      groups.push_back({start, k - start});
      start = k;
    }
  return groups;
}

inline int two_s_from_s2(double s2) {
  return static_cast<int>(std::lround(std::sqrt(1.0 + 4.0 * std::max(s2, 0.0)) - 1.0));
}

// Labels each degenerate block by diagonalizing S^2 restricted to it.
template <class Matrix, class ApplyS2>
LabeledSpectrum label_spectrum(const Eigen::VectorXd& energies, const Matrix& vectors, ApplyS2&& apply_s2,
                               double rel_tol = 1e-8) {
  LabeledSpectrum out;
  out.dim = energies.size();
  for (auto [start, count] : cluster_levels(energies, rel_tol)) {
    const Matrix block = vectors.middleCols(start, count);
    const Matrix s2v = apply_s2(block);
    Eigen::MatrixXcd m = (block.adjoint() * s2v).template cast<cplx>();
    m = 0.5 * (m + m.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
    std::map<int, int> per_spin;
    for (Eigen::Index k = 0; k < count; ++k) ++per_spin[two_s_from_s2(es.eigenvalues()(k))];
    const double e = energies.segment(start, count).mean();
    for (auto [ts, c] : per_spin) {
      if (c % (ts + 1) != 0)
        throw std::runtime_error("label_spectrum: degenerate block not a union of spin multiplets");
      out.levels.push_back({e, c / (ts + 1), ts});
    }
  }
  return out;
}

}  // namespace detail

// Dense diagonalization of a spin-1/2 Hamiltonian with cached spectral data.
class ExactSolver {
 public:
  explicit ExactSolver(const PauliSum& H, int cap = kDenseCap) : H_(H) {
    const CMatrix m = dense_matrix(H, cap);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
    if (es.info() != Eigen::Success) throw std::runtime_error("ExactSolver: eigensolver failed");
    E_ = es.eigenvalues();
    V_ = es.eigenvectors();
  }

  const PauliSum& hamiltonian() const { return H_; }
  int n_qubits() const { return H_.n_qubits(); }
  const Eigen::VectorXd& energies() const { return E_; }
  const CMatrix& vectors() const { return V_; }

  LabeledSpectrum spectrum() const {
    const PauliSum s2 = total_spin_squared(n_qubits());
    return detail::label_spectrum(E_, V_, [&](const CMatrix& block) {
      CMatrix out(block.rows(), block.cols());
      for (Eigen::Index c = 0; c < block.cols(); ++c) out.col(c) = apply_sum(s2, block.col(c));
      return out;
    });
  }

  // Normalized Boltzmann weights over eigenstates.
  Eigen::VectorXd boltzmann(double beta) const {
    if (beta < 0.0) throw std::invalid_argument("beta must be non-negative");
    Eigen::VectorXd w = (-beta * (E_.array() - E_.minCoeff())).exp();
    return w / w.sum();
  }

  double log_partition(double beta) const {
    const double e0 = E_.minCoeff();
    return -beta * e0 + std::log((-beta * (E_.array() - e0)).exp().sum());
  }
  double partition_function(double beta) const { return std::exp(log_partition(beta)); }

  double energy(double beta) const { return boltzmann(beta).dot(E_); }

  DensityMatrix thermal_state(double beta) const {
    const Eigen::VectorXd p = boltzmann(beta);
    CMatrix rho = V_ * p.cast<cplx>().asDiagonal() * V_.adjoint();
    return DensityMatrix(n_qubits(), 0.5 * (rho + rho.adjoint()));
  }

  // e^{-i H d}; d = t gives real time, d = -i tau gives e^{-tau H}.
  CMatrix propagator(cplx duration) const {
    const CVector phase = (cplx{0.0, -1.0} * duration * E_.cast<cplx>().array()).exp();
    return V_ * phase.asDiagonal() * V_.adjoint();
  }

  CVector evolve(const CVector& v, cplx duration) const {
    const CVector phase = (cplx{0.0, -1.0} * duration * E_.cast<cplx>().array()).exp();
    return V_ * (phase.asDiagonal() * (V_.adjoint() * v));
  }

  // Normalized e^{-tau H}|v> and its norm.
  std::pair<CVector, double> imaginary_evolve(const CVector& v, double tau) const {
    const double e0 = E_.minCoeff();
    const CVector coeff = (-tau * (E_.array() - e0)).exp().cast<cplx>().matrix().cwiseProduct(V_.adjoint() * v);
    CVector out = V_ * coeff;
    const double shifted = out.norm();
    out /= shifted;
    return {out, shifted * std::exp(-tau * e0)};
  }

  CMatrix in_eigenbasis(const PauliSum& A) const {
    require_same_size(A.n_qubits(), n_qubits(), "in_eigenbasis");
    CMatrix av(V_.rows(), V_.cols());
    for (Eigen::Index c = 0; c < V_.cols(); ++c) av.col(c) = apply_sum(A, V_.col(c));
    return V_.adjoint() * av;
  }

  cplx thermal_expectation(double beta, const PauliSum& A) const {
    const Eigen::VectorXd p = boltzmann(beta);
    const CMatrix a = in_eigenbasis(A);
    return p.cast<cplx>().dot(a.diagonal());
  }

  // C(t) = Tr[rho e^{iHt} A e^{-iHt} B] = sum_mn p_m A_mn B_nm e^{i(E_m - E_n)t}.
  TimeSeries dynamic_corr(double beta, const PauliSum& A, const PauliSum& B, const std::vector<double>& t_grid) const {
    require_uniform(t_grid, "dynamic_corr");
    const Eigen::VectorXd p = boltzmann(beta);
    const CMatrix a = in_eigenbasis(A), b = in_eigenbasis(B);
    const CMatrix m = p.cast<cplx>().asDiagonal() * a.cwiseProduct(b.transpose());
    TimeSeries ts;
    ts.times = t_grid;
    for (double t : t_grid) {
      const CVector fwd = (cplx{0.0, t} * E_.cast<cplx>().array()).exp();
      ts.values.push_back(fwd.transpose() * (m * fwd.conjugate()));
    }
    ts.metadata = {{"beta", beta}, {"source", "exact"}};
    return ts;
  }

 private:
  PauliSum H_;
  Eigen::VectorXd E_;
  CMatrix V_;
};

inline LabeledSpectrum eigensystem(const PauliSum& H, int cap = kDenseCap) { return ExactSolver(H, cap).spectrum(); }

inline DensityMatrix thermal_state(const PauliSum& H, double beta) { return ExactSolver(H).thermal_state(beta); }

inline double static_corr_exact(const PauliSum& H, double beta, const PauliSum& A) {
  return ExactSolver(H).thermal_expectation(beta, A).real();
}

inline TimeSeries dynamic_corr_exact(const PauliSum& H, double beta, const PauliSum& A, const PauliSum& B,
                                     const std::vector<double>& t_grid) {
  return ExactSolver(H).dynamic_corr(beta, A, B, t_grid);
}

inline CMatrix propagator(const PauliSum& H, cplx duration) { return ExactSolver(H).propagator(duration); }

// ---- spin-S Heisenberg models ------------------------------------------------

struct SpinSOptions {
  int dense_cap = 4096;   // largest dense dimension
  int lowest_k = 0;       // >0 selects the iterative sector solver
  int krylov_blocks = 40; // iterative: Lanczos blocks per restart cycle
  int block_size = 8;
  int max_restarts = 30;
  double tol = 1e-9;
};

namespace detail {

struct SpinSBasis {
  int n = 0, d = 0;  // d = 2S+1; digit k <-> m = S - k, site 0 most significant
  std::vector<std::uint64_t> states;
  std::vector<std::int64_t> pow;

  int digit(std::uint64_t s, int site) const { return static_cast<int>((s / pow[site]) % d); }
};

inline std::vector<std::pair<int, double>> spin_s_bonds(const BondTopology& topo, const ModelParams& p) {
  std::vector<std::pair<int, double>> out;
  for (std::size_t k = 0; k < topo.bonds().size(); ++k) {
    const auto& b = topo.bonds()[k];
    if (is_kitaev(b.label)) throw std::invalid_argument("spin_s_eigensystem: Heisenberg bonds only");
    out.push_back({static_cast<int>(k), b.label == BondLabel::j_prime ? p.J_prime : p.J});
  }
  return out;
}

// Sparse sum_b c_b S_i.S_j on the states of one basis (closed under the flip-flop terms).
inline Eigen::SparseMatrix<double> spin_s_operator(const SpinSBasis& basis, const std::vector<std::array<int, 2>>& pairs,
                                                   const std::vector<double>& coeff, double identity_shift = 0.0) {
  const double S = 0.5 * (basis.d - 1);
  std::unordered_map<std::uint64_t, int> index;
  index.reserve(basis.states.size() * 2);
  for (std::size_t k = 0; k < basis.states.size(); ++k) index[basis.states[k]] = static_cast<int>(k);
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t col = 0; col < basis.states.size(); ++col) {
    const std::uint64_t s = basis.states[col];
    double diag = identity_shift;
    for (std::size_t b = 0; b < pairs.size(); ++b) {
      const int i = pairs[b][0], j = pairs[b][1];
      const int ki = basis.digit(s, i), kj = basis.digit(s, j);
      const double mi = S - ki, mj = S - kj;
      diag += coeff[b] * mi * mj;
      // S+_i S-_j: m_i -> m_i+1 (digit -1), m_j -> m_j-1 (digit +1)
      if (ki > 0 && kj < basis.d - 1) {
        const double amp = 0.5 * coeff[b] * std::sqrt((S - mi) * (S + mi + 1)) * std::sqrt((S + mj) * (S - mj + 1));
        const std::uint64_t t = s - basis.pow[i] + basis.pow[j];
        trip.emplace_back(index.at(t), static_cast<int>(col), amp);
      }
      if (kj > 0 && ki < basis.d - 1) {
        const double amp = 0.5 * coeff[b] * std::sqrt((S - mj) * (S + mj + 1)) * std::sqrt((S + mi) * (S - mi + 1));
        const std::uint64_t t = s - basis.pow[j] + basis.pow[i];
        trip.emplace_back(index.at(t), static_cast<int>(col), amp);
      }
    }
    trip.emplace_back(static_cast<int>(col), static_cast<int>(col), diag);
  }
  const auto dim = static_cast<Eigen::Index>(basis.states.size());
  Eigen::SparseMatrix<double> m(dim, dim);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

inline SpinSBasis make_spin_s_basis(int n, int two_s, std::optional<int> two_m) {
  SpinSBasis b;
  b.n = n;
  b.d = two_s + 1;
  b.pow.assign(n, 1);
  for (int site = n - 2; site >= 0; --site) b.pow[site] = b.pow[site + 1] * b.d;
  const std::uint64_t total = static_cast<std::uint64_t>(b.pow[0]) * b.d;
  for (std::uint64_t s = 0; s < total; ++s) {
    if (two_m) {
      int sum_k = 0;
      for (int site = 0; site < n; ++site) sum_k += b.digit(s, site);
      if (n * two_s - 2 * sum_k != *two_m) continue;
    }
    b.states.push_back(s);
  }
  return b;
}

inline void all_pairs(int n, std::vector<std::array<int, 2>>& pairs, std::vector<double>& coeff) {
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      pairs.push_back({i, j});
      coeff.push_back(2.0);
    }
}

// Block Lanczos with full reorthogonalization and thick restart on the lowest Ritz vectors.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> lowest_eigenpairs(const Eigen::SparseMatrix<double>& h, int k,
                                                                      const SpinSOptions& opt) {
  const Eigen::Index dim = h.rows();
  const int bs = opt.block_size;
  const int keep = std::min<int>(k + bs, static_cast<int>(dim));
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd basis(dim, 0);
  Eigen::MatrixXd block(dim, bs);
  for (Eigen::Index r = 0; r < dim; ++r)
    for (int c = 0; c < bs; ++c) block(r, c) = normal(rng);
  Eigen::VectorXd ritz;
  Eigen::MatrixXd ritz_vec;
  for (int cycle = 0; cycle < opt.max_restarts; ++cycle) {
    const Eigen::Index max_cols = std::min<Eigen::Index>(dim, basis.cols() + static_cast<Eigen::Index>(opt.krylov_blocks) * bs);
    while (basis.cols() < max_cols) {
      for (int pass = 0; pass < 2; ++pass) block -= basis * (basis.transpose() * block);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(block);
      Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, block.cols());
      const Eigen::Index add = std::min<Eigen::Index>(q.cols(), max_cols - basis.cols());
      basis.conservativeResize(Eigen::NoChange, basis.cols() + add);
      basis.rightCols(add) = q.leftCols(add);
      block = h * q.leftCols(add);
    }
    const Eigen::MatrixXd t = basis.transpose() * (h * basis);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (t + t.transpose()));
    ritz = es.eigenvalues().head(keep);
    ritz_vec = basis * es.eigenvectors().leftCols(keep);
    const Eigen::MatrixXd resid = h * ritz_vec.leftCols(k) - ritz_vec.leftCols(k) * ritz.head(k).asDiagonal();
    double worst = 0.0;
    for (int c = 0; c < k; ++c) worst = std::max(worst, resid.col(c).norm());
    if (worst < opt.tol * std::max(1.0, ritz.cwiseAbs().maxCoeff())) break;
    basis = ritz_vec;
    block = h * ritz_vec - ritz_vec * ritz.asDiagonal();
  }
  return {ritz.head(k), ritz_vec.leftCols(k)};
}

}  // namespace detail

// Heisenberg model sum J_ij S_i.S_j with spin-S operators (two_s = 2S).
inline LabeledSpectrum spin_s_eigensystem(const BondTopology& topo, const ModelParams& p, int two_s,
                                          const SpinSOptions& opt = {}) {
  if (two_s < 1) throw std::invalid_argument("spin_s_eigensystem: 2S must be >= 1");
  const int n = topo.n_sites();
  std::vector<std::array<int, 2>> pairs;
  std::vector<double> coeff;
  for (auto [k, J] : detail::spin_s_bonds(topo, p)) {
    pairs.push_back({topo.bonds()[k].i, topo.bonds()[k].j});
    coeff.push_back(J);
  }
  // S^2 = n S(S+1) + 2 sum_{i<j} S_i.S_j
  std::vector<std::array<int, 2>> s2_pairs;
  std::vector<double> s2_coeff;
  detail::all_pairs(n, s2_pairs, s2_coeff);
  const double S = 0.5 * two_s;

  if (opt.lowest_k <= 0) {
    const double full = std::pow(two_s + 1.0, n);
    if (full > opt.dense_cap)
      throw DimensionError("spin_s_eigensystem: dimension " + std::to_string(static_cast<long long>(full)) +
                           " exceeds dense cap; use the iterative mode");
    const auto basis = detail::make_spin_s_basis(n, two_s, std::nullopt);
    const Eigen::MatrixXd h = Eigen::MatrixXd(detail::spin_s_operator(basis, pairs, coeff));
    const auto s2 = detail::spin_s_operator(basis, s2_pairs, s2_coeff, n * S * (S + 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    return detail::label_spectrum(es.eigenvalues(), es.eigenvectors(),
                                  [&](const Eigen::MatrixXd& block) { return Eigen::MatrixXd(s2 * block); });
  }

  // Lowest sector of total S^z (0 or 1/2): every multiplet appears exactly once there.
  const int two_m = (n * two_s) % 2;
  const auto basis = detail::make_spin_s_basis(n, two_s, two_m);
  const auto h = detail::spin_s_operator(basis, pairs, coeff);
  const auto s2 = detail::spin_s_operator(basis, s2_pairs, s2_coeff, n * S * (S + 1));
  const int k = std::min<int>(opt.lowest_k, static_cast<int>(basis.states.size()));
  auto [vals, vecs] = detail::lowest_eigenpairs(h, k, opt);
  LabeledSpectrum out;
  out.dim = static_cast<Eigen::Index>(std::pow(two_s + 1.0, n));
  for (auto [start, count] : detail::cluster_levels(vals, 1e-7)) {
    const Eigen::MatrixXd block = vecs.middleCols(start, count);
    Eigen::MatrixXd m = block.transpose() * (s2 * block);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    std::map<int, int> per_spin;
    for (Eigen::Index c = 0; c < count; ++c) ++per_spin[detail::two_s_from_s2(es.eigenvalues()(c))];
    for (auto [ts, c] : per_spin) out.levels.push_back({vals.segment(start, count).mean(), c, ts});
  }
  return out;
}

// Spin-1/2 bookkeeping helper: sum over levels of degeneracy * (2S+1).
inline Eigen::Index counted_dimension(const LabeledSpectrum& s) {
  Eigen::Index d = 0;
  for (const auto& l : s.levels) d += static_cast<Eigen::Index>(l.degeneracy) * l.multiplet_size();
  return d;
}

}  // namespace qspin
