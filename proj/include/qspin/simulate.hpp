#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "circuit.hpp"
#include "pauli.hpp"

namespace qspin {

namespace kernel {

// v has 2^bits entries; applies m to the pair differing in bit `b`.
inline void apply_1q(cplx* v, std::uint64_t dim, int b, const Mat2& m) {
  const std::uint64_t stride = std::uint64_t{1} << b;
  const cplx m00 = m(0, 0), m01 = m(0, 1), m10 = m(1, 0), m11 = m(1, 1);
  for (std::uint64_t base = 0; base < dim; base += 2 * stride)
    for (std::uint64_t i = base; i < base + stride; ++i) {
      const cplx a = v[i], c = v[i + stride];
      v[i] = m00 * a + m01 * c;
      v[i + stride] = m10 * a + m11 * c;
    }
}

// Index with zero bits inserted at positions lo < hi.
inline std::uint64_t spread2(std::uint64_t k, int lo, int hi) {
  const std::uint64_t lo_mask = (std::uint64_t{1} << lo) - 1;
  k = ((k & ~lo_mask) << 1) | (k & lo_mask);
  const std::uint64_t hi_mask = (std::uint64_t{1} << hi) - 1;
  return ((k & ~hi_mask) << 1) | (k & hi_mask);
}

// Applies m on bits (ba, bb), with ba the more significant index of the 4x4 basis.
inline void apply_2q(cplx* v, std::uint64_t dim, int ba, int bb, const Mat4& m) {
  const std::uint64_t sa = std::uint64_t{1} << ba, sb = std::uint64_t{1} << bb;
  const int lo = std::min(ba, bb), hi = std::max(ba, bb);
  const std::uint64_t quarter = dim >> 2;
  for (std::uint64_t k = 0; k < quarter; ++k) {
    const std::uint64_t i0 = spread2(k, lo, hi);
    const std::uint64_t idx[4] = {i0, i0 | sb, i0 | sa, i0 | sa | sb};
    const cplx in[4] = {v[idx[0]], v[idx[1]], v[idx[2]], v[idx[3]]};
    for (int r = 0; r < 4; ++r) v[idx[r]] = m(r, 0) * in[0] + m(r, 1) * in[1] + m(r, 2) * in[2] + m(r, 3) * in[3];
  }
}

// Single-qubit depolarizing channel on a column-major density matrix (row bit br, column bit bc).
inline void depolarize(cplx* rho, std::uint64_t dim2, int br, int bc, double p) {
  const std::uint64_t sr = std::uint64_t{1} << br, sc = std::uint64_t{1} << bc;
  const int lo = std::min(br, bc), hi = std::max(br, bc);
  const double keep = 1.0 - 2.0 * p, move = 2.0 * p, off = 1.0 - 4.0 * p;
  for (std::uint64_t k = 0; k < (dim2 >> 2); ++k) {
    const std::uint64_t i = spread2(k, lo, hi);
    const cplx d0 = rho[i], d1 = rho[i | sr | sc];
    rho[i] = keep * d0 + move * d1;
    rho[i | sr | sc] = keep * d1 + move * d0;
    rho[i | sr] *= off;
    rho[i | sc] *= off;
  }
}

}  // namespace kernel

// Quasi-static Z detuning on selected qubits: each shot sees a fixed Rz(delta) per moment,
// delta ~ N(0, sigma^2).
struct QuasiStaticDephasing {
  std::vector<int> qubits;
  double sigma = 0.0;
  int quadrature_nodes = 16;
};

struct NoiseModel {
  double depol_p = 0.0;
  std::map<int, Eigen::Matrix2d> readout;  // confusion(read, true) per qubit
  std::map<std::pair<int, int>, GateAngles> gate_angle_offsets;
  std::optional<GateAngles> default_gate_offset;
  double microwave_phi_jitter = 0.0;  // extra phi on a 2q gate following a 1q gate on its qubits
  QuasiStaticDephasing dephasing;

  static NoiseModel ideal() { return {}; }
  static NoiseModel depolarizing(double p) {
    NoiseModel nm;
    nm.depol_p = p;
    return nm;
  }

  static Eigen::Matrix2d confusion(double eps0, double eps1) {
    Eigen::Matrix2d m;
    m << 1.0 - eps0, eps1, eps0, 1.0 - eps1;
    return m;
  }

  bool is_ideal() const {
    return depol_p == 0.0 && readout.empty() && gate_angle_offsets.empty() && !default_gate_offset &&
           microwave_phi_jitter == 0.0 && (dephasing.qubits.empty() || dephasing.sigma == 0.0);
  }
  bool has_coherent_only() const { return depol_p == 0.0 && (dephasing.qubits.empty() || dephasing.sigma == 0.0); }

  std::optional<GateAngles> offset_for(int a, int b) const {
    auto it = gate_angle_offsets.find(std::minmax(a, b));
    if (it != gate_angle_offsets.end()) return it->second;
    return default_gate_offset;
  }

  // Angles the device executes for a two-qubit gate: the native gate (ideal plus offset) on
  // pairs with a known offset, otherwise the gate as written.
  GateAngles executed_angles(const Gate& g) const {
    if (auto off = offset_for(g.qubits[0], g.qubits[1])) {
      GateAngles a = GateAngles::sqrt_iswap_dag() + *off;
      if (g.qubits[0] > g.qubits[1]) {
        a.zeta = -a.zeta;
        a.chi = -a.chi;
      }
      return a;
    }
    return g.angles();
  }

  void validate() const {
    if (!(depol_p >= 0.0 && depol_p <= 1.0 / 3.0)) throw std::invalid_argument("NoiseModel: depol_p outside [0, 1/3]");
    for (const auto& [q, m] : readout) {
      if ((m.array() < -1e-12).any()) throw std::invalid_argument("NoiseModel: negative confusion entry");
      for (int c = 0; c < 2; ++c)
        if (std::abs(m.col(c).sum() - 1.0) > 1e-12) throw std::invalid_argument("NoiseModel: confusion columns must sum to 1");
    }
    if (dephasing.sigma < 0.0) throw std::invalid_argument("NoiseModel: negative dephasing sigma");
  }
};

inline nlohmann::json to_json(const NoiseModel& nm) {
  nlohmann::json j;
  j["depol_p"] = nm.depol_p;
  nlohmann::json ro = nlohmann::json::object();
  for (const auto& [q, m] : nm.readout) ro[std::to_string(q)] = {m(1, 0), m(0, 1)};
  j["readout_eps0_eps1"] = ro;
  nlohmann::json off = nlohmann::json::array();
  for (const auto& [pair, a] : nm.gate_angle_offsets) off.push_back({pair.first, pair.second, a.array()});
  j["gate_angle_offsets"] = off;
  if (nm.default_gate_offset) j["default_gate_offset"] = nm.default_gate_offset->array();
  j["microwave_phi_jitter"] = nm.microwave_phi_jitter;
  j["dephasing"] = {{"qubits", nm.dephasing.qubits}, {"sigma", nm.dephasing.sigma}};
  return j;
}

namespace detail {

// Probabilists' Gauss-Hermite rule (nodes for N(0,1)) via Golub-Welsch.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) jac(k, k - 1) = jac(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  Eigen::VectorXd w = es.eigenvectors().row(0).transpose().array().square();
  return {es.eigenvalues(), w / w.sum()};
}

inline Mat2 detuning_matrix(double delta) {
  Mat2 m = Mat2::Zero();
  m(0, 0) = std::polar(1.0, -delta / 2);
  m(1, 1) = std::polar(1.0, delta / 2);
  return m;
}

// Gate matrices as executed on the (noisy) device for one moment.
struct ExecutedGate {
  int arity;
  int q0, q1;
  Mat2 m2;
  Mat4 m4;
};

inline std::vector<ExecutedGate> executed_moment(const Moment& m, const NoiseModel& nm, const Moment* previous) {
  std::vector<ExecutedGate> out;
  for (const auto& g : m) {
    if (g.kind == GateKind::measure) continue;
    if (g.is_two_qubit()) {
      GateAngles a = nm.executed_angles(g);
      if (nm.microwave_phi_jitter != 0.0 && previous)
        for (const auto& pg : *previous)
          if (pg.is_single_qubit_unitary() && (pg.acts_on(g.qubits[0]) || pg.acts_on(g.qubits[1]))) {
            a.phi += nm.microwave_phi_jitter;
            break;
          }
      out.push_back({2, g.qubits[0], g.qubits[1], Mat2::Identity(), fsim5_matrix(a)});
    } else {
      out.push_back({1, g.qubits[0], -1, single_qubit_matrix(g), Mat4::Identity()});
    }
  }
  return out;
}

inline bool measurement_only(const Moment& m) {
  return std::all_of(m.begin(), m.end(), [](const Gate& g) { return g.kind == GateKind::measure; });
}

}  // namespace detail

inline void apply_gate(const Gate& g, StateVector& s) {
  const int n = s.n_qubits();
  auto* v = s.amplitudes().data();
  const auto dim = static_cast<std::uint64_t>(s.dim());
  if (g.kind == GateKind::measure) return;
  if (g.is_two_qubit())
    kernel::apply_2q(v, dim, qubit_bit(n, g.qubits[0]), qubit_bit(n, g.qubits[1]), fsim5_matrix(g.angles()));
  else
    kernel::apply_1q(v, dim, qubit_bit(n, g.qubits[0]), single_qubit_matrix(g));
}

// Noiseless evolution; measurements are ignored.
inline StateVector simulate(const Circuit& c, StateVector init) {
  require_same_size(c.n_qubits(), init.n_qubits(), "simulate");
  for (const auto& m : c.moments())
    for (const auto& g : m) apply_gate(g, init);
  return init;
}

inline StateVector simulate(const Circuit& c) { return simulate(c, StateVector(c.n_qubits())); }

// Dense unitary of a circuit (columns = images of basis states).
inline CMatrix circuit_unitary(const Circuit& c) {
  const auto d = StateVector::dim_of(c.n_qubits());
  CMatrix u(d, d);
  for (Eigen::Index k = 0; k < d; ++k) u.col(k) = simulate(c, StateVector::basis(c.n_qubits(), k)).amplitudes();
  return u;
}

namespace detail {

inline void apply_executed_dm(const ExecutedGate& g, int n, CMatrix& rho) {
  const auto dim2 = static_cast<std::uint64_t>(rho.size());
  cplx* r = rho.data();
  if (g.arity == 2) {
    kernel::apply_2q(r, dim2, qubit_bit(n, g.q0), qubit_bit(n, g.q1), g.m4);
    kernel::apply_2q(r, dim2, n + qubit_bit(n, g.q0), n + qubit_bit(n, g.q1), g.m4.conjugate());
  } else {
    kernel::apply_1q(r, dim2, qubit_bit(n, g.q0), g.m2);
    kernel::apply_1q(r, dim2, n + qubit_bit(n, g.q0), g.m2.conjugate());
  }
}

inline void apply_executed_sv(const ExecutedGate& g, int n, CVector& v) {
  const auto dim = static_cast<std::uint64_t>(v.size());
  if (g.arity == 2) kernel::apply_2q(v.data(), dim, qubit_bit(n, g.q0), qubit_bit(n, g.q1), g.m4);
  else kernel::apply_1q(v.data(), dim, qubit_bit(n, g.q0), g.m2);
}

// One density-matrix run with fixed detunings.
inline DensityMatrix run_dm(const Circuit& c, DensityMatrix rho, const NoiseModel& nm, const std::vector<double>& deltas) {
  const int n = c.n_qubits();
  const Moment* prev = nullptr;
  for (const auto& m : c.moments()) {
    if (measurement_only(m)) continue;
    for (const auto& g : executed_moment(m, nm, prev)) apply_executed_dm(g, n, rho.entries());
    for (std::size_t k = 0; k < deltas.size(); ++k)
      apply_executed_dm({1, nm.dephasing.qubits[k], -1, detuning_matrix(deltas[k]), Mat4::Identity()}, n, rho.entries());
    if (nm.depol_p > 0.0)
      for (int q = 0; q < n; ++q)
        kernel::depolarize(rho.entries().data(), static_cast<std::uint64_t>(rho.entries().size()), qubit_bit(n, q),
                           n + qubit_bit(n, q), nm.depol_p);
    prev = &m;
  }
  return rho;
}

}  // namespace detail

// Exact channel simulation: unitaries of each moment, then (optional) detuning and the
// symmetric depolarizing channel on every qubit. Quasi-static detuning is averaged by quadrature.
inline DensityMatrix simulate_noisy(const Circuit& c, const DensityMatrix& init, const NoiseModel& nm) {
  require_same_size(c.n_qubits(), init.n_qubits(), "simulate_noisy");
  nm.validate();
  const auto& deph = nm.dephasing;
  if (deph.qubits.empty() || deph.sigma == 0.0) return detail::run_dm(c, init, nm, {});
  if (deph.qubits.size() > 2) throw std::invalid_argument("simulate_noisy: quadrature supports at most two dephased qubits");
  const auto [nodes, weights] = detail::gauss_hermite(deph.quadrature_nodes);
  DensityMatrix acc(c.n_qubits(), CMatrix::Zero(init.dim(), init.dim()));
  const int k = static_cast<int>(deph.qubits.size());
  const int total = k == 1 ? deph.quadrature_nodes : deph.quadrature_nodes * deph.quadrature_nodes;
  for (int idx = 0; idx < total; ++idx) {
    std::vector<double> deltas;
    double w = 1.0;
    int rem = idx;
    for (int j = 0; j < k; ++j) {
      const int node = rem % deph.quadrature_nodes;
      rem /= deph.quadrature_nodes;
      deltas.push_back(deph.sigma * nodes(node));
      w *= weights(node);
    }
    acc.entries() += w * detail::run_dm(c, init, nm, deltas).entries();
  }
  return acc;
}

// Monte-Carlo wavefunction estimate of the same channel; returns the averaged diagonal.
inline Eigen::VectorXd trajectory_probabilities(const Circuit& c, const StateVector& init, const NoiseModel& nm,
                                                int trajectories, std::uint64_t seed) {
  nm.validate();
  const int n = c.n_qubits();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(init.dim());
  std::vector<std::vector<detail::ExecutedGate>> moments;
  const Moment* prev = nullptr;
  for (const auto& m : c.moments()) {
    if (detail::measurement_only(m)) continue;
    moments.push_back(detail::executed_moment(m, nm, prev));
    prev = &m;
  }
  const bool dephase = !nm.dephasing.qubits.empty() && nm.dephasing.sigma > 0.0;
  for (int t = 0; t < trajectories; ++t) {
    CVector v = init.amplitudes();
    std::vector<Mat2> det;
    if (dephase)
      for (std::size_t k = 0; k < nm.dephasing.qubits.size(); ++k)
        det.push_back(detail::detuning_matrix(nm.dephasing.sigma * normal(rng)));
    for (const auto& gates : moments) {
      for (const auto& g : gates) detail::apply_executed_sv(g, n, v);
      for (std::size_t k = 0; k < det.size(); ++k)
        kernel::apply_1q(v.data(), v.size(), qubit_bit(n, nm.dephasing.qubits[k]), det[k]);
      if (nm.depol_p > 0.0)
        for (int q = 0; q < n; ++q) {
          const double u = uni(rng);
          if (u < 3.0 * nm.depol_p) {
            const char l = "XYZ"[static_cast<int>(u / nm.depol_p) % 3];
            kernel::apply_1q(v.data(), v.size(), qubit_bit(n, q), pauli_matrix(l));
          }
        }
    }
    acc += v.cwiseAbs2();
  }
  return acc / trajectories;
}

// Measured-register outcome distribution; bit order follows ascending qubit index (first = MSB).
struct Counts {
  int n_bits = 0;
  std::map<std::uint64_t, std::uint64_t> hist;

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& [k, v] : hist) t += v;
    return t;
  }

  std::string bitstring(std::uint64_t outcome) const {
    std::string s(n_bits, '0');
    for (int k = 0; k < n_bits; ++k)
      if ((outcome >> (n_bits - 1 - k)) & 1) s[k] = '1';
    return s;
  }

  std::map<std::string, std::uint64_t> by_string() const {
    std::map<std::string, std::uint64_t> out;
    for (const auto& [k, v] : hist) out[bitstring(k)] = v;
    return out;
  }

  static Counts from_strings(const std::map<std::string, std::uint64_t>& m) {
    Counts c;
    for (const auto& [s, v] : m) {
      c.n_bits = static_cast<int>(s.size());
      c.hist[std::stoull(s, nullptr, 2)] += v;
    }
    return c;
  }
};

// Marginal over the measured qubits of a full-register distribution.
inline Eigen::VectorXd marginal(const Eigen::VectorXd& full, int n, const std::vector<int>& measured) {
  const int m = static_cast<int>(measured.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(Eigen::Index{1} << m);
  for (Eigen::Index b = 0; b < full.size(); ++b) {
    std::uint64_t o = 0;
    for (int k = 0; k < m; ++k) o = (o << 1) | ((static_cast<std::uint64_t>(b) >> qubit_bit(n, measured[k])) & 1);
    out(static_cast<Eigen::Index>(o)) += full(b);
  }
  return out;
}

// Applies one 2x2 matrix along outcome bit k (k = 0 is the most significant of m bits).
inline void apply_along_bit(Eigen::VectorXd& p, int m, int k, const Eigen::Matrix2d& a) {
  const std::uint64_t stride = std::uint64_t{1} << (m - 1 - k);
  for (std::uint64_t base = 0; base < static_cast<std::uint64_t>(p.size()); base += 2 * stride)
    for (std::uint64_t i = base; i < base + stride; ++i) {
      const double x0 = p(i), x1 = p(i + stride);
      p(i) = a(0, 0) * x0 + a(0, 1) * x1;
      p(i + stride) = a(1, 0) * x0 + a(1, 1) * x1;
    }
}

inline void apply_readout(Eigen::VectorXd& p, const std::vector<int>& measured, const NoiseModel& nm) {
  const int m = static_cast<int>(measured.size());
  for (int k = 0; k < m; ++k) {
    auto it = nm.readout.find(measured[k]);
    if (it != nm.readout.end()) apply_along_bit(p, m, k, it->second);
  }
}

enum class Backend { automatic, statevector, density_matrix, trajectories };

struct ExecutionOptions {
  Backend backend = Backend::automatic;
  int dm_max_qubits = 9;
  int trajectories = 500;
};

// Outcome probabilities of the measured qubits (readout confusion included).
inline Eigen::VectorXd outcome_probabilities(const Circuit& c, const NoiseModel& nm, std::uint64_t seed = 0,
                                             const ExecutionOptions& opt = {},
                                             std::optional<StateVector> init = std::nullopt) {
  const auto measured = c.measured_qubits();
  if (measured.empty()) throw std::invalid_argument("outcome_probabilities: circuit has no measurements");
  const int n = c.n_qubits();
  const StateVector psi0 = init ? *init : StateVector(n);
  Backend b = opt.backend;
  if (b == Backend::automatic) {
    if (nm.has_coherent_only()) b = Backend::statevector;
    else b = n <= opt.dm_max_qubits ? Backend::density_matrix : Backend::trajectories;
  }
  Eigen::VectorXd full;
  if (b == Backend::statevector) {
    if (!nm.has_coherent_only()) throw std::invalid_argument("statevector backend cannot represent incoherent noise");
    // Without stochastic channels a single trajectory is the exact pure-state evolution.
    full = trajectory_probabilities(c, psi0, nm, 1, seed);
  } else if (b == Backend::density_matrix) {
    full = simulate_noisy(c, DensityMatrix::from_pure(psi0), nm).probabilities();
  } else {
    full = trajectory_probabilities(c, psi0, nm, opt.trajectories, seed);
  }
  Eigen::VectorXd p = marginal(full.cwiseMax(0.0), n, measured);
  apply_readout(p, measured, nm);
  return p / p.sum();
}

// Portable uniform double in [0, 1) from 53 random bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline Counts sample_distribution(const Eigen::VectorXd& p, int n_bits, std::uint64_t shots, std::uint64_t seed) {
  std::vector<double> cdf(p.size());
  double acc = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) cdf[k] = acc += std::max(p(k), 0.0);
  std::mt19937_64 rng(seed);
  Counts c;
  c.n_bits = n_bits;
  for (std::uint64_t s = 0; s < shots; ++s) {
    const double u = uniform01(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto k = static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), p.size() - 1));
    ++c.hist[k];
  }
  return c;
}

inline Counts sample(const Circuit& c, std::uint64_t shots, const NoiseModel& nm, std::uint64_t seed,
                     const ExecutionOptions& opt = {}) {
  c.validate();
  const auto p = outcome_probabilities(c, nm, seed ^ 0x9e3779b97f4a7c15ULL, opt);
  return sample_distribution(p, static_cast<int>(c.measured_qubits().size()), shots, seed);
}

}  // namespace qspin
