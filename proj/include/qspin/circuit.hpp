#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "pauli.hpp"

namespace qspin {

using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;

inline constexpr double kPi = std::numbers::pi;

// Angles of the excitation-conserving gate, in radians.
struct GateAngles {
  double theta = 0.0, phi = 0.0, zeta = 0.0, gamma = 0.0, chi = 0.0;

  static GateAngles sqrt_iswap_dag() { return {kPi / 4, 0.0, 0.0, 0.0, 0.0}; }
  std::array<double, 5> array() const { return {theta, phi, zeta, gamma, chi}; }
  static GateAngles from_array(const double* a) { return {a[0], a[1], a[2], a[3], a[4]}; }

  friend GateAngles operator+(const GateAngles& a, const GateAngles& b) {
    return {a.theta + b.theta, a.phi + b.phi, a.zeta + b.zeta, a.gamma + b.gamma, a.chi + b.chi};
  }
  friend GateAngles operator-(const GateAngles& a, const GateAngles& b) {
    return {a.theta - b.theta, a.phi - b.phi, a.zeta - b.zeta, a.gamma - b.gamma, a.chi - b.chi};
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : array()) m = std::max(m, std::abs(v));
    return m;
  }
};

// Z^t = diag(1, e^{i pi t}); X^t = e^{i pi t/2} [[cos, -i sin], [-i sin, cos]](pi t/2).
inline Mat2 z_pow(double t) {
  Mat2 m;
  m << 1.0, 0.0, 0.0, std::polar(1.0, kPi * t);
  return m;
}

inline Mat2 x_pow(double t) {
  const double c = std::cos(kPi * t / 2), s = std::sin(kPi * t / 2);
  Mat2 m;
  m << c, cplx(0, -s), cplx(0, -s), c;
  return std::polar(1.0, kPi * t / 2) * m;
}

// PhXZ(x, z, a) = Z^z Z^a X^x Z^-a.
inline Mat2 phxz_matrix(double x, double z, double a) { return z_pow(z) * z_pow(a) * x_pow(x) * z_pow(-a); }

// Basis order |00>, |01>, |10>, |11> with the first listed qubit most significant.
inline Mat4 fsim5_matrix(const GateAngles& g) {
  const double c = std::cos(g.theta), s = std::sin(g.theta);
  const cplx mi(0, -1);
  Mat4 m = Mat4::Zero();
  m(0, 0) = 1.0;
  m(1, 1) = std::exp(mi * (g.gamma + g.zeta)) * c;
  m(1, 2) = mi * std::exp(mi * (g.gamma - g.chi)) * s;
  m(2, 1) = mi * std::exp(mi * (g.gamma + g.chi)) * s;
  m(2, 2) = std::exp(mi * (g.gamma - g.zeta)) * c;
  m(3, 3) = std::exp(mi * (2 * g.gamma + g.phi));
  return m;
}

inline Mat2 pauli_matrix(char l) {
  Mat2 m;
  switch (l) {
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, cplx(0, -1), cplx(0, 1), 0; break;
    case 'Z': m << 1, 0, 0, -1; break;
    case 'I': m = Mat2::Identity(); break;
    default: throw std::invalid_argument("pauli_matrix: bad letter");
  }
  return m;
}

enum class GateKind { phxz, fsim5, pauli, measure };

struct Gate {
  GateKind kind = GateKind::phxz;
  std::array<int, 2> qubits{-1, -1};
  std::array<double, 5> params{};  // PhXZ: (x, z, a); fsim5: (theta, phi, zeta, gamma, chi)
  char pauli = 'I';

  static Gate phxz(int q, double x, double z, double a) { return {GateKind::phxz, {q, -1}, {x, z, a, 0, 0}, 'I'}; }
  static Gate fsim5(int q0, int q1, const GateAngles& g) { return {GateKind::fsim5, {q0, q1}, g.array(), 'I'}; }
  static Gate sqrt_iswap_dag(int q0, int q1) { return fsim5(q0, q1, GateAngles::sqrt_iswap_dag()); }
  static Gate pauli_gate(int q, char l) { return {GateKind::pauli, {q, -1}, {}, l}; }
  static Gate measure(int q) { return {GateKind::measure, {q, -1}, {}, 'I'}; }

  int arity() const { return kind == GateKind::fsim5 ? 2 : 1; }
  bool is_two_qubit() const { return kind == GateKind::fsim5; }
  bool is_single_qubit_unitary() const { return kind == GateKind::phxz || kind == GateKind::pauli; }
  GateAngles angles() const { return GateAngles::from_array(params.data()); }
  bool acts_on(int q) const { return qubits[0] == q || (arity() == 2 && qubits[1] == q); }

  std::string name() const {
    switch (kind) {
      case GateKind::phxz: return "PhXZ";
      case GateKind::fsim5: return "TwoQubit5Angle";
      case GateKind::pauli: return std::string(1, pauli);
      case GateKind::measure: return "Measure";
    }
    return "?";
  }
};

inline Mat2 single_qubit_matrix(const Gate& g) {
  if (g.kind == GateKind::phxz) return phxz_matrix(g.params[0], g.params[1], g.params[2]);
  if (g.kind == GateKind::pauli) return pauli_matrix(g.pauli);
  throw std::invalid_argument("single_qubit_matrix: not a single-qubit unitary");
}

inline CMatrix gate_matrix(const Gate& g) {
  if (g.kind == GateKind::fsim5) return fsim5_matrix(g.angles());
  if (g.kind == GateKind::measure) throw std::invalid_argument("gate_matrix: measurement has no unitary");
  return single_qubit_matrix(g);
}

// PhXZ exponents reproducing a 2x2 unitary up to global phase.
inline std::array<double, 3> phxz_from_unitary(const Mat2& u) {
  const double x = 2.0 / kPi * std::atan2(std::abs(u(0, 1)), std::abs(u(0, 0)));
  const double c = std::cos(kPi * x / 2), s = std::sin(kPi * x / 2);
  constexpr double eps = 1e-12;
  if (s < eps) return {0.0, std::arg(u(1, 1) / u(0, 0)) / kPi, 0.0};
  if (c < eps) {
    const cplx g = u(0, 1) / cplx(0, -1);
    const cplx v10 = u(1, 0) / (g / std::abs(g));
    return {1.0, std::arg(cplx(0, 1) * v10) / kPi, 0.0};
  }
  const cplx g = u(0, 0) / std::abs(u(0, 0));
  const cplx v01 = u(0, 1) / g, v11 = u(1, 1) / g;
  const double a = -std::arg(cplx(0, 1) * v01) / kPi;
  const double z = std::arg(v11) / kPi;
  return {x, z, a};
}

using Moment = std::vector<Gate>;

struct GateCounts {
  int single_qubit = 0;
  int two_qubit = 0;
  int measurements = 0;
  friend GateCounts operator+(GateCounts a, const GateCounts& b) {
    return {a.single_qubit + b.single_qubit, a.two_qubit + b.two_qubit, a.measurements + b.measurements};
  }
};

class Circuit {
 public:
  Circuit() = default;
  explicit Circuit(int n) : n_(n), frontier_(n, 0) {
    if (n < 1 || n > 30) throw DimensionError("Circuit: unsupported register size");
  }

  int n_qubits() const { return n_; }
  const std::vector<Moment>& moments() const { return moments_; }
  std::size_t frontier(int q) const { return frontier_.at(q); }
  std::size_t depth() const { return moments_.size(); }

  void append_moment(Moment m) {
    check_moment(m);
    for (const auto& g : m)
      for (int k = 0; k < g.arity(); ++k) frontier_[g.qubits[k]] = moments_.size() + 1;
    moments_.push_back(std::move(m));
  }

  // Earliest moment at or after min_slot that follows every previous gate on the same qubits.
  void append_asap(const Gate& g, std::size_t min_slot = 0) {
    check_gate(g);
    std::size_t slot = std::max(min_slot, frontier_[g.qubits[0]]);
    if (g.arity() == 2) slot = std::max(slot, frontier_[g.qubits[1]]);
    while (slot >= moments_.size()) moments_.emplace_back();
    moments_[slot].push_back(g);
    for (int k = 0; k < g.arity(); ++k) frontier_[g.qubits[k]] = slot + 1;
  }

  // Moments of `other` appended after the current last moment.
  void append(const Circuit& other) {
    require_same_size(n_, other.n_, "Circuit::append");
    for (const auto& m : other.moments_) append_moment(m);
  }

  void append_asap(const Circuit& other) {
    require_same_size(n_, other.n_, "Circuit::append_asap");
    for (const auto& m : other.moments_)
      for (const auto& g : m) append_asap(g);
  }

  // Copy acting on a larger register, qubit q -> map[q].
  Circuit remapped(int n_new, const std::vector<int>& map) const {
    Circuit out(n_new);
    for (const auto& m : moments_) {
      Moment mm;
      for (Gate g : m) {
        for (int k = 0; k < g.arity(); ++k) g.qubits[k] = map.at(g.qubits[k]);
        mm.push_back(g);
      }
      out.append_moment(std::move(mm));
    }
    return out;
  }

  Circuit widened(int n_new) const {
    std::vector<int> map(n_);
    for (int q = 0; q < n_; ++q) map[q] = q;
    return remapped(n_new, map);
  }

  GateCounts counts() const {
    GateCounts c;
    for (const auto& m : moments_)
      for (const auto& g : m) {
        if (g.is_two_qubit()) ++c.two_qubit;
        else if (g.kind == GateKind::measure) ++c.measurements;
        else ++c.single_qubit;
      }
    return c;
  }

  std::vector<int> measured_qubits() const {
    std::set<int> q;
    for (const auto& m : moments_)
      for (const auto& g : m)
        if (g.kind == GateKind::measure) q.insert(g.qubits[0]);
    return {q.begin(), q.end()};
  }

  bool qubit_idle(std::size_t moment, int q) const {
    for (const auto& g : moments_.at(moment))
      if (g.acts_on(q)) return false;
    return true;
  }

  bool has_two_qubit_gate(std::size_t moment) const {
    for (const auto& g : moments_.at(moment))
      if (g.is_two_qubit()) return true;
    return false;
  }

  Moment& moment(std::size_t k) { return moments_.at(k); }

  // Validates disjointness, ranges, and that measurements are terminal.
  void validate() const {
    std::vector<bool> measured(n_, false);
    for (const auto& m : moments_) {
      check_moment(m);
      for (const auto& g : m)
        for (int k = 0; k < g.arity(); ++k) {
          if (measured[g.qubits[k]]) throw std::invalid_argument("Circuit: gate after measurement");
          if (g.kind == GateKind::measure) measured[g.qubits[k]] = true;
        }
    }
  }

 private:
  void check_gate(const Gate& g) const {
    for (int k = 0; k < g.arity(); ++k)
      if (g.qubits[k] < 0 || g.qubits[k] >= n_) throw std::invalid_argument("Circuit: gate target out of range");
    if (g.arity() == 2 && g.qubits[0] == g.qubits[1]) throw std::invalid_argument("Circuit: two-qubit gate on one qubit");
    if (g.kind == GateKind::pauli && std::string("IXYZ").find(g.pauli) == std::string::npos)
      throw std::invalid_argument("Circuit: bad Pauli gate");
  }

  void check_moment(const Moment& m) const {
    std::vector<bool> used(n_, false);
    for (const auto& g : m) {
      check_gate(g);
      for (int k = 0; k < g.arity(); ++k) {
        if (used[g.qubits[k]]) throw std::invalid_argument("Circuit: overlapping gates in one moment");
        used[g.qubits[k]] = true;
      }
    }
  }

  int n_ = 0;
  std::vector<Moment> moments_;
  std::vector<std::size_t> frontier_;
};

inline nlohmann::json to_json(const Gate& g) {
  nlohmann::json params = nlohmann::json::array();
  if (g.kind == GateKind::phxz)
    for (int k = 0; k < 3; ++k) params.push_back(g.params[k]);
  if (g.kind == GateKind::fsim5)
    for (double v : g.params) params.push_back(v);
  nlohmann::json qubits = nlohmann::json::array();
  for (int k = 0; k < g.arity(); ++k) qubits.push_back(g.qubits[k]);
  return {{"gate", g.name()}, {"params", params}, {"qubits", qubits}};
}

inline nlohmann::json to_json(const Circuit& c) {
  nlohmann::json moments = nlohmann::json::array();
  for (const auto& m : c.moments()) {
    nlohmann::json jm = nlohmann::json::array();
    for (const auto& g : m) jm.push_back(to_json(g));
    moments.push_back(jm);
  }
  return moments;
}

inline Gate gate_from_json(const nlohmann::json& j) {
  const std::string name = j.at("gate").get<std::string>();
  const auto& q = j.at("qubits");
  const auto& p = j.at("params");
  if (name == "PhXZ") return Gate::phxz(q.at(0), p.at(0), p.at(1), p.at(2));
  if (name == "TwoQubit5Angle") {
    double a[5];
    for (int k = 0; k < 5; ++k) a[k] = p.at(k).get<double>();
    return Gate::fsim5(q.at(0), q.at(1), GateAngles::from_array(a));
  }
  if (name == "X" || name == "Y" || name == "Z" || name == "I") return Gate::pauli_gate(q.at(0), name[0]);
  if (name == "Measure") return Gate::measure(q.at(0));
  throw std::invalid_argument("unknown gate '" + name + "'");
}

inline Circuit circuit_from_json(const nlohmann::json& j, int n_qubits) {
  Circuit c(n_qubits);
  for (const auto& jm : j) {
    Moment m;
    for (const auto& jg : jm) m.push_back(gate_from_json(jg));
    c.append_moment(std::move(m));
  }
  return c;
}

inline nlohmann::json to_json(const GateCounts& c) {
  return {{"single_qubit", c.single_qubit}, {"two_qubit", c.two_qubit}, {"measurements", c.measurements}};
}

}  // namespace qspin
