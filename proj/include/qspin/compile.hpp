#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "circuit.hpp"
#include "pauli.hpp"

namespace qspin {

// CZ (up to global phase) as L3 . G . L2 . G . L1 with G a native two-qubit gate on an
// ordered pair; index 0 of each layer acts on the first qubit of the pair.
struct CzTemplate {
  std::array<Mat2, 2> l1, l2, l3;
  GateAngles gate = GateAngles::sqrt_iswap_dag();

  static CzTemplate ideal() {
    CzTemplate t;
    t.l1 = {phxz_matrix(0.5, 0, -0.5), phxz_matrix(-0.5, 0, -0.5)};
    t.l2 = {Mat2::Identity(), phxz_matrix(1, 0, 0)};
    t.l3 = {phxz_matrix(0.5, 0.5, 0.5), phxz_matrix(-0.5, 1.5, 0.5)};
    return t;
  }

  Mat4 unitary() const {
    auto kron2 = [](const Mat2& a, const Mat2& b) {
      Mat4 m;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) m.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
      return m;
    };
    const Mat4 g = fsim5_matrix(gate);
    return kron2(l3[0], l3[1]) * g * kron2(l2[0], l2[1]) * g * kron2(l1[0], l1[1]);
  }
};

// CZ templates keyed by sorted qubit pair; pairs without an entry use the ideal template.
using CzTemplates = std::map<std::pair<int, int>, CzTemplate>;

inline bool is_identity_up_to_phase(const Mat2& u, double tol = 1e-12) {
  return std::abs(u(0, 1)) < tol && std::abs(u(1, 0)) < tol && std::abs(u(1, 1) - u(0, 0)) < tol;
}

// Emits native circuits, fusing runs of single-qubit unitaries into one PhXZ per qubit.
class NativeBuilder {
 public:
  explicit NativeBuilder(int n, const CzTemplates* templates = nullptr)
      : c_(n), pending_(n, Mat2::Identity()), templates_(templates) {}

  void apply_1q(int q, const Mat2& u) { pending_.at(q) = u * pending_.at(q); }

  void cz(int a, int b) {
    if (a > b) std::swap(a, b);
    CzTemplate t = CzTemplate::ideal();
    if (templates_) {
      auto it = templates_->find({a, b});
      if (it != templates_->end()) t = it->second;
    }
    // Both input layers sit directly before the first native gate.
    const std::size_t slot = std::max(c_.frontier(a), c_.frontier(b));
    emit(a, t.l1[0] * pending_[a], slot);
    emit(b, t.l1[1] * pending_[b], slot);
    c_.append_asap(Gate::fsim5(a, b, t.gate));
    emit(a, t.l2[0]);
    emit(b, t.l2[1]);
    c_.append_asap(Gate::fsim5(a, b, t.gate));
    pending_[a] = t.l3[0];
    pending_[b] = t.l3[1];
    ++cz_count_;
  }

  void cnot(int control, int target) {
    apply_1q(target, hadamard());
    cz(control, target);
    apply_1q(target, hadamard());
  }

  void append_gate(const Gate& g) {
    if (g.is_single_qubit_unitary()) {
      apply_1q(g.qubits[0], single_qubit_matrix(g));
      return;
    }
    for (int k = 0; k < g.arity(); ++k) flush(g.qubits[k]);
    c_.append_asap(g);
  }

  void flush(int q) {
    emit(q, pending_[q]);
    pending_[q] = Mat2::Identity();
  }

  Circuit finish() {
    for (int q = 0; q < c_.n_qubits(); ++q) flush(q);
    return c_;
  }

  int cz_count() const { return cz_count_; }

  static Mat2 hadamard() {
    Mat2 h;
    h << 1, 1, 1, -1;
    return h / std::sqrt(2.0);
  }

 private:
  bool emit(int q, const Mat2& u, std::size_t min_slot = 0) {
    if (is_identity_up_to_phase(u)) return false;
    const auto p = phxz_from_unitary(u);
    c_.append_asap(Gate::phxz(q, p[0], p[1], p[2]), min_slot);
    return true;
  }

  Circuit c_;
  std::vector<Mat2> pending_;
  const CzTemplates* templates_;
  int cz_count_ = 0;
};

// V with V Z V^dagger = sigma_letter.
inline Mat2 z_to_letter(char l) {
  switch (l) {
    case 'X': return NativeBuilder::hadamard();
    case 'Y': {
      Mat2 s = Mat2::Identity();
      s(1, 1) = cplx(0, 1);
      return s * NativeBuilder::hadamard();
    }
    case 'Z':
    case 'I': return Mat2::Identity();
  }
  throw std::invalid_argument("z_to_letter: bad letter");
}

// Controlled-P (ancilla as control) appended to the builder; P acts on the low n qubits.
inline void add_controlled_pauli(NativeBuilder& b, const PauliTerm& p, int ancilla) {
  const cplx c = p.coefficient();
  if (std::abs(std::abs(c) - 1.0) > kLinalgTol) throw std::invalid_argument("controlled Pauli needs a unit-modulus coefficient");
  for (int q : p.support()) {
    if (q == ancilla) throw std::invalid_argument("controlled Pauli: string acts on the ancilla");
    const Mat2 v = z_to_letter(p.letter(q));
    b.apply_1q(q, v.adjoint());
    b.cz(q, ancilla);
    b.apply_1q(q, v);
  }
  if (std::abs(c - 1.0) > kLinalgTol) {
    Mat2 ph = Mat2::Identity();
    ph(1, 1) = c;
    b.apply_1q(ancilla, ph);
  }
}

// Native fragment for controlled-P on n_total qubits; identity strings give an empty circuit.
inline Circuit decompose_controlled_pauli(const PauliTerm& p, int ancilla, int n_total,
                                          const CzTemplates* templates = nullptr) {
  if (ancilla < 0 || ancilla >= n_total || p.n_qubits() > n_total)
    throw std::invalid_argument("decompose_controlled_pauli: bad register layout");
  NativeBuilder b(n_total, templates);
  add_controlled_pauli(b, p, ancilla);
  return b.finish();
}

// exp(-i theta P) by basis change, CNOT ladder and a Z rotation on the last support qubit.
inline void add_pauli_exponential(NativeBuilder& b, const PauliTerm& p, double theta) {
  const auto sup = p.support();
  if (sup.empty()) return;
  for (int q : sup) b.apply_1q(q, z_to_letter(p.letter(q)).adjoint());
  for (std::size_t k = 0; k + 1 < sup.size(); ++k) b.cnot(sup[k], sup[k + 1]);
  Mat2 rz = Mat2::Zero();
  rz(0, 0) = std::polar(1.0, -theta);
  rz(1, 1) = std::polar(1.0, theta);
  b.apply_1q(sup.back(), rz);
  for (std::size_t k = sup.size() - 1; k > 0; --k) b.cnot(sup[k - 1], sup[k]);
  for (int q : sup) b.apply_1q(q, z_to_letter(p.letter(q)));
}

// First-order product formula; a final partial step covers t not divisible by dt.
inline Circuit trotter_circuit(const PauliSum& h, double t, double dt) {
  if (!(dt > 0.0) || t < 0.0) throw std::invalid_argument("trotter_circuit: need dt > 0 and t >= 0");
  if (!h.has_real_coefficients()) throw std::invalid_argument("trotter_circuit: Hamiltonian must be hermitian");
  NativeBuilder b(h.n_qubits());
  const auto full = static_cast<long>(std::floor(t / dt + 1e-9));
  std::vector<double> steps(full, dt);
  const double rest = t - full * dt;
  if (rest > 1e-12) steps.push_back(rest);
  for (double s : steps)
    for (const auto& term : h.terms()) add_pauli_exponential(b, term.with_coefficient(1.0), term.coefficient().real() * s);
  return b.finish();
}

}  // namespace qspin
