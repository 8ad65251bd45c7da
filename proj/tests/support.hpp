#pragma once

#include <random>
#include <string>

#include <qspin/pauli.hpp>

namespace qspin::testing {

inline PauliTerm random_term(int n, std::mt19937_64& rng, bool real_coeff = true) {
  static constexpr char letters[] = "IXYZ";
  std::uniform_int_distribution<int> pick(0, 3);
  std::normal_distribution<double> normal;
  std::string s(n, 'I');
  for (auto& c : s) c = letters[pick(rng)];
  const cplx c = real_coeff ? cplx{normal(rng)} : cplx{normal(rng), normal(rng)};
  return PauliTerm(s, c);
}

inline PauliSum random_sum(int n, int terms, std::mt19937_64& rng, bool real_coeff = true) {
  PauliSum s(n);
  for (int k = 0; k < terms; ++k) s.add(random_term(n, rng, real_coeff));
  return s;
}

inline StateVector random_state(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  CVector v(Eigen::Index{1} << n);
  for (auto& a : v) a = {normal(rng), normal(rng)};
  return StateVector(n, v.normalized());
}

// Kronecker product helper for dense oracles.
inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline CMatrix pauli_2x2(char l) {
  CMatrix m(2, 2);
  switch (l) {
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, cplx(0, -1), cplx(0, 1), 0; break;
    case 'Z': m << 1, 0, 0, -1; break;
    default: m = CMatrix::Identity(2, 2);
  }
  return m;
}

// Dense matrix of a letter string by explicit Kronecker products (qubit 0 leftmost factor).
inline CMatrix kron_string(const std::string& s) {
  CMatrix m = CMatrix::Identity(1, 1);
  for (char c : s) m = kron(m, pauli_2x2(c));
  return m;
}

// |<a|b>| phase-insensitive distance between unitaries up to global phase.
inline double phase_distance(const CMatrix& a, const CMatrix& b) {
  const cplx ov = (a.adjoint() * b).trace();
  const cplx ph = std::abs(ov) > 0 ? ov / std::abs(ov) : cplx{1.0};
  return (a * ph - b).norm();
}

}  // namespace qspin::testing
