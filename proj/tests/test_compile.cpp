#include <catch2/catch_amalgamated.hpp>

#include <qspin/compile.hpp>
#include <qspin/exact.hpp>
#include <qspin/models.hpp>
#include <qspin/simulate.hpp>

#include "support.hpp"

using namespace qspin;
using namespace qspin::testing;

namespace {

// |0><0|_anc (x) I + |1><1|_anc (x) P with the ancilla as the last (least significant) qubit.
CMatrix controlled_dense(const PauliTerm& p) {
  CMatrix p0 = CMatrix::Zero(2, 2), p1 = CMatrix::Zero(2, 2);
  p0(0, 0) = 1.0;
  p1(1, 1) = 1.0;
  const CMatrix sys = kron_string(p.letters()) * p.coefficient();
  const auto d = sys.rows();
  return kron(CMatrix::Identity(d, d), p0) + kron(sys, p1);
}

double trotter_error(const PauliSum& h, double t, double dt) {
  return phase_distance(circuit_unitary(trotter_circuit(h, t, dt)), propagator(h, t));
}

}  // namespace

TEST_CASE("CZ from two native gates", "[compile]") {
  Mat4 cz = Mat4::Identity();
  cz(3, 3) = -1.0;
  REQUIRE(phase_distance(CzTemplate::ideal().unitary(), cz) < 1e-12);
}

TEST_CASE("controlled Pauli fragments", "[compile]") {
  SECTION("controlled-Z on one system qubit") {
    const Circuit c = decompose_controlled_pauli(PauliTerm("Z"), 1, 2);
    REQUIRE(c.counts().two_qubit == 2);
    REQUIRE(phase_distance(circuit_unitary(c), controlled_dense(PauliTerm("Z"))) < 1e-8);
  }
  SECTION("controlled identity is empty") {
    const Circuit c = decompose_controlled_pauli(PauliTerm("II"), 2, 3);
    REQUIRE(c.depth() == 0);
  }
  SECTION("controlled-Z1Z2") {
    const Circuit c = decompose_controlled_pauli(PauliTerm("ZZ"), 2, 3);
    REQUIRE(c.counts().two_qubit == 4);
    REQUIRE(phase_distance(circuit_unitary(c), controlled_dense(PauliTerm("ZZ"))) < 1e-8);
  }
  SECTION("mixed letters and phases") {
    for (const auto* s : {"XYZ", "YIX", "IYI"}) {
      for (cplx coeff : {cplx(1.0), cplx(-1.0), cplx(0.0, 1.0)}) {
        const PauliTerm p(s, coeff);
        const Circuit c = decompose_controlled_pauli(p, 3, 4);
        INFO(s << " " << coeff);
        REQUIRE(phase_distance(circuit_unitary(c), controlled_dense(p)) < 1e-8);
      }
    }
  }
  SECTION("errors") {
    REQUIRE_THROWS(decompose_controlled_pauli(PauliTerm("Z", 2.0), 1, 2));
    REQUIRE_THROWS(decompose_controlled_pauli(PauliTerm("ZZ"), 1, 2));
  }
}

TEST_CASE("Pauli exponentials", "[compile]") {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 20; ++k) {
    PauliTerm p = random_term(3, rng);
    if (p.is_identity()) continue;
    const double theta = p.coefficient().real();
    NativeBuilder b(3);
    add_pauli_exponential(b, p.with_coefficient(1.0), theta);
    const CMatrix dense = kron_string(p.letters());
    const CMatrix ref = std::cos(theta) * CMatrix::Identity(8, 8) - cplx(0, 1) * std::sin(theta) * dense;
    REQUIRE(phase_distance(circuit_unitary(b.finish()), ref) < 1e-10);
  }
}

TEST_CASE("Trotter circuits", "[compile]") {
  SECTION("single-term Hamiltonian is exact") {
    const PauliSum h(PauliTerm("XZ", 0.7));
    REQUIRE(trotter_error(h, 1.3, 0.4) < 1e-10);
  }
  SECTION("first-order scaling on a three-site chain") {
    const PauliSum h = build_heisenberg(BondTopology(3, {{0, 1}, {1, 2}}), 1.0, 0.0);
    const double ratio = trotter_error(h, 1.0, 0.05) / trotter_error(h, 1.0, 0.1);
    REQUIRE(ratio > 0.4);
    REQUIRE(ratio < 0.6);
  }
  SECTION("partial final step") {
    const PauliSum h = build_heisenberg(BondTopology(3, {{0, 1}, {1, 2}}), 1.0, 0.0);
    REQUIRE(trotter_error(h, 0.25, 0.1) < 0.05);
    REQUIRE(trotter_circuit(h, 0.25, 0.1).counts().two_qubit == 3 * 6 * 4);
  }
  SECTION("kitaev6 gate count at t = 3") {
    const Circuit c = trotter_circuit(preset("kitaev6").hamiltonian(), 3.0, 0.1);
    REQUIRE(c.counts().two_qubit > 500);
  }
}
