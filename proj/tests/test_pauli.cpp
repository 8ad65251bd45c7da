#include <catch2/catch_amalgamated.hpp>

#include <qspin/pauli.hpp>

#include "support.hpp"

using namespace qspin;
using qspin::testing::kron_string;
using Catch::Matchers::WithinAbs;

TEST_CASE("apply_pauli on basis states", "[pauli]") {
  SECTION("Z on |0> is +|0>") {
    const auto out = apply_pauli(PauliTerm("Z"), StateVector::basis(1, 0));
    REQUIRE(out[0] == cplx{1.0});
    REQUIRE(out[1] == cplx{0.0});
  }
  SECTION("XX on |00> is |11>") {
    const auto out = apply_pauli(PauliTerm("XX"), StateVector::basis(2, 0));
    REQUIRE(out[3] == cplx{1.0});
    REQUIRE(out.amplitudes().cwiseAbs().sum() == 1.0);
  }
  SECTION("Y on |0> is i|1>, agreeing with the 2x2 matrix") {
    const auto out = apply_pauli(PauliTerm("Y"), StateVector::basis(1, 0));
    REQUIRE(out[1] == cplx(0, 1));
    const CVector dense = kron_string("Y") * StateVector::basis(1, 0).amplitudes();
    REQUIRE((dense - out.amplitudes()).norm() < kLinalgTol);
  }
  SECTION("size mismatch throws") {
    REQUIRE_THROWS_AS(apply_pauli(PauliTerm("ZZ"), StateVector(3)), DimensionError);
  }
}

TEST_CASE("apply_pauli matches Kronecker products on random strings", "[pauli]") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 5;
    const PauliTerm t = qspin::testing::random_term(n, rng, false);
    const StateVector s = qspin::testing::random_state(n, rng);
    const CVector dense = t.coefficient() * (kron_string(t.letters()) * s.amplitudes());
    REQUIRE((apply_pauli(t, s).amplitudes() - dense).norm() < kLinalgTol);
  }
}

TEST_CASE("self-inverse Pauli strings square to identity", "[pauli][property]") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 6;
    const PauliTerm t = qspin::testing::random_term(n, rng).with_coefficient(1.0);
    const StateVector s = qspin::testing::random_state(n, rng);
    const StateVector twice = apply_pauli(t, apply_pauli(t, s));
    REQUIRE((twice.amplitudes() - s.amplitudes()).norm() < kLinalgTol);
    REQUIRE_THAT(apply_pauli(t, s).norm(), WithinAbs(1.0, kLinalgTol));
  }
}

TEST_CASE("expectation values", "[pauli]") {
  REQUIRE(expectation(PauliSum(PauliTerm("Z")), StateVector(1)) == cplx{1.0});

  CVector singlet = CVector::Zero(4);
  singlet(1) = 1.0 / std::sqrt(2.0);
  singlet(2) = -1.0 / std::sqrt(2.0);
  const StateVector s(2, singlet);
  REQUIRE_THAT(expectation(PauliSum(PauliTerm("ZZ")), s).real(), WithinAbs(-1.0, kLinalgTol));
  REQUIRE_THAT(expectation(PauliSum(PauliTerm("ZZ")), DensityMatrix::maximally_mixed(2)).real(),
               WithinAbs(0.0, kLinalgTol));

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4;
    const PauliSum h = qspin::testing::random_sum(n, 6, rng);
    const StateVector psi = qspin::testing::random_state(n, rng);
    const cplx pure = expectation(h, psi);
    const cplx mixed = expectation(h, DensityMatrix::from_pure(psi));
    REQUIRE(std::abs(pure.imag()) < kPhysicsTol);
    REQUIRE(std::abs(pure - mixed) < kLinalgTol);
    const cplx dense = psi.amplitudes().dot(dense_matrix(h) * psi.amplitudes());
    REQUIRE(std::abs(pure - dense) < kLinalgTol);
  }
}

TEST_CASE("dense_matrix", "[pauli]") {
  const CMatrix zz = dense_matrix(PauliSum(PauliTerm("ZZ")));
  REQUIRE((zz - CMatrix(Eigen::Vector4cd(1, -1, -1, 1).asDiagonal())).norm() < kLinalgTol);

  PauliSum heis(2);
  for (const char* s : {"XX", "YY", "ZZ"}) heis.add(PauliTerm(s, 0.25));
  Eigen::SelfAdjointEigenSolver<CMatrix> es(dense_matrix(heis));
  REQUIRE_THAT(es.eigenvalues()(0), WithinAbs(-0.75, kLinalgTol));
  for (int k = 1; k < 4; ++k) REQUIRE_THAT(es.eigenvalues()(k), WithinAbs(0.25, kLinalgTol));

  REQUIRE(dense_matrix(PauliSum(3)).norm() == 0.0);
  REQUIRE_THROWS_AS(dense_matrix(PauliSum(PauliTerm(std::string(15, 'Z')))), DimensionError);
  REQUIRE_NOTHROW(dense_matrix(PauliSum(PauliTerm(std::string(3, 'Z'))), 3));
}

TEST_CASE("dense_matrix is linear and hermitian for real coefficients", "[pauli][property]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 5;
    const PauliSum a = qspin::testing::random_sum(n, 5, rng, false);
    const PauliSum b = qspin::testing::random_sum(n, 5, rng, false);
    const cplx x{0.3, -1.2}, y{-2.0, 0.5};
    const CMatrix lhs = dense_matrix(a * x + b * y);
    const CMatrix rhs = x * dense_matrix(a) + y * dense_matrix(b);
    REQUIRE((lhs - rhs).norm() < kLinalgTol * (1 + rhs.norm()));
    const CMatrix h = dense_matrix(qspin::testing::random_sum(n, 5, rng));
    REQUIRE((h - h.adjoint()).norm() < kLinalgTol);
  }
}

TEST_CASE("canonical merged form", "[pauli]") {
  PauliSum s(2);
  s.add(PauliTerm("XZ", 1.0)).add(PauliTerm("XZ", 2.0)).add(PauliTerm("ZZ", 1.0)).add(PauliTerm("ZZ", -1.0));
  REQUIRE(s.size() == 1);
  REQUIRE(s.coefficient("XZ") == cplx{3.0});
}

TEST_CASE("Pauli products follow the single-qubit algebra", "[pauli]") {
  REQUIRE((PauliTerm("X") * PauliTerm("Y")).coefficient() == cplx(0, 1));
  REQUIRE((PauliTerm("X") * PauliTerm("Y")).letters() == "Z");
  REQUIRE((PauliTerm("Z") * PauliTerm("X")).coefficient() == cplx(0, 1));
  REQUIRE((PauliTerm("X") * PauliTerm("Z")).coefficient() == cplx(0, -1));
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 4;
    const PauliTerm a = qspin::testing::random_term(n, rng), b = qspin::testing::random_term(n, rng);
    const CMatrix prod = dense_matrix(PauliSum(a)) * dense_matrix(PauliSum(b));
    REQUIRE((dense_matrix(PauliSum(a * b)) - prod).norm() < kLinalgTol * (1 + prod.norm()));
  }
}

TEST_CASE("commutation checks", "[pauli]") {
  REQUIRE(commutes(PauliSum(PauliTerm("ZZ")), PauliSum(PauliTerm("XX"))));
  REQUIRE_FALSE(commutes(PauliSum(PauliTerm("Z")), PauliSum(PauliTerm("X"))));
}

TEST_CASE("symbolic commutation agrees with dense commutator", "[pauli][property]") {
  std::mt19937_64 rng(23);
  int agree_true = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 6;
    const int terms = 1 + trial % 3;
    const PauliSum a = qspin::testing::random_sum(n, terms, rng);
    const PauliSum b = qspin::testing::random_sum(n, terms, rng);
    const bool sym = commutes(a, b);
    REQUIRE(sym == commutes_dense(a, b));
    agree_true += sym ? 1 : 0;
  }
  REQUIRE(agree_true > 0);
}

TEST_CASE("PauliSum JSON round trip", "[pauli][io]") {
  std::mt19937_64 rng(29);
  const PauliSum s = qspin::testing::random_sum(4, 8, rng, false);
  const auto j = to_json(s);
  REQUIRE(j.at(0).contains("coeff"));
  REQUIRE(j.at(0).contains("string"));
  const PauliSum back = pauli_sum_from_json(nlohmann::json::parse(j.dump()));
  REQUIRE(back.size() == s.size());
  REQUIRE((dense_matrix(back) - dense_matrix(s)).norm() < kLinalgTol);
}

TEST_CASE("total spin operator has the spin-1/2 eigenvalues", "[pauli]") {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(dense_matrix(total_spin_squared(2)));
  REQUIRE_THAT(es.eigenvalues()(0), WithinAbs(0.0, kLinalgTol));
  REQUIRE_THAT(es.eigenvalues()(3), WithinAbs(2.0, kLinalgTol));
}
