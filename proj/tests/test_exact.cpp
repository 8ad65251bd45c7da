#include <catch2/catch_amalgamated.hpp>

#include <qspin/exact.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "support.hpp"

using namespace qspin;
using Catch::Matchers::WithinAbs;

namespace {

void require_level(const LabeledSpectrum& s, double excitation, int degeneracy, int two_s) {
  const auto found = s.at_excitation(excitation, 1e-3);
  INFO("excitation " << excitation);
  REQUIRE(found.size() == 1);
  REQUIRE(found[0].degeneracy == degeneracy);
  REQUIRE(found[0].two_s == two_s);
}

ModelParams fes4_params() {
  ModelParams p;
  p.J = 1.0;
  p.J_prime = 1.17;
  return p;
}

}  // namespace

TEST_CASE("fes4 labeled spectrum", "[exact]") {
  const LabeledSpectrum s = eigensystem(preset("fes4").hamiltonian());
  REQUIRE_THAT(s.ground_energy(), WithinAbs(-1.755, 1e-12));
  REQUIRE(s.levels.front().two_s == 0);
  require_level(s, 0.340, 1, 0);
  require_level(s, 1.170, 2, 2);
  require_level(s, 1.340, 1, 2);
  require_level(s, 3.340, 1, 4);
  REQUIRE(counted_dimension(s) == s.dim);
}

TEST_CASE("fes4 spectrum agrees with the recoupling formula", "[exact]") {
  // H = J'(S1.S2 + S3.S4) + J (S1+S2).(S3+S4)
  const double J = 1.0, Jp = 1.17;
  std::vector<double> expected;
  for (int s12 : {0, 1})
    for (int s34 : {0, 1})
      for (int s = std::abs(s12 - s34); s <= s12 + s34; ++s) {
        const double a = s12 * (s12 + 1.0), b = s34 * (s34 + 1.0);
        const double e = 0.5 * Jp * (a - 1.5 + b - 1.5) + 0.5 * J * (s * (s + 1.0) - a - b);
        for (int m = 0; m < 2 * s + 1; ++m) expected.push_back(e);
      }
  std::sort(expected.begin(), expected.end());
  const ExactSolver solver(preset("fes4").hamiltonian());
  REQUIRE(expected.size() == 16);
  for (int k = 0; k < 16; ++k) REQUIRE_THAT(solver.energies()(k), WithinAbs(expected[k], 1e-12));
}

TEST_CASE("fes8 labeled spectrum", "[exact]") {
  const LabeledSpectrum s = eigensystem(preset("fes8").hamiltonian());
  require_level(s, 0.917, 1, 2);
  require_level(s, 1.070, 4, 0);
  require_level(s, 1.463, 4, 2);
  require_level(s, 2.779, 1, 4);
  require_level(s, 5.614, 1, 6);
  require_level(s, 9.436, 1, 8);
  REQUIRE(counted_dimension(s) == 256);
}

TEST_CASE("spectrum is invariant under graph automorphisms", "[exact][property]") {
  // Swapping the two sites of a J' bond is a symmetry of the fes4 graph.
  const Model m = preset("fes4");
  std::vector<Bond> relabeled;
  const int perm[4] = {1, 0, 3, 2};
  for (const auto& b : m.topology.bonds()) relabeled.push_back({perm[b.i], perm[b.j], b.label});
  const ExactSolver a(m.hamiltonian()), b(build_hamiltonian(BondTopology(4, relabeled), m.params));
  REQUIRE((a.energies() - b.energies()).norm() < 1e-12);
}

TEST_CASE("spin-S Heisenberg spectra", "[exact]") {
  SECTION("4-site S=5/2") {
    const LabeledSpectrum s = spin_s_eigensystem(preset("fes4").topology, fes4_params(), 5);
    REQUIRE(s.dim == 1296);
    REQUIRE(counted_dimension(s) == 1296);
    require_level(s, 0.340, 1, 0);
    require_level(s, 1.020, 1, 0);
    require_level(s, 1.170, 2, 2);
    require_level(s, 1.340, 1, 2);
  }
  SECTION("2-site S=1") {
    ModelParams p;
    p.J = 1.0;
    const LabeledSpectrum s = spin_s_eigensystem(BondTopology(2, {{0, 1, BondLabel::generic}}), p, 2);
    REQUIRE(s.levels.size() == 3);
    REQUIRE_THAT(s.levels[0].energy, WithinAbs(-2.0, 1e-12));
    REQUIRE_THAT(s.levels[1].energy, WithinAbs(-1.0, 1e-12));
    REQUIRE_THAT(s.levels[2].energy, WithinAbs(1.0, 1e-12));
    REQUIRE(s.levels[0].two_s == 0);
    REQUIRE(s.levels[1].two_s == 2);
    REQUIRE(s.levels[2].two_s == 4);
  }
  SECTION("S=1/2 reproduces the Pauli-based eigensystem") {
    const Model m = preset("fes4");
    const LabeledSpectrum a = spin_s_eigensystem(m.topology, m.params, 1);
    const LabeledSpectrum b = eigensystem(m.hamiltonian());
    REQUIRE(a.levels.size() == b.levels.size());
    for (std::size_t k = 0; k < a.levels.size(); ++k) {
      REQUIRE_THAT(a.levels[k].energy, WithinAbs(b.levels[k].energy, 1e-12));
      REQUIRE(a.levels[k].degeneracy == b.levels[k].degeneracy);
      REQUIRE(a.levels[k].two_s == b.levels[k].two_s);
    }
  }
  SECTION("iterative sector solver matches the dense solver") {
    SpinSOptions opt;
    opt.lowest_k = 6;
    const LabeledSpectrum it = spin_s_eigensystem(preset("fes4").topology, fes4_params(), 5, opt);
    const LabeledSpectrum dense = spin_s_eigensystem(preset("fes4").topology, fes4_params(), 5);
    std::vector<SpectrumLevel> expect;
    int counted = 0;
    for (const auto& l : dense.levels) {
      if (counted >= 5) break;
      expect.push_back(l);
      counted += l.degeneracy;
    }
    for (std::size_t k = 0; k < expect.size(); ++k) {
      REQUIRE_THAT(it.levels[k].energy, WithinAbs(expect[k].energy, 1e-8));
      REQUIRE(it.levels[k].two_s == expect[k].two_s);
    }
  }
  SECTION("dense cap enforced") {
    SpinSOptions opt;
    opt.dense_cap = 1000;
    REQUIRE_THROWS_AS(spin_s_eigensystem(preset("fes4").topology, fes4_params(), 5, opt), DimensionError);
  }
}

TEST_CASE("thermal states", "[exact]") {
  const PauliSum two = build_heisenberg(BondTopology(2, {{0, 1, BondLabel::generic}}), 1.0, 0.0);
  SECTION("beta = 0 is maximally mixed") {
    const DensityMatrix rho = thermal_state(preset("fes4").hamiltonian(), 0.0);
    REQUIRE((rho.entries() - CMatrix::Identity(16, 16) / 16.0).norm() < 1e-12);
  }
  SECTION("large beta projects onto the singlet") {
    const DensityMatrix rho = thermal_state(two, 50.0);
    CVector singlet = CVector::Zero(4);
    singlet(1) = M_SQRT1_2;
    singlet(2) = -M_SQRT1_2;
    REQUIRE((rho.entries() - singlet * singlet.adjoint()).norm() < 1e-12);
  }
  SECTION("energy matches the partition-function formula") {
    const PauliSum h = preset("fes4").hamiltonian();
    const ExactSolver solver(h);
    double z = 0.0, e = 0.0;
    for (Eigen::Index k = 0; k < solver.energies().size(); ++k) {
      const double w = std::exp(-2.0 * solver.energies()(k));
      z += w;
      e += w * solver.energies()(k);
    }
    REQUIRE_THAT(expectation(h, solver.thermal_state(2.0)).real(), WithinAbs(e / z, 1e-12));
    REQUIRE_THAT(solver.partition_function(2.0), WithinAbs(z, 1e-10 * z));
  }
  SECTION("mean energy is non-decreasing in temperature") {
    const ExactSolver solver(preset("kh6").hamiltonian());
    double prev = -1e300;
    for (double T = 0.1; T < 20.0; T += 0.1) {
      const double e = solver.energy(1.0 / T);
      REQUIRE(e >= prev - 1e-12);
      prev = e;
    }
  }
}

TEST_CASE("static correlators", "[exact]") {
  const PauliSum zz12(PauliTerm("ZZIIIIII"));
  const PauliSum h8 = preset("fes8").hamiltonian();
  REQUIRE_THAT(static_corr_exact(h8, 0.0, zz12), WithinAbs(0.0, 1e-12));
  // Sites 2 and 3 (1-indexed) are anti-aligned at low temperature.
  REQUIRE(static_corr_exact(h8, 2.0, PauliSum(PauliTerm("IZZIIIII"))) < -0.2);
  const PauliSum h4 = preset("fes4").hamiltonian();
  const double v = static_corr_exact(h4, 2.0, PauliSum(PauliTerm("ZZII")));
  REQUIRE_THAT(v, WithinAbs(expectation(PauliSum(PauliTerm("ZZII")), thermal_state(h4, 2.0)).real(), 1e-12));
}

TEST_CASE("dynamic correlators", "[exact]") {
  const PauliSum h = preset("fes4").hamiltonian();
  const PauliSum z1(PauliTerm("ZIII")), z2(PauliTerm("IZII"));
  const ExactSolver solver(h);
  const TimeSeries c = solver.dynamic_corr(2.0, z1, z2, uniform_grid(0.0, 0.25, 40));
  REQUIRE(std::abs(c.values[0] - solver.thermal_expectation(2.0, PauliSum(PauliTerm("ZZII")))) < 1e-12);

  SECTION("agrees with explicit Heisenberg-picture evolution") {
    const DensityMatrix rho = solver.thermal_state(2.0);
    const CMatrix a = dense_matrix(z1), b = dense_matrix(z2);
    for (int k : {3, 17, 39}) {
      const CMatrix u = solver.propagator(c.times[k]);
      const cplx ref = (rho.entries() * u.adjoint() * a * u * b).trace();
      REQUIRE(std::abs(ref - c.values[k]) < 1e-12);
    }
  }
  SECTION("hermitian A = B gives C(-t) = C(t)*") {
    const TimeSeries sym = solver.dynamic_corr(2.0, z1, z1, uniform_grid(-5.0, 0.25, 41));
    for (int k = 0; k < 41; ++k) REQUIRE(std::abs(sym.values[k] - std::conj(sym.values[40 - k])) < 1e-8);
  }
}

TEST_CASE("propagators", "[exact]") {
  const PauliSum h = preset("fes4").hamiltonian();
  const ExactSolver solver(h);
  REQUIRE((solver.propagator(0.0) - CMatrix::Identity(16, 16)).norm() < 1e-12);
  const CMatrix u = solver.propagator(1.3);
  REQUIRE((u.adjoint() * u - CMatrix::Identity(16, 16)).norm() < 1e-10);
  const double beta = 2.0;
  double sum = 0.0;
  for (int i = 0; i < 16; ++i) {
    const auto [state, norm] = solver.imaginary_evolve(StateVector::basis(4, i).amplitudes(), beta / 2);
    sum += norm * norm;
    REQUIRE_THAT(state.norm(), WithinAbs(1.0, 1e-12));
  }
  REQUIRE_THAT(sum, WithinAbs(solver.partition_function(beta), 1e-10 * sum));
  const CMatrix im = solver.propagator(cplx{0.0, -0.5});
  const CMatrix ref = (-0.5 * dense_matrix(h)).exp();
  REQUIRE((im - ref).norm() < 1e-10);
}
