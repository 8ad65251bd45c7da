#include <catch2/catch_amalgamated.hpp>

#include <qspin/exact.hpp>
#include <qspin/recompiler.hpp>

#include "support.hpp"

using namespace qspin;
using namespace qspin::testing;

namespace {

std::vector<double> random_params(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> p(n);
  for (auto& v : p) v = u(rng);
  return p;
}

double overlap(const Circuit& c, const StateVector& init, const StateVector& target) {
  return std::norm(target.inner(simulate(c, init)));
}

}  // namespace

TEST_CASE("brickwork layout", "[recompiler]") {
  const BrickworkAnsatz a(5, 3);
  REQUIRE(a.bricks(0) == std::vector<std::pair<int, int>>{{0, 1}, {2, 3}});
  REQUIRE(a.bricks(1) == std::vector<std::pair<int, int>>{{1, 2}, {3, 4}});
  REQUIRE(a.two_qubit_count() == 6);
  REQUIRE(BrickworkAnsatz(2, 3).two_qubit_count() == 3);
  std::mt19937_64 rng(1);
  const Circuit c = a.circuit(random_params(a.n_params(), rng));
  REQUIRE(c.depth() == 7);
  for (std::size_t m = 0; m < c.depth(); ++m)
    for (const auto& g : c.moments()[m]) {
      REQUIRE((g.kind == GateKind::phxz || g.kind == GateKind::fsim5));
      REQUIRE((g.kind == GateKind::fsim5) == (m % 2 == 1));
    }
  REQUIRE_NOTHROW(c.validate());
}

TEST_CASE("fidelity objective", "[recompiler]") {
  std::mt19937_64 rng(2);
  SECTION("analytic gradient matches central differences") {
    for (int trial = 0; trial < 4; ++trial) {
      const int k = 1 + trial % 2;
      std::vector<CVector> targets, inits;
      for (int j = 0; j < k; ++j) {
        targets.push_back(random_state(3, rng).amplitudes());
        inits.push_back(random_state(3, rng).amplitudes());
      }
      const FidelityObjective f(BrickworkAnsatz(3, 3), targets, inits);
      const auto p = random_params(f.n_params(), rng);
      std::vector<double> g(f.n_params());
      const double v = f.value_and_gradient(p.data(), g.data());
      REQUIRE(std::abs(v - f.value(p.data())) < 1e-14);
      const auto fd = f.numerical_gradient(p.data());
      double dev = 0.0;
      for (int i = 0; i < f.n_params(); ++i) dev = std::max(dev, std::abs(g[i] - fd[i]));
      REQUIRE(dev < 1e-6);
    }
  }
  SECTION("orthogonal target gives zero") {
    const FidelityObjective f(BrickworkAnsatz(2, 0), {StateVector::basis(2, 3).amplitudes()}, {StateVector(2).amplitudes()});
    const std::vector<double> p(f.n_params(), 0.0);
    REQUIRE(f.value(p.data()) < 1e-30);
  }
  SECTION("global phase of the target is irrelevant") {
    const CVector t = random_state(3, rng).amplitudes(), i = random_state(3, rng).amplitudes();
    const FidelityObjective a(BrickworkAnsatz(3, 2), {t}, {i}), b(BrickworkAnsatz(3, 2), {std::polar(1.0, 0.77) * t}, {i});
    const auto p = random_params(a.n_params(), rng);
    REQUIRE(std::abs(a.value(p.data()) - b.value(p.data())) < 1e-14);
  }
}

TEST_CASE("recompile", "[recompiler]") {
  SECTION("identity target at zero rounds") {
    const RecompileResult r = recompile(StateVector(3), StateVector(3), RecompileConfig{});
    REQUIRE(r.rounds == 0);
    REQUIRE(r.fidelity > 1.0 - 1e-9);
    REQUIRE(r.two_qubit_count == 0);
  }
  SECTION("single native gate at one round") {
    std::vector<CVector> targets, inits;
    const Mat4 s = fsim5_matrix(GateAngles::sqrt_iswap_dag());
    for (int b = 0; b < 4; ++b) {
      inits.push_back(StateVector::basis(2, b).amplitudes());
      targets.push_back(CMatrix(s) * inits.back());
    }
    RecompileConfig cfg = RecompileConfig{}.with_rounds(1);
    cfg.tol = 1.0 - 1e-6;
    const RecompileResult r = recompile(targets, inits, 2, cfg);
    REQUIRE(r.fidelity >= 1.0 - 1e-6);
    REQUIRE(r.two_qubit_count == 1);
  }
  SECTION("reported fidelity agrees with an independent simulation") {
    std::mt19937_64 rng(4);
    const StateVector init = StateVector::basis(4, 5), target = random_state(4, rng);
    RecompileConfig cfg;
    cfg.max_rounds = 4;
    const RecompileResult r = recompile(target, init, cfg);
    REQUIRE(std::abs(r.fidelity - overlap(r.circuit, init, target)) < 1e-9);
    REQUIRE(r.below_tolerance == (r.fidelity < cfg.tol));
  }
  SECTION("fixed seed is deterministic") {
    std::mt19937_64 rng(5);
    const StateVector target = random_state(3, rng);
    RecompileConfig cfg;
    cfg.seed = 99;
    const RecompileResult a = recompile(target, StateVector(3), cfg), b = recompile(target, StateVector(3), cfg);
    REQUIRE(a.params == b.params);
    REQUIRE(a.fidelity == b.fidelity);
  }
  SECTION("deeper schedule is used when needed") {
    const PauliSum h = preset("fes4").hamiltonian();
    const auto [state, norm] = ExactSolver(h).imaginary_evolve(StateVector::basis(4, 3).amplitudes(), 1.0);
    RecompileConfig cfg;
    cfg.max_rounds = 6;
    const RecompileResult r = recompile(StateVector(4, state), StateVector::basis(4, 3), cfg);
    REQUIRE(r.fidelity > 0.9);
    REQUIRE(r.two_qubit_count <= 9);
  }
  SECTION("invalid configuration") {
    RecompileConfig cfg;
    cfg.tol = 1.5;
    REQUIRE_THROWS(recompile(StateVector(2), StateVector(2), cfg));
    REQUIRE_THROWS(recompile(StateVector(2, CVector::Ones(4)), StateVector(2), RecompileConfig{}));
  }
}

TEST_CASE("calibration-aware recompilation", "[recompiler]") {
  std::mt19937_64 rng(6);
  const StateVector init = StateVector::basis(3, 2), target = random_state(3, rng);
  RecompileConfig cfg = RecompileConfig{}.with_rounds(4);
  cfg.tol = 0.999;

  SECTION("ideal calibration reproduces the plain result") {
    std::map<std::pair<int, int>, GateAngles> cal{{{0, 1}, GateAngles::sqrt_iswap_dag()},
                                                 {{1, 2}, GateAngles::sqrt_iswap_dag()}};
    const RecompileResult a = recompile(target, init, cfg), b = recompile_with_calibration(target, init, cfg, cal);
    REQUIRE(a.params == b.params);
    REQUIRE(a.fidelity == b.fidelity);
  }
  SECTION("knowing the offset beats ignoring it") {
    const GateAngles off{0.0, 0.14, 0.0, 0.0, 0.0};
    std::map<std::pair<int, int>, GateAngles> cal{{{0, 1}, GateAngles::sqrt_iswap_dag() + off},
                                                 {{1, 2}, GateAngles::sqrt_iswap_dag() + off}};
    const RecompileResult aware = recompile_with_calibration(target, init, cfg, cal);
    const RecompileResult naive = recompile(target, init, cfg);
    NoiseModel nm;
    nm.default_gate_offset = off;
    const auto executed = [&](const Circuit& c) {
      return std::real(target.amplitudes().dot(
          simulate_noisy(c, DensityMatrix::from_pure(init), nm).entries() * target.amplitudes()));
    };
    REQUIRE(std::abs(executed(aware.circuit) - aware.fidelity) < 1e-9);
    REQUIRE(executed(aware.circuit) >= executed(naive.circuit));
  }
  SECTION("missing pair") {
    REQUIRE_THROWS(recompile_with_calibration(target, init, cfg, {{{0, 1}, GateAngles::sqrt_iswap_dag()}}));
  }
}

TEST_CASE("CZ rebuilt around calibrated gates", "[recompiler]") {
  Mat4 cz = Mat4::Identity();
  cz(3, 3) = -1.0;
  const auto [ideal, f_ideal] = calibrated_cz(GateAngles::sqrt_iswap_dag());
  REQUIRE(phase_distance(ideal.unitary(), cz) < 1e-12);
  const GateAngles real{kPi / 4 + 0.02, 0.14, 0.01, -0.01, 0.02};
  const auto [t, f] = calibrated_cz(real);
  const double overlap_cz = std::norm((CMatrix(cz).adjoint() * CMatrix(t.unitary())).trace() / 4.0);
  REQUIRE(std::abs(overlap_cz - f) < 1e-9);
  REQUIRE(f > 0.99);
  // The naive template executed on the real gate is worse.
  CzTemplate naive = CzTemplate::ideal();
  naive.gate = real;
  REQUIRE(std::norm((CMatrix(cz).adjoint() * CMatrix(naive.unitary())).trace() / 4.0) < f);
}
