#include <catch2/catch_amalgamated.hpp>

#include <qspin/simulate.hpp>

#include "support.hpp"

using namespace qspin;
using namespace qspin::testing;
using Catch::Matchers::WithinAbs;

namespace {

Circuit random_circuit(int n, int depth, std::mt19937_64& rng, bool measure = false) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> pick(0, n - 1);
  Circuit c(n);
  for (int d = 0; d < depth; ++d) {
    for (int q = 0; q < n; ++q) c.append_asap(Gate::phxz(q, u(rng), u(rng), u(rng)));
    if (n < 2) continue;
    const int a = pick(rng);
    int b = pick(rng);
    while (b == a) b = pick(rng);
    c.append_asap(Gate::fsim5(a, b, {u(rng) * kPi, u(rng), u(rng), u(rng), u(rng)}));
  }
  if (measure) {
    Moment m;
    for (int q = 0; q < n; ++q) m.push_back(Gate::measure(q));
    c.append_moment(m);
  }
  return c;
}

// Dense unitary of a circuit from explicit Kronecker products of gate matrices.
CMatrix dense_oracle(const Circuit& c) {
  const int n = c.n_qubits();
  const Eigen::Index d = Eigen::Index{1} << n;
  CMatrix u = CMatrix::Identity(d, d);
  for (const auto& m : c.moments())
    for (const auto& g : m) {
      if (g.kind == GateKind::measure) continue;
      CMatrix full = CMatrix::Zero(d, d);
      const CMatrix gm = gate_matrix(g);
      for (Eigen::Index col = 0; col < d; ++col)
        for (Eigen::Index row = 0; row < d; ++row) {
          // Bits of the gate targets in row/col; all other bits must agree.
          Eigen::Index r_sub = 0, c_sub = 0;
          std::uint64_t mask = 0;
          for (int k = 0; k < g.arity(); ++k) {
            const int b = n - 1 - g.qubits[k];
            mask |= std::uint64_t{1} << b;
            r_sub = (r_sub << 1) | ((row >> b) & 1);
            c_sub = (c_sub << 1) | ((col >> b) & 1);
          }
          if ((static_cast<std::uint64_t>(row) & ~mask) != (static_cast<std::uint64_t>(col) & ~mask)) continue;
          full(row, col) = gm(r_sub, c_sub);
        }
      u = full * u;
    }
  return u;
}

CMatrix iswap_dag() {
  CMatrix m = CMatrix::Zero(4, 4);
  m(0, 0) = m(3, 3) = 1.0;
  m(1, 2) = m(2, 1) = cplx(0, -1);
  return m;
}

}  // namespace

TEST_CASE("gate matrices", "[circuit]") {
  REQUIRE(phase_distance(phxz_matrix(1, 0, 0), pauli_2x2('X')) < 1e-12);
  REQUIRE((fsim5_matrix({}) - Mat4::Identity()).norm() < 1e-12);
  const Mat4 s = fsim5_matrix(GateAngles::sqrt_iswap_dag());
  REQUIRE(phase_distance(s * s, iswap_dag()) < 1e-12);
  REQUIRE((gate_matrix(Gate::sqrt_iswap_dag(0, 1)) - CMatrix(s)).norm() < 1e-12);

  SECTION("PhXZ convention") {
    REQUIRE((phxz_matrix(0.3, 0.0, 0.0) - x_pow(0.3)).norm() < 1e-12);
    REQUIRE((phxz_matrix(0.0, 0.4, 0.0) - z_pow(0.4)).norm() < 1e-12);
    // Z^a X Z^-a with a = 1/2 is Y up to phase.
    REQUIRE(phase_distance(phxz_matrix(1, 0, 0.5), pauli_2x2('Y')) < 1e-12);
  }
}

TEST_CASE("5-angle gate is unitary and excitation conserving", "[circuit][property]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2 * kPi, 2 * kPi);
  for (int k = 0; k < 1000; ++k) {
    const Mat4 m = fsim5_matrix({u(rng), u(rng), u(rng), u(rng), u(rng)});
    REQUIRE((m.adjoint() * m - Mat4::Identity()).norm() < 1e-12);
    REQUIRE(std::abs(m(1, 0)) == 0.0);
    REQUIRE(std::abs(m(2, 0)) == 0.0);
    REQUIRE(std::abs(m(3, 1)) + std::abs(m(3, 2)) + std::abs(m(1, 3)) + std::abs(m(2, 3)) == 0.0);
  }
}

TEST_CASE("PhXZ exponents recovered from a unitary", "[circuit][property]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const Mat2 m = std::polar(1.0, u(rng)) * phxz_matrix(u(rng), u(rng), u(rng));
    const auto p = phxz_from_unitary(m);
    REQUIRE(phase_distance(phxz_matrix(p[0], p[1], p[2]), m) < 1e-10);
  }
  for (char l : {'I', 'X', 'Y', 'Z'}) {
    const auto p = phxz_from_unitary(pauli_matrix(l));
    REQUIRE(phase_distance(phxz_matrix(p[0], p[1], p[2]), pauli_2x2(l)) < 1e-10);
  }
}

TEST_CASE("circuit structure", "[circuit]") {
  Circuit c(3);
  REQUIRE_THROWS(c.append_moment({Gate::phxz(0, 1, 0, 0), Gate::sqrt_iswap_dag(0, 1)}));
  REQUIRE_THROWS(c.append_moment({Gate::phxz(3, 1, 0, 0)}));
  REQUIRE_THROWS(c.append_moment({Gate::fsim5(1, 1, {})}));

  c.append_asap(Gate::phxz(0, 0.5, 0, 0));
  c.append_asap(Gate::phxz(2, 0.5, 0, 0));
  c.append_asap(Gate::sqrt_iswap_dag(0, 1));
  c.append_asap(Gate::phxz(2, 0.5, 0, 0));
  REQUIRE(c.depth() == 2);
  REQUIRE(c.moments()[0].size() == 2);
  REQUIRE(c.moments()[1].size() == 2);
  REQUIRE(c.qubit_idle(0, 1));
  REQUIRE(c.has_two_qubit_gate(1));
  const GateCounts n = c.counts();
  REQUIRE(n.single_qubit == 3);
  REQUIRE(n.two_qubit == 1);

  SECTION("JSON round trip") {
    Circuit m = c;
    m.append_moment({Gate::pauli_gate(0, 'Y'), Gate::measure(1)});
    const nlohmann::json j = to_json(m);
    REQUIRE(j[0][0]["gate"] == "PhXZ");
    REQUIRE(j[1][0]["gate"] == "TwoQubit5Angle");
    const Circuit back = circuit_from_json(nlohmann::json::parse(j.dump()), 3);
    REQUIRE(to_json(back) == j);
    REQUIRE(back.measured_qubits() == std::vector<int>{1});
  }
  SECTION("measurements must be terminal") {
    Circuit m = c;
    m.append_moment({Gate::measure(1)});
    m.append_moment({Gate::phxz(1, 1, 0, 0)});
    REQUIRE_THROWS(m.validate());
  }
}

TEST_CASE("statevector simulation", "[circuit]") {
  std::mt19937_64 rng(3);
  const StateVector psi = random_state(3, rng);
  REQUIRE((simulate(Circuit(3), psi).amplitudes() - psi.amplitudes()).norm() == 0.0);

  Circuit x(1);
  x.append_moment({Gate::pauli_gate(0, 'X')});
  REQUIRE(std::abs(simulate(x)[1] - 1.0) < 1e-12);

  SECTION("random circuits agree with the dense unitary product") {
    for (int trial = 0; trial < 5; ++trial) {
      const Circuit c = random_circuit(4, 6, rng);
      const StateVector init = random_state(4, rng);
      const CVector ref = dense_oracle(c) * init.amplitudes();
      const StateVector out = simulate(c, init);
      REQUIRE((out.amplitudes() - ref).norm() < 1e-10);
      REQUIRE_THAT(out.norm(), WithinAbs(1.0, 1e-12));
      REQUIRE((circuit_unitary(c) - dense_oracle(c)).norm() < 1e-10);
    }
  }
  SECTION("qubit 0 is the most significant bit") {
    Circuit c(3);
    c.append_moment({Gate::pauli_gate(0, 'X')});
    REQUIRE(std::abs(simulate(c)[4] - 1.0) < 1e-12);
  }
}

TEST_CASE("density-matrix simulation", "[circuit]") {
  std::mt19937_64 rng(5);
  SECTION("ideal noise matches the pure state") {
    for (int n = 1; n <= 5; ++n) {
      const Circuit c = random_circuit(n, 4, rng);
      const StateVector init = random_state(n, rng);
      const StateVector out = simulate(c, init);
      const DensityMatrix rho = simulate_noisy(c, DensityMatrix::from_pure(init), NoiseModel::ideal());
      REQUIRE((rho.entries() - out.amplitudes() * out.amplitudes().adjoint()).norm() < 1e-10);
    }
  }
  SECTION("one identity moment contracts Z by 1 - 4p") {
    const double p = 0.03;
    Circuit c(1);
    c.append_moment({Gate::phxz(0, 0, 0, 0)});
    const DensityMatrix rho = simulate_noisy(c, DensityMatrix(1), NoiseModel::depolarizing(p));
    // Channel oracle: (1-3p) rho + p (X rho X + Y rho Y + Z rho Z).
    CMatrix r0 = CMatrix::Zero(2, 2);
    r0(0, 0) = 1.0;
    CMatrix ref = (1 - 3 * p) * r0;
    for (char l : {'X', 'Y', 'Z'}) ref += p * pauli_2x2(l) * r0 * pauli_2x2(l);
    REQUIRE((rho.entries() - ref).norm() < 1e-12);
    REQUIRE_THAT(expectation(PauliSum(PauliTerm("Z")), rho).real(), WithinAbs(1 - 4 * p, 1e-12));
  }
  SECTION("depolarizing is applied to idle qubits") {
    Circuit c(2);
    c.append_moment({Gate::phxz(0, 0, 0, 0)});
    const DensityMatrix rho = simulate_noisy(c, DensityMatrix(2), NoiseModel::depolarizing(0.05));
    REQUIRE_THAT(expectation(PauliSum(PauliTerm("IZ")), rho).real(), WithinAbs(0.8, 1e-12));
  }
  SECTION("Z decays monotonically with depth") {
    double prev = 2.0;
    for (int depth = 1; depth <= 8; ++depth) {
      Circuit c(2);
      for (int d = 0; d < depth; ++d) c.append_moment({Gate::sqrt_iswap_dag(0, 1)});
      const DensityMatrix rho = simulate_noisy(c, DensityMatrix(2), NoiseModel::depolarizing(0.02));
      const double z = expectation(PauliSum(PauliTerm("ZI")) + PauliSum(PauliTerm("IZ")), rho).real();
      REQUIRE(z < prev);
      prev = z;
    }
  }
  SECTION("channel is CPTP after every moment") {
    const Circuit c = random_circuit(3, 5, rng);
    const StateVector init = random_state(3, rng);
    DensityMatrix rho = DensityMatrix::from_pure(init);
    for (const auto& m : c.moments()) {
      Circuit one(3);
      one.append_moment(m);
      rho = simulate_noisy(one, rho, NoiseModel::depolarizing(0.1));
      REQUIRE(std::abs(rho.trace() - 1.0) < 1e-10);
      REQUIRE((rho.entries() - rho.entries().adjoint()).norm() < 1e-12);
      REQUIRE(Eigen::SelfAdjointEigenSolver<CMatrix>(rho.entries()).eigenvalues().minCoeff() > -1e-9);
    }
  }
  SECTION("invalid depolarizing strength") {
    Circuit c(1);
    c.append_moment({Gate::phxz(0, 0, 0, 0)});
    REQUIRE_THROWS(simulate_noisy(c, DensityMatrix(1), NoiseModel::depolarizing(0.4)));
    REQUIRE_THROWS(simulate_noisy(c, DensityMatrix(1), NoiseModel::depolarizing(-0.01)));
  }
  SECTION("trajectories converge to the channel") {
    const Circuit c = random_circuit(3, 3, rng);
    const NoiseModel nm = NoiseModel::depolarizing(0.02);
    const auto exact = simulate_noisy(c, DensityMatrix(3), nm).probabilities();
    const auto traj = trajectory_probabilities(c, StateVector(3), nm, 4000, 1);
    REQUIRE((exact - traj).cwiseAbs().maxCoeff() < 0.02);
  }
  SECTION("quasi-static detuning is a dephasing channel") {
    // Averaging Rz(delta), delta ~ N(0, s^2), shrinks coherences by exp(-s^2/2) per moment.
    Circuit c(1);
    c.append_moment({Gate::phxz(0, 0.5, 0, 0)});
    c.append_moment({Gate::phxz(0, 0, 0, 0)});
    NoiseModel nm;
    nm.dephasing = {{0}, 0.3, 20};
    const DensityMatrix rho = simulate_noisy(c, DensityMatrix(1), nm);
    // After two moments the accumulated angle is 2 delta.
    REQUIRE_THAT(std::abs(rho.entries()(0, 1)), WithinAbs(0.5 * std::exp(-2 * 0.09), 1e-10));
  }
}

TEST_CASE("gate angle offsets", "[circuit]") {
  Circuit c(2);
  c.append_moment({Gate::phxz(0, 1, 0, 0)});
  c.append_moment({Gate::sqrt_iswap_dag(0, 1)});
  NoiseModel nm;
  const GateAngles off{0.02, 0.14, 0.01, -0.02, 0.03};
  nm.gate_angle_offsets[{0, 1}] = off;
  const DensityMatrix rho = simulate_noisy(c, DensityMatrix(2), nm);
  Circuit ref(2);
  ref.append_moment({Gate::phxz(0, 1, 0, 0)});
  ref.append_moment({Gate::fsim5(0, 1, GateAngles::sqrt_iswap_dag() + off)});
  const StateVector psi = simulate(ref);
  REQUIRE((rho.entries() - psi.amplitudes() * psi.amplitudes().adjoint()).norm() < 1e-12);

  SECTION("reversed qubit order executes the same physical gate") {
    Circuit r(2);
    r.append_moment({Gate::phxz(0, 1, 0, 0)});
    r.append_moment({Gate::sqrt_iswap_dag(1, 0)});
    // The ideal gate is symmetric, so with offsets the two orderings must agree too.
    const DensityMatrix rho_r = simulate_noisy(r, DensityMatrix(2), nm);
    REQUIRE((rho_r.entries() - rho.entries()).norm() < 1e-12);
  }
}

TEST_CASE("sampling", "[circuit]") {
  auto measured = [](int n, const Moment& prep) {
    Circuit c(n);
    if (!prep.empty()) c.append_moment(prep);
    Moment m;
    for (int q = 0; q < n; ++q) m.push_back(Gate::measure(q));
    c.append_moment(m);
    return c;
  };
  SECTION("ideal readout of |0>") {
    const Counts counts = sample(measured(1, {}), 100, NoiseModel::ideal(), 1);
    REQUIRE(counts.hist.size() == 1);
    REQUIRE(counts.by_string().at("0") == 100);
  }
  SECTION("confusion flip probability") {
    NoiseModel nm;
    nm.readout[0] = NoiseModel::confusion(0.1, 0.0);
    const std::uint64_t shots = 100000;
    const Counts counts = sample(measured(1, {}), shots, nm, 2);
    const double f = static_cast<double>(counts.by_string()["1"]) / shots;
    REQUIRE(std::abs(f - 0.1) < 3 * std::sqrt(0.1 * 0.9 / shots));
  }
  SECTION("|+> is balanced") {
    const std::uint64_t shots = 100000;
    const Counts counts = sample(measured(1, {Gate::phxz(0, 0.5, 0, 0)}), shots, NoiseModel::ideal(), 3);
    const double f = static_cast<double>(counts.by_string()["0"]) / shots;
    REQUIRE(std::abs(f - 0.5) < 3 * std::sqrt(0.25 / shots));
  }
  SECTION("bit order and marginals") {
    Circuit c(3);
    c.append_moment({Gate::pauli_gate(2, 'X')});
    c.append_moment({Gate::measure(0), Gate::measure(2)});
    const Counts counts = sample(c, 10, NoiseModel::ideal(), 4);
    REQUIRE(counts.n_bits == 2);
    REQUIRE(counts.by_string().at("01") == 10);
  }
  SECTION("fixed seed is reproducible") {
    std::mt19937_64 rng(9);
    const Circuit c = random_circuit(3, 4, rng, true);
    const NoiseModel nm = NoiseModel::depolarizing(0.01);
    REQUIRE(sample(c, 5000, nm, 42).hist == sample(c, 5000, nm, 42).hist);
    REQUIRE(sample(c, 5000, nm, 42).hist != sample(c, 5000, nm, 43).hist);
  }
  SECTION("no measurement is an error") {
    REQUIRE_THROWS(sample(Circuit(1), 10, NoiseModel::ideal(), 1));
  }
  SECTION("invalid confusion matrix") {
    NoiseModel nm;
    nm.readout[0] << 0.9, 0.2, 0.2, 0.9;
    REQUIRE_THROWS(sample(measured(1, {}), 10, nm, 1));
  }
}
