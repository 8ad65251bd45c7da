#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include "compile.hpp"
#include "exact.hpp"
#include "mitigation.hpp"
#include "parallel.hpp"
#include "recompiler.hpp"
#include "simulate.hpp"

namespace qspin {

struct EnsembleEntry {
  std::uint64_t basis = 0;
  double norm = 0.0;    // c_i = |e^{-beta H/2}|i>|
  double weight = 0.0;  // P_i = c_i^2
  Circuit prep;         // from |0...0>; empty for exact preparation
  CVector target;       // normalized e^{-beta H/2}|i>
  CVector prepared;     // state the prep circuit produces (target itself for exact preparation)
  double fidelity = 1.0;
  int rounds = 0;
  bool below_tolerance = false;
  std::vector<double> params;
};

struct ThermalEnsemble {
  double beta = 0.0;
  int n_qubits = 0;
  bool exact_prep = false;
  bool complete = true;  // covers every basis state
  std::vector<EnsembleEntry> entries;

  double total_weight() const {
    double w = 0.0;
    for (const auto& e : entries) w += e.weight;
    return w;
  }
  int below_tolerance_count() const {
    return static_cast<int>(std::count_if(entries.begin(), entries.end(), [](const EnsembleEntry& e) { return e.below_tolerance; }));
  }
  GateCounts max_prep_counts() const {
    GateCounts m;
    for (const auto& e : entries) {
      const auto c = e.prep.counts();
      m.single_qubit = std::max(m.single_qubit, c.single_qubit);
      m.two_qubit = std::max(m.two_qubit, c.two_qubit);
    }
    return m;
  }
};

struct EnsembleOptions {
  RecompileConfig recompile;
  bool exact_prep = false;
  std::vector<std::uint64_t> basis_subset;        // empty = all basis states
  const ThermalEnsemble* warm_from = nullptr;     // previous beta, same basis states
  const ThermalEnsemble* rounds_from = nullptr;   // reuse per-entry depths (reference models)
  int workers = default_workers();
};

// Basis states with the largest Boltzmann weights (ties by index).
inline std::vector<std::uint64_t> top_weight_basis_states(const ExactSolver& solver, double beta, int count) {
  const int n = solver.n_qubits();
  const auto dim = static_cast<std::uint64_t>(1) << n;
  std::vector<std::pair<double, std::uint64_t>> w;
  for (std::uint64_t i = 0; i < dim; ++i)
    w.push_back({-solver.imaginary_evolve(StateVector::basis(n, i).amplitudes(), beta / 2).second, i});
  std::sort(w.begin(), w.end());
  std::vector<std::uint64_t> out;
  for (int k = 0; k < std::min<int>(count, static_cast<int>(dim)); ++k) out.push_back(w[k].second);
  std::sort(out.begin(), out.end());
  return out;
}

// Folds the X flips preparing |i> into the base PhXZ layer so the circuit starts from |0...0>.
inline Circuit with_basis_flips(const Circuit& c, std::uint64_t basis) {
  const int n = c.n_qubits();
  Circuit out(n);
  std::vector<bool> done(n, false);
  for (std::size_t k = 0; k < c.depth(); ++k) {
    Moment m = c.moments()[k];
    if (k == 0)
      for (auto& g : m)
        if (g.kind == GateKind::phxz && ((basis >> qubit_bit(n, g.qubits[0])) & 1)) {
          const auto p = phxz_from_unitary(single_qubit_matrix(g) * pauli_matrix('X'));
          g = Gate::phxz(g.qubits[0], p[0], p[1], p[2]);
          done[g.qubits[0]] = true;
        }
    if (k == 0) {
      for (int q = 0; q < n; ++q)
        if (((basis >> qubit_bit(n, q)) & 1) && !done[q]) m.push_back(Gate::phxz(q, 1, 0, 0));
    }
    out.append_moment(std::move(m));
  }
  if (c.depth() == 0) {
    Moment m;
    for (int q = 0; q < n; ++q)
      if ((basis >> qubit_bit(n, q)) & 1) m.push_back(Gate::phxz(q, 1, 0, 0));
    if (!m.empty()) out.append_moment(std::move(m));
  }
  return out;
}

// Thermal ensemble: exact e^{-beta H/2}|i>, weights from the norms, and (unless exact_prep)
// a recompiled preparation circuit per basis state.
inline ThermalEnsemble build_ensemble(const ExactSolver& solver, double beta, const EnsembleOptions& opt) {
  if (beta < 0.0) throw std::invalid_argument("build_ensemble: beta must be >= 0");
  const int n = solver.n_qubits();
  const auto dim = static_cast<std::uint64_t>(1) << n;
  std::vector<std::uint64_t> basis = opt.basis_subset;
  if (basis.empty()) {
    basis.resize(dim);
    std::iota(basis.begin(), basis.end(), std::uint64_t{0});
  }
  for (auto b : basis)
    if (b >= dim) throw std::invalid_argument("build_ensemble: basis index out of range");
  ThermalEnsemble ens;
  ens.beta = beta;
  ens.n_qubits = n;
  ens.exact_prep = opt.exact_prep;
  ens.complete = basis.size() == dim;
  auto find_in = [](const ThermalEnsemble* e, std::uint64_t b) -> const EnsembleEntry* {
    if (!e) return nullptr;
    for (const auto& x : e->entries)
      if (x.basis == b) return &x;
    return nullptr;
  };
  ens.entries = parallel_map(
      basis.size(),
      [&](std::size_t k) {
        EnsembleEntry e;
        e.basis = basis[k];
        const StateVector init = StateVector::basis(n, e.basis);
        auto [state, norm] = solver.imaginary_evolve(init.amplitudes(), beta / 2);
        e.norm = norm;
        e.weight = norm * norm;
        e.target = state;
        if (opt.exact_prep) {
          e.prepared = state;
          return e;
        }
        RecompileConfig cfg = opt.recompile;
        if (const auto* r = find_in(opt.rounds_from, e.basis)) cfg = cfg.with_rounds(r->rounds);
        if (const auto* w = find_in(opt.warm_from, e.basis)) {
          cfg.warm_start = w->params;
          if (!opt.rounds_from) cfg.min_rounds = std::min(std::max(w->rounds, cfg.min_rounds.value_or(0)), cfg.max_rounds);
        }
        const RecompileResult r = recompile(StateVector(n, state), init, cfg);
        e.prep = with_basis_flips(r.circuit, e.basis);
        e.prepared = simulate(e.prep).amplitudes();
        e.fidelity = r.fidelity;
        e.rounds = r.rounds;
        e.below_tolerance = r.below_tolerance;
        e.params = r.params;
        return e;
      },
      opt.workers);
  return ens;
}

inline ThermalEnsemble build_ensemble(const PauliSum& h, double beta, const EnsembleOptions& opt) {
  return build_ensemble(ExactSolver(h), beta, opt);
}

// Groups of qubit-wise commuting terms sharing one measurement basis (letter per qubit).
struct MeasurementGroup {
  std::string basis;
  std::vector<PauliTerm> terms;
};

inline std::vector<MeasurementGroup> qubit_wise_groups(const PauliSum& a) {
  std::vector<MeasurementGroup> groups;
  for (const auto& t : a.terms()) {
    if (t.is_identity()) continue;
    const std::string l = t.letters();
    bool placed = false;
    for (auto& g : groups) {
      bool ok = true;
      for (std::size_t q = 0; q < l.size() && ok; ++q) ok = l[q] == 'I' || g.basis[q] == 'I' || g.basis[q] == l[q];
      if (!ok) continue;
      for (std::size_t q = 0; q < l.size(); ++q)
        if (l[q] != 'I') g.basis[q] = l[q];
      g.terms.push_back(t);
      placed = true;
      break;
    }
    if (!placed) groups.push_back({l, {t}});
  }
  return groups;
}

inline Circuit measurement_circuit(const Circuit& prep, const std::string& basis, const CzTemplates* templates = nullptr) {
  const int n = prep.n_qubits();
  NativeBuilder b(n, templates);
  for (const auto& m : prep.moments())
    for (const auto& g : m) b.append_gate(g);
  for (int q = 0; q < n; ++q) b.apply_1q(q, z_to_letter(basis[q]).adjoint());
  Circuit c = b.finish();
  Moment meas;
  for (int q = 0; q < n; ++q) meas.push_back(Gate::measure(q));
  c.append_moment(std::move(meas));
  return c;
}

struct ExecutionSpec {
  NoiseModel noise;
  ExecutionOptions exec;
  std::uint64_t shots = 10000;  // 0 = exact outcome probabilities
  std::uint64_t seed = 1;
  int workers = default_workers();
};

struct PostOptions {
  bool readout = false;
  std::map<int, Eigen::Matrix2d> confusion;
  std::optional<PauliTerm> symmetry;  // Z-type system symmetry for post-selection
  bool postselect = false;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline QuasiDistribution run_circuit(const Circuit& c, const ExecutionSpec& spec, std::uint64_t seed) {
  const auto p = outcome_probabilities(c, spec.noise, seed ^ 0x5bd1e995ULL, spec.exec);
  if (spec.shots == 0) return exact_distribution(p);
  return to_distribution(sample_distribution(p, static_cast<int>(c.measured_qubits().size()), spec.shots, seed));
}

struct Estimate {
  double value = 0.0;
  double stderr_value = 0.0;
};

// Z-type symmetry of H usable for post-selection (first match among global parities).
inline std::optional<PauliTerm> z_symmetry(const PauliSum& h) {
  for (const auto& s : find_symmetry(h, global_parity_candidates(h.n_qubits())))
    if (s.is_z_type()) return s;
  return std::nullopt;
}

struct StaticProgram {
  std::vector<MeasurementGroup> groups;
  std::vector<std::vector<Circuit>> circuits;  // [entry][group]
};

inline StaticProgram compile_static(const ThermalEnsemble& ens, const PauliSum& a, const CzTemplates* templates = nullptr) {
  if (ens.exact_prep) throw std::invalid_argument("compile_static: ensemble has no preparation circuits");
  StaticProgram p;
  p.groups = qubit_wise_groups(a);
  for (const auto& e : ens.entries) {
    std::vector<Circuit> row;
    for (const auto& g : p.groups) row.push_back(measurement_circuit(e.prep, g.basis, templates));
    p.circuits.push_back(std::move(row));
  }
  return p;
}

// Ensemble average of A: sum_i P_i A_i / sum_i P_i, with shot noise propagated.
inline Estimate static_observable(const ThermalEnsemble& ens, const PauliSum& a, const StaticProgram& prog,
                                  const ExecutionSpec& spec, const PostOptions& post = {}) {
  const std::size_t ng = prog.groups.size();
  const auto dists = parallel_map(
      ens.entries.size() * ng,
      [&](std::size_t k) { return run_circuit(prog.circuits[k / ng][k % ng], spec, mix_seed(spec.seed, k)); },
      spec.workers);
  const int n = ens.n_qubits;
  std::vector<int> measured(n);
  std::iota(measured.begin(), measured.end(), 0);
  double num = 0.0, var = 0.0, wsum = 0.0;
  double identity = 0.0;
  for (const auto& t : a.terms())
    if (t.is_identity()) identity += t.coefficient().real();
  for (std::size_t e = 0; e < ens.entries.size(); ++e) {
    const auto& entry = ens.entries[e];
    double value = identity, v2 = 0.0;
    for (std::size_t g = 0; g < ng; ++g) {
      QuasiDistribution d = dists[e * ng + g];
      if (post.readout) d = readout_mitigate(d, measured, post.confusion);
      const bool z_basis = prog.groups[g].basis.find_first_of("XY") == std::string::npos;
      if (post.postselect && post.symmetry && z_basis) d = postselect(d, *post.symmetry, z_parity(*post.symmetry, entry.basis));
      for (const auto& t : prog.groups[g].terms) {
        const auto [m, se] = z_expectation(d, t.x_mask() | t.z_mask());
        value += t.coefficient().real() * m;
        v2 += std::norm(t.coefficient()) * se * se;
      }
    }
    num += entry.weight * value;
    var += entry.weight * entry.weight * v2;
    wsum += entry.weight;
  }
  return {num / wsum, std::sqrt(var) / wsum};
}

// Noiseless expectation on the prepared states (no circuits, no shots).
inline double static_observable_exact(const ThermalEnsemble& ens, const PauliSum& a) {
  double num = 0.0, wsum = 0.0;
  for (const auto& e : ens.entries) {
    num += e.weight * expectation(a, StateVector(ens.n_qubits, e.prepared)).real();
    wsum += e.weight;
  }
  return num / wsum;
}

enum class Component { re, im };

// Pads pairs of X and Y on the idle ancilla inside each stretch between two ancilla gates,
// using only moments without two-qubit gates. Returns the number of inserted gates.
inline int insert_dynamical_decoupling(Circuit& c, int ancilla) {
  std::vector<std::size_t> touch;
  for (std::size_t k = 0; k < c.depth(); ++k)
    if (!c.qubit_idle(k, ancilla)) touch.push_back(k);
  int inserted = 0;
  for (std::size_t j = 0; j + 1 < touch.size(); ++j) {
    std::vector<std::size_t> slots;
    for (std::size_t k = touch[j] + 1; k < touch[j + 1]; ++k)
      if (!c.has_two_qubit_gate(k)) slots.push_back(k);
    if (slots.size() % 2) slots.pop_back();
    for (std::size_t s = 0; s < slots.size(); ++s) {
      c.moment(slots[s]).push_back(Gate::pauli_gate(ancilla, (s / 2) % 2 == 0 ? 'X' : 'Y'));
      ++inserted;
    }
  }
  return inserted;
}

// Ancilla (index n) in |+>, controlled-B, U_t, controlled-A, ancilla basis change for X (Re) or
// Y (Im), then every qubit measured.
inline Circuit hadamard_test_circuit(const Circuit& prep, const Circuit& u_t, const PauliTerm& a, const PauliTerm& b,
                                     Component comp, bool dd, const CzTemplates* templates = nullptr) {
  const int n = prep.n_qubits();
  require_same_size(n, u_t.n_qubits(), "hadamard_test_circuit");
  require_same_size(n, a.n_qubits(), "hadamard_test_circuit");
  require_same_size(n, b.n_qubits(), "hadamard_test_circuit");
  const int anc = n;
  NativeBuilder nb(n + 1, templates);
  for (const auto& m : prep.moments())
    for (const auto& g : m) nb.append_gate(g);
  nb.apply_1q(anc, NativeBuilder::hadamard());
  add_controlled_pauli(nb, b, anc);
  for (const auto& m : u_t.moments())
    for (const auto& g : m) nb.append_gate(g);
  add_controlled_pauli(nb, a, anc);
  if (comp == Component::im) {
    Mat2 sdg = Mat2::Identity();
    sdg(1, 1) = cplx(0, -1);
    nb.apply_1q(anc, sdg);
  }
  nb.apply_1q(anc, NativeBuilder::hadamard());
  Circuit c = nb.finish();
  if (dd) insert_dynamical_decoupling(c, anc);
  Moment meas;
  for (int q = 0; q <= n; ++q) meas.push_back(Gate::measure(q));
  c.append_moment(std::move(meas));
  return c;
}

enum class Realtime { recompiled, trotter };

struct DynamicsOptions {
  std::vector<double> times;
  Realtime mode = Realtime::recompiled;
  double trotter_dt = 0.1;
  RecompileConfig time_cfg;
  bool dd = false;
  const CzTemplates* cz_templates = nullptr;
  int workers = default_workers();
};

struct DynamicsProgram {
  int n_qubits = 0;
  std::vector<double> times;
  PauliTerm a, b;
  std::vector<std::vector<std::array<Circuit, 2>>> circuits;  // [time][entry] = {Re, Im}
  std::vector<std::vector<int>> rounds;
  std::vector<std::vector<double>> fidelity;
  std::vector<std::vector<std::vector<double>>> params;

  int below_tolerance(double tol) const {
    int c = 0;
    for (const auto& row : fidelity)
      for (double f : row) c += f < tol ? 1 : 0;
    return c;
  }
};

// Per-circuit gate tallies over a program: the largest Hadamard-test circuit and the mean.
struct GateBudget {
  GateCounts max;
  double mean_two_qubit = 0.0;
  double mean_single_qubit = 0.0;
  std::size_t circuits = 0;
};

inline GateBudget gate_budget(const DynamicsProgram& p) {
  GateBudget g;
  double s2 = 0.0, s1 = 0.0;
  for (const auto& row : p.circuits)
    for (const auto& pair : row)
      for (const auto& c : pair) {
        const auto k = c.counts();
        g.max.two_qubit = std::max(g.max.two_qubit, k.two_qubit);
        g.max.single_qubit = std::max(g.max.single_qubit, k.single_qubit);
        s2 += k.two_qubit;
        s1 += k.single_qubit;
        ++g.circuits;
      }
  if (g.circuits) {
    g.mean_two_qubit = s2 / static_cast<double>(g.circuits);
    g.mean_single_qubit = s1 / static_cast<double>(g.circuits);
  }
  return g;
}

inline nlohmann::json to_json(const GateBudget& g) {
  return {{"max_two_qubit", g.max.two_qubit}, {"max_single_qubit", g.max.single_qubit},
          {"mean_two_qubit", g.mean_two_qubit}, {"mean_single_qubit", g.mean_single_qubit}, {"circuits", g.circuits}};
}

// Builds the Hadamard-test circuits. In recompiled mode the real-time block is fitted per time
// point and entry so that it maps both the prepared state and B times it correctly.
inline DynamicsProgram compile_dynamics(const ExactSolver& solver, const ThermalEnsemble& ens, const PauliTerm& a,
                                        const PauliTerm& b, const DynamicsOptions& opt,
                                        const DynamicsProgram* rounds_from = nullptr, const PauliSum* h_for_trotter = nullptr) {
  if (ens.exact_prep) throw std::invalid_argument("compile_dynamics: ensemble has no preparation circuits");
  require_uniform(opt.times, "compile_dynamics");
  const int n = ens.n_qubits;
  DynamicsProgram p;
  p.n_qubits = n;
  p.times = opt.times;
  p.a = a;
  p.b = b;
  const std::size_t ne = ens.entries.size();
  const std::size_t nt = opt.times.size();
  p.circuits.assign(nt, std::vector<std::array<Circuit, 2>>(ne));
  p.rounds.assign(nt, std::vector<int>(ne, 0));
  p.fidelity.assign(nt, std::vector<double>(ne, 1.0));
  p.params.assign(nt, std::vector<std::vector<double>>(ne));
  // Entries in parallel; time points in order so each fit can start from the previous one.
  parallel_map(
      ne,
      [&](std::size_t e) {
        const auto& entry = ens.entries[e];
        const CVector psi = entry.prepared;
        const CVector bpsi = apply_pauli(b, StateVector(n, psi)).amplitudes();
        std::vector<double> warm;
        int warm_rounds = -1;
        for (std::size_t k = 0; k < nt; ++k) {
          const double t = opt.times[k];
          Circuit ut(n);
          if (opt.mode == Realtime::trotter) {
            if (!h_for_trotter) throw std::invalid_argument("compile_dynamics: Trotter mode needs the Hamiltonian");
            ut = trotter_circuit(*h_for_trotter, t, opt.trotter_dt);
          } else {
            RecompileConfig cfg = opt.time_cfg;
            if (rounds_from) cfg = cfg.with_rounds(rounds_from->rounds[k][e]);
            else if (warm_rounds > 0) cfg.min_rounds = std::min(std::max(warm_rounds, cfg.min_rounds.value_or(0)), cfg.max_rounds);
            cfg.warm_start = warm;
            const RecompileResult r =
                recompile({solver.evolve(psi, t), solver.evolve(bpsi, t)}, {psi, bpsi}, n, cfg);
            ut = r.circuit;
            p.rounds[k][e] = r.rounds;
            p.fidelity[k][e] = r.fidelity;
            p.params[k][e] = r.params;
            warm = r.params;
            warm_rounds = r.rounds;
          }
          for (int c = 0; c < 2; ++c)
            p.circuits[k][e][c] = hadamard_test_circuit(entry.prep, ut, a, b, c == 0 ? Component::re : Component::im,
                                                        opt.dd, opt.cz_templates);
        }
        return 0;
      },
      opt.workers);
  return p;
}

// Same program with XX/YY pairs filling idle ancilla moments of every circuit.
inline DynamicsProgram with_decoupling(DynamicsProgram p) {
  for (auto& row : p.circuits)
    for (auto& pair : row)
      for (auto& c : pair) insert_dynamical_decoupling(c, p.n_qubits);
  return p;
}

struct RawDynamics {
  std::vector<std::vector<std::array<QuasiDistribution, 2>>> dists;  // [time][entry]
};

inline RawDynamics execute(const DynamicsProgram& p, const ExecutionSpec& spec) {
  const std::size_t nt = p.circuits.size(), ne = nt ? p.circuits[0].size() : 0;
  const auto flat = parallel_map(
      nt * ne * 2,
      [&](std::size_t k) { return run_circuit(p.circuits[k / (2 * ne)][(k / 2) % ne][k % 2], spec, mix_seed(spec.seed, k)); },
      spec.workers);
  RawDynamics r;
  r.dists.assign(nt, std::vector<std::array<QuasiDistribution, 2>>(ne));
  for (std::size_t k = 0; k < flat.size(); ++k) r.dists[k / (2 * ne)][(k / 2) % ne][k % 2] = flat[k];
  return r;
}

// Ensemble-weighted Hadamard-test estimates after the optional RO and PS stages.
inline TimeSeries evaluate(const RawDynamics& raw, const ThermalEnsemble& ens, const DynamicsProgram& p,
                           const PostOptions& post = {}) {
  const int n = p.n_qubits;
  std::vector<int> measured(n + 1);
  std::iota(measured.begin(), measured.end(), 0);
  std::optional<PauliTerm> sym_full;
  if (post.postselect && post.symmetry) {
    if (!post.symmetry->commutes_with(p.a) || !post.symmetry->commutes_with(p.b))
      throw std::invalid_argument("evaluate: post-selection symmetry must commute with A and B");
    sym_full = PauliTerm(post.symmetry->letters() + "I");
  }
  TimeSeries s;
  s.times = p.times;
  double wsum = 0.0;
  for (const auto& e : ens.entries) wsum += e.weight;
  for (std::size_t k = 0; k < p.times.size(); ++k) {
    cplx v = 0.0;
    double var_re = 0.0, var_im = 0.0;
    for (std::size_t e = 0; e < ens.entries.size(); ++e) {
      const auto& entry = ens.entries[e];
      double parts[2], errs[2];
      for (int c = 0; c < 2; ++c) {
        QuasiDistribution d = raw.dists[k][e][c];
        if (post.readout) d = readout_mitigate(d, measured, post.confusion);
        if (sym_full) d = postselect(d, *sym_full, z_parity(*post.symmetry, entry.basis));
        const auto [m, se] = z_expectation(d, 1);  // ancilla is the last measured bit
        parts[c] = m;
        errs[c] = se;
      }
      v += entry.weight * cplx(parts[0], parts[1]);
      var_re += entry.weight * entry.weight * errs[0] * errs[0];
      var_im += entry.weight * entry.weight * errs[1] * errs[1];
    }
    s.values.push_back(v / wsum);
    s.stderr_re.push_back(std::sqrt(var_re) / wsum);
    s.stderr_im.push_back(std::sqrt(var_im) / wsum);
  }
  s.metadata = {{"beta", ens.beta}, {"A", p.a.letters()}, {"B", p.b.letters()}};
  return s;
}

// Exact per-entry correlators <psi_i|A(t) B|psi_i> weighted by the ensemble norms over the ensemble's basis
// states; equals the thermal trace when the ensemble is complete.
inline TimeSeries ideal_dynamic_corr(const ExactSolver& solver, const ThermalEnsemble& ens, const PauliTerm& a,
                                     const PauliTerm& b, const std::vector<double>& times) {
  const int n = ens.n_qubits;
  TimeSeries s;
  s.times = times;
  s.values.assign(times.size(), 0.0);
  double wsum = 0.0;
  for (const auto& e : ens.entries) {
    const CVector& psi = e.target;
    const CVector bpsi = apply_pauli(b, StateVector(n, psi)).amplitudes();
    for (std::size_t k = 0; k < times.size(); ++k) {
      const CVector u_psi = solver.evolve(psi, times[k]), u_bpsi = solver.evolve(bpsi, times[k]);
      s.values[k] += e.weight * u_psi.dot(apply_pauli(a, StateVector(n, u_bpsi)).amplitudes());
    }
    wsum += e.weight;
  }
  for (auto& v : s.values) v /= wsum;
  s.metadata = {{"beta", ens.beta}, {"A", a.letters()}, {"B", b.letters()}, {"exact", true}};
  return s;
}

}  // namespace qspin
