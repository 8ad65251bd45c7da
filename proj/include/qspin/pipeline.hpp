#pragma once

#include <chrono>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "calibration.hpp"
#include "mitigation.hpp"
#include "models.hpp"
#include "qite.hpp"
#include "spectral.hpp"

namespace qspin {

// Emulated device: depolarizing rate after every moment, asymmetric readout errors on every
// qubit, an optional coherent offset on all native two-qubit gates and quasi-static dephasing of
// the Hadamard-test ancilla.
struct DeviceSpec {
  double depol_p = 0.0;
  double readout_eps0 = 0.0, readout_eps1 = 0.0;
  std::optional<GateAngles> gate_offset;
  double microwave_phi_jitter = 0.0;
  double ancilla_dephasing = 0.0;

  static DeviceSpec depolarizing(double p) {
    DeviceSpec d;
    d.depol_p = p;
    return d;
  }

  // Depolarizing rate p plus the readout and ancilla dephasing levels used by the staged runs.
  static DeviceSpec hardware_like(double p) {
    DeviceSpec d;
    d.depol_p = p;
    d.readout_eps0 = 0.02;
    d.readout_eps1 = 0.05;
    d.ancilla_dephasing = 0.1;
    return d;
  }

  NoiseModel noise(int n_total, std::optional<int> ancilla = std::nullopt) const {
    NoiseModel nm = NoiseModel::depolarizing(depol_p);
    if (readout_eps0 > 0.0 || readout_eps1 > 0.0)
      for (int q = 0; q < n_total; ++q) nm.readout[q] = NoiseModel::confusion(readout_eps0, readout_eps1);
    nm.default_gate_offset = gate_offset;
    nm.microwave_phi_jitter = microwave_phi_jitter;
    if (ancilla && ancilla_dephasing > 0.0) nm.dephasing = {{*ancilla}, ancilla_dephasing, 16};
    nm.validate();
    return nm;
  }

  bool ideal() const { return noise(1, 0).is_ideal(); }
};

inline nlohmann::json to_json(const DeviceSpec& d) {
  nlohmann::json j = {{"depol_p", d.depol_p},
                      {"readout_eps0", d.readout_eps0},
                      {"readout_eps1", d.readout_eps1},
                      {"microwave_phi_jitter", d.microwave_phi_jitter},
                      {"ancilla_dephasing", d.ancilla_dephasing}};
  j["gate_offset"] = d.gate_offset ? nlohmann::json(d.gate_offset->array()) : nlohmann::json(nullptr);
  return j;
}

// Mitigation stages in chain order: F, RO, PS, SE, rescale (with the imaginary shift).
struct MitigationFlags {
  bool f = false, ro = false, ps = false, se = false, rescale = false;

  static MitigationFlags all() { return {true, true, true, true, true}; }
  static MitigationFlags none() { return {}; }
};

inline nlohmann::json to_json(const MitigationFlags& m) {
  return {{"F", m.f}, {"RO", m.ro}, {"PS", m.ps}, {"SE", m.se}, {"rescale", m.rescale}};
}

// Native pairs a program will use: brickwork neighbours and each controlled-Pauli pair.
inline std::vector<std::pair<int, int>> used_pairs(int n, const std::vector<PauliTerm>& controlled, bool with_ancilla) {
  std::set<std::pair<int, int>> s;
  for (int q = 0; q + 1 < n; ++q) s.insert({q, q + 1});
  if (with_ancilla)
    for (const auto& t : controlled)
      for (int q : t.support()) s.insert({q, n});
  return {s.begin(), s.end()};
}

struct CalibrationResult {
  CalibrationRecord record;
  std::map<std::pair<int, int>, GateAngles> angles;
  CzTemplates cz;
};

// Floquet-calibrates every used pair on the emulated device and rebuilds CZ templates around the
// calibrated gates of the ancilla pairs.
inline CalibrationResult calibrate_device(const DeviceSpec& device, const std::vector<std::pair<int, int>>& pairs, int n_total,
                                          std::uint64_t shots, std::uint64_t seed, const FloquetOptions& opt = {},
                                          int workers = default_workers()) {
  const NoiseModel nm = device.noise(n_total);
  CalibrationResult r;
  r.record = calibrate_pairs(
      pairs, [&](std::pair<int, int> p) { return emulated_pair_executor(nm, p, shots, mix_seed(seed, 7 * p.first + 131 * p.second)); },
      opt, workers);
  r.angles = calibrated_angles(r.record);
  for (const auto& [pair, a] : r.angles) r.cz[pair] = calibrated_cz(a, seed).first;
  return r;
}

// Confusion matrices for RO: the device's readout table, or an estimate from sampled |0>/|1>
// preparations (which also absorbs preparation-gate errors).
inline std::map<int, Eigen::Matrix2d> readout_confusion(const NoiseModel& nm, int n_total, bool measured, std::uint64_t shots,
                                                        std::uint64_t seed) {
  if (measured) return estimate_confusion(nm, n_total, shots, seed);
  return nm.readout;
}

// Relative error of the stage amplitude at the exact dominant line (read within one grid step).
inline double peak_amplitude_error(const SpectralFunction& stage, const SpectralFunction& exact) {
  const Peak ref = dominant_peak(exact);
  const Peak got = peak_near(stage, ref.omega, stage.step() * 1.0001);
  return std::abs(got.amplitude - ref.amplitude) / std::abs(ref.amplitude);
}

// ---------------------------------------------------------------------------------------------
// Dynamics

struct DynamicsConfig {
  Model model;
  double beta = 2.0;
  PauliTerm a, b;
  std::vector<double> times = grid_until(0.0, 10.0, 0.25);
  EnsembleOptions ensemble;
  RecompileConfig time_cfg;
  Realtime mode = Realtime::recompiled;
  double trotter_dt = 0.1;
  DeviceSpec device;
  MitigationFlags flags;
  std::uint64_t shots = 10000;
  std::uint64_t calibration_shots = 0;  // 0 = exact calibration statistics
  bool measured_confusion = false;      // RO from sampled |0>/|1> runs instead of the device table
  ExecutionOptions exec;
  RescaleOptions rescale;
  SpectralOptions spectral;
  FloquetOptions floquet;
  int workers = default_workers();

  void validate() const {
    model.params.validate();
    if (beta < 0.0) throw std::invalid_argument("dynamics: beta must be >= 0");
    require_uniform(times, "dynamics time grid");
    if (times.size() < 4) throw std::invalid_argument("dynamics: need at least four time points");
    require_same_size(model.n_sites(), a.n_qubits(), "dynamics observable A");
    require_same_size(model.n_sites(), b.n_qubits(), "dynamics observable B");
    time_cfg.validate();
    ensemble.recompile.validate();
  }
};

// Compiled circuits shared by every seed of a dynamics experiment.
struct DynamicsPlan {
  DynamicsPlan(const DynamicsConfig& c, const PauliSum& h, const PauliSum& h_ref) : cfg(c), solver(h), ref_solver(h_ref) {}

  DynamicsConfig cfg;
  ExactSolver solver, ref_solver;
  ThermalEnsemble ens, ref_ens;          // final variant (calibrated when F is on)
  std::optional<ThermalEnsemble> raw_ens;
  DynamicsProgram prog, ref_prog;
  std::optional<DynamicsProgram> raw_prog;  // compiled for the ideal gate when F changes the circuits
  std::optional<CalibrationResult> calibration;
  std::optional<PauliTerm> symmetry, ref_symmetry;
  TimeSeries exact, ref_exact;
  double compile_seconds = 0.0;
};

inline std::optional<PauliTerm> usable_symmetry(const PauliSum& h, const PauliTerm& a, const PauliTerm& b) {
  const auto s = z_symmetry(h);
  if (s && s->commutes_with(a) && s->commutes_with(b)) return s;
  return std::nullopt;
}

inline DynamicsPlan plan_dynamics(const DynamicsConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int n = cfg.model.n_sites();
  const PauliSum h = cfg.model.hamiltonian();
  const PauliSum h_ref = commuting_reference(cfg.model.topology, cfg.model.params);
  DynamicsPlan p(cfg, h, h_ref);
  p.symmetry = usable_symmetry(h, cfg.a, cfg.b);
  p.ref_symmetry = usable_symmetry(h_ref, cfg.a, cfg.b);
  p.exact = p.solver.dynamic_corr(cfg.beta, cfg.a, cfg.b, cfg.times);
  p.ref_exact = p.ref_solver.dynamic_corr(cfg.beta, cfg.a, cfg.b, cfg.times);

  EnsembleOptions eo = cfg.ensemble;
  eo.workers = cfg.workers;
  DynamicsOptions dopt;
  dopt.times = cfg.times;
  dopt.mode = cfg.mode;
  dopt.trotter_dt = cfg.trotter_dt;
  dopt.time_cfg = cfg.time_cfg;
  dopt.workers = cfg.workers;
  const PauliTerm a = cfg.a, b = cfg.b;

  const bool coherent = cfg.device.gate_offset.has_value();
  if (cfg.flags.f && coherent) {
    p.calibration = calibrate_device(cfg.device, used_pairs(n, {a, b}, true), n + 1, cfg.calibration_shots,
                                     mix_seed(cfg.ensemble.recompile.seed, 0xca1), cfg.floquet, cfg.workers);
    p.raw_ens = build_ensemble(p.solver, cfg.beta, eo);
    p.raw_prog = compile_dynamics(p.solver, *p.raw_ens, a, b, dopt, nullptr, &h);
    eo.recompile.gate_angles = p.calibration->angles;
    dopt.time_cfg.gate_angles = p.calibration->angles;
    dopt.cz_templates = &p.calibration->cz;
  }
  p.ens = build_ensemble(p.solver, cfg.beta, eo);
  p.prog = compile_dynamics(p.solver, p.ens, a, b, dopt, nullptr, &h);
  if (cfg.flags.rescale) {
    // The reference reuses the per-entry and per-time depths chosen for H.
    EnsembleOptions ro = eo;
    ro.rounds_from = &p.ens;
    p.ref_ens = build_ensemble(p.ref_solver, cfg.beta, ro);
    p.ref_prog = compile_dynamics(p.ref_solver, p.ref_ens, a, b, dopt, cfg.mode == Realtime::recompiled ? &p.prog : nullptr, &h_ref);
  }
  p.compile_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return p;
}

struct Stage {
  std::string name;
  TimeSeries series;
  SpectralFunction spectrum;
  double peak_error = 0.0;  // relative error of the dominant exact line amplitude
};

struct DynamicsReport {
  TimeSeries exact;
  SpectralFunction exact_spectrum;
  std::vector<Stage> stages;
  GateBudget budget;
  int prep_below_tolerance = 0;
  int time_below_tolerance = 0;
  int rescale_clamped = 0;
  bool degraded = false;
  std::uint64_t seed = 0;

  const Stage& stage(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return s;
    throw std::out_of_range("no stage '" + name + "'");
  }
};

inline DynamicsReport run_dynamics(const DynamicsPlan& plan, std::uint64_t seed) {
  const auto& cfg = plan.cfg;
  const int n = cfg.model.n_sites();
  ExecutionSpec spec;
  spec.noise = cfg.device.noise(n + 1, n);
  spec.exec = cfg.exec;
  spec.shots = cfg.shots;
  spec.seed = seed;
  spec.workers = cfg.workers;

  DynamicsReport r;
  r.seed = seed;
  r.exact = plan.exact;
  r.exact_spectrum = spectral_transform(plan.exact, cfg.spectral);
  r.budget = gate_budget(plan.prog);
  r.prep_below_tolerance = plan.ens.below_tolerance_count();
  r.time_below_tolerance = cfg.mode == Realtime::recompiled ? plan.prog.below_tolerance(cfg.time_cfg.tol) : 0;

  auto add = [&](const std::string& name, TimeSeries s) {
    s.metadata["stage"] = name;
    Stage st{name, s, spectral_transform(s, cfg.spectral), 0.0};
    st.peak_error = peak_amplitude_error(st.spectrum, r.exact_spectrum);
    r.stages.push_back(std::move(st));
  };

  const RawDynamics raw = execute(plan.raw_prog ? *plan.raw_prog : plan.prog, spec);
  const ThermalEnsemble& raw_ens = plan.raw_ens ? *plan.raw_ens : plan.ens;
  add("raw", evaluate(raw, raw_ens, plan.raw_prog ? *plan.raw_prog : plan.prog));

  const RawDynamics fin = plan.raw_prog ? execute(plan.prog, spec) : raw;
  if (cfg.flags.f) add("F", evaluate(fin, plan.ens, plan.prog));

  PostOptions post;
  if (cfg.flags.ro) {
    post.readout = true;
    post.confusion = readout_confusion(spec.noise, n + 1, cfg.measured_confusion, cfg.shots, mix_seed(seed, 0x0c0f));
    add("RO", evaluate(fin, plan.ens, plan.prog, post));
  }
  if (cfg.flags.ps && plan.symmetry) {
    post.symmetry = plan.symmetry;
    post.postselect = true;
    add("PS", evaluate(fin, plan.ens, plan.prog, post));
  }
  TimeSeries last = r.stages.back().series;
  std::optional<DynamicsProgram> dd;
  if (cfg.flags.se) {
    dd = with_decoupling(plan.prog);
    last = evaluate(execute(*dd, spec), plan.ens, *dd, post);
    add("SE", last);
  }
  if (cfg.flags.rescale) {
    // Same circuits, shots and mitigation stages on the commuting reference.
    const DynamicsProgram ref = cfg.flags.se ? with_decoupling(plan.ref_prog) : plan.ref_prog;
    ExecutionSpec ref_spec = spec;
    ref_spec.seed = mix_seed(seed, 0x7ef);
    PostOptions ref_post = post;
    ref_post.symmetry = plan.ref_symmetry;
    ref_post.postselect = post.postselect && plan.ref_symmetry.has_value();
    const TimeSeries measured_ref = evaluate(execute(ref, ref_spec), plan.ref_ens, ref, ref_post);
    const RescaleResult rs = rescale(last, plan.ref_exact, measured_ref, cfg.rescale);
    r.rescale_clamped = rs.clamped;
    r.degraded = rs.degraded;
    add("rescale", shift_imaginary(rs.series));
  }
  return r;
}

inline nlohmann::json to_json(const DynamicsReport& r) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : r.stages) {
    nlohmann::json peaks = nlohmann::json::array();
    for (const auto& p : find_peaks(s.spectrum, 0.05)) peaks.push_back({p.omega, p.amplitude});
    stages.push_back({{"name", s.name}, {"peak_error", s.peak_error}, {"peaks", peaks}});
  }
  const Peak ex = dominant_peak(r.exact_spectrum);
  return {{"seed", r.seed},
          {"exact_dominant_peak", {ex.omega, ex.amplitude}},
          {"stages", stages},
          {"gate_budget", to_json(r.budget)},
          {"prep_below_tolerance", r.prep_below_tolerance},
          {"time_below_tolerance", r.time_below_tolerance},
          {"rescale_clamped", r.rescale_clamped},
          {"degraded", r.degraded}};
}

// ---------------------------------------------------------------------------------------------
// Static observables

struct StaticConfig {
  Model model;
  double beta = 2.0;
  PauliSum observable;
  EnsembleOptions ensemble;
  DeviceSpec device;
  MitigationFlags flags;
  std::uint64_t shots = 10000;
  std::uint64_t calibration_shots = 0;
  bool measured_confusion = false;
  ExecutionOptions exec;
  FloquetOptions floquet;
  int workers = default_workers();
};

struct StaticStage {
  std::string name;
  Estimate estimate;
};

struct StaticReport {
  double exact = 0.0;
  double prepared = 0.0;  // noiseless value on the recompiled states
  std::vector<StaticStage> stages;
  int below_tolerance = 0;
  GateCounts max_prep;
};

inline StaticReport run_static(const StaticConfig& cfg, std::uint64_t seed) {
  cfg.model.params.validate();
  if (cfg.beta < 0.0) throw std::invalid_argument("static: beta must be >= 0");
  const int n = cfg.model.n_sites();
  require_same_size(n, cfg.observable.n_qubits(), "static observable");
  const PauliSum h = cfg.model.hamiltonian();
  const ExactSolver solver(h);
  EnsembleOptions eo = cfg.ensemble;
  eo.workers = cfg.workers;
  ExecutionSpec spec;
  spec.noise = cfg.device.noise(n);
  spec.exec = cfg.exec;
  spec.shots = cfg.shots;
  spec.seed = seed;
  spec.workers = cfg.workers;

  StaticReport r;
  r.exact = solver.thermal_expectation(cfg.beta, cfg.observable).real();
  const ThermalEnsemble raw_ens = build_ensemble(solver, cfg.beta, eo);
  r.prepared = static_observable_exact(raw_ens, cfg.observable);
  r.stages.push_back({"raw", static_observable(raw_ens, cfg.observable, compile_static(raw_ens, cfg.observable), spec)});
  ThermalEnsemble ens = raw_ens;
  if (cfg.flags.f && cfg.device.gate_offset) {
    const CalibrationResult cal =
        calibrate_device(cfg.device, used_pairs(n, {}, false), n, cfg.calibration_shots, mix_seed(seed, 0xca1), cfg.floquet, cfg.workers);
    eo.recompile.gate_angles = cal.angles;
    ens = build_ensemble(solver, cfg.beta, eo);
  }
  const StaticProgram prog = compile_static(ens, cfg.observable);
  if (cfg.flags.f) r.stages.push_back({"F", static_observable(ens, cfg.observable, prog, spec)});
  PostOptions post;
  if (cfg.flags.ro) {
    post.readout = true;
    post.confusion = readout_confusion(spec.noise, n, cfg.measured_confusion, cfg.shots, mix_seed(seed, 0x0c0f));
    r.stages.push_back({"RO", static_observable(ens, cfg.observable, prog, spec, post)});
  }
  if (cfg.flags.ps) {
    if (auto sym = z_symmetry(h)) {
      post.symmetry = sym;
      post.postselect = true;
      r.stages.push_back({"PS", static_observable(ens, cfg.observable, prog, spec, post)});
    }
  }
  r.below_tolerance = ens.below_tolerance_count();
  r.max_prep = ens.max_prep_counts();
  return r;
}

inline nlohmann::json to_json(const StaticReport& r) {
  nlohmann::json st = nlohmann::json::array();
  for (const auto& s : r.stages) st.push_back({{"name", s.name}, {"value", s.estimate.value}, {"stderr", s.estimate.stderr_value}});
  return {{"exact", r.exact},
          {"prepared", r.prepared},
          {"stages", st},
          {"below_tolerance", r.below_tolerance},
          {"max_prep_two_qubit", r.max_prep.two_qubit}};
}

// ---------------------------------------------------------------------------------------------
// Thermodynamics

struct ThermoConfig {
  Model model;
  std::vector<double> temperatures;
  bool qite = false;  // false: exact only
  EnsembleOptions ensemble;
  DeviceSpec device;
  MitigationFlags flags;
  std::uint64_t shots = 10000;
  bool measured_confusion = false;
  ExecutionOptions exec;
  int smoothing_window = 5;
  int workers = default_workers();
};

struct ThermoReport {
  ThermoCurve exact_energy, exact_heat;
  std::optional<ThermoCurve> qite_energy, qite_heat;
  int below_tolerance = 0;
};

// <E>(T) from QITE ensembles measured on the emulated device; sweeps beta upwards and warm-starts
// each ensemble from the previous temperature.
inline ThermoCurve thermal_energy_qite(const ExactSolver& solver, const std::vector<double>& T, const ThermoConfig& cfg,
                                       std::uint64_t seed, int* below_tolerance = nullptr) {
  require_ascending_positive(T);
  const int n = solver.n_qubits();
  const PauliSum& h = solver.hamiltonian();
  ExecutionSpec spec;
  spec.noise = cfg.device.noise(n);
  spec.exec = cfg.exec;
  spec.shots = cfg.shots;
  spec.workers = cfg.workers;
  PostOptions post;
  if (cfg.flags.ro) {
    post.readout = true;
    post.confusion = readout_confusion(spec.noise, n, cfg.measured_confusion, cfg.shots, mix_seed(seed, 0x0c0f));
  }
  if (cfg.flags.ps) {
    post.symmetry = z_symmetry(h);
    post.postselect = post.symmetry.has_value();
  }
  ThermoCurve c;
  c.T = T;
  c.values.assign(T.size(), 0.0);
  c.stderr_values.assign(T.size(), 0.0);
  std::optional<ThermalEnsemble> prev;
  int below = 0;
  for (std::size_t j = T.size(); j-- > 0;) {
    EnsembleOptions eo = cfg.ensemble;
    eo.workers = cfg.workers;
    if (prev) eo.warm_from = &*prev;
    ThermalEnsemble ens = build_ensemble(solver, 1.0 / T[j], eo);
    spec.seed = mix_seed(seed, j);
    const Estimate e = ens.exact_prep ? Estimate{static_observable_exact(ens, h), 0.0}
                                      : static_observable(ens, h, compile_static(ens, h), spec, post);
    c.values[j] = e.value;
    c.stderr_values[j] = e.stderr_value;
    below += ens.below_tolerance_count();
    prev = std::move(ens);
  }
  if (below_tolerance) *below_tolerance = below;
  return c;
}

inline ThermoReport run_thermo(const ThermoConfig& cfg, std::uint64_t seed) {
  cfg.model.params.validate();
  const ExactSolver solver(cfg.model.hamiltonian());
  const int n = cfg.model.n_sites();
  ThermoReport r;
  r.exact_energy = thermal_energy_exact(solver, cfg.temperatures);
  r.exact_heat = heat_capacity(r.exact_energy, n);
  if (cfg.qite) {
    r.qite_energy = thermal_energy_qite(solver, cfg.temperatures, cfg, seed, &r.below_tolerance);
    r.qite_heat = heat_capacity(*r.qite_energy, n, cfg.smoothing_window);
  }
  return r;
}

}  // namespace qspin
