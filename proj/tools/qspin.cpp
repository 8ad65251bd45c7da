// qspin: config-driven runner for spectra, static and dynamical correlators, thermodynamics and
// recompilation budgets. Every run writes its data files, the effective config and a manifest.

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <cctype>
#include <iostream>

#include <qspin/io.hpp>
#include <qspin/pipeline.hpp>

namespace fs = std::filesystem;
using namespace qspin;

namespace {

constexpr int kExitOk = 0, kExitConfig = 2, kExitTolerance = 3, kExitDegraded = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- option groups -----------------------------------------------------------------------------

struct ModelOpts {
  std::string preset = "fes4";
  std::string topology;  // JSON bond list; overrides the preset
  std::optional<double> J, J_prime, Kx, Ky, Kz, Gamma, Gamma_prime;
};

struct NoiseOpts {
  double noise = 0.0;
  bool hardware_like = false;
  std::vector<double> readout;      // eps0 eps1
  std::vector<double> gate_offset;  // theta phi zeta gamma chi
  std::optional<double> ancilla_dephasing;
  double phi_jitter = 0.0;
};

struct RunOpts {
  std::string mitigation = "none";
  std::uint64_t shots = 10000;
  std::uint64_t calibration_shots = 0;
  bool measured_confusion = false;
  std::string backend = "auto";
  int trajectories = 500;
  double tol = 0.90;
  int rounds = -1;  // -1: adaptive depth
  int max_rounds = 12;
  int restarts = 8;
  int max_iterations = 400;
  int subset = 0;  // 0: every basis state
  bool exact_prep = false;
};

struct Common {
  std::string out = "qspin-out";
  std::uint64_t seed = 1;
  int workers = default_workers();
};

void add_model_options(CLI::App* c, ModelOpts& m) {
  c->add_option("--preset", m.preset, "Model preset: " + CLI::detail::join(preset_names(), ", "))->capture_default_str();
  c->add_option("--topology", m.topology, "Bond-list JSON file (relative paths also tried in the data directory)");
  c->add_option("--J", m.J, "Heisenberg coupling override");
  c->add_option("--Jprime", m.J_prime, "J' coupling override (bonds labelled j_prime)");
  c->add_option("--Kx", m.Kx, "Kitaev x coupling override");
  c->add_option("--Ky", m.Ky, "Kitaev y coupling override");
  c->add_option("--Kz", m.Kz, "Kitaev z coupling override");
  c->add_option("--Gamma", m.Gamma, "Gamma coupling override");
  c->add_option("--Gammaprime", m.Gamma_prime, "Gamma' coupling override");
}

void add_common_options(CLI::App* c, Common& o) {
  c->add_option("--out", o.out, "Output directory")->capture_default_str();
  c->add_option("--seed", o.seed, "Seed for recompilation and sampling")->capture_default_str();
  c->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
}

void add_noise_options(CLI::App* c, NoiseOpts& n) {
  c->add_option("--noise", n.noise, "Depolarizing probability per Pauli after every moment")->check(CLI::Range(0.0, 1.0 / 3.0))->capture_default_str();
  c->add_flag("--hardware-like", n.hardware_like, "Add the hardware-like readout and ancilla dephasing levels");
  c->add_option("--readout", n.readout, "Readout flip probabilities eps0 eps1")->expected(2);
  c->add_option("--gate-offset", n.gate_offset, "Coherent offset of every native gate: theta phi zeta gamma chi")->expected(5);
  c->add_option("--ancilla-dephasing", n.ancilla_dephasing, "Quasi-static ancilla detuning sigma");
  c->add_option("--phi-jitter", n.phi_jitter, "Per-moment phi jitter of native gates")->capture_default_str();
}

void add_run_options(CLI::App* c, RunOpts& r, bool with_mitigation = true) {
  if (with_mitigation)
    c->add_option("--mitigation", r.mitigation, "all, none, or a comma list of f,ro,ps,se,rescale")->capture_default_str();
  c->add_option("--shots", r.shots, "Shots per circuit (0 = exact distributions)")->capture_default_str();
  c->add_option("--calibration-shots", r.calibration_shots, "Shots per calibration sequence (0 = exact)")->capture_default_str();
  c->add_flag("--measured-confusion", r.measured_confusion, "Estimate readout confusion from sampled |0>/|1> runs");
  c->add_option("--backend", r.backend, "auto, statevector, density_matrix or trajectories")->capture_default_str();
  c->add_option("--trajectories", r.trajectories, "Trajectories for the Monte-Carlo backend")->capture_default_str();
  c->add_option("--tol", r.tol, "Recompilation fidelity floor")->capture_default_str();
  c->add_option("--rounds", r.rounds, "Fixed ansatz depth (-1 = adaptive)")->capture_default_str();
  c->add_option("--max-rounds", r.max_rounds, "Largest adaptive depth")->capture_default_str();
  c->add_option("--restarts", r.restarts, "Optimizer restarts per depth")->capture_default_str();
  c->add_option("--max-iterations", r.max_iterations, "Optimizer iterations per restart")->capture_default_str();
  c->add_option("--subset", r.subset, "Keep only the N highest-weight basis states (0 = all)")->capture_default_str();
  c->add_flag("--exact-prep", r.exact_prep, "Use exact thermal states instead of recompiled circuits");
}

// ---- conversions -------------------------------------------------------------------------------

fs::path resolve_input(const std::string& p) {
  if (fs::exists(p)) return p;
  if (fs::exists(data_dir() / p)) return data_dir() / p;
  throw ConfigError("cannot find input file '" + p + "'");
}

Model build_model(const ModelOpts& o) {
  Model m;
  if (!o.topology.empty()) {
    const fs::path path = resolve_input(o.topology);
    m.name = path.stem().string();
    m.topology = load_topology(path);
    m.params.J = 1.0;
  } else {
    m = preset(o.preset);
  }
  if (o.J) m.params.J = *o.J;
  if (o.J_prime) m.params.J_prime = *o.J_prime;
  if (o.Kx) m.params.K[0] = *o.Kx;
  if (o.Ky) m.params.K[1] = *o.Ky;
  if (o.Kz) m.params.K[2] = *o.Kz;
  if (o.Gamma) m.params.Gamma = *o.Gamma;
  if (o.Gamma_prime) m.params.Gamma_prime = *o.Gamma_prime;
  m.params.validate();
  return m;
}

// Full letter strings ("ZIII") or compact site lists ("Z0", "Z2Z3", "X0Y1").
PauliTerm parse_operator(const std::string& s, int n) {
  if (static_cast<int>(s.size()) == n && s.find_first_not_of("IXYZ") == std::string::npos) return PauliTerm(s);
  std::string letters(n, 'I');
  std::size_t k = 0;
  if (s.empty()) throw ConfigError("empty operator");
  while (k < s.size()) {
    const char l = static_cast<char>(std::toupper(static_cast<unsigned char>(s[k])));
    if (l != 'X' && l != 'Y' && l != 'Z') throw ConfigError("bad operator '" + s + "'");
    std::size_t j = ++k;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    if (j == k) throw ConfigError("operator '" + s + "' lacks a site index");
    const int q = std::stoi(s.substr(k, j - k));
    if (q >= n) throw ConfigError("operator '" + s + "' addresses site " + std::to_string(q) + " of " + std::to_string(n));
    if (letters[q] != 'I') throw ConfigError("operator '" + s + "' repeats site " + std::to_string(q));
    letters[q] = l;
    k = j;
  }
  return PauliTerm(letters);
}

DeviceSpec build_device(const NoiseOpts& o) {
  DeviceSpec d = o.hardware_like ? DeviceSpec::hardware_like(o.noise) : DeviceSpec::depolarizing(o.noise);
  if (!o.readout.empty()) {
    d.readout_eps0 = o.readout[0];
    d.readout_eps1 = o.readout[1];
  }
  if (!o.gate_offset.empty()) d.gate_offset = GateAngles::from_array(o.gate_offset.data());
  if (o.ancilla_dephasing) d.ancilla_dephasing = *o.ancilla_dephasing;
  d.microwave_phi_jitter = o.phi_jitter;
  d.noise(2, 1);  // validates the ranges
  return d;
}

MitigationFlags parse_mitigation(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "all") return MitigationFlags::all();
  if (s == "none" || s.empty()) return MitigationFlags::none();
  MitigationFlags f;
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');) {
    if (tok == "f") f.f = true;
    else if (tok == "ro") f.ro = true;
    else if (tok == "ps") f.ps = true;
    else if (tok == "se") f.se = true;
    else if (tok == "rescale") f.rescale = true;
    else throw ConfigError("unknown mitigation stage '" + tok + "'");
  }
  return f;
}

Backend parse_backend(const std::string& s) {
  if (s == "auto") return Backend::automatic;
  if (s == "statevector") return Backend::statevector;
  if (s == "density_matrix") return Backend::density_matrix;
  if (s == "trajectories") return Backend::trajectories;
  throw ConfigError("unknown backend '" + s + "'");
}

RecompileConfig recompile_config(const RunOpts& r, std::uint64_t seed) {
  RecompileConfig c;
  c.tol = r.tol;
  c.max_rounds = r.max_rounds;
  c.restarts = r.restarts;
  c.max_iterations = r.max_iterations;
  c.seed = seed;
  if (r.rounds >= 0) c = c.with_rounds(r.rounds);
  c.validate();
  return c;
}

EnsembleOptions ensemble_options(const RunOpts& r, const ExactSolver& solver, double beta, std::uint64_t seed, int workers) {
  EnsembleOptions e;
  e.recompile = recompile_config(r, seed);
  e.exact_prep = r.exact_prep;
  e.workers = workers;
  if (r.subset > 0) e.basis_subset = top_weight_basis_states(solver, beta, r.subset);
  return e;
}

ExecutionOptions execution_options(const RunOpts& r) {
  ExecutionOptions e;
  e.backend = parse_backend(r.backend);
  e.trajectories = r.trajectories;
  return e;
}

// ---- outputs -----------------------------------------------------------------------------------

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream o;
  for (unsigned int k = 0; k < len; ++k) o << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
  return o.str();
}

// Files are collected in memory and written by one thread at the end of a run (or on failure).
struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;
  nlohmann::json summary = nlohmann::json::object();

  void add(std::string name, std::string text) { files.emplace_back(std::move(name), std::move(text)); }
};

void write_outputs(const fs::path& dir, const std::string& command, const std::string& config_toml, const Outputs& out,
                   const std::string& status, int exit_code, const std::string& error, double seconds) {
  fs::create_directories(dir);
  io::write_text(dir / "config.toml", config_toml);
  nlohmann::json files = nlohmann::json::array();
  for (const auto& [name, text] : out.files) {
    io::write_text(dir / name, text);
    files.push_back({{"file", name}, {"sha256", sha256_hex(text)}, {"bytes", text.size()}});
  }
  nlohmann::json m = {{"tool", "qspin"},
                      {"version", QSPIN_VERSION},
                      {"command", command},
                      {"config", "config.toml"},
                      {"config_sha256", sha256_hex(config_toml)},
                      {"reproduce", "qspin --config " + (dir / "config.toml").string()},
                      {"status", status},
                      {"exit_code", exit_code},
                      {"outputs", files},
                      {"summary", out.summary},
                      {"wall_seconds", seconds}};
  if (!error.empty()) m["error"] = error;
  io::write_text(dir / "manifest.json", m.dump(2) + "\n");
}

// Effective config of one subcommand: given options and options with defaults, flags as booleans.
std::string config_toml(const CLI::App& cmd) {
  std::ostringstream o;
  o << '[' << cmd.get_name() << "]\n";
  auto quote = [](const std::string& v) { return '"' + v + '"'; };
  for (const CLI::Option* opt : cmd.get_options()) {
    if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
    const std::string key = opt->get_lnames().front();
    if (key == "help") continue;
    if (opt->get_type_size() == 0) {
      o << key << '=' << (opt->count() > 0 ? "true" : "false") << '\n';
      continue;
    }
    std::vector<std::string> vals = opt->count() > 0 ? opt->results() : std::vector<std::string>{};
    if (vals.empty() && !opt->get_default_str().empty()) vals.push_back(opt->get_default_str());
    if (vals.empty()) continue;
    if (vals.size() == 1 && opt->get_expected_max() <= 1) {
      o << key << '=' << quote(vals[0]) << '\n';
    } else {
      o << key << "=[";
      for (std::size_t k = 0; k < vals.size(); ++k) o << (k ? "," : "") << quote(vals[k]);
      o << "]\n";
    }
  }
  return o.str();
}

std::string slug(std::string s) {
  for (auto& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  return s;
}

nlohmann::json peaks_json(const SpectralFunction& s, double rel) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : find_peaks(s, rel)) j.push_back({{"omega", p.omega}, {"amplitude", p.amplitude}});
  return j;
}

// ---- commands ----------------------------------------------------------------------------------

struct SpectrumOpts {
  int two_s = 1;
  int lowest = 0;
  double max_excitation = 0.0;  // 0: show the lower half of the spectrum
};

int cmd_spectrum(const ModelOpts& mo, const SpectrumOpts& so, Outputs& out) {
  const Model m = build_model(mo);
  LabeledSpectrum s;
  if (so.two_s == 1 && so.lowest == 0) {
    s = eigensystem(m.hamiltonian());
  } else {
    if (m.topology.has_kitaev_labels() || m.params.Gamma != 0.0 || m.params.Gamma_prime != 0.0)
      throw ConfigError("spin-S spectra support Heisenberg models only");
    SpinSOptions opt;
    opt.lowest_k = so.lowest;
    s = spin_s_eigensystem(m.topology, m.params, so.two_s, opt);
  }
  const double top = so.max_excitation > 0.0 ? so.max_excitation
                                             : 0.5 * (s.levels.back().energy - s.ground_energy());
  out.add("spectrum.csv", io::csv(s));
  out.add("levels.svg", io::svg_levels(m.name + " (2S = " + std::to_string(so.two_s) + ")", s, top > 0.0 ? top : 1.0));
  nlohmann::json ex = nlohmann::json::array();
  for (const auto& l : s.excitations())
    if (ex.size() < 12) ex.push_back({{"excitation", l.energy}, {"two_s", l.two_s}, {"degeneracy", l.degeneracy}});
  out.summary = {{"model", m.name}, {"two_s", so.two_s}, {"dim", s.dim}, {"ground_energy", s.ground_energy()}, {"levels", ex}};
  return kExitOk;
}

struct StaticOpts {
  double beta = 2.0;
  std::vector<std::string> observables;  // default: every Z_i Z_j
};

int cmd_static(const ModelOpts& mo, const NoiseOpts& no, const RunOpts& ro, const StaticOpts& so, const Common& co, Outputs& out) {
  const Model m = build_model(mo);
  const int n = m.n_sites();
  std::vector<std::string> names = so.observables;
  if (names.empty())
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) names.push_back("Z" + std::to_string(i) + "Z" + std::to_string(j));
  StaticConfig cfg;
  cfg.model = m;
  cfg.beta = so.beta;
  cfg.device = build_device(no);
  cfg.flags = parse_mitigation(ro.mitigation);
  if (cfg.flags.se || cfg.flags.rescale) throw ConfigError("static runs support the f, ro and ps stages only");
  cfg.shots = ro.shots;
  cfg.calibration_shots = ro.calibration_shots;
  cfg.measured_confusion = ro.measured_confusion;
  cfg.exec = execution_options(ro);
  cfg.workers = co.workers;
  const ExactSolver solver(m.hamiltonian());
  cfg.ensemble = ensemble_options(ro, solver, so.beta, co.seed, co.workers);
  if (ro.exact_prep) throw ConfigError("static runs execute circuits; --exact-prep is not available");

  std::ostringstream csv;
  std::vector<StaticReport> reports;
  int below = 0;
  for (std::size_t k = 0; k < names.size(); ++k) {
    cfg.observable = PauliSum(parse_operator(names[k], n));
    reports.push_back(run_static(cfg, mix_seed(co.seed, k)));
    below = std::max(below, reports.back().below_tolerance);
  }
  csv << "observable,exact,prepared";
  for (const auto& s : reports.front().stages) csv << ',' << s.name << ',' << s.name << "_stderr";
  csv << '\n';
  io::Line ex{"exact", {}, {}, true}, last{reports.front().stages.back().name, {}, {}, true};
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto& r = reports[k];
    csv << names[k] << ',' << io::num(r.exact) << ',' << io::num(r.prepared);
    for (const auto& s : r.stages) csv << ',' << io::num(s.estimate.value) << ',' << io::num(s.estimate.stderr_value);
    csv << '\n';
    ex.x.push_back(static_cast<double>(k));
    ex.y.push_back(r.exact);
    last.x.push_back(static_cast<double>(k) + 0.2);
    last.y.push_back(r.stages.back().estimate.value);
    nlohmann::json j = to_json(r);
    j["observable"] = names[k];
    rows.push_back(j);
  }
  out.add("static.csv", csv.str());
  out.add("static.svg", io::svg_plot(m.name + " static correlators, beta = " + io::num(so.beta), "observable index", "value", {ex, last}));
  out.summary = {{"model", m.name}, {"beta", so.beta}, {"device", to_json(cfg.device)}, {"mitigation", to_json(cfg.flags)}, {"observables", rows}};
  return below > 0 ? kExitTolerance : kExitOk;
}

struct DynamicsOpts {
  double beta = 2.0;
  std::string a = "Z0", b = "Z1";
  double tmax = 10.0, dt = 0.25;
  bool trotter = false;
  double trotter_dt = 0.1;
  double sigma = 0.0;
  int zero_pad = 4;
  double floor = 0.02;
  double degraded_fraction = 0.2;
  double omega_max = 0.0;  // plot range; 0: full positive axis
};

DynamicsConfig dynamics_config(const ModelOpts& mo, const NoiseOpts& no, const RunOpts& ro, const DynamicsOpts& d, const Common& co) {
  DynamicsConfig cfg;
  cfg.model = build_model(mo);
  const int n = cfg.model.n_sites();
  cfg.beta = d.beta;
  cfg.a = parse_operator(d.a, n);
  cfg.b = parse_operator(d.b, n);
  if (!(d.dt > 0.0) || !(d.tmax > 0.0)) throw ConfigError("need positive --dt and --tmax");
  cfg.times = grid_until(0.0, d.tmax, d.dt);
  cfg.mode = d.trotter ? Realtime::trotter : Realtime::recompiled;
  cfg.trotter_dt = d.trotter_dt;
  cfg.device = build_device(no);
  cfg.flags = parse_mitigation(ro.mitigation);
  cfg.shots = ro.shots;
  cfg.calibration_shots = ro.calibration_shots;
  cfg.measured_confusion = ro.measured_confusion;
  cfg.exec = execution_options(ro);
  cfg.rescale.floor = d.floor;
  cfg.rescale.degraded_fraction = d.degraded_fraction;
  cfg.spectral.sigma = d.sigma;
  cfg.spectral.zero_pad = d.zero_pad;
  cfg.workers = co.workers;
  if (ro.exact_prep) throw ConfigError("dynamics runs execute circuits; --exact-prep is not available");
  const ExactSolver solver(cfg.model.hamiltonian());
  cfg.ensemble = ensemble_options(ro, solver, d.beta, co.seed, co.workers);
  cfg.time_cfg = recompile_config(ro, mix_seed(co.seed, 0x71));
  return cfg;
}

int cmd_dynamics(const ModelOpts& mo, const NoiseOpts& no, const RunOpts& ro, const DynamicsOpts& d, const Common& co, Outputs& out) {
  const DynamicsConfig cfg = dynamics_config(mo, no, ro, d, co);
  const DynamicsPlan plan = plan_dynamics(cfg);
  const DynamicsReport r = run_dynamics(plan, co.seed);
  const double wmax = d.omega_max > 0.0 ? d.omega_max : r.exact_spectrum.omegas.back();

  out.add("series_exact.csv", io::csv(r.exact));
  out.add("spectrum_exact.csv", io::csv(r.exact_spectrum));
  std::vector<io::Line> re{io::re_line("exact", r.exact)}, im{io::im_line("exact", r.exact)},
      sp{io::spectrum_line("exact", r.exact_spectrum, wmax)};
  std::ostringstream peaks;
  peaks << "stage,omega,amplitude\n";
  for (const auto& p : find_peaks(r.exact_spectrum, 0.05)) peaks << "exact," << io::num(p.omega) << ',' << io::num(p.amplitude) << '\n';
  for (const auto& s : r.stages) {
    out.add("series_" + slug(s.name) + ".csv", io::csv(s.series));
    out.add("spectrum_" + slug(s.name) + ".csv", io::csv(s.spectrum));
    re.push_back(io::re_line(s.name, s.series));
    im.push_back(io::im_line(s.name, s.series));
    sp.push_back(io::spectrum_line(s.name, s.spectrum, wmax));
    for (const auto& p : find_peaks(s.spectrum, 0.05)) peaks << s.name << ',' << io::num(p.omega) << ',' << io::num(p.amplitude) << '\n';
  }
  const std::string title = cfg.model.name + ", beta = " + io::num(cfg.beta);
  out.add("peaks.csv", peaks.str());
  out.add("series_re.svg", io::svg_plot("Re C(t), " + title, "t", "Re C", re));
  out.add("series_im.svg", io::svg_plot("Im C(t), " + title, "t", "Im C", im));
  out.add("spectrum.svg", io::svg_plot("S(omega), " + title, "omega", "S", sp));
  out.add("budget.json", to_json(r.budget).dump(2) + "\n");
  if (plan.calibration) out.add("calibration.json", to_json(plan.calibration->record).dump(2) + "\n");

  out.summary = to_json(r);
  out.summary["model"] = cfg.model.name;
  out.summary["device"] = to_json(cfg.device);
  out.summary["mitigation"] = to_json(cfg.flags);
  out.summary["exact_peaks"] = peaks_json(r.exact_spectrum, 0.05);
  if (r.degraded) return kExitDegraded;
  return r.prep_below_tolerance + r.time_below_tolerance > 0 ? kExitTolerance : kExitOk;
}

struct ThermoOpts {
  double Tmin = 0.2, Tmax = 10.0, dT = 0.2;
  bool qite = false;
  int smoothing = 5;
};

int cmd_thermo(const ModelOpts& mo, const NoiseOpts& no, const RunOpts& ro, const ThermoOpts& t, const Common& co, Outputs& out) {
  ThermoConfig cfg;
  cfg.model = build_model(mo);
  if (!(t.Tmin > 0.0 && t.Tmax > t.Tmin && t.dT > 0.0)) throw ConfigError("need 0 < Tmin < Tmax and dT > 0");
  cfg.temperatures = grid_until(t.Tmin, t.Tmax, t.dT);
  cfg.qite = t.qite;
  cfg.device = build_device(no);
  cfg.flags = parse_mitigation(ro.mitigation);
  if (cfg.flags.se || cfg.flags.rescale || cfg.flags.f) throw ConfigError("thermo runs support the ro and ps stages only");
  cfg.shots = ro.shots;
  cfg.measured_confusion = ro.measured_confusion;
  cfg.exec = execution_options(ro);
  cfg.smoothing_window = t.smoothing;
  cfg.workers = co.workers;
  cfg.ensemble.recompile = recompile_config(ro, co.seed);
  cfg.ensemble.exact_prep = ro.exact_prep;
  if (ro.subset > 0) throw ConfigError("thermo runs use the full basis ensemble");
  const ThermoReport r = run_thermo(cfg, co.seed);

  std::vector<std::pair<std::string, const ThermoCurve*>> cols{{"E_exact", &r.exact_energy}, {"c_exact", &r.exact_heat}};
  std::vector<io::Line> e{{"exact", r.exact_energy.T, r.exact_energy.values}}, c{{"exact", r.exact_heat.T, r.exact_heat.values}};
  if (r.qite_energy) {
    cols.push_back({"E_qite", &*r.qite_energy});
    cols.push_back({"c_qite", &*r.qite_heat});
    e.push_back({"QITE", r.qite_energy->T, r.qite_energy->values});
    c.push_back({"QITE", r.qite_heat->T, r.qite_heat->values});
  }
  out.add("thermo.csv", io::csv(cols));
  out.add("energy.svg", io::svg_plot(cfg.model.name + " energy", "T", "<E>", e));
  out.add("heat_capacity.svg", io::svg_plot(cfg.model.name + " heat capacity per site", "T", "c / n", c));
  auto maxima = [](const ThermoCurve& h) {
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t k = 1; k + 1 < h.values.size(); ++k)
      if (h.values[k] > h.values[k - 1] && h.values[k] >= h.values[k + 1]) j.push_back(h.T[k]);
    return j;
  };
  out.summary = {{"model", cfg.model.name}, {"exact_heat_maxima_T", maxima(r.exact_heat)}, {"device", to_json(cfg.device)}};
  if (r.qite_heat) {
    out.summary["qite_heat_maxima_T"] = maxima(*r.qite_heat);
    out.summary["below_tolerance"] = r.below_tolerance;
  }
  return r.below_tolerance > 0 ? kExitTolerance : kExitOk;
}

int cmd_recompile(const ModelOpts& mo, const RunOpts& ro, const DynamicsOpts& d, const Common& co, Outputs& out) {
  RunOpts r = ro;
  r.mitigation = "none";
  const DynamicsConfig cfg = dynamics_config(mo, NoiseOpts{}, r, d, co);
  const ExactSolver solver(cfg.model.hamiltonian());
  const auto t0 = std::chrono::steady_clock::now();
  const ThermalEnsemble ens = build_ensemble(solver, cfg.beta, cfg.ensemble);
  DynamicsOptions dopt;
  dopt.times = cfg.times;
  dopt.mode = cfg.mode;
  dopt.trotter_dt = cfg.trotter_dt;
  dopt.time_cfg = cfg.time_cfg;
  dopt.workers = co.workers;
  const PauliSum h = cfg.model.hamiltonian();
  const DynamicsProgram prog = compile_dynamics(solver, ens, cfg.a, cfg.b, dopt, nullptr, &h);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::ostringstream prep;
  prep << "basis,weight,rounds,fidelity,two_qubit,single_qubit\n";
  for (const auto& e : ens.entries) {
    const auto c = e.prep.counts();
    prep << e.basis << ',' << io::num(e.weight) << ',' << e.rounds << ',' << io::num(e.fidelity) << ',' << c.two_qubit << ','
         << c.single_qubit << '\n';
  }
  std::ostringstream tc;
  tc << "t,basis,rounds,fidelity,two_qubit,single_qubit\n";
  for (std::size_t k = 0; k < prog.times.size(); ++k)
    for (std::size_t e = 0; e < ens.entries.size(); ++e) {
      const auto c = prog.circuits[k][e][0].counts();
      tc << io::num(prog.times[k]) << ',' << ens.entries[e].basis << ',' << prog.rounds[k][e] << ',' << io::num(prog.fidelity[k][e])
         << ',' << c.two_qubit << ',' << c.single_qubit << '\n';
    }
  const GateBudget b = gate_budget(prog);
  const int below = ens.below_tolerance_count() + (cfg.mode == Realtime::recompiled ? prog.below_tolerance(cfg.time_cfg.tol) : 0);
  out.add("prep.csv", prep.str());
  out.add("circuits.csv", tc.str());
  out.add("budget.json", to_json(b).dump(2) + "\n");
  out.summary = {{"model", cfg.model.name}, {"budget", to_json(b)}, {"below_tolerance", below}, {"compile_seconds", secs}};
  return below > 0 ? kExitTolerance : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qspin: finite-temperature spin-model simulations on an emulated noisy device"};
  app.set_config("--config", "", "TOML-style config file; command-line flags take precedence");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(QSPIN_VERSION));

  ModelOpts mo;
  NoiseOpts no;
  RunOpts ro;
  Common co;
  SpectrumOpts so;
  StaticOpts st;
  DynamicsOpts dy;
  ThermoOpts th;

  auto* spectrum = app.add_subcommand("spectrum", "Exact spectrum with spin labels and level diagram");
  add_model_options(spectrum, mo);
  add_common_options(spectrum, co);
  spectrum->add_option("--two-s", so.two_s, "Twice the site spin (1 = S=1/2, 5 = S=5/2)")->check(CLI::PositiveNumber)->capture_default_str();
  spectrum->add_option("--lowest", so.lowest, "Iterative solver for the lowest N states (0 = dense)")->capture_default_str();
  spectrum->add_option("--max-excitation", so.max_excitation, "Level diagram range (0 = automatic)");

  auto* stat = app.add_subcommand("static", "Thermal static correlators from QITE ensembles");
  add_model_options(stat, mo);
  add_noise_options(stat, no);
  add_run_options(stat, ro);
  add_common_options(stat, co);
  stat->add_option("--beta", st.beta, "Inverse temperature")->capture_default_str();
  stat->add_option("--observable", st.observables, "Observables, e.g. Z0Z1 or ZZII (default: every Z_i Z_j)");

  auto* dyn = app.add_subcommand("dynamics", "Dynamical correlation function with staged mitigation and spectrum");
  auto* rec = app.add_subcommand("recompile", "Compile the dynamics circuits and report the gate budget");
  for (auto* c : {dyn, rec}) {
    add_model_options(c, mo);
    add_common_options(c, co);
    add_run_options(c, ro, c == dyn);
    c->add_option("--beta", dy.beta, "Inverse temperature")->capture_default_str();
    c->add_option("--a", dy.a, "Operator A of <A(t) B>")->capture_default_str();
    c->add_option("--b", dy.b, "Operator B of <A(t) B>")->capture_default_str();
    c->add_option("--tmax", dy.tmax, "Last time point")->capture_default_str();
    c->add_option("--dt", dy.dt, "Time step")->capture_default_str();
    c->add_flag("--trotter", dy.trotter, "First-order Trotter circuits instead of recompiled evolution");
    c->add_option("--trotter-dt", dy.trotter_dt, "Trotter step")->capture_default_str();
  }
  add_noise_options(dyn, no);
  dyn->add_option("--sigma", dy.sigma, "Gaussian window width (0 = a third of the time span)")->capture_default_str();
  dyn->add_option("--zero-pad", dy.zero_pad, "Zero-padding factor")->capture_default_str();
  dyn->add_option("--floor", dy.floor, "Rescale denominator floor")->capture_default_str();
  dyn->add_option("--degraded-fraction", dy.degraded_fraction, "Clamped fraction that marks the data degraded")->capture_default_str();
  dyn->add_option("--omega-max", dy.omega_max, "Spectrum plot range (0 = full)")->capture_default_str();

  auto* thermo = app.add_subcommand("thermo", "Energy and heat capacity versus temperature");
  add_model_options(thermo, mo);
  add_noise_options(thermo, no);
  add_run_options(thermo, ro);
  add_common_options(thermo, co);
  thermo->add_option("--Tmin", th.Tmin, "Lowest temperature")->capture_default_str();
  thermo->add_option("--Tmax", th.Tmax, "Highest temperature")->capture_default_str();
  thermo->add_option("--dT", th.dT, "Temperature step")->capture_default_str();
  thermo->add_flag("--qite", th.qite, "Also run the QITE pipeline on the emulated device");
  thermo->add_option("--smoothing", th.smoothing, "Local-polynomial smoothing window for the QITE derivative")->capture_default_str();

  for (auto* c : {spectrum, stat, dyn, rec, thermo}) c->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  const std::string config_text = config_toml(*cmd);
  const auto t0 = std::chrono::steady_clock::now();
  Outputs out;
  int code = kExitOk;
  std::string status = "ok", error;
  try {
    if (name == "spectrum") code = cmd_spectrum(mo, so, out);
    else if (name == "static") code = cmd_static(mo, no, ro, st, co, out);
    else if (name == "dynamics") code = cmd_dynamics(mo, no, ro, dy, co, out);
    else if (name == "thermo") code = cmd_thermo(mo, no, ro, th, co, out);
    else code = cmd_recompile(mo, ro, dy, co, out);
    if (code == kExitTolerance) status = "below_tolerance";
    if (code == kExitDegraded) status = "degraded";
  } catch (const ConfigError& e) {
    code = kExitConfig;
    status = "config_error";
    error = e.what();
  } catch (const std::invalid_argument& e) {
    code = kExitConfig;
    status = "config_error";
    error = e.what();
  } catch (const std::exception& e) {
    code = 1;
    status = "failed";
    error = e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    write_outputs(co.out, name, config_text, out, status, code, error, secs);
  } catch (const std::exception& e) {
    std::cerr << "qspin: " << e.what() << "\n";
    return 1;
  }
  if (!error.empty()) std::cerr << "qspin " << name << ": " << error << "\n";
  std::cout << "qspin " << name << ": " << status << " (" << out.files.size() << " files in " << co.out << ")\n";
  return code;
}
