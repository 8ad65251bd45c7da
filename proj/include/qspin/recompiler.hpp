#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include <ceres/ceres.h>

#include "circuit.hpp"
#include "compile.hpp"
#include "simulate.hpp"

namespace qspin {

// One base PhXZ layer, then per round a brick layer of fixed two-qubit gates and a PhXZ layer.
// Even rounds pair (0,1),(2,3),...; odd rounds pair (1,2),(3,4),...
class BrickworkAnsatz {
 public:
  BrickworkAnsatz(int n_qubits, int rounds, std::map<std::pair<int, int>, GateAngles> gate_angles = {})
      : n_(n_qubits), rounds_(rounds), angles_(std::move(gate_angles)) {
    if (n_ < 1) throw std::invalid_argument("BrickworkAnsatz: empty register");
    if (rounds_ < 0) throw std::invalid_argument("BrickworkAnsatz: negative round count");
    if (n_ < 2 && rounds_ > 0) throw std::invalid_argument("BrickworkAnsatz: rounds need two qubits");
  }

  int n_qubits() const { return n_; }
  int rounds() const { return rounds_; }
  int n_params() const { return 3 * n_ * (rounds_ + 1); }
  const std::map<std::pair<int, int>, GateAngles>& gate_angles() const { return angles_; }

  std::vector<std::pair<int, int>> bricks(int round) const {
    std::vector<std::pair<int, int>> out;
    for (int a = round % 2; a + 1 < n_; a += 2) out.push_back({a, a + 1});
    if (out.empty())
      for (int a = 0; a + 1 < n_; a += 2) out.push_back({a, a + 1});
    return out;
  }

  GateAngles angles_for(const std::pair<int, int>& pair) const {
    auto it = angles_.find(pair);
    return it == angles_.end() ? GateAngles::sqrt_iswap_dag() : it->second;
  }

  int two_qubit_count() const {
    int c = 0;
    for (int r = 0; r < rounds_; ++r) c += static_cast<int>(bricks(r).size());
    return c;
  }

  // Parameter triple (x, z, a) of qubit q in PhXZ layer l lives at 3 (l n + q).
  static int offset(int n, int layer, int q) { return 3 * (layer * n + q); }

  Circuit circuit(const std::vector<double>& params) const {
    if (static_cast<int>(params.size()) != n_params()) throw std::invalid_argument("BrickworkAnsatz: parameter count");
    Circuit c(n_);
    auto phxz_layer = [&](int l) {
      Moment m;
      for (int q = 0; q < n_; ++q) {
        const double* p = &params[offset(n_, l, q)];
        m.push_back(Gate::phxz(q, p[0], p[1], p[2]));
      }
      c.append_moment(std::move(m));
    };
    phxz_layer(0);
    for (int r = 0; r < rounds_; ++r) {
      Moment m;
      for (const auto& b : bricks(r)) m.push_back(Gate::fsim5(b.first, b.second, angles_for(b)));
      c.append_moment(std::move(m));
      phxz_layer(r + 1);
    }
    return c;
  }

 private:
  int n_;
  int rounds_;
  std::map<std::pair<int, int>, GateAngles> angles_;
};

namespace detail {

inline Mat2 z_pow_deriv(double t) {
  Mat2 m = Mat2::Zero();
  m(1, 1) = cplx(0, kPi) * std::polar(1.0, kPi * t);
  return m;
}

inline Mat2 x_pow_deriv(double t) {
  const double c = std::cos(kPi * t / 2), s = std::sin(kPi * t / 2);
  Mat2 d;
  d << -s, cplx(0, -c), cplx(0, -c), -s;
  return cplx(0, kPi / 2) * x_pow(t) + std::polar(1.0, kPi * t / 2) * (kPi / 2) * d;
}

// Derivatives of PhXZ(x, z, a) = Z^{z+a} X^x Z^{-a} with respect to x, z, a.
inline std::array<Mat2, 3> phxz_derivs(double x, double z, double a) {
  const Mat2 za = z_pow(z + a), xx = x_pow(x), zm = z_pow(-a);
  const Mat2 dza = z_pow_deriv(z + a);
  return {za * x_pow_deriv(x) * zm, dza * xx * zm, dza * xx * zm - za * xx * z_pow_deriv(-a)};
}

// M(r, c) = sum over states and spectator bits of conj(lambda[.. r ..]) psi[.. c ..] at bit b.
inline Mat2 reduced_overlap(const std::vector<CVector>& lambda, const std::vector<CVector>& psi, int b) {
  Mat2 m = Mat2::Zero();
  const std::uint64_t stride = std::uint64_t{1} << b;
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const cplx* l = lambda[k].data();
    const cplx* p = psi[k].data();
    const auto dim = static_cast<std::uint64_t>(psi[k].size());
    for (std::uint64_t base = 0; base < dim; base += 2 * stride)
      for (std::uint64_t i = base; i < base + stride; ++i) {
        const cplx l0 = std::conj(l[i]), l1 = std::conj(l[i + stride]);
        m(0, 0) += l0 * p[i];
        m(0, 1) += l0 * p[i + stride];
        m(1, 0) += l1 * p[i];
        m(1, 1) += l1 * p[i + stride];
      }
  }
  return m;
}

}  // namespace detail

// F = |(1/K) sum_k <target_k| U(params) |init_k>|^2 for a brickwork ansatz.
class FidelityObjective {
 public:
  FidelityObjective(BrickworkAnsatz ansatz, std::vector<CVector> targets, std::vector<CVector> inits)
      : ansatz_(std::move(ansatz)), targets_(std::move(targets)), inits_(std::move(inits)) {
    if (targets_.empty() || targets_.size() != inits_.size()) throw std::invalid_argument("FidelityObjective: state lists");
    const auto dim = StateVector::dim_of(ansatz_.n_qubits());
    for (std::size_t k = 0; k < targets_.size(); ++k)
      if (targets_[k].size() != dim || inits_[k].size() != dim) throw DimensionError("FidelityObjective: state size");
    for (int r = 0; r < ansatz_.rounds(); ++r)
      for (const auto& b : ansatz_.bricks(r)) gates_[b] = fsim5_matrix(ansatz_.angles_for(b));
  }

  const BrickworkAnsatz& ansatz() const { return ansatz_; }
  int n_params() const { return ansatz_.n_params(); }

  double value(const double* params) const { return std::norm(amplitude(params)); }

  // Value and analytic gradient (reverse sweep uncomputing each gate).
  double value_and_gradient(const double* params, double* grad) const {
    const int n = ansatz_.n_qubits();
    std::vector<CVector> psi = inits_;
    forward(params, psi);
    const double K = static_cast<double>(targets_.size());
    cplx amp = 0.0;
    for (std::size_t k = 0; k < psi.size(); ++k) amp += targets_[k].dot(psi[k]);
    amp /= K;
    std::vector<CVector> lambda = targets_;
    auto grad_layer = [&](int l) {
      for (int q = n - 1; q >= 0; --q) {
        const double* p = params + BrickworkAnsatz::offset(n, l, q);
        const int b = qubit_bit(n, q);
        const Mat2 g = phxz_matrix(p[0], p[1], p[2]);
        const Mat2 gi = g.adjoint();
        for (auto& v : psi) kernel::apply_1q(v.data(), v.size(), b, gi);
        const Mat2 m = detail::reduced_overlap(lambda, psi, b);
        const auto d = detail::phxz_derivs(p[0], p[1], p[2]);
        for (int j = 0; j < 3; ++j) {
          const cplx da = d[j].cwiseProduct(m).sum() / K;
          grad[BrickworkAnsatz::offset(n, l, q) + j] = 2.0 * (std::conj(amp) * da).real();
        }
        for (auto& v : lambda) kernel::apply_1q(v.data(), v.size(), b, gi);
      }
    };
    for (int r = ansatz_.rounds() - 1; r >= 0; --r) {
      grad_layer(r + 1);
      for (const auto& br : ansatz_.bricks(r)) {
        const Mat4 gi = gates_.at(br).adjoint();
        for (auto* vs : {&psi, &lambda})
          for (auto& v : *vs) kernel::apply_2q(v.data(), v.size(), qubit_bit(n, br.first), qubit_bit(n, br.second), gi);
      }
    }
    grad_layer(0);
    return std::norm(amp);
  }

  // Central finite differences, for cross-checking the analytic gradient.
  std::vector<double> numerical_gradient(const double* params, double h = 1e-6) const {
    std::vector<double> p(params, params + n_params()), g(n_params());
    for (int i = 0; i < n_params(); ++i) {
      const double keep = p[i];
      p[i] = keep + h;
      const double up = value(p.data());
      p[i] = keep - h;
      const double down = value(p.data());
      p[i] = keep;
      g[i] = (up - down) / (2 * h);
    }
    return g;
  }

 private:
  void forward(const double* params, std::vector<CVector>& psi) const {
    const int n = ansatz_.n_qubits();
    auto layer = [&](int l) {
      for (int q = 0; q < n; ++q) {
        const double* p = params + BrickworkAnsatz::offset(n, l, q);
        const Mat2 g = phxz_matrix(p[0], p[1], p[2]);
        for (auto& v : psi) kernel::apply_1q(v.data(), v.size(), qubit_bit(n, q), g);
      }
    };
    layer(0);
    for (int r = 0; r < ansatz_.rounds(); ++r) {
      for (const auto& br : ansatz_.bricks(r))
        for (auto& v : psi)
          kernel::apply_2q(v.data(), v.size(), qubit_bit(n, br.first), qubit_bit(n, br.second), gates_.at(br));
      layer(r + 1);
    }
  }

  cplx amplitude(const double* params) const {
    std::vector<CVector> psi = inits_;
    forward(params, psi);
    cplx amp = 0.0;
    for (std::size_t k = 0; k < psi.size(); ++k) amp += targets_[k].dot(psi[k]);
    return amp / static_cast<double>(targets_.size());
  }

  BrickworkAnsatz ansatz_;
  std::vector<CVector> targets_, inits_;
  std::map<std::pair<int, int>, Mat4> gates_;
};

struct RecompileConfig {
  double tol = 0.90;
  std::optional<int> min_rounds;  // default ceil(n/2)
  int max_rounds = 12;
  bool try_zero_rounds = true;
  int restarts = 8;
  int max_iterations = 400;
  double init_scale = 0.1;
  std::uint64_t seed = 1;
  std::map<std::pair<int, int>, GateAngles> gate_angles;  // calibrated two-qubit gates
  std::vector<double> warm_start;  // first restart starts here when the size matches

  void validate() const {
    if (!(tol > 0.0 && tol <= 1.0)) throw std::invalid_argument("RecompileConfig: tol outside (0, 1]");
    if (max_rounds < 0 || restarts < 1 || max_iterations < 1) throw std::invalid_argument("RecompileConfig: bad limits");
    if (min_rounds && (*min_rounds < 0 || *min_rounds > max_rounds))
      throw std::invalid_argument("RecompileConfig: min_rounds outside [0, max_rounds]");
  }

  // Fixed depth: exactly `rounds` rounds.
  RecompileConfig with_rounds(int rounds) const {
    RecompileConfig c = *this;
    c.min_rounds = rounds;
    c.max_rounds = rounds;
    c.try_zero_rounds = false;
    return c;
  }
};

struct RecompileResult {
  Circuit circuit;
  std::vector<double> params;
  double fidelity = 0.0;
  int rounds = 0;
  int iterations = 0;
  int two_qubit_count = 0;
  int single_qubit_count = 0;
  bool below_tolerance = false;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
};

inline nlohmann::json to_json(const RecompileResult& r) {
  return {{"fidelity", r.fidelity},     {"rounds", r.rounds},
          {"two_qubit_count", r.two_qubit_count}, {"single_qubit_count", r.single_qubit_count},
          {"iterations", r.iterations}, {"below_tolerance", r.below_tolerance},
          {"seed", r.seed},             {"wall_time", r.wall_time}};
}

namespace detail {

class CeresFidelity : public ceres::FirstOrderFunction {
 public:
  explicit CeresFidelity(const FidelityObjective& f) : f_(f) {}
  bool Evaluate(const double* params, double* cost, double* gradient) const override {
    if (gradient) {
      *cost = 1.0 - f_.value_and_gradient(params, gradient);
      for (int i = 0; i < f_.n_params(); ++i) gradient[i] = -gradient[i];
    } else {
      *cost = 1.0 - f_.value(params);
    }
    return true;
  }
  int NumParameters() const override { return f_.n_params(); }

 private:
  const FidelityObjective& f_;
};

// Best of several LBFGS runs from random starts near the identity.
inline std::pair<std::vector<double>, double> optimize(const FidelityObjective& f, const RecompileConfig& cfg,
                                                       std::uint64_t seed, int& iterations) {
  std::vector<double> best;
  double best_f = -1.0;
  for (int r = 0; r < cfg.restarts; ++r) {
    std::mt19937_64 rng(seed + 7919 * static_cast<std::uint64_t>(r));
    std::vector<double> p(f.n_params());
    for (auto& v : p) v = (2.0 * uniform01(rng) - 1.0) * cfg.init_scale;
    if (r == 0 && static_cast<int>(cfg.warm_start.size()) == f.n_params()) p = cfg.warm_start;
    if (f.n_params() > 0) {
      ceres::GradientProblem problem(new CeresFidelity(f));
      ceres::GradientProblemSolver::Options opt;
      opt.line_search_direction_type = ceres::LBFGS;
      opt.max_num_iterations = cfg.max_iterations;
      opt.logging_type = ceres::SILENT;
      opt.function_tolerance = 1e-12;
      opt.gradient_tolerance = 1e-10;
      opt.parameter_tolerance = 1e-12;
      ceres::GradientProblemSolver::Summary summary;
      ceres::Solve(opt, problem, p.data(), &summary);
      iterations += static_cast<int>(summary.iterations.size());
    }
    const double v = f.value(p.data());
    if (v > best_f) {
      best_f = v;
      best = p;
    }
    if (best_f >= cfg.tol) break;
  }
  return {best, best_f};
}

inline std::vector<int> round_schedule(int n, const RecompileConfig& cfg) {
  std::vector<int> s;
  const int start = cfg.min_rounds.value_or(std::min(cfg.max_rounds, (n + 1) / 2));
  if (cfg.try_zero_rounds && start > 0) s.push_back(0);
  for (int r = start; r <= cfg.max_rounds; ++r) s.push_back(n < 2 ? 0 : r);
  if (n < 2) s.assign(1, 0);
  return s;
}

}  // namespace detail

// Maximizes |(1/K) sum_k <target_k|U|init_k>|^2, growing the depth until cfg.tol is met.
inline RecompileResult recompile(const std::vector<CVector>& targets, const std::vector<CVector>& inits, int n_qubits,
                                 const RecompileConfig& cfg) {
  cfg.validate();
  for (const auto& t : targets)
    if (std::abs(t.norm() - 1.0) > 1e-8) throw std::invalid_argument("recompile: target state not normalized");
  const auto t0 = std::chrono::steady_clock::now();
  RecompileResult best;
  best.fidelity = -1.0;
  int iterations = 0;
  for (int rounds : detail::round_schedule(n_qubits, cfg)) {
    const FidelityObjective f(BrickworkAnsatz(n_qubits, rounds, cfg.gate_angles), targets, inits);
    const auto [p, v] = detail::optimize(f, cfg, cfg.seed + 104729 * static_cast<std::uint64_t>(rounds), iterations);
    if (v > best.fidelity + 1e-12 || best.fidelity < 0) {
      best.params = p;
      best.fidelity = v;
      best.rounds = rounds;
      best.circuit = f.ansatz().circuit(p);
    }
    if (best.fidelity >= cfg.tol) break;
  }
  best.iterations = iterations;
  const GateCounts counts = best.circuit.counts();
  best.two_qubit_count = counts.two_qubit;
  best.single_qubit_count = counts.single_qubit;
  best.below_tolerance = best.fidelity < cfg.tol;
  best.seed = cfg.seed;
  best.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return best;
}

// State recompilation: |target> from |init>.
inline RecompileResult recompile(const StateVector& target, const StateVector& init, const RecompileConfig& cfg) {
  require_same_size(target.n_qubits(), init.n_qubits(), "recompile");
  return recompile({target.amplitudes()}, {init.amplitudes()}, init.n_qubits(), cfg);
}

// Unitary target applied to a fixed initial state.
inline RecompileResult recompile(const CMatrix& target, const StateVector& init, const RecompileConfig& cfg) {
  if (target.rows() != init.dim() || target.cols() != init.dim()) throw DimensionError("recompile: target shape");
  return recompile({target * init.amplitudes()}, {init.amplitudes()}, init.n_qubits(), cfg);
}

// Requires a calibrated angle set for every brick pair the schedule can use.
inline RecompileResult recompile_with_calibration(const StateVector& target, const StateVector& init, RecompileConfig cfg,
                                                  const std::map<std::pair<int, int>, GateAngles>& calibrated) {
  const int n = init.n_qubits();
  for (int a = 0; a + 1 < n; ++a)
    if (!calibrated.count({a, a + 1}))
      throw std::invalid_argument("recompile_with_calibration: missing calibration for pair (" + std::to_string(a) + ", " +
                                  std::to_string(a + 1) + ")");
  cfg.gate_angles = calibrated;
  return recompile(target, init, cfg);
}

// CZ on an ordered pair rebuilt around a (possibly non-ideal) native gate; full-unitary fidelity
// over the four basis states.
inline std::pair<CzTemplate, double> calibrated_cz(const GateAngles& gate, std::uint64_t seed = 1) {
  if ((gate - GateAngles::sqrt_iswap_dag()).max_abs() == 0.0) return {CzTemplate::ideal(), 1.0};
  std::vector<CVector> targets, inits;
  for (int b = 0; b < 4; ++b) {
    CVector e = CVector::Zero(4);
    e(b) = 1.0;
    inits.push_back(e);
    if (b == 3) e(b) = -1.0;
    targets.push_back(e);
  }
  RecompileConfig cfg = RecompileConfig{}.with_rounds(2);
  cfg.tol = 1.0;
  cfg.restarts = 16;
  cfg.max_iterations = 2000;
  cfg.seed = seed;
  cfg.gate_angles[{0, 1}] = gate;
  // Start near the ideal decomposition; random restarts cover the rest.
  const FidelityObjective f(BrickworkAnsatz(2, 2, cfg.gate_angles), targets, inits);
  const CzTemplate ideal = CzTemplate::ideal();
  std::vector<double> warm(f.n_params());
  const std::array<Mat2, 2>* layers[3] = {&ideal.l1, &ideal.l2, &ideal.l3};
  for (int l = 0; l < 3; ++l)
    for (int q = 0; q < 2; ++q) {
      const auto p = phxz_from_unitary((*layers[l])[q]);
      for (int j = 0; j < 3; ++j) warm[BrickworkAnsatz::offset(2, l, q) + j] = p[j];
    }
  ceres::GradientProblem problem(new detail::CeresFidelity(f));
  ceres::GradientProblemSolver::Options opt;
  opt.line_search_direction_type = ceres::LBFGS;
  opt.max_num_iterations = cfg.max_iterations;
  opt.logging_type = ceres::SILENT;
  opt.function_tolerance = 1e-14;
  opt.gradient_tolerance = 1e-12;
  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(opt, problem, warm.data(), &summary);
  std::vector<double> p = warm;
  double v = f.value(p.data());
  int iterations = 0;
  const auto [q, w] = detail::optimize(f, cfg, seed, iterations);
  if (w > v) {
    p = q;
    v = w;
  }
  CzTemplate t;
  t.gate = gate;
  std::array<Mat2, 2>* out[3] = {&t.l1, &t.l2, &t.l3};
  for (int l = 0; l < 3; ++l)
    for (int qb = 0; qb < 2; ++qb) {
      const double* x = &p[BrickworkAnsatz::offset(2, l, qb)];
      (*out[l])[qb] = phxz_matrix(x[0], x[1], x[2]);
    }
  return {t, v};
}

}  // namespace qspin
