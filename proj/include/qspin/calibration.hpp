#pragma once

#include <ceres/ceres.h>

#include <array>
#include <functional>
#include <map>
#include <vector>

#include "circuit.hpp"
#include "compile.hpp"
#include "parallel.hpp"
#include "simulate.hpp"

namespace qspin {

// Runs a two-qubit circuit (local qubits 0 and 1, nominal native gates) and returns the outcome
// distribution of both qubits, exact or estimated from shots.
using PairExecutor = std::function<Eigen::VectorXd(const Circuit&)>;

struct PairCalibration {
  GateAngles angles;
  std::array<double, 5> uncertainty{};
  double depol = 0.0;
  double depol_uncertainty = 0.0;
  double residual_rms = 0.0;
  int iterations = 0;
};

using CalibrationRecord = std::map<std::pair<int, int>, PairCalibration>;

struct FloquetOptions {
  std::vector<int> repetitions{1, 2, 3, 4, 5, 6, 8, 10, 12, 16, 20};
  int max_iterations = 200;
  bool fit_depolarizing = true;
};

namespace detail {

inline Mat4 kron2(const Mat2& a, const Mat2& b) {
  Mat4 m;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) m.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return m;
}

// Product preparations with enough coherence to expose every angle.
inline std::vector<std::array<Mat2, 2>> floquet_preparations() {
  const Mat2 id = Mat2::Identity(), x = pauli_matrix('X');
  const Mat2 h = phxz_matrix(0.5, 0.0, -0.5);  // |0> -> |+> up to phase
  const Mat2 hy = phxz_matrix(0.5, 0.5, -0.5);  // |0> -> |+i> up to phase
  return {{h, id}, {id, h}, {h, x}, {x, h}, {h, h}, {hy, h}, {h, hy}, {id, x}};
}

inline std::vector<Mat2> basis_rotations() {
  return {phxz_matrix(0.5, 0.0, -0.5), phxz_matrix(0.5, 0.0, 0.0), Mat2::Identity()};  // X, Y, Z to Z
}

inline void depolarize4(Mat4& rho, double p) {
  if (p == 0.0) return;
  for (int q = 0; q < 2; ++q) {
    Mat4 acc = (1.0 - 3.0 * p) * rho;
    for (char l : {'X', 'Y', 'Z'}) {
      const Mat4 m = q == 0 ? kron2(pauli_matrix(l), Mat2::Identity()) : kron2(Mat2::Identity(), pauli_matrix(l));
      acc += p * m * rho * m;
    }
    rho = acc;
  }
}

// Same moment structure as the executor: depolarizing after every non-measure moment.
inline Eigen::Vector4d model_probabilities(const Circuit& c, const GateAngles& g, double p) {
  Mat4 rho = Mat4::Zero();
  rho(0, 0) = 1.0;
  for (const auto& m : c.moments()) {
    if (measurement_only(m)) continue;
    Mat4 u = Mat4::Identity();
    std::array<Mat2, 2> one{Mat2::Identity(), Mat2::Identity()};
    bool two = false;
    for (const auto& gate : m) {
      if (gate.kind == GateKind::measure) continue;
      if (gate.arity() == 2) {
        u = fsim5_matrix(g);
        two = true;
      } else {
        one[gate.qubits[0]] = single_qubit_matrix(gate) * one[gate.qubits[0]];
      }
    }
    if (!two) u = kron2(one[0], one[1]);
    rho = u * rho * u.adjoint();
    depolarize4(rho, p);
  }
  return rho.diagonal().real();
}

struct FloquetResidual {
  const std::vector<Circuit>* circuits;
  const std::vector<Eigen::VectorXd>* measured;
  bool fit_p;

  bool operator()(double const* const* params, double* residuals) const {
    const GateAngles g = GateAngles::from_array(params[0]);
    const double p = fit_p ? params[0][5] : 0.0;
    for (std::size_t k = 0; k < circuits->size(); ++k) {
      const Eigen::Vector4d q = model_probabilities((*circuits)[k], g, p);
      for (int j = 0; j < 4; ++j) residuals[4 * k + j] = q(j) - (*measured)[k](j);
    }
    return true;
  }
};

}  // namespace detail

// Preparation, `reps` back-to-back native gates, rotation into the measurement basis.
inline std::vector<Circuit> floquet_sequences(const FloquetOptions& opt) {
  std::vector<Circuit> out;
  const auto rot = detail::basis_rotations();
  for (const auto& prep : detail::floquet_preparations())
    for (int reps : opt.repetitions)
      for (int b0 = 0; b0 < 3; ++b0)
        for (int b1 = 0; b1 < 3; ++b1) {
          Circuit c(2);
          Moment pm;
          for (int q = 0; q < 2; ++q)
            if (!is_identity_up_to_phase(prep[q])) {
              const auto a = phxz_from_unitary(prep[q]);
              pm.push_back(Gate::phxz(q, a[0], a[1], a[2]));
            }
          if (!pm.empty()) c.append_moment(std::move(pm));
          for (int r = 0; r < reps; ++r) c.append_moment({Gate::sqrt_iswap_dag(0, 1)});
          Moment bm;
          const int b[2] = {b0, b1};
          for (int q = 0; q < 2; ++q)
            if (b[q] != 2) {
              const auto a = phxz_from_unitary(rot[b[q]]);
              bm.push_back(Gate::phxz(q, a[0], a[1], a[2]));
            }
          if (!bm.empty()) c.append_moment(std::move(bm));
          c.append_moment({Gate::measure(0), Gate::measure(1)});
          out.push_back(std::move(c));
        }
  return out;
}

// Fits the five gate angles (and a per-moment depolarizing rate) to repeated-gate statistics.
inline PairCalibration floquet_calibrate(const PairExecutor& run, const FloquetOptions& opt = {}) {
  if (opt.repetitions.empty()) throw std::invalid_argument("floquet_calibrate: no repetition counts");
  const auto circuits = floquet_sequences(opt);
  std::vector<Eigen::VectorXd> measured;
  for (const auto& c : circuits) {
    Eigen::VectorXd p = run(c);
    if (p.size() != 4) throw DimensionError("floquet_calibrate: executor must return four probabilities");
    measured.push_back(std::move(p));
  }
  std::array<double, 6> x{kPi / 4, 0.0, 0.0, 0.0, 0.0, 0.0};
  const int n_res = static_cast<int>(4 * circuits.size());
  auto* cost = new ceres::DynamicNumericDiffCostFunction<detail::FloquetResidual, ceres::CENTRAL>(
      new detail::FloquetResidual{&circuits, &measured, opt.fit_depolarizing});
  cost->AddParameterBlock(6);
  cost->SetNumResiduals(n_res);
  ceres::Problem problem;
  problem.AddResidualBlock(cost, nullptr, x.data());
  problem.SetParameterLowerBound(x.data(), 5, 0.0);
  problem.SetParameterUpperBound(x.data(), 5, 1.0 / 3.0);
  if (!opt.fit_depolarizing) problem.SetParameterization(x.data(), new ceres::SubsetParameterization(6, {5}));
  ceres::Solver::Options so;
  so.max_num_iterations = opt.max_iterations;
  so.function_tolerance = 1e-15;
  so.parameter_tolerance = 1e-14;
  so.gradient_tolerance = 1e-16;
  so.logging_type = ceres::SILENT;
  ceres::Solver::Summary summary;
  ceres::Solve(so, &problem, &summary);
  if (!summary.IsSolutionUsable()) throw std::runtime_error("floquet_calibrate: fit did not converge: " + summary.message);

  PairCalibration out;
  out.angles = GateAngles::from_array(x.data());
  out.depol = x[5];
  out.iterations = static_cast<int>(summary.iterations.size());
  out.residual_rms = std::sqrt(2.0 * summary.final_cost / n_res);
  // Parameter covariance from the Gauss-Newton approximation, scaled by the residual variance.
  ceres::Covariance::Options co;
  co.algorithm_type = ceres::DENSE_SVD;
  co.null_space_rank = -1;
  ceres::Covariance cov(co);
  std::vector<std::pair<const double*, const double*>> blocks{{x.data(), x.data()}};
  if (cov.Compute(blocks, &problem)) {
    std::array<double, 36> c{};
    cov.GetCovarianceBlock(x.data(), x.data(), c.data());
    const int dof = std::max(1, n_res - (opt.fit_depolarizing ? 6 : 5));
    const double s2 = 2.0 * summary.final_cost / dof;
    for (int i = 0; i < 5; ++i) out.uncertainty[i] = std::sqrt(std::max(0.0, c[7 * i] * s2));
    out.depol_uncertainty = std::sqrt(std::max(0.0, c[35] * s2));
  }
  return out;
}

// Emulated isolated-gate runner for one device pair: the device's gate offset and depolarizing
// rate apply; shots = 0 returns exact probabilities.
inline PairExecutor emulated_pair_executor(const NoiseModel& device, std::pair<int, int> pair, std::uint64_t shots,
                                           std::uint64_t seed) {
  NoiseModel local;
  local.depol_p = device.depol_p;
  if (auto off = device.offset_for(pair.first, pair.second)) local.gate_angle_offsets[{0, 1}] = *off;
  auto counter = std::make_shared<std::uint64_t>(0);
  return [local, shots, seed, counter](const Circuit& c) -> Eigen::VectorXd {
    const Eigen::VectorXd p = outcome_probabilities(c, local);
    if (shots == 0) return p;
    const Counts s = sample_distribution(p, 2, shots, seed + 0x632be59bd9b4e019ULL * ++*counter);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(4);
    for (const auto& [k, v] : s.hist) f(static_cast<Eigen::Index>(k)) = static_cast<double>(v) / static_cast<double>(shots);
    return f;
  };
}

// Calibrates every listed pair; pairs are independent and run in parallel.
inline CalibrationRecord calibrate_pairs(const std::vector<std::pair<int, int>>& pairs,
                                         const std::function<PairExecutor(std::pair<int, int>)>& executor_for,
                                         const FloquetOptions& opt = {}, int workers = default_workers()) {
  const auto fits = parallel_map(
      pairs.size(), [&](std::size_t k) { return floquet_calibrate(executor_for(pairs[k]), opt); }, workers);
  CalibrationRecord rec;
  for (std::size_t k = 0; k < pairs.size(); ++k) rec[std::minmax(pairs[k].first, pairs[k].second)] = fits[k];
  return rec;
}

inline std::map<std::pair<int, int>, GateAngles> calibrated_angles(const CalibrationRecord& rec) {
  std::map<std::pair<int, int>, GateAngles> out;
  for (const auto& [pair, c] : rec) out[pair] = c.angles;
  return out;
}

inline nlohmann::json to_json(const CalibrationRecord& rec) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [pair, c] : rec)
    j.push_back({{"pair", {pair.first, pair.second}},
                 {"angles", c.angles.array()},
                 {"uncertainty", c.uncertainty},
                 {"depol", c.depol},
                 {"depol_uncertainty", c.depol_uncertainty},
                 {"residual_rms", c.residual_rms}});
  return j;
}

}  // namespace qspin
