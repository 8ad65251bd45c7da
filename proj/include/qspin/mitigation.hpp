#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <vector>

#include "pauli.hpp"
#include "series.hpp"
#include "simulate.hpp"

namespace qspin {

// Dense (quasi-)distribution over measured bitstrings; `shots` is the number of samples it
// was estimated from (0 = exact probabilities).
struct QuasiDistribution {
  int n_bits = 0;
  Eigen::VectorXd p;
  double shots = 0.0;
  double retained = 1.0;  // fraction kept by post-selection
  std::vector<double> z_gain;  // per-bit factor readout inversion applied to <Z>; empty = all 1

  double total() const { return p.sum(); }
};

inline QuasiDistribution to_distribution(const Counts& c) {
  QuasiDistribution d;
  d.n_bits = c.n_bits;
  d.p = Eigen::VectorXd::Zero(Eigen::Index{1} << c.n_bits);
  const auto total = static_cast<double>(c.total());
  if (total == 0.0) throw std::invalid_argument("to_distribution: empty counts");
  for (const auto& [k, v] : c.hist) d.p(static_cast<Eigen::Index>(k)) = static_cast<double>(v) / total;
  d.shots = total;
  return d;
}

inline QuasiDistribution exact_distribution(const Eigen::VectorXd& p) {
  QuasiDistribution d;
  d.n_bits = std::countr_zero(static_cast<std::uint64_t>(p.size()));
  d.p = p;
  return d;
}

// Eigenvalue (+1/-1) of a Z-type string on an outcome whose bit order matches the string.
inline int z_parity(const PauliTerm& sym, std::uint64_t outcome) {
  return (std::popcount(sym.z_mask() & outcome) & 1) ? -1 : 1;
}

inline void require_z_type(const PauliTerm& sym, int n_bits) {
  if (!sym.is_z_type()) throw std::invalid_argument("postselect: symmetry must be a Z-type string");
  if (sym.n_qubits() != n_bits) throw DimensionError("postselect: symmetry length != bitstring length");
}

inline Counts postselect(const Counts& c, const PauliTerm& sym, int sector, double* retained = nullptr) {
  require_z_type(sym, c.n_bits);
  Counts out;
  out.n_bits = c.n_bits;
  std::uint64_t kept = 0;
  for (const auto& [k, v] : c.hist)
    if (z_parity(sym, k) == sector) {
      out.hist[k] = v;
      kept += v;
    }
  if (kept == 0) throw std::runtime_error("postselect: no outcomes in the requested sector");
  if (retained) *retained = static_cast<double>(kept) / static_cast<double>(c.total());
  return out;
}

// Keeps the sector and renormalizes; shots shrink with the retained weight.
inline QuasiDistribution postselect(const QuasiDistribution& d, const PauliTerm& sym, int sector) {
  require_z_type(sym, d.n_bits);
  QuasiDistribution out = d;
  double kept = 0.0;
  for (Eigen::Index k = 0; k < d.p.size(); ++k) {
    if (z_parity(sym, static_cast<std::uint64_t>(k)) != sector) out.p(k) = 0.0;
    kept += out.p(k);
  }
  if (!(kept > 0.0)) throw std::runtime_error("postselect: no weight in the requested sector");
  out.p /= kept;
  out.retained = d.retained * kept / d.total();
  out.shots = d.shots * kept / d.total();
  return out;
}

// Applies the inverse tensor-product confusion matrix; entries may become negative.
inline QuasiDistribution readout_mitigate(const QuasiDistribution& d, const std::vector<int>& measured,
                                          const std::map<int, Eigen::Matrix2d>& confusion) {
  if (static_cast<int>(measured.size()) != d.n_bits) throw DimensionError("readout_mitigate: measured list size");
  QuasiDistribution out = d;
  for (int k = 0; k < d.n_bits; ++k) {
    auto it = confusion.find(measured[k]);
    if (it == confusion.end()) continue;
    if (std::abs(it->second.determinant()) < 1e-12) throw std::invalid_argument("readout_mitigate: singular confusion matrix");
    apply_along_bit(out.p, d.n_bits, k, it->second.inverse());
    if (out.z_gain.empty()) out.z_gain.assign(d.n_bits, 1.0);
    out.z_gain[k] /= 1.0 - it->second(1, 0) - it->second(0, 1);
  }
  return out;
}

// Per-qubit confusion matrices estimated from all-zeros and all-ones preparations on the device.
inline std::map<int, Eigen::Matrix2d> estimate_confusion(const NoiseModel& device, int n_qubits, std::uint64_t shots,
                                                         std::uint64_t seed) {
  std::map<int, Eigen::Matrix2d> out;
  std::array<std::vector<double>, 2> flipped;
  for (int prep = 0; prep < 2; ++prep) {
    Circuit c(n_qubits);
    Moment m;
    if (prep == 1)
      for (int q = 0; q < n_qubits; ++q) m.push_back(Gate::phxz(q, 1, 0, 0));
    if (!m.empty()) c.append_moment(std::move(m));
    Moment meas;
    for (int q = 0; q < n_qubits; ++q) meas.push_back(Gate::measure(q));
    c.append_moment(std::move(meas));
    const Eigen::VectorXd p = outcome_probabilities(c, device);
    for (int q = 0; q < n_qubits; ++q) {
      Eigen::VectorXd one = marginal(p, n_qubits, {q});
      if (shots > 0) {
        const Counts s = sample_distribution(one, 1, shots, seed + 1000003ULL * (2 * q + prep + 1));
        one(1) = s.hist.count(1) ? static_cast<double>(s.hist.at(1)) / static_cast<double>(shots) : 0.0;
      }
      flipped[prep].push_back(prep == 0 ? one(1) : 1.0 - one(1));
    }
  }
  for (int q = 0; q < n_qubits; ++q) out[q] = NoiseModel::confusion(flipped[0][q], flipped[1][q]);
  return out;
}

// <Z-string> with the binomial standard error of the raw estimate, scaled by the readout gain
// of the bits in the mask (measured index k is mask bit n_bits - 1 - k).
inline std::pair<double, double> z_expectation(const QuasiDistribution& d, std::uint64_t mask) {
  double m = 0.0;
  for (Eigen::Index k = 0; k < d.p.size(); ++k) m += d.p(k) * ((std::popcount(mask & static_cast<std::uint64_t>(k)) & 1) ? -1.0 : 1.0);
  m /= d.total();
  double gain = 1.0;
  for (std::size_t k = 0; k < d.z_gain.size(); ++k)
    if ((mask >> (d.n_bits - 1 - k)) & 1) gain *= d.z_gain[k];
  const double raw = m / gain;
  const double se = d.shots > 0.0 ? std::abs(gain) * std::sqrt(std::max(0.0, 1.0 - raw * raw) / d.shots) : 0.0;
  return {m, se};
}

// Subtracts the time mean of Im C(t).
inline TimeSeries shift_imaginary(TimeSeries s) {
  if (s.size() == 0) return s;
  double mean = 0.0;
  for (const auto& v : s.values) mean += v.imag();
  mean /= static_cast<double>(s.size());
  for (auto& v : s.values) v -= cplx(0.0, mean);
  s.metadata["imaginary_shift"] = mean;
  return s;
}

struct RescaleOptions {
  double floor = 0.02;
  double degraded_fraction = 0.2;
};

struct RescaleResult {
  TimeSeries series;
  std::vector<cplx> factors;
  int clamped = 0;
  bool degraded = false;
};

// f(t) = ideal(H') / measured(H'), applied point-wise; points with |measured| below the floor
// reuse the last valid factor (or the first later one) and are flagged.
inline RescaleResult rescale(const TimeSeries& series, const TimeSeries& ideal_ref, const TimeSeries& measured_ref,
                             const RescaleOptions& opt = {}) {
  const std::size_t n = series.size();
  if (ideal_ref.size() != n || measured_ref.size() != n) throw std::invalid_argument("rescale: reference missing time points");
  for (std::size_t k = 0; k < n; ++k)
    if (std::abs(ideal_ref.times[k] - series.times[k]) > 1e-9 || std::abs(measured_ref.times[k] - series.times[k]) > 1e-9)
      throw std::invalid_argument("rescale: reference time grid differs");
  RescaleResult r;
  std::vector<std::optional<cplx>> f(n);
  for (std::size_t k = 0; k < n; ++k)
    if (std::abs(measured_ref.values[k]) >= opt.floor) f[k] = ideal_ref.values[k] / measured_ref.values[k];
  std::optional<cplx> first_valid;
  for (const auto& v : f)
    if (v) {
      first_valid = v;
      break;
    }
  std::optional<cplx> last;
  r.series = series;
  r.series.flagged.assign(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    cplx use;
    if (f[k]) {
      use = *f[k];
      last = use;
    } else {
      use = last ? *last : first_valid.value_or(cplx(1.0));
      r.series.flagged[k] = true;
      ++r.clamped;
    }
    r.factors.push_back(use);
    r.series.values[k] *= use;
    if (!series.stderr_re.empty()) {
      r.series.stderr_re[k] *= std::abs(use);
      r.series.stderr_im[k] *= std::abs(use);
    }
  }
  r.degraded = n > 0 && static_cast<double>(r.clamped) / static_cast<double>(n) > opt.degraded_fraction;
  r.series.metadata["rescale_clamped"] = r.clamped;
  r.series.metadata["rescale_degraded"] = r.degraded;
  return r;
}

}  // namespace qspin
