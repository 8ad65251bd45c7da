#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "exact.hpp"
#include "series.hpp"

namespace qspin {

enum class Window { none, gaussian };

struct SpectralOptions {
  Window window = Window::gaussian;
  double sigma = 0.0;  // 0 = one third of the time span
  int zero_pad = 4;
};

struct SpectralFunction {
  std::vector<double> omegas;  // ascending, symmetric around 0
  std::vector<double> values;
  nlohmann::json metadata = nlohmann::json::object();

  double step() const { return omegas.size() > 1 ? omegas[1] - omegas[0] : 0.0; }
};

struct Peak {
  double omega = 0.0;
  double amplitude = 0.0;
};

// S(w) = dt sum_t C(t) w(t) e^{i w t} over the hermitian extension C(-t) = C(t)*.
inline SpectralFunction spectral_transform(const TimeSeries& s, const SpectralOptions& opt = {}) {
  s.validate();
  const auto n = static_cast<Eigen::Index>(s.size());
  if (n < 4) throw std::invalid_argument("spectral_transform: fewer than 4 points");
  if (std::abs(s.times[0]) > 1e-12) throw std::invalid_argument("spectral_transform: series must start at t = 0");
  if (opt.zero_pad < 1) throw std::invalid_argument("spectral_transform: zero_pad must be >= 1");
  const double dt = s.dt();
  const double span = s.times.back();
  const double sigma = opt.sigma > 0.0 ? opt.sigma : span / 3.0;
  auto w = [&](double t) { return opt.window == Window::gaussian ? std::exp(-t * t / (2 * sigma * sigma)) : 1.0; };
  const Eigen::Index full = 2 * n - 1;
  const Eigen::Index len = full * opt.zero_pad;
  // Circular layout: t >= 0 at the front, t < 0 wrapped to the end.
  std::vector<cplx> x(len, cplx(0.0));
  for (Eigen::Index k = 0; k < n; ++k) {
    const cplx c = s.values[k] * w(s.times[k]);
    x[k] = std::conj(c);
    if (k > 0) x[len - k] = c;
  }
  Eigen::FFT<double> fft;
  std::vector<cplx> X;
  fft.fwd(X, x);
  SpectralFunction out;
  double max_imag = 0.0;  // vanishes for a hermitian extension
  for (Eigen::Index j = 0; j < len; ++j) {
    const Eigen::Index k = (j + len / 2 + 1) % len;  // ascending frequency order
    const Eigen::Index signed_k = k > len / 2 ? k - len : k;
    out.omegas.push_back(2 * std::numbers::pi * static_cast<double>(signed_k) / (static_cast<double>(len) * dt));
    out.values.push_back(dt * X[k].real());
    max_imag = std::max(max_imag, dt * std::abs(X[k].imag()));
  }
  out.metadata = {{"window", opt.window == Window::gaussian ? "gaussian" : "none"},
                  {"sigma", opt.window == Window::gaussian ? sigma : 0.0},
                  {"zero_pad", opt.zero_pad},
                  {"dt", dt},
                  {"points", n},
                  {"max_imag", max_imag}};
  return out;
}

// Local maxima of |S| with omega > 0 above rel_threshold times the largest |S|; amplitudes keep
// their sign (antiferromagnetic pairs give negative lines).
inline std::vector<Peak> find_peaks(const SpectralFunction& s, double rel_threshold = 0.01) {
  std::vector<Peak> peaks;
  double top = 0.0;
  for (double v : s.values) top = std::max(top, std::abs(v));
  for (std::size_t k = 1; k + 1 < s.values.size(); ++k) {
    if (s.omegas[k] <= 0.0) continue;
    const double v = std::abs(s.values[k]);
    if (v > std::abs(s.values[k - 1]) && v >= std::abs(s.values[k + 1]) && v > rel_threshold * top)
      peaks.push_back({s.omegas[k], s.values[k]});
  }
  return peaks;
}

inline Peak dominant_peak(const SpectralFunction& s, double rel_threshold = 0.01) {
  const auto p = find_peaks(s, rel_threshold);
  if (p.empty()) throw std::runtime_error("dominant_peak: no peak above threshold");
  return *std::max_element(p.begin(), p.end(),
                           [](const Peak& a, const Peak& b) { return std::abs(a.amplitude) < std::abs(b.amplitude); });
}

// Largest |S| within +-half_width of omega (amplitude read-out at a known line).
inline Peak peak_near(const SpectralFunction& s, double omega, double half_width) {
  std::optional<Peak> best;
  for (std::size_t k = 0; k < s.values.size(); ++k)
    if (std::abs(s.omegas[k] - omega) <= half_width && (!best || std::abs(s.values[k]) > std::abs(best->amplitude)))
      best = Peak{s.omegas[k], s.values[k]};
  if (!best) throw std::runtime_error("peak_near: empty frequency window");
  return *best;
}

struct ThermoCurve {
  std::vector<double> T;
  std::vector<double> values;
  std::vector<double> stderr_values;  // empty when exact
};

inline void require_ascending_positive(const std::vector<double>& t) {
  if (t.empty()) throw std::invalid_argument("temperature grid is empty");
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(t[k] > 0.0)) throw std::invalid_argument("temperatures must be positive");
    if (k > 0 && !(t[k] > t[k - 1])) throw std::invalid_argument("temperature grid must ascend");
  }
}

inline ThermoCurve thermal_energy_exact(const ExactSolver& solver, const std::vector<double>& T) {
  require_ascending_positive(T);
  ThermoCurve c;
  c.T = T;
  for (double t : T) c.values.push_back(solver.energy(1.0 / t));
  return c;
}

// (1/n) dE/dT: central differences, or the slope of a local quadratic least-squares fit over
// `window` neighbouring points when window >= 3 (smooths noisy energies).
inline ThermoCurve heat_capacity(const ThermoCurve& energy, int n_sites, int window = 0) {
  require_ascending_positive(energy.T);
  const auto m = energy.T.size();
  if (m < 3) throw std::invalid_argument("heat_capacity: need at least three temperatures");
  ThermoCurve c;
  c.T = energy.T;
  const auto& T = energy.T;
  const auto& E = energy.values;
  for (std::size_t k = 0; k < m; ++k) {
    double slope;
    if (window >= 3) {
      const int half = window / 2;
      std::size_t lo = k >= static_cast<std::size_t>(half) ? k - half : 0;
      std::size_t hi = std::min(m - 1, k + half);
      while (hi - lo + 1 < static_cast<std::size_t>(std::min<int>(window, static_cast<int>(m)))) {
        if (lo > 0) --lo;
        else ++hi;
      }
      const auto cnt = static_cast<Eigen::Index>(hi - lo + 1);
      Eigen::MatrixXd a(cnt, 3);
      Eigen::VectorXd b(cnt);
      for (Eigen::Index r = 0; r < cnt; ++r) {
        const double x = T[lo + r] - T[k];
        a(r, 0) = 1.0;
        a(r, 1) = x;
        a(r, 2) = x * x;
        b(r) = E[lo + r];
      }
      slope = a.colPivHouseholderQr().solve(b)(1);
    } else if (k == 0) {
      slope = (E[1] - E[0]) / (T[1] - T[0]);
    } else if (k == m - 1) {
      slope = (E[m - 1] - E[m - 2]) / (T[m - 1] - T[m - 2]);
    } else {
      // Three-point derivative on a non-uniform grid.
      const double h1 = T[k] - T[k - 1], h2 = T[k + 1] - T[k];
      slope = (-h2 / (h1 * (h1 + h2))) * E[k - 1] + ((h2 - h1) / (h1 * h2)) * E[k] + (h1 / (h2 * (h1 + h2))) * E[k + 1];
    }
    c.values.push_back(slope / n_sites);
  }
  return c;
}

// Interior local maxima of a curve.
inline std::vector<std::pair<double, double>> local_maxima(const ThermoCurve& c) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t k = 1; k + 1 < c.values.size(); ++k)
    if (c.values[k] > c.values[k - 1] && c.values[k] >= c.values[k + 1]) out.push_back({c.T[k], c.values[k]});
  return out;
}

}  // namespace qspin
