#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace qspin {

inline std::vector<double> uniform_grid(double start, double step, int count) {
  if (count < 1 || !(step > 0.0)) throw std::invalid_argument("uniform_grid: need count >= 1 and step > 0");
  std::vector<double> g(count);
  for (int k = 0; k < count; ++k) g[k] = start + step * k;
  return g;
}

// Points start, start+step, ... strictly below stop (with 1e-9 slack).
inline std::vector<double> grid_until(double start, double stop, double step) {
  const int count = static_cast<int>(std::floor((stop - start) / step + 1e-9)) + 1;
  return uniform_grid(start, step, std::max(count, 1));
}

inline void require_uniform(const std::vector<double>& t, const char* what) {
  if (t.size() < 2) return;
  const double dt = t[1] - t[0];
  if (!(dt > 0.0)) throw std::invalid_argument(std::string(what) + ": grid must increase");
  for (std::size_t k = 1; k < t.size(); ++k)
    if (std::abs((t[k] - t[k - 1]) - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
      throw std::invalid_argument(std::string(what) + ": grid is not uniform");
}

struct TimeSeries {
  std::vector<double> times;
  std::vector<std::complex<double>> values;
  std::vector<double> stderr_re, stderr_im;  // empty or same length as values
  std::vector<bool> flagged;                 // rescale clamp flags; empty or same length
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t size() const { return times.size(); }
  double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }

  bool has_errors() const { return stderr_re.size() == values.size() && !values.empty(); }

  std::size_t flagged_count() const {
    std::size_t c = 0;
    for (bool f : flagged) c += f ? 1 : 0;
    return c;
  }

  void validate() const {
    if (values.size() != times.size()) throw std::invalid_argument("TimeSeries: times/values length mismatch");
    require_uniform(times, "TimeSeries");
    for (const auto& v : values)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw std::invalid_argument("TimeSeries: non-finite value");
  }
};

}  // namespace qspin
