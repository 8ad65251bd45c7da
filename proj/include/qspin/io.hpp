#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "exact.hpp"
#include "series.hpp"
#include "spectral.hpp"

namespace qspin::io {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

// Fixed 12-significant-digit formatting keeps files byte-identical across runs.
inline std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(12) << v;
  return s.str();
}

inline std::string csv(const TimeSeries& s) {
  std::ostringstream o;
  o << "t,re,im,stderr_re,stderr_im\n";
  for (std::size_t k = 0; k < s.size(); ++k) {
    o << num(s.times[k]) << ',' << num(s.values[k].real()) << ',' << num(s.values[k].imag()) << ',';
    o << (s.has_errors() ? num(s.stderr_re[k]) : "0") << ',' << (s.has_errors() ? num(s.stderr_im[k]) : "0") << '\n';
  }
  return o.str();
}

inline std::string csv(const SpectralFunction& s) {
  std::ostringstream o;
  o << "omega,S\n";
  for (std::size_t k = 0; k < s.omegas.size(); ++k) o << num(s.omegas[k]) << ',' << num(s.values[k]) << '\n';
  return o.str();
}

inline std::string csv(const std::vector<std::pair<std::string, const ThermoCurve*>>& curves) {
  std::ostringstream o;
  o << "T";
  for (const auto& [name, c] : curves) o << ',' << name << (c->stderr_values.empty() ? "" : "," + name + "_stderr");
  o << '\n';
  const auto& T = curves.front().second->T;
  for (std::size_t k = 0; k < T.size(); ++k) {
    o << num(T[k]);
    for (const auto& [name, c] : curves) {
      o << ',' << num(c->values[k]);
      if (!c->stderr_values.empty()) o << ',' << num(c->stderr_values[k]);
    }
    o << '\n';
  }
  return o.str();
}

inline std::string csv(const LabeledSpectrum& s) {
  std::ostringstream o;
  o << "index,energy,excitation,two_s,multiplet,degeneracy\n";
  const double e0 = s.ground_energy();
  for (std::size_t k = 0; k < s.levels.size(); ++k) {
    const auto& l = s.levels[k];
    o << k << ',' << num(l.energy) << ',' << num(l.energy - e0) << ',' << l.two_s << ',' << l.multiplet_size() << ',' << l.degeneracy << '\n';
  }
  return o.str();
}

struct Line {
  std::string label;
  std::vector<double> x, y;
  bool stems = false;
};

// Minimal SVG chart: axes with five ticks each, one polyline (or stem set) per line.
inline std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                            const std::vector<Line>& lines) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#17becf"};
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& l : lines)
    for (std::size_t k = 0; k < l.x.size(); ++k) {
      x0 = std::min(x0, l.x[k]);
      x1 = std::max(x1, l.x[k]);
      y0 = std::min(y0, l.y[k]);
      y1 = std::max(y1, l.y[k]);
    }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const double W = 720, H = 420, L = 70, R = 160, T = 40, B = 50;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    o << "<text x=\"" << num(px(xv)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << num(std::round(xv * 1000) / 1000) << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << num(std::round(yv * 1000) / 1000) << "</text>\n";
  }
  if (y0 < 0 && y1 > 0)
    o << "<line x1=\"" << L << "\" y1=\"" << num(py(0)) << "\" x2=\"" << W - R << "\" y2=\"" << num(py(0)) << "\" stroke=\"#bbb\"/>\n";
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  o << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << H / 2 << ")\">" << ylabel << "</text>\n";
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& l = lines[i];
    const char* c = colors[i % 7];
    if (l.stems) {
      for (std::size_t k = 0; k < l.x.size(); ++k)
        o << "<line x1=\"" << num(px(l.x[k])) << "\" y1=\"" << num(py(std::clamp(0.0, y0, y1))) << "\" x2=\"" << num(px(l.x[k]))
          << "\" y2=\"" << num(py(l.y[k])) << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
    } else {
      o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t k = 0; k < l.x.size(); ++k) o << num(px(l.x[k])) << ',' << num(py(l.y[k])) << ' ';
      o << "\"/>\n";
    }
    const double ly = T + 16 * static_cast<double>(i);
    o << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly << "\" stroke=\"" << c
      << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\">" << l.label << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

// Level diagram: one bar per level at its excitation energy, labelled by multiplicity.
inline std::string svg_levels(const std::string& title, const LabeledSpectrum& s, double max_excitation) {
  const double W = 360, H = 480, L = 60, T = 40, B = 30;
  const double e0 = s.ground_energy();
  auto py = [&](double e) { return H - B - e / max_excitation * (H - T - B); };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double e = max_excitation * i / 4;
    o << "<text x=\"" << L - 6 << "\" y=\"" << num(py(e) + 4) << "\" text-anchor=\"end\">" << num(std::round(e * 100) / 100) << "</text>\n";
  }
  double last_y = 1e300;
  for (const auto& l : s.levels) {
    const double e = l.energy - e0;
    if (e > max_excitation) break;
    const double y = py(e);
    o << "<line x1=\"" << L + 20 << "\" y1=\"" << num(y) << "\" x2=\"" << L + 160 << "\" y2=\"" << num(y) << "\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
    if (std::abs(y - last_y) > 10) {
      o << "<text x=\"" << L + 168 << "\" y=\"" << num(y + 4) << "\">" << num(std::round(e * 1000) / 1000) << " (" << l.multiplet_size()
        << ")</text>\n";
      last_y = y;
    }
  }
  o << "</svg>\n";
  return o.str();
}

inline Line re_line(const std::string& label, const TimeSeries& s) {
  Line l{label, s.times, {}, false};
  for (const auto& v : s.values) l.y.push_back(v.real());
  return l;
}

inline Line im_line(const std::string& label, const TimeSeries& s) {
  Line l{label, s.times, {}, false};
  for (const auto& v : s.values) l.y.push_back(v.imag());
  return l;
}

inline Line spectrum_line(const std::string& label, const SpectralFunction& s, double omega_max) {
  Line l{label, {}, {}, false};
  for (std::size_t k = 0; k < s.omegas.size(); ++k)
    if (s.omegas[k] >= 0.0 && s.omegas[k] <= omega_max) {
      l.x.push_back(s.omegas[k]);
      l.y.push_back(s.values[k]);
    }
  return l;
}

}  // namespace qspin::io
