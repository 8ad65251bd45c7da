#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pauli.hpp"

#ifndef QSPIN_DATA_DIR
#define QSPIN_DATA_DIR "data"
#endif

namespace qspin {

enum class BondLabel { generic, j_prime, kitaev_x, kitaev_y, kitaev_z };

inline std::string to_string(BondLabel l) {
  switch (l) {
    case BondLabel::generic: return "generic";
    case BondLabel::j_prime: return "J-prime";
    case BondLabel::kitaev_x: return "kitaev-X";
    case BondLabel::kitaev_y: return "kitaev-Y";
    case BondLabel::kitaev_z: return "kitaev-Z";
  }
  return "generic";
}

inline BondLabel bond_label_from_string(const std::string& s) {
  if (s == "generic") return BondLabel::generic;
  if (s == "J-prime") return BondLabel::j_prime;
  if (s == "kitaev-X") return BondLabel::kitaev_x;
  if (s == "kitaev-Y") return BondLabel::kitaev_y;
  if (s == "kitaev-Z") return BondLabel::kitaev_z;
  throw std::invalid_argument("unknown bond label '" + s + "'");
}

inline bool is_kitaev(BondLabel l) {
  return l == BondLabel::kitaev_x || l == BondLabel::kitaev_y || l == BondLabel::kitaev_z;
}

// Axis index 0,1,2 = x,y,z of a Kitaev-colored bond.
inline int kitaev_axis(BondLabel l) {
  switch (l) {
    case BondLabel::kitaev_x: return 0;
    case BondLabel::kitaev_y: return 1;
    case BondLabel::kitaev_z: return 2;
    default: throw std::invalid_argument("bond has no Kitaev color");
  }
}

struct Bond {
  int i = 0, j = 0;
  BondLabel label = BondLabel::generic;
};

class BondTopology {
 public:
  BondTopology() = default;
  BondTopology(int n_sites, std::vector<Bond> bonds) : n_(n_sites), bonds_(std::move(bonds)) { validate(); }

  int n_sites() const { return n_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  bool has_kitaev_labels() const {
    return std::any_of(bonds_.begin(), bonds_.end(), [](const Bond& b) { return is_kitaev(b.label); });
  }

 private:
  void validate() const {
    if (n_ < 1 || n_ > kMaxQubits) throw std::invalid_argument("BondTopology: bad site count");
    std::set<std::pair<int, int>> seen;
    std::set<std::pair<int, int>> colors;  // (site, axis)
    for (const auto& b : bonds_) {
      if (b.i == b.j) throw std::invalid_argument("BondTopology: self bond");
      if (b.i < 0 || b.j < 0 || b.i >= n_ || b.j >= n_) throw std::invalid_argument("BondTopology: site out of range");
      if (!seen.insert(std::minmax(b.i, b.j)).second) throw std::invalid_argument("BondTopology: duplicate bond");
      if (is_kitaev(b.label)) {
        const int a = kitaev_axis(b.label);
        if (!colors.insert({b.i, a}).second || !colors.insert({b.j, a}).second)
          throw std::invalid_argument("BondTopology: site touches two bonds of one Kitaev color");
      }
    }
  }

  int n_ = 0;
  std::vector<Bond> bonds_;
};

struct ModelParams {
  double J = 0.0;
  double J_prime = 0.0;
  std::array<double, 3> K{0.0, 0.0, 0.0};
  double Gamma = 0.0;
  double Gamma_prime = 0.0;

  void validate() const {
    const double all[] = {J, J_prime, K[0], K[1], K[2], Gamma, Gamma_prime};
    bool nonzero = false;
    for (double v : all) {
      if (!std::isfinite(v)) throw std::invalid_argument("ModelParams: non-finite parameter");
      nonzero = nonzero || v != 0.0;
    }
    if (!nonzero) throw std::invalid_argument("ModelParams: all parameters zero");
  }
};

inline constexpr char kAxis[3] = {'X', 'Y', 'Z'};

// J S_i.S_j with S = sigma/2.
inline void add_heisenberg_bond(std::vector<PauliTerm>& out, int n, int i, int j, double J) {
  if (J == 0.0) return;
  for (char l : kAxis) out.push_back(PauliTerm::two_site(n, i, j, l, l, 0.25 * J));
}

inline PauliSum build_heisenberg(const BondTopology& topo, double J, double J_prime) {
  const int n = topo.n_sites();
  std::vector<PauliTerm> terms;
  for (const auto& b : topo.bonds()) {
    if (is_kitaev(b.label)) throw std::invalid_argument("build_heisenberg: Kitaev-labeled bond");
    add_heisenberg_bond(terms, n, b.i, b.j, b.label == BondLabel::j_prime ? J_prime : J);
  }
  return PauliSum(n, terms);
}

// Per bond of color g: J S.S + K_g S^g S^g + Gamma (S^a S^b + S^b S^a)
// + Gamma' sum_{a != g} (S^g S^a + S^a S^g), with (a, b) the axes != g in cyclic order.
inline std::vector<PauliTerm> kitaev_heisenberg_terms(const BondTopology& topo, const ModelParams& p) {
  const int n = topo.n_sites();
  std::vector<PauliTerm> terms;
  for (const auto& b : topo.bonds()) {
    if (!is_kitaev(b.label)) throw std::invalid_argument("build_kitaev_heisenberg: uncolored bond");
    const int g = kitaev_axis(b.label);
    const int a = (g + 1) % 3, c = (g + 2) % 3;
    auto push = [&](int u, int v, double coeff) {
      terms.push_back(PauliTerm::two_site(n, b.i, b.j, kAxis[u], kAxis[v], 0.25 * coeff));
    };
    for (int u = 0; u < 3; ++u) push(u, u, p.J + (u == g ? p.K[g] : 0.0));
    push(a, c, p.Gamma);
    push(c, a, p.Gamma);
    for (int u : {a, c}) {
      push(g, u, p.Gamma_prime);
      push(u, g, p.Gamma_prime);
    }
  }
  return terms;
}

inline PauliSum build_kitaev_heisenberg(const BondTopology& topo, const ModelParams& p) {
  return PauliSum(topo.n_sites(), kitaev_heisenberg_terms(topo, p));
}

inline PauliSum build_hamiltonian(const BondTopology& topo, const ModelParams& p) {
  return topo.has_kitaev_labels() ? build_kitaev_heisenberg(topo, p) : build_heisenberg(topo, p.J, p.J_prime);
}

inline nlohmann::json to_json(const BondTopology& t) {
  nlohmann::json bonds = nlohmann::json::array();
  for (const auto& b : t.bonds()) bonds.push_back({b.i, b.j, to_string(b.label)});
  return {{"n_sites", t.n_sites()}, {"bonds", bonds}};
}

inline BondTopology topology_from_json(const nlohmann::json& j) {
  std::vector<Bond> bonds;
  for (const auto& e : j.at("bonds")) {
    Bond b{e.at(0).get<int>(), e.at(1).get<int>(), BondLabel::generic};
    if (e.size() > 2) b.label = bond_label_from_string(e.at(2).get<std::string>());
    bonds.push_back(b);
  }
  return BondTopology(j.at("n_sites").get<int>(), std::move(bonds));
}

inline BondTopology load_topology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open topology file " + path.string());
  return topology_from_json(nlohmann::json::parse(in));
}

inline std::filesystem::path data_dir() {
  if (const char* env = std::getenv("QSPIN_DATA_DIR")) return env;
  return QSPIN_DATA_DIR;
}

struct Model {
  std::string name;
  BondTopology topology;
  ModelParams params;
  PauliSum hamiltonian() const { return build_hamiltonian(topology, params); }
  int n_sites() const { return topology.n_sites(); }
};

inline ModelParams rucl3_params() {
  ModelParams p;
  p.J = -1.53;
  p.K = {-24.4, -24.4, -24.4};
  p.Gamma = 5.25;
  p.Gamma_prime = -0.95;
  return p;
}

inline BondTopology hexagon_topology() {
  using enum BondLabel;
  return BondTopology(6, {{0, 1, kitaev_y}, {1, 2, kitaev_z}, {2, 3, kitaev_x},
                          {3, 4, kitaev_y}, {4, 5, kitaev_z}, {5, 0, kitaev_x}});
}

// Two hexagons sharing the bond (1, 2).
inline BondTopology naphthalene_topology() {
  using enum BondLabel;
  return BondTopology(10, {{0, 1, kitaev_y}, {1, 2, kitaev_z}, {2, 3, kitaev_x}, {3, 4, kitaev_y},
                           {4, 5, kitaev_z}, {5, 0, kitaev_x}, {1, 6, kitaev_x}, {6, 7, kitaev_y},
                           {7, 8, kitaev_z}, {8, 9, kitaev_x}, {9, 2, kitaev_y}});
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"fes4", "fes8", "kh6", "kh10", "kh-aniso", "kitaev6"};
  return names;
}

inline Model preset(const std::string& name) {
  using enum BondLabel;
  if (name == "fes4") {
    ModelParams p;
    p.J = 1.0;
    p.J_prime = 1.17;
    return {name, BondTopology(4, {{0, 1, j_prime}, {2, 3, j_prime}, {0, 2, generic}, {0, 3, generic},
                                   {1, 2, generic}, {1, 3, generic}}), p};
  }
  if (name == "fes8") {
    ModelParams p;
    p.J = 1.0;
    return {name, load_topology(data_dir() / "fes8.json"), p};
  }
  if (name == "kh6") return {name, hexagon_topology(), rucl3_params()};
  if (name == "kh10") return {name, naphthalene_topology(), rucl3_params()};
  if (name == "kh-aniso") {
    ModelParams p;
    p.J = 0.4;
    p.K = {-8.0, -8.0 / 6.0, -8.0 / 6.0};
    return {name, naphthalene_topology(), p};
  }
  if (name == "kitaev6") {
    ModelParams p;
    p.K = {-24.4, -24.4, -24.4};
    return {name, hexagon_topology(), p};
  }
  throw std::invalid_argument("unknown preset '" + name + "'");
}

// Greedy disjoint matching over bonds in listed order.
inline std::vector<Bond> greedy_matching(const BondTopology& topo) {
  std::vector<bool> used(topo.n_sites(), false);
  std::vector<Bond> m;
  for (const auto& b : topo.bonds())
    if (!used[b.i] && !used[b.j]) {
      used[b.i] = used[b.j] = true;
      m.push_back(b);
    }
  return m;
}

inline PauliSum commuting_reference(const BondTopology& topo, const ModelParams& p) {
  const auto match = greedy_matching(topo);
  if (match.empty()) throw std::invalid_argument("commuting_reference: no matching found");
  if (2 * static_cast<int>(match.size()) + 1 < topo.n_sites())
    throw std::invalid_argument("commuting_reference: matching leaves more than one site free");
  std::vector<PauliSum> blocks;
  for (const auto& b : match) blocks.push_back(build_hamiltonian(BondTopology(topo.n_sites(), {b}), p));
  for (std::size_t a = 0; a < blocks.size(); ++a)
    for (std::size_t b = a + 1; b < blocks.size(); ++b)
      if (!commutes(blocks[a], blocks[b])) throw std::logic_error("commuting_reference: bond blocks do not commute");
  const PauliSum h = build_hamiltonian(BondTopology(topo.n_sites(), match), p);
  return h;
}

inline std::vector<PauliTerm> find_symmetry(const PauliSum& H, const std::vector<PauliTerm>& candidates) {
  std::vector<PauliTerm> out;
  for (const auto& c : candidates) {
    if (c.is_identity()) continue;
    if (commutes(H, PauliSum(c))) out.push_back(c);
  }
  return out;
}

inline std::vector<PauliTerm> global_parity_candidates(int n) {
  return {PauliTerm(std::string(n, 'Z')), PauliTerm(std::string(n, 'X')), PauliTerm(std::string(n, 'Y'))};
}

}  // namespace qspin
