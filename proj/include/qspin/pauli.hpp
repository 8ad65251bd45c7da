#pragma once

#include <algorithm>
#include <bit>
#include <complex>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace qspin {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kPhysicsTol = 1e-10;
inline constexpr double kLinalgTol = 1e-12;
inline constexpr int kMaxQubits = 62;
inline constexpr int kDenseCap = 14;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Qubit 0 is the most significant bit of a basis index.
constexpr int qubit_bit(int n, int q) { return n - 1 - q; }

inline void require_same_size(int a, int b, const char* what) {
  if (a != b)
    throw DimensionError(std::string(what) + ": register sizes differ (" +
                         std::to_string(a) + " vs " + std::to_string(b) + ")");
}

// Pauli string stored as (x, z) bit masks over basis-index bits:
// X -> x, Z -> z, Y -> x and z. P|b> = i^{|x&z|} (-1)^{|b&z|} |b ^ x>.
class PauliTerm {
 public:
  PauliTerm() = default;

  explicit PauliTerm(std::string_view letters, cplx coeff = 1.0)
      : n_(static_cast<int>(letters.size())), c_(coeff) {
    if (n_ > kMaxQubits) throw DimensionError("PauliTerm: too many qubits");
    for (int q = 0; q < n_; ++q) {
      const std::uint64_t bit = std::uint64_t{1} << qubit_bit(n_, q);
      switch (letters[q]) {
        case 'I': case '.': break;
        case 'X': x_ |= bit; break;
        case 'Y': x_ |= bit; z_ |= bit; break;
        case 'Z': z_ |= bit; break;
        default:
          throw std::invalid_argument("PauliTerm: bad letter '" +
                                      std::string(1, letters[q]) + "'");
      }
    }
  }

  PauliTerm(int n, std::uint64_t x_mask, std::uint64_t z_mask, cplx coeff = 1.0)
      : n_(n), x_(x_mask), z_(z_mask), c_(coeff) {
    if (n_ < 0 || n_ > kMaxQubits) throw DimensionError("PauliTerm: bad register size");
    const std::uint64_t full = n_ == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n_) - 1;
    if ((x_ | z_) & ~full) throw DimensionError("PauliTerm: mask exceeds register");
  }

  static PauliTerm identity(int n, cplx coeff = 1.0) { return PauliTerm(n, 0, 0, coeff); }

  static PauliTerm single(int n, int q, char letter, cplx coeff = 1.0) {
    std::string s(n, 'I');
    if (q < 0 || q >= n) throw DimensionError("PauliTerm::single: qubit out of range");
    s[q] = letter;
    return PauliTerm(s, coeff);
  }

  // Product of letters on the listed qubits, e.g. two_site(n, i, j, 'Z', 'Z').
  static PauliTerm two_site(int n, int i, int j, char li, char lj, cplx coeff = 1.0) {
    if (i == j) throw std::invalid_argument("PauliTerm::two_site: identical sites");
    std::string s(n, 'I');
    if (i < 0 || j < 0 || i >= n || j >= n)
      throw DimensionError("PauliTerm::two_site: site out of range");
    s[i] = li;
    s[j] = lj;
    return PauliTerm(s, coeff);
  }

  int n_qubits() const { return n_; }
  std::uint64_t x_mask() const { return x_; }
  std::uint64_t z_mask() const { return z_; }
  cplx coefficient() const { return c_; }
  PauliTerm with_coefficient(cplx c) const { return PauliTerm(n_, x_, z_, c); }

  char letter(int q) const {
    const std::uint64_t bit = std::uint64_t{1} << qubit_bit(n_, q);
    const bool x = x_ & bit, z = z_ & bit;
    return x ? (z ? 'Y' : 'X') : (z ? 'Z' : 'I');
  }

  std::string letters() const {
    std::string s(n_, 'I');
    for (int q = 0; q < n_; ++q) s[q] = letter(q);
    return s;
  }

  bool is_identity() const { return x_ == 0 && z_ == 0; }
  bool is_z_type() const { return x_ == 0; }
  int weight() const { return std::popcount(x_ | z_); }
  std::vector<int> support() const {
    std::vector<int> s;
    for (int q = 0; q < n_; ++q)
      if (letter(q) != 'I') s.push_back(q);
    return s;
  }

  bool commutes_with(const PauliTerm& o) const {
    return ((std::popcount(x_ & o.z_) + std::popcount(z_ & o.x_)) & 1) == 0;
  }

  // Phase of P|b>, coefficient excluded.
  cplx phase_on(std::uint64_t b) const {
    static constexpr cplx ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    const int k = std::popcount(x_ & z_) + 2 * std::popcount(b & z_);
    return ipow[k & 3];
  }

  bool same_string(const PauliTerm& o) const { return n_ == o.n_ && x_ == o.x_ && z_ == o.z_; }

  friend PauliTerm operator*(const PauliTerm& a, const PauliTerm& b) {
    require_same_size(a.n_, b.n_, "PauliTerm product");
    static constexpr cplx ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    const std::uint64_t x = a.x_ ^ b.x_, z = a.z_ ^ b.z_;
    const int k = std::popcount(a.x_ & a.z_) + std::popcount(b.x_ & b.z_) -
                  std::popcount(x & z) + 2 * std::popcount(a.z_ & b.x_);
    return PauliTerm(a.n_, x, z, a.c_ * b.c_ * ipow[((k % 4) + 4) % 4]);
  }

 private:
  int n_ = 0;
  std::uint64_t x_ = 0, z_ = 0;
  cplx c_{1.0, 0.0};
};

// Canonical merged sum of Pauli terms, ordered by (x, z) masks.
class PauliSum {
 public:
  PauliSum() = default;
  explicit PauliSum(int n) : n_(n) {
    if (n < 0 || n > kMaxQubits) throw DimensionError("PauliSum: bad register size");
  }
  PauliSum(int n, const std::vector<PauliTerm>& terms) : PauliSum(n) {
    for (const auto& t : terms) add(t);
  }
  PauliSum(const PauliTerm& t) : PauliSum(t.n_qubits()) { add(t); }  // NOLINT

  int n_qubits() const { return n_; }
  const std::vector<PauliTerm>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  PauliSum& add(const PauliTerm& t) {
    require_same_size(n_, t.n_qubits(), "PauliSum::add");
    auto key = [](const PauliTerm& p) { return std::pair{p.x_mask(), p.z_mask()}; };
    auto it = std::lower_bound(terms_.begin(), terms_.end(), t,
                               [&](const PauliTerm& a, const PauliTerm& b) { return key(a) < key(b); });
    if (it != terms_.end() && it->same_string(t)) {
      const cplx c = it->coefficient() + t.coefficient();
      if (c == cplx{0.0}) terms_.erase(it);
      else *it = it->with_coefficient(c);
    } else if (t.coefficient() != cplx{0.0}) {
      terms_.insert(it, t);
    }
    return *this;
  }

  PauliSum& operator+=(const PauliSum& o) {
    require_same_size(n_, o.n_, "PauliSum +=");
    for (const auto& t : o.terms_) add(t);
    return *this;
  }
  friend PauliSum operator+(PauliSum a, const PauliSum& b) { return a += b; }
  friend PauliSum operator-(PauliSum a, const PauliSum& b) { return a += b * cplx{-1.0}; }
  friend PauliSum operator*(PauliSum a, cplx s) {
    PauliSum out(a.n_);
    for (const auto& t : a.terms_) out.add(t.with_coefficient(t.coefficient() * s));
    return out;
  }
  friend PauliSum operator*(cplx s, const PauliSum& a) { return a * s; }
  friend PauliSum operator*(const PauliSum& a, const PauliSum& b) {
    require_same_size(a.n_, b.n_, "PauliSum product");
    PauliSum out(a.n_);
    for (const auto& ta : a.terms_)
      for (const auto& tb : b.terms_) out.add(ta * tb);
    return out;
  }

  // Coefficient of a letter string, 0 when absent.
  cplx coefficient(std::string_view letters) const {
    const PauliTerm probe(letters);
    for (const auto& t : terms_)
      if (t.same_string(probe)) return t.coefficient();
    return 0.0;
  }

  bool has_real_coefficients(double tol = kLinalgTol) const {
    return std::all_of(terms_.begin(), terms_.end(),
                       [&](const PauliTerm& t) { return std::abs(t.coefficient().imag()) <= tol; });
  }

  PauliSum dropping_small(double tol) const {
    PauliSum out(n_);
    for (const auto& t : terms_)
      if (std::abs(t.coefficient()) > tol) out.add(t);
    return out;
  }

 private:
  int n_ = 0;
  std::vector<PauliTerm> terms_;
};

class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(int n) : n_(n), amp_(CVector::Zero(dim_of(n))) { amp_(0) = 1.0; }
  StateVector(int n, CVector amplitudes) : n_(n), amp_(std::move(amplitudes)) {
    if (amp_.size() != dim_of(n)) throw DimensionError("StateVector: amplitude count != 2^n");
  }

  static StateVector basis(int n, std::uint64_t index) {
    StateVector s(n);
    if (index >= static_cast<std::uint64_t>(s.dim())) throw DimensionError("StateVector::basis: index out of range");
    s.amp_(0) = 0.0;
    s.amp_(static_cast<Eigen::Index>(index)) = 1.0;
    return s;
  }

  int n_qubits() const { return n_; }
  Eigen::Index dim() const { return amp_.size(); }
  const CVector& amplitudes() const { return amp_; }
  CVector& amplitudes() { return amp_; }
  cplx operator[](Eigen::Index i) const { return amp_(i); }
  double norm() const { return amp_.norm(); }
  StateVector normalized() const { return StateVector(n_, amp_ / amp_.norm()); }
  cplx inner(const StateVector& o) const {
    require_same_size(n_, o.n_, "StateVector::inner");
    return amp_.dot(o.amp_);
  }

  static Eigen::Index dim_of(int n) {
    if (n < 0 || n > 30) throw DimensionError("StateVector: unsupported register size");
    return Eigen::Index{1} << n;
  }

 private:
  int n_ = 0;
  CVector amp_;
};

class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(int n) : n_(n), rho_(CMatrix::Zero(StateVector::dim_of(n), StateVector::dim_of(n))) {
    rho_(0, 0) = 1.0;
  }
  DensityMatrix(int n, CMatrix entries) : n_(n), rho_(std::move(entries)) {
    const auto d = StateVector::dim_of(n);
    if (rho_.rows() != d || rho_.cols() != d) throw DimensionError("DensityMatrix: shape != 2^n x 2^n");
  }

  static DensityMatrix from_pure(const StateVector& s) {
    return DensityMatrix(s.n_qubits(), s.amplitudes() * s.amplitudes().adjoint());
  }
  static DensityMatrix maximally_mixed(int n) {
    const auto d = StateVector::dim_of(n);
    return DensityMatrix(n, CMatrix::Identity(d, d) / static_cast<double>(d));
  }

  int n_qubits() const { return n_; }
  Eigen::Index dim() const { return rho_.rows(); }
  const CMatrix& entries() const { return rho_; }
  CMatrix& entries() { return rho_; }
  cplx trace() const { return rho_.trace(); }
  Eigen::VectorXd probabilities() const { return rho_.diagonal().real(); }

 private:
  int n_ = 0;
  CMatrix rho_;
};

inline void apply_pauli_inplace(const PauliTerm& term, CVector& amp) {
  const std::uint64_t x = term.x_mask();
  const cplx c = term.coefficient();
  const auto d = static_cast<std::uint64_t>(amp.size());
  if (x == 0) {
    for (std::uint64_t b = 0; b < d; ++b) amp(b) *= c * term.phase_on(b);
    return;
  }
  // Pair b with b^x once; the pair leader has the highest set bit of x cleared.
  const std::uint64_t top = std::uint64_t{1} << (63 - std::countl_zero(x));
  for (std::uint64_t b = 0; b < d; ++b) {
    if (b & top) continue;
    const std::uint64_t bx = b ^ x;
    const cplx ab = amp(b), abx = amp(bx);
    amp(bx) = c * term.phase_on(b) * ab;
    amp(b) = c * term.phase_on(bx) * abx;
  }
}

inline StateVector apply_pauli(const PauliTerm& term, StateVector state) {
  require_same_size(term.n_qubits(), state.n_qubits(), "apply_pauli");
  apply_pauli_inplace(term, state.amplitudes());
  return state;
}

inline CVector apply_sum(const PauliSum& sum, const CVector& v) {
  CVector out = CVector::Zero(v.size());
  CVector tmp(v.size());
  for (const auto& t : sum.terms()) {
    tmp = v;
    apply_pauli_inplace(t, tmp);
    out += tmp;
  }
  return out;
}

inline cplx expectation(const PauliSum& obs, const StateVector& s) {
  require_same_size(obs.n_qubits(), s.n_qubits(), "expectation");
  return s.amplitudes().dot(apply_sum(obs, s.amplitudes()));
}

inline cplx expectation(const PauliSum& obs, const DensityMatrix& rho) {
  require_same_size(obs.n_qubits(), rho.n_qubits(), "expectation");
  const CMatrix& r = rho.entries();
  const auto d = static_cast<std::uint64_t>(rho.dim());
  cplx total = 0.0;
  // Tr(rho P) = sum_b phase(b) rho[b, b^x]
  for (const auto& t : obs.terms()) {
    cplx acc = 0.0;
    for (std::uint64_t b = 0; b < d; ++b) acc += t.phase_on(b) * r(b, b ^ t.x_mask());
    total += t.coefficient() * acc;
  }
  return total;
}

inline CMatrix dense_matrix(const PauliSum& sum, int cap = kDenseCap) {
  if (sum.n_qubits() > cap)
    throw DimensionError("dense_matrix: " + std::to_string(sum.n_qubits()) +
                         " qubits exceeds cap " + std::to_string(cap));
  const auto d = StateVector::dim_of(sum.n_qubits());
  CMatrix m = CMatrix::Zero(d, d);
  for (const auto& t : sum.terms())
    for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(d); ++b)
      m(b ^ t.x_mask(), b) += t.coefficient() * t.phase_on(b);
  return m;
}

inline PauliSum commutator(const PauliSum& a, const PauliSum& b) {
  require_same_size(a.n_qubits(), b.n_qubits(), "commutator");
  PauliSum out(a.n_qubits());
  for (const auto& ta : a.terms())
    for (const auto& tb : b.terms())
      if (!ta.commutes_with(tb)) {
        const PauliTerm p = ta * tb;
        out.add(p.with_coefficient(2.0 * p.coefficient()));
      }
  return out;
}

// Symbolic check: every surviving coefficient of [a, b] is below tol.
inline bool commutes(const PauliSum& a, const PauliSum& b, double tol = kPhysicsTol) {
  const PauliSum c = commutator(a, b);
  return std::all_of(c.terms().begin(), c.terms().end(),
                     [&](const PauliTerm& t) { return std::abs(t.coefficient()) < tol; });
}

inline bool commutes_dense(const PauliSum& a, const PauliSum& b, double tol = kPhysicsTol) {
  const CMatrix ma = dense_matrix(a), mb = dense_matrix(b);
  return (ma * mb - mb * ma).norm() < tol;
}

// S^2 of n spin-1/2 sites with S = sigma/2.
inline PauliSum total_spin_squared(int n) {
  PauliSum s(n);
  s.add(PauliTerm::identity(n, 0.75 * n));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (char l : {'X', 'Y', 'Z'}) s.add(PauliTerm::two_site(n, i, j, l, l, 0.5));
  return s;
}

inline nlohmann::json to_json(const PauliSum& s) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : s.terms())
    j.push_back({{"coeff", {t.coefficient().real(), t.coefficient().imag()}}, {"string", t.letters()}});
  return j;
}

inline PauliSum pauli_sum_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("PauliSum JSON: expected non-empty array");
  const int n = static_cast<int>(j.at(0).at("string").get<std::string>().size());
  PauliSum s(n);
  for (const auto& e : j) {
    const auto& c = e.at("coeff");
    s.add(PauliTerm(e.at("string").get<std::string>(), cplx{c.at(0).get<double>(), c.at(1).get<double>()}));
  }
  return s;
}

}  // namespace qspin
