#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tailgate/error.hpp"

namespace tailgate {

using cplx = std::complex<double>;

inline constexpr double kPruneTolerance = 1e-12;
inline constexpr int kDenseQubitCap = 16;
inline constexpr int kMaxQubits = 64;

enum class Pauli : std::uint8_t { X, Y, Z };

/// Tensor product of single-qubit Paulis, stored as X/Z bitmasks
/// (bit q set in x_mask means an X or Y factor on qubit q).
class PauliString {
 public:
  PauliString() = default;

  PauliString(std::initializer_list<std::pair<int, Pauli>> factors) {
    for (auto [q, p] : factors) set(q, p);
  }

  static PauliString from_masks(std::uint64_t x, std::uint64_t z) {
    PauliString s;
    s.x_ = x;
    s.z_ = z;
    return s;
  }

  /// Parses "X0 Z1 Y3"; an empty string is the identity.
  static PauliString parse(const std::string& text) {
    PauliString s;
    std::size_t i = 0;
    while (i < text.size()) {
      if (text[i] == ' ') {
        ++i;
        continue;
      }
      Pauli p{};
      switch (text[i]) {
        case 'X': p = Pauli::X; break;
        case 'Y': p = Pauli::Y; break;
        case 'Z': p = Pauli::Z; break;
        default: throw_input("bad Pauli label '", text, "'");
      }
      std::size_t end = i + 1;
      while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
      if (end == i + 1) throw_input("missing qubit index in '", text, "'");
      s.set(std::stoi(text.substr(i + 1, end - i - 1)), p);
      i = end;
    }
    return s;
  }

  void set(int qubit, Pauli p) {
    if (qubit < 0 || qubit >= kMaxQubits) throw_input("qubit index ", qubit, " out of range");
    const std::uint64_t bit = std::uint64_t{1} << qubit;
    x_ &= ~bit;
    z_ &= ~bit;
    if (p != Pauli::Z) x_ |= bit;
    if (p != Pauli::X) z_ |= bit;
  }

  std::uint64_t x_mask() const { return x_; }
  std::uint64_t z_mask() const { return z_; }
  bool is_identity() const { return (x_ | z_) == 0; }
  int weight() const { return std::popcount(x_ | z_); }
  int y_count() const { return std::popcount(x_ & z_); }

  /// Highest qubit index touched plus one (0 for the identity).
  int span() const { return 64 - std::countl_zero(x_ | z_); }

  std::map<int, Pauli> factors() const {
    std::map<int, Pauli> out;
    for (std::uint64_t m = x_ | z_; m; m &= m - 1) {
      const int q = std::countr_zero(m);
      const bool x = (x_ >> q) & 1U, z = (z_ >> q) & 1U;
      out[q] = x ? (z ? Pauli::Y : Pauli::X) : Pauli::Z;
    }
    return out;
  }

  std::string str() const {
    if (is_identity()) return "I";
    std::string out;
    for (auto [q, p] : factors()) {
      if (!out.empty()) out += ' ';
      out += "XYZ"[static_cast<int>(p)];
      out += std::to_string(q);
    }
    return out;
  }

  friend bool operator==(const PauliString&, const PauliString&) = default;
  friend auto operator<=>(const PauliString& a, const PauliString& b) {
    return std::pair(a.x_ | a.z_, std::pair(a.x_, a.z_)) <=>
           std::pair(b.x_ | b.z_, std::pair(b.x_, b.z_));
  }

 private:
  std::uint64_t x_ = 0;
  std::uint64_t z_ = 0;
};

/// Phase as a power of i: 0 -> +1, 1 -> +i, 2 -> -1, 3 -> -i.
struct PhasedString {
  int phase_power = 0;
  PauliString product;

  cplx phase() const {
    static constexpr double re[4] = {1, 0, -1, 0};
    static constexpr double im[4] = {0, 1, 0, -1};
    return {re[phase_power & 3], im[phase_power & 3]};
  }
};

/// Operator product a*b. Uses P = i^{|x&z|} X^x Z^z and Z^z X^x = (-1)^{|z&x|} X^x Z^z.
inline PhasedString multiply(const PauliString& a, const PauliString& b) {
  const std::uint64_t x = a.x_mask() ^ b.x_mask();
  const std::uint64_t z = a.z_mask() ^ b.z_mask();
  int power = a.y_count() + b.y_count() + 2 * std::popcount(a.z_mask() & b.x_mask()) -
              std::popcount(x & z);
  power = ((power % 4) + 4) % 4;
  return {power, PauliString::from_masks(x, z)};
}

/// Real-coefficient Hermitian operator: constant + sum_k c_k P_k on n qubits.
class PauliSum {
 public:
  PauliSum() = default;
  explicit PauliSum(int n_qubits, double constant = 0.0) : n_qubits_(n_qubits), constant_(constant) {
    if (n_qubits < 0 || n_qubits > kMaxQubits) throw_input("invalid qubit count ", n_qubits);
  }

  int n_qubits() const { return n_qubits_; }
  double constant() const { return constant_; }
  const std::map<PauliString, double>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty() && std::abs(constant_) <= kPruneTolerance; }

  double coefficient(const PauliString& s) const {
    if (s.is_identity()) return constant_;
    auto it = terms_.find(s);
    return it == terms_.end() ? 0.0 : it->second;
  }

  /// Accumulates without pruning; call prune() when done.
  void add(const PauliString& s, double c) {
    if (s.span() > n_qubits_) throw_input("Pauli string ", s.str(), " exceeds ", n_qubits_, " qubits");
    if (s.is_identity())
      constant_ += c;
    else
      terms_[s] += c;
  }

  void add_constant(double c) { constant_ += c; }

  PauliSum& prune(double tol = kPruneTolerance) {
    std::erase_if(terms_, [tol](const auto& kv) { return std::abs(kv.second) <= tol; });
    if (std::abs(constant_) <= tol) constant_ = 0.0;
    return *this;
  }

  PauliSum& scale(double w) {
    constant_ *= w;
    for (auto& [s, c] : terms_) c *= w;
    return prune();
  }

  /// Max |coefficient| difference, constant included.
  double distance(const PauliSum& other) const {
    double d = std::abs(constant_ - other.constant_);
    for (const auto& [s, c] : terms_) d = std::max(d, std::abs(c - other.coefficient(s)));
    for (const auto& [s, c] : other.terms_) d = std::max(d, std::abs(c - coefficient(s)));
    return d;
  }

 private:
  int n_qubits_ = 0;
  double constant_ = 0.0;
  std::map<PauliString, double> terms_;
};

/// Weighted sum of Pauli sums acting on the same register.
inline PauliSum linear_combine(std::span<const std::pair<double, PauliSum>> parts) {
  if (parts.empty()) return PauliSum(0);
  PauliSum out(parts.front().second.n_qubits());
  for (const auto& [w, h] : parts) {
    if (h.n_qubits() != out.n_qubits())
      throw_input("linear_combine: qubit count mismatch (", h.n_qubits(), " vs ", out.n_qubits(), ")");
    out.add_constant(w * h.constant());
    for (const auto& [s, c] : h.terms()) out.add(s, w * c);
  }
  return out.prune();
}

inline PauliSum linear_combine(std::initializer_list<std::pair<double, PauliSum>> parts) {
  std::vector<std::pair<double, PauliSum>> v(parts);
  return linear_combine(std::span<const std::pair<double, PauliSum>>(v));
}

/// Basis-index convention: qubit 0 is the most significant bit, so the
/// dense matrix is the Kronecker product P_0 (x) P_1 (x) ... (x) P_{n-1}.
inline std::uint64_t index_mask(std::uint64_t qubit_mask, int n_qubits) {
  std::uint64_t out = 0;
  for (std::uint64_t m = qubit_mask; m; m &= m - 1) {
    const int q = std::countr_zero(m);
    out |= std::uint64_t{1} << (n_qubits - 1 - q);
  }
  return out;
}

/// Pauli sum flattened for repeated application to state vectors:
/// P|b> = i^{nY} (-1)^{|b & zmask|} |b ^ flip>.
class CompiledPauliSum {
 public:
  struct Term {
    std::uint64_t flip;
    std::uint64_t sign;
    cplx coeff;  // c * i^{nY}
  };

  CompiledPauliSum() = default;
  explicit CompiledPauliSum(const PauliSum& h) : n_qubits_(h.n_qubits()), constant_(h.constant()) {
    terms_.reserve(h.size());
    static constexpr cplx ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (const auto& [s, c] : h.terms())
      terms_.push_back({index_mask(s.x_mask(), n_qubits_), index_mask(s.z_mask(), n_qubits_),
                        c * ipow[s.y_count() & 3]});
  }

  int n_qubits() const { return n_qubits_; }
  double constant() const { return constant_; }
  const std::vector<Term>& terms() const { return terms_; }

  /// out = H * in over the full 2^n register.
  void apply(std::span<const cplx> in, std::span<cplx> out) const {
    const std::size_t dim = in.size();
    std::vector<std::size_t> support;
    for (std::size_t b = 0; b < dim; ++b) {
      out[b] = constant_ * in[b];
      if (in[b] != cplx{}) support.push_back(b);
    }
    for (const auto& t : terms_)
      for (std::size_t b : support) {
        const double sgn = (std::popcount(b & t.sign) & 1) ? -1.0 : 1.0;
        out[b ^ t.flip] += (sgn * t.coeff) * in[b];
      }
  }

 private:
  int n_qubits_ = 0;
  double constant_ = 0.0;
  std::vector<Term> terms_;
};

using DenseMatrix = Eigen::MatrixXcd;

inline DenseMatrix to_dense(const PauliSum& h, int cap = kDenseQubitCap) {
  const int n = h.n_qubits();
  if (n > cap) throw_input("to_dense: ", n, " qubits exceeds dense cap ", cap);
  const std::size_t dim = std::size_t{1} << n;
  DenseMatrix m = DenseMatrix::Identity(dim, dim) * h.constant();
  const CompiledPauliSum compiled(h);
  for (const auto& t : compiled.terms())
    for (std::size_t b = 0; b < dim; ++b) {
      const double sgn = (std::popcount(b & t.sign) & 1) ? -1.0 : 1.0;
      m(b ^ t.flip, b) += sgn * t.coeff;
    }
  return m;
}

}  // namespace tailgate
