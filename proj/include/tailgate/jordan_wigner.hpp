#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <unordered_map>
#include <vector>

#include "tailgate/integrals.hpp"
#include "tailgate/pauli.hpp"

namespace tailgate {

/// Interleaved spin-orbital ordering: spatial orbital i, spin up -> 2i, down -> 2i+1.
constexpr int spin_orbital(int spatial, int spin) { return 2 * spatial + spin; }

namespace detail {

struct PauliKeyHash {
  std::size_t operator()(const PauliString& s) const {
    return std::hash<std::uint64_t>{}(s.x_mask() * 0x9E3779B97F4A7C15ULL ^ s.z_mask());
  }
};

/// Complex-coefficient Pauli accumulator used while mapping fermion products.
class ComplexPauliAccumulator {
 public:
  void add(const PauliString& s, cplx c) { terms_[s] += c; }

  /// Converts to a real PauliSum; imaginary parts above tol are a bug.
  PauliSum to_real(int n_qubits, double imag_tol = 1e-10) const {
    PauliSum out(n_qubits);
    for (const auto& [s, c] : terms_) {
      if (std::abs(c.imag()) > imag_tol)
        throw_numerical("Jordan-Wigner image has imaginary coefficient ", c.imag(), " on ", s.str());
      out.add(s, c.real());
    }
    return out.prune();
  }

 private:
  std::unordered_map<PauliString, cplx, PauliKeyHash> terms_;
};

using Ladder = std::array<std::pair<cplx, PauliString>, 2>;

/// a_j^dagger = (X_j - iY_j)/2 Z_{<j};  a_j = (X_j + iY_j)/2 Z_{<j}.
inline Ladder ladder(int j, bool dagger) {
  const std::uint64_t parity = (std::uint64_t{1} << j) - 1;
  const std::uint64_t bit = std::uint64_t{1} << j;
  const PauliString x = PauliString::from_masks(bit, parity);
  const PauliString y = PauliString::from_masks(bit, parity | bit);
  return {{{cplx(0.5, 0), x}, {cplx(0, dagger ? -0.5 : 0.5), y}}};
}

/// Adds coeff * prod(ops) to acc; ops given as (spin-orbital, is_creation).
inline void add_fermion_product(ComplexPauliAccumulator& acc, std::span<const std::pair<int, bool>> ops,
                                cplx coeff) {
  std::vector<std::pair<cplx, PauliString>> cur{{coeff, PauliString{}}};
  for (auto [j, dag] : ops) {
    const Ladder l = ladder(j, dag);
    std::vector<std::pair<cplx, PauliString>> next;
    next.reserve(cur.size() * 2);
    for (const auto& [c, s] : cur)
      for (const auto& [lc, ls] : l) {
        const PhasedString ps = multiply(s, ls);
        next.emplace_back(c * lc * ps.phase(), ps.product);
      }
    cur = std::move(next);
  }
  for (const auto& [c, s] : cur) acc.add(s, c);
}

}  // namespace detail

/// Jordan-Wigner image of coeff*(a_p^dag a_q + a_q^dag a_p) (p != q) or coeff*a_p^dag a_p.
inline PauliSum jordan_wigner_one_body(int n_qubits, int p, int q, double coeff) {
  if (p < 0 || q < 0 || p >= n_qubits || q >= n_qubits)
    throw_input("spin-orbital index out of range: (", p, ",", q, ") for ", n_qubits, " qubits");
  detail::ComplexPauliAccumulator acc;
  const std::array<std::pair<int, bool>, 2> pq{{{p, true}, {q, false}}};
  detail::add_fermion_product(acc, pq, coeff);
  if (p != q) {
    const std::array<std::pair<int, bool>, 2> qp{{{q, true}, {p, false}}};
    detail::add_fermion_product(acc, qp, coeff);
  }
  return acc.to_real(n_qubits);
}

inline PauliSum jordan_wigner_one_body(int p, int q, double coeff) {
  return jordan_wigner_one_body(std::max(p, q) + 1, p, q, coeff);
}

/// Qubit Hamiltonian E_core + sum h_pq a+_p a_q + 1/2 sum (pq|rs) a+_p a+_r a_s a_q
/// with spin summed, on 2*n_orbitals qubits.
inline PauliSum assemble_hamiltonian(const IntegralSet& ints, double coeff_tol = 1e-14) {
  ints.check_symmetry();
  const int n = ints.n_orbitals;
  const int nq = 2 * n;
  if (nq > kMaxQubits) throw_input("too many orbitals for qubit encoding: ", n);
  detail::ComplexPauliAccumulator acc;

  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) {
      const double v = ints.h1(p, q);
      if (std::abs(v) <= coeff_tol) continue;
      for (int s = 0; s < 2; ++s) {
        const std::array<std::pair<int, bool>, 2> ops{{{spin_orbital(p, s), true}, {spin_orbital(q, s), false}}};
        detail::add_fermion_product(acc, ops, v);
      }
    }

  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s) {
          const double v = ints.eri(p, q, r, s);
          if (std::abs(v) <= coeff_tol) continue;
          for (int sig = 0; sig < 2; ++sig)
            for (int tau = 0; tau < 2; ++tau) {
              const int P = spin_orbital(p, sig), Q = spin_orbital(q, sig);
              const int R = spin_orbital(r, tau), S = spin_orbital(s, tau);
              if (P == R || Q == S) continue;  // a+_P a+_P = 0
              const std::array<std::pair<int, bool>, 4> ops{{{P, true}, {R, true}, {S, false}, {Q, false}}};
              detail::add_fermion_product(acc, ops, 0.5 * v);
            }
        }

  PauliSum h = acc.to_real(nq);
  h.add_constant(ints.core_energy);
  return h.prune();
}

}  // namespace tailgate
