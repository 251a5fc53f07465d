#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tailgate/error.hpp"
#include "tailgate/pauli.hpp"

namespace tailgate {

/// 2^n complex amplitudes; qubit 0 is the most significant index bit.
class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 0 || n_qubits > kDenseQubitCap) throw_input("state vector: ", n_qubits, " qubits outside 0..", kDenseQubitCap);
    amps_.assign(std::size_t{1} << n_qubits, cplx{});
  }
  StateVector(int n_qubits, std::vector<cplx> amps) : n_qubits_(n_qubits), amps_(std::move(amps)) {
    if (amps_.size() != (std::size_t{1} << n_qubits)) throw_input("state vector: amplitude count mismatch");
  }

  int n_qubits() const { return n_qubits_; }
  std::size_t dim() const { return amps_.size(); }
  std::span<cplx> amplitudes() { return amps_; }
  std::span<const cplx> amplitudes() const { return amps_; }
  cplx& operator[](std::size_t i) { return amps_[i]; }
  cplx operator[](std::size_t i) const { return amps_[i]; }

  /// Bit of the basis index holding `qubit`.
  std::uint64_t bit(int qubit) const { return std::uint64_t{1} << (n_qubits_ - 1 - qubit); }

  double norm() const {
    double s = 0;
    for (const auto& a : amps_) s += std::norm(a);
    return std::sqrt(s);
  }

  void normalize() {
    const double n = norm();
    if (n == 0) throw_numerical("cannot normalize a zero state");
    for (auto& a : amps_) a /= n;
  }

 private:
  int n_qubits_ = 0;
  std::vector<cplx> amps_;
};

inline cplx inner(const StateVector& a, const StateVector& b) {
  if (a.dim() != b.dim()) throw_input("inner product: dimension mismatch");
  cplx s{};
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

/// |<a|b>|^2
inline double fidelity(const StateVector& a, const StateVector& b) {
  if (a.dim() != b.dim()) throw_input("fidelity: dimension mismatch");
  return std::norm(inner(a, b));
}

/// Computational basis state with ones on the given qubits.
inline StateVector prepare_reference(int n_qubits, const std::set<int>& occupations) {
  StateVector s(n_qubits);
  std::uint64_t idx = 0;
  for (int q : occupations) {
    if (q < 0 || q >= n_qubits) throw_input("occupation ", q, " outside register of ", n_qubits);
    idx |= s.bit(q);
  }
  s[idx] = 1.0;
  return s;
}

enum class GateKind { Single, Double };

/// Particle-conserving Givens rotation. Single on (a,b) rotates |1_a 0_b> into
/// |0_a 1_b>; Double on (a,b,c,d) rotates |1_a 1_b 0_c 0_d> into |0_a 0_b 1_c 1_d>.
/// The configuration with the lower wires occupied maps to cos(t/2) self - sin(t/2) partner.
struct Gate {
  GateKind kind = GateKind::Single;
  std::vector<int> wires;
  double theta = 0.0;

  static Gate single(int a, int b, double theta = 0.0) { return {GateKind::Single, {a, b}, theta}; }
  static Gate dbl(int a, int b, int c, int d, double theta = 0.0) { return {GateKind::Double, {a, b, c, d}, theta}; }

  std::size_t arity() const { return kind == GateKind::Single ? 2 : 4; }

  void validate(int n_qubits) const {
    if (wires.size() != arity()) throw_input("gate has ", wires.size(), " wires, expected ", arity());
    for (std::size_t k = 0; k < wires.size(); ++k) {
      if (wires[k] < 0 || wires[k] >= n_qubits) throw_input("gate wire ", wires[k], " outside register");
      if (k > 0 && wires[k] <= wires[k - 1]) throw_input("gate wires must be strictly increasing");
    }
  }

  /// Same kind and wires (parameter ignored).
  bool same_template(const Gate& o) const { return kind == o.kind && wires == o.wires; }

  std::string str() const {
    std::string s = kind == GateKind::Single ? "S(" : "D(";
    for (std::size_t k = 0; k < wires.size(); ++k) s += (k ? "," : "") + std::to_string(wires[k]);
    return s + ")";
  }
};

/// Index masks for a gate: `upper` = lower wires occupied, `lower` = upper wires occupied.
struct GateMasks {
  std::uint64_t upper = 0;
  std::uint64_t lower = 0;
};

inline GateMasks gate_masks(const Gate& g, int n_qubits) {
  g.validate(n_qubits);
  auto bit = [n_qubits](int q) { return std::uint64_t{1} << (n_qubits - 1 - q); };
  GateMasks m;
  const std::size_t half = g.arity() / 2;
  for (std::size_t k = 0; k < g.arity(); ++k) (k < half ? m.upper : m.lower) |= bit(g.wires[k]);
  return m;
}

/// In place: applies the rotation with angle `theta` (or its generator when `generator`).
inline void apply_rotation(std::span<cplx> amps, const GateMasks& m, double theta) {
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  const std::uint64_t both = m.upper | m.lower;
  for (std::uint64_t i = 0; i < amps.size(); ++i) {
    if ((i & both) != m.upper) continue;
    const std::uint64_t j = i ^ both;
    const cplx vi = amps[i], vj = amps[j];
    amps[i] = c * vi + s * vj;
    amps[j] = c * vj - s * vi;
  }
}

/// In place: amps <- A amps, with G(theta) = exp(theta A).
inline void apply_generator(std::span<cplx> amps, const GateMasks& m) {
  const std::uint64_t both = m.upper | m.lower;
  for (std::uint64_t i = 0; i < amps.size(); ++i) {
    if ((i & both) == m.upper) {
      const std::uint64_t j = i ^ both;
      const cplx vi = amps[i], vj = amps[j];
      amps[i] = 0.5 * vj;
      amps[j] = -0.5 * vi;
    } else if ((i & both) != m.lower) {
      amps[i] = 0.0;
    }
  }
}

inline StateVector apply_gate(StateVector state, const Gate& g) {
  apply_rotation(state.amplitudes(), gate_masks(g, state.n_qubits()), g.theta);
  return state;
}

/// U(theta)|reference>, gates applied in order.
struct Circuit {
  int n_qubits = 0;
  std::set<int> reference_occupations;
  std::vector<Gate> gates;

  std::size_t n_params() const { return gates.size(); }

  std::vector<double> parameters() const {
    std::vector<double> t;
    t.reserve(gates.size());
    for (const auto& g : gates) t.push_back(g.theta);
    return t;
  }

  void set_parameters(std::span<const double> theta) {
    if (theta.size() != gates.size()) throw_input("parameter count ", theta.size(), " != gate count ", gates.size());
    for (std::size_t k = 0; k < gates.size(); ++k) gates[k].theta = theta[k];
  }

  Circuit with_parameters(std::span<const double> theta) const {
    Circuit c = *this;
    c.set_parameters(theta);
    return c;
  }

  void validate() const {
    for (const auto& g : gates) g.validate(n_qubits);
    for (int q : reference_occupations)
      if (q < 0 || q >= n_qubits) throw_input("reference occupation ", q, " outside register");
  }
};

inline StateVector run_circuit(const Circuit& c) {
  StateVector s = prepare_reference(c.n_qubits, c.reference_occupations);
  for (const auto& g : c.gates) apply_rotation(s.amplitudes(), gate_masks(g, c.n_qubits), g.theta);
  return s;
}

inline StateVector run_circuit(const Circuit& c, std::span<const double> theta) {
  return run_circuit(c.with_parameters(theta));
}

inline StateVector apply_hamiltonian(const CompiledPauliSum& h, const StateVector& s) {
  if (h.n_qubits() != s.n_qubits()) throw_input("observable acts on ", h.n_qubits(), " qubits, state has ", s.n_qubits());
  StateVector out(s.n_qubits());
  h.apply(s.amplitudes(), out.amplitudes());
  return out;
}

/// <state|h|state>; throws when the imaginary residue exceeds 1e-10.
inline double expval(const StateVector& state, const CompiledPauliSum& h) {
  const cplx v = inner(state, apply_hamiltonian(h, state));
  if (std::abs(v.imag()) > 1e-10) throw_numerical("expectation value has imaginary part ", v.imag());
  return v.real();
}

inline double expval(const StateVector& state, const PauliSum& h) { return expval(state, CompiledPauliSum(h)); }

}  // namespace tailgate
