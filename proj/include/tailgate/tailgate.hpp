#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "tailgate/adapt.hpp"
#include "tailgate/grid.hpp"

namespace tailgate {

struct DerivativeTerm {
  std::vector<int> coords;  // non-decreasing; empty for H(R0)
  PauliSum op;
};

/// H(R0) and all its coordinate derivatives up to `order`.
struct DerivativeSet {
  int order = 0;
  std::vector<DerivativeTerm> members;

  std::size_t size() const { return members.size(); }
};

namespace detail {

// Multisets of size k over [0, n), in lexicographic order.
inline void multisets(int n, int k, int start, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == k) {
    out.push_back(cur);
    return;
  }
  for (int c = start; c < n; ++c) {
    cur.push_back(c);
    multisets(n, k, c, cur, out);
    cur.pop_back();
  }
}

}  // namespace detail

/// Derivative operators needed to tailgate for energy derivatives of order
/// `target_order`: orders 0 .. target_order - 1.
inline DerivativeSet build_derivative_set(const HamiltonianGrid& grid, int target_order) {
  if (target_order < 1 || target_order > 5) throw_input("target order must be in 1..5, got ", target_order);
  grid.check_invariants();
  const int n = grid.coordinate_count();
  std::vector<std::vector<int>> tuples;
  for (int k = 0; k < target_order; ++k) {
    std::vector<int> cur;
    detail::multisets(n, k, 0, cur, tuples);
  }
  for (const auto& t : tuples)
    if (!grid.supports(central_stencil(t, grid.step)))
      throw_input("grid lacks the stencil for derivative ", displacement_str([&] {
                    Displacement d;
                    for (int c : t) d[c] += 1;
                    return d;
                  }()));
  DerivativeSet out;
  out.order = target_order - 1;
  out.members.resize(tuples.size());
  parallel_for(tuples.size(), [&](std::size_t k) { out.members[k] = {tuples[k], hamiltonian_derivative(grid, tuples[k])}; });
  return out;
}

inline std::string coords_str(const std::vector<int>& coords) {
  if (coords.empty()) return "H";
  std::string s = "d";
  for (int c : coords) s += "/dR" + std::to_string(c);
  return s + " H";
}

struct GateScreen {
  std::size_t pool_index = 0;
  Gate gate;
  double max_gradient = 0.0;
  std::vector<int> trigger;  // derivative attaining max_gradient
  bool selected = false;
};

struct ScreeningReport {
  double epsilon = 0.0;
  int derivative_order = 0;
  std::vector<GateScreen> gates;  // pool order

  std::vector<std::size_t> selected() const {
    std::vector<std::size_t> out;
    for (const auto& g : gates)
      if (g.selected) out.push_back(g.pool_index);
    return out;
  }
};

/// Gradient of every pool gate, appended at theta = 0 after the head, against
/// every derivative operator: out[a][d] = 2 Re <D_d psi|A_a psi>.
inline std::vector<std::vector<double>> screening_gradients(const Circuit& head, const GatePool& pool,
                                                            const DerivativeSet& derivs) {
  const StateVector psi = run_circuit(head);
  std::vector<StateVector> dpsi(derivs.size());
  parallel_for(derivs.size(), [&](std::size_t d) {
    if (derivs.members[d].op.n_qubits() != head.n_qubits) throw_input("derivative operator qubit count mismatch");
    dpsi[d] = apply_hamiltonian(CompiledPauliSum(derivs.members[d].op), psi);
  });
  std::vector<std::vector<double>> out(pool.size(), std::vector<double>(derivs.size()));
  parallel_for(pool.size(), [&](std::size_t a) {
    StateVector t = psi;
    apply_generator(t.amplitudes(), gate_masks(pool.gates[a], head.n_qubits));
    for (std::size_t d = 0; d < derivs.size(); ++d)
      out[a][d] = 2.0 * detail::re_inner(dpsi[d].amplitudes(), t.amplitudes());
  });
  return out;
}

/// A pool gate is selected when its gradient against any derivative
/// operator exceeds epsilon in magnitude. Gates already in the head are
/// screened like any other.
inline ScreeningReport screen_gates(const Circuit& head, const GatePool& pool, const DerivativeSet& derivs,
                                    double epsilon) {
  if (std::isnan(epsilon) || epsilon < 0) throw_input("epsilon must be non-negative");
  head.validate();
  ScreeningReport r;
  r.epsilon = epsilon;
  r.derivative_order = derivs.order;
  const auto g = screening_gradients(head, pool, derivs);
  for (std::size_t a = 0; a < pool.size(); ++a) {
    GateScreen s;
    s.pool_index = a;
    s.gate = pool.gates[a];
    for (std::size_t d = 0; d < derivs.size(); ++d)
      if (std::abs(g[a][d]) > s.max_gradient) {
        s.max_gradient = std::abs(g[a][d]);
        s.trigger = derivs.members[d].coords;
      }
    s.selected = s.max_gradient > epsilon;
    r.gates.push_back(std::move(s));
  }
  return r;
}

/// Head circuit followed by tail gates held at theta = 0.
struct TailgatedCircuit {
  Circuit head;
  std::vector<Gate> tail;
  ScreeningReport selection_report;

  std::size_t head_size() const { return head.gates.size(); }

  /// Head and tail as one circuit; tail parameters are zero.
  Circuit full() const {
    Circuit c = head;
    c.gates.insert(c.gates.end(), tail.begin(), tail.end());
    return c;
  }

  void validate() const {
    head.validate();
    for (const auto& g : tail) {
      g.validate(head.n_qubits);
      if (g.theta != 0.0) throw_input("tail gate ", g.str(), " has nonzero parameter");
    }
  }
};

inline TailgatedCircuit tailgate_circuit(const Circuit& head, const GatePool& pool, const ScreeningReport& report) {
  TailgatedCircuit t;
  t.head = head;
  t.selection_report = report;
  for (std::size_t a : report.selected()) {
    if (a >= pool.size()) throw_input("selected gate index ", a, " outside pool");
    Gate g = pool.gates[a];
    g.theta = 0.0;
    t.tail.push_back(std::move(g));
  }
  return t;
}

/// Screens and appends in one call.
inline TailgatedCircuit tailgate_circuit(const Circuit& head, const GatePool& pool, const DerivativeSet& derivs,
                                 double epsilon) {
  return tailgate_circuit(head, pool, screen_gates(head, pool, derivs, epsilon));
}

struct DeltaCurve {
  double value = 0.0;       // gradient of the gate against H(R0)
  double derivative = 0.0;  // same against dH/dR_j
};

inline DeltaCurve delta_curve(const Circuit& head, const Gate& gate, const HamiltonianGrid& grid, int coordinate) {
  DerivativeSet d;
  d.order = 1;
  d.members.push_back({{}, assemble_hamiltonian(grid.base())});
  d.members.push_back({{coordinate}, hamiltonian_derivative(grid, {coordinate})});
  GatePool one{{gate}};
  one.gates[0].theta = 0.0;
  const auto g = screening_gradients(head, one, d);
  return {g[0][0], g[0][1]};
}

}  // namespace tailgate
