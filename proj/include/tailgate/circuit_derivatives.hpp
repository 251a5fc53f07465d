#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tailgate/statevector.hpp"

namespace tailgate {

namespace detail {

inline void check_params(const Circuit& c, std::span<const double> theta, const CompiledPauliSum& h) {
  if (theta.size() != c.gates.size())
    throw_input("parameter vector has ", theta.size(), " entries, circuit has ", c.gates.size(), " gates");
  if (h.n_qubits() != c.n_qubits) throw_input("observable acts on ", h.n_qubits(), " qubits, circuit has ", c.n_qubits);
}

inline double re_inner(std::span<const cplx> a, std::span<const cplx> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (std::conj(a[i]) * b[i]).real();
  return s;
}

}  // namespace detail

struct ValueAndGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// <h> and d<h>/d(theta_k) by a reverse sweep over the circuit.
inline ValueAndGradient value_and_gradient(const Circuit& circuit, std::span<const double> theta,
                                           const CompiledPauliSum& h) {
  detail::check_params(circuit, theta, h);
  const std::size_t m = theta.size();
  ValueAndGradient out;
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  auto& grad = out.gradient;
  StateVector phi = run_circuit(circuit, theta);
  StateVector lambda = apply_hamiltonian(h, phi);
  out.value = detail::re_inner(phi.amplitudes(), lambda.amplitudes());
  StateVector tmp(circuit.n_qubits);
  for (std::size_t k = m; k-- > 0;) {
    const GateMasks gm = gate_masks(circuit.gates[k], circuit.n_qubits);
    std::copy(phi.amplitudes().begin(), phi.amplitudes().end(), tmp.amplitudes().begin());
    apply_generator(tmp.amplitudes(), gm);
    grad[static_cast<Eigen::Index>(k)] = 2.0 * detail::re_inner(lambda.amplitudes(), tmp.amplitudes());
    apply_rotation(phi.amplitudes(), gm, -theta[k]);
    apply_rotation(lambda.amplitudes(), gm, -theta[k]);
  }
  return out;
}

inline Eigen::VectorXd gradient(const Circuit& circuit, std::span<const double> theta, const CompiledPauliSum& h) {
  return value_and_gradient(circuit, theta, h).gradient;
}

inline Eigen::VectorXd gradient(const Circuit& circuit, std::span<const double> theta, const PauliSum& h) {
  return gradient(circuit, theta, CompiledPauliSum(h));
}

/// d^2<h>/d(theta_a)d(theta_b), exact:
/// 2 Re[<d_a d_b psi|H psi> + <d_a psi|H|d_b psi>].
inline Eigen::MatrixXd param_hessian(const Circuit& circuit, std::span<const double> theta, const CompiledPauliSum& h) {
  detail::check_params(circuit, theta, h);
  const std::size_t m = theta.size();
  const int nq = circuit.n_qubits;
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  if (m == 0) return hess;

  std::vector<GateMasks> masks;
  for (const auto& g : circuit.gates) masks.push_back(gate_masks(g, nq));

  // prefix[a] = G_a ... G_0 |ref>
  std::vector<StateVector> prefix;
  prefix.reserve(m);
  StateVector s = prepare_reference(nq, circuit.reference_occupations);
  for (std::size_t a = 0; a < m; ++a) {
    apply_rotation(s.amplitudes(), masks[a], theta[a]);
    prefix.push_back(s);
  }
  // lambda[b] = G_{b+1}^dag ... G_{m-1}^dag H |psi>
  std::vector<StateVector> lambda(m);
  StateVector l = apply_hamiltonian(h, s);
  for (std::size_t b = m; b-- > 0;) {
    lambda[b] = l;
    apply_rotation(l.amplitudes(), masks[b], -theta[b]);
  }

  std::vector<StateVector> dpsi;
  dpsi.reserve(m);
  StateVector chi(nq);
  for (std::size_t a = 0; a < m; ++a) {
    const auto ia = static_cast<Eigen::Index>(a);
    chi = prefix[a];
    apply_generator(chi.amplitudes(), masks[a]);
    {
      StateVector aa = chi;
      apply_generator(aa.amplitudes(), masks[a]);
      hess(ia, ia) += 2.0 * detail::re_inner(lambda[a].amplitudes(), aa.amplitudes());
    }
    StateVector tmp(nq);
    for (std::size_t b = a + 1; b < m; ++b) {
      apply_rotation(chi.amplitudes(), masks[b], theta[b]);
      std::copy(chi.amplitudes().begin(), chi.amplitudes().end(), tmp.amplitudes().begin());
      apply_generator(tmp.amplitudes(), masks[b]);
      const double v = 2.0 * detail::re_inner(lambda[b].amplitudes(), tmp.amplitudes());
      const auto ib = static_cast<Eigen::Index>(b);
      hess(ia, ib) += v;
      hess(ib, ia) += v;
    }
    dpsi.push_back(chi);
  }

  for (std::size_t b = 0; b < m; ++b) {
    const StateVector hd = apply_hamiltonian(h, dpsi[b]);
    for (std::size_t a = 0; a <= b; ++a) {
      const double v = 2.0 * detail::re_inner(dpsi[a].amplitudes(), hd.amplitudes());
      const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
      hess(ia, ib) += v;
      if (a != b) hess(ib, ia) += v;
    }
  }
  return hess;
}

inline Eigen::MatrixXd param_hessian(const Circuit& circuit, std::span<const double> theta, const PauliSum& h) {
  return param_hessian(circuit, theta, CompiledPauliSum(h));
}

}  // namespace tailgate
