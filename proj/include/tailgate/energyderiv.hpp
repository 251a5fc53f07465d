#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tailgate/circuit_derivatives.hpp"
#include "tailgate/grid.hpp"
#include "tailgate/parallel.hpp"
#include "tailgate/tailgate.hpp"

namespace tailgate {

namespace detail {

struct Fnv1a {
  std::uint64_t h = 1469598103934665603ull;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t k = 0; k < n; ++k) h = (h ^ b[k]) * 1099511628211ull;
  }
  void num(double v) { bytes(&v, sizeof v); }
  void num(long long v) { bytes(&v, sizeof v); }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

}  // namespace detail

inline std::string circuit_hash(const Circuit& c) {
  detail::Fnv1a f;
  f.num(static_cast<long long>(c.n_qubits));
  for (int q : c.reference_occupations) f.num(static_cast<long long>(q));
  for (const auto& g : c.gates) {
    f.num(static_cast<long long>(g.kind));
    for (int w : g.wires) f.num(static_cast<long long>(w));
    f.num(g.theta);
  }
  return f.hex();
}

inline std::string grid_hash(const HamiltonianGrid& grid) {
  detail::Fnv1a f;
  f.num(grid.step);
  for (const auto& [d, ints] : grid.points) {
    for (auto [c, k] : d) {
      f.num(static_cast<long long>(c));
      f.num(static_cast<long long>(k));
    }
    f.num(ints.core_energy);
    f.bytes(ints.h1.data(), sizeof(double) * static_cast<std::size_t>(ints.h1.size()));
    f.bytes(ints.h2.data(), sizeof(double) * ints.h2.size());
  }
  return f.hex();
}

/// First-derivative operators dH/dR_i for every coordinate.
inline std::vector<PauliSum> first_derivative_operators(const HamiltonianGrid& grid) {
  std::vector<PauliSum> out(static_cast<std::size_t>(grid.coordinate_count()), PauliSum(0));
  parallel_for(out.size(), [&](std::size_t i) { out[i] = hamiltonian_derivative(grid, {static_cast<int>(i)}); });
  return out;
}

/// Feynman-Hellmann gradient <psi|dH/dR_i|psi>, Hartree/Bohr.
inline Eigen::VectorXd energy_gradient(const StateVector& psi, const HamiltonianGrid& grid) {
  const auto ops = first_derivative_operators(grid);
  Eigen::VectorXd g(static_cast<Eigen::Index>(ops.size()));
  for (std::size_t i = 0; i < ops.size(); ++i) g[static_cast<Eigen::Index>(i)] = expval(psi, ops[i]);
  return g;
}

inline Eigen::VectorXd energy_gradient(const Circuit& circuit, const HamiltonianGrid& grid) {
  return energy_gradient(run_circuit(circuit), grid);
}

/// d/dtheta_b <dH/dR_i> at theta.
inline Eigen::VectorXd mixed_gradient(const Circuit& circuit, std::span<const double> theta, const HamiltonianGrid& grid,
                                      int coordinate) {
  return gradient(circuit, theta, hamiltonian_derivative(grid, {coordinate}));
}

struct ResponseSolution {
  Eigen::MatrixXd dtheta_dR;  // M x N, radian/Bohr
  Eigen::VectorXd residuals;  // per coordinate, |A x + b|
  Eigen::Index rank = 0;
};

/// Solves A x_i = -b_i for every column b_i of rhs in the minimum-norm
/// least-squares sense, dropping singular values below rel_cutoff * sigma_max.
inline ResponseSolution solve_response(const Eigen::MatrixXd& param_hess, const Eigen::MatrixXd& rhs,
                                       double rel_cutoff = 1e-10) {
  if (param_hess.rows() != param_hess.cols()) throw_input("parameter Hessian must be square");
  if (rhs.rows() != param_hess.rows()) throw_input("response rhs has ", rhs.rows(), " rows, expected ", param_hess.rows());
  ResponseSolution r;
  const Eigen::Index m = param_hess.rows(), n = rhs.cols();
  r.dtheta_dR = Eigen::MatrixXd::Zero(m, n);
  r.residuals = Eigen::VectorXd::Zero(n);
  if (m == 0) return r;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(param_hess, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cut = rel_cutoff * s[0];
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s[k] > cut && s[k] > 0) {
      inv[k] = 1.0 / s[k];
      ++r.rank;
    }
  r.dtheta_dR = -(svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * rhs));
  for (Eigen::Index i = 0; i < n; ++i) r.residuals[i] = (param_hess * r.dtheta_dR.col(i) + rhs.col(i)).norm();
  return r;
}

struct HessianResult {
  Eigen::MatrixXd matrix;  // Hartree/Bohr^2, symmetrized
  double asymmetry = 0.0;  // max |H_ij - H_ji| before symmetrization
  Eigen::VectorXd gradient;
  double parameter_gradient_max = 0.0;  // of the circuit energy at H(R0)
  Eigen::Index response_rank = 0;
  double response_residual_max = 0.0;
  std::size_t n_params = 0;
  std::size_t tail_size = 0;
  std::string circuit_hash;
  std::string grid_hash;
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  double step = 0.0;

  static constexpr double kAsymmetryWarning = 1e-4;
  bool asymmetry_warning() const { return asymmetry > kAsymmetryWarning; }
};

/// Analytic energy Hessian of the circuit energy surface theta*(R):
/// H_ij = sum_a dtheta*_a/dR_i d/dtheta_a <dH/dR_j> + <d2H/dR_i dR_j>,
/// with dtheta*/dR from the response equation over all parameters.
inline HessianResult hessian(const Circuit& circuit, const HamiltonianGrid& grid, double rel_cutoff = 1e-10) {
  circuit.validate();
  const int n = grid.coordinate_count();
  const auto theta = circuit.parameters();
  const std::size_t m = theta.size();
  const PauliSum h0 = assemble_hamiltonian(grid.base());
  if (h0.n_qubits() != circuit.n_qubits) throw_input("circuit has ", circuit.n_qubits, " qubits, grid ", h0.n_qubits());
  const CompiledPauliSum ch0(h0);
  const auto d1 = first_derivative_operators(grid);

  HessianResult r;
  r.n_params = m;
  r.step = grid.step;
  r.circuit_hash = circuit_hash(circuit);
  r.grid_hash = grid_hash(grid);

  const StateVector psi = run_circuit(circuit);
  r.gradient.resize(n);
  Eigen::MatrixXd b(static_cast<Eigen::Index>(m), n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const auto vg = value_and_gradient(circuit, theta, CompiledPauliSum(d1[i]));
    r.gradient[static_cast<Eigen::Index>(i)] = vg.value;
    b.col(static_cast<Eigen::Index>(i)) = vg.gradient;
  });
  if (m > 0) r.parameter_gradient_max = gradient(circuit, theta, ch0).cwiseAbs().maxCoeff();

  const Eigen::MatrixXd a = param_hessian(circuit, theta, ch0);
  const auto resp = solve_response(a, b, rel_cutoff);
  r.response_rank = resp.rank;
  r.response_residual_max = resp.residuals.size() ? resp.residuals.maxCoeff() : 0.0;

  Eigen::MatrixXd raw = resp.dtheta_dR.transpose() * b;
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<double> d2(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    d2[k] = expval(psi, hamiltonian_derivative(grid, {pairs[k].first, pairs[k].second}));
  });
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    raw(i, j) += d2[k];
    if (i != j) raw(j, i) += d2[k];
  }
  r.asymmetry = n ? (raw - raw.transpose()).cwiseAbs().maxCoeff() : 0.0;
  r.matrix = 0.5 * (raw + raw.transpose());
  return r;
}

inline HessianResult hessian(const TailgatedCircuit& t, const HamiltonianGrid& grid, double rel_cutoff = 1e-10) {
  t.validate();
  auto r = hessian(t.full(), grid, rel_cutoff);
  r.tail_size = t.tail.size();
  r.epsilon = t.selection_report.epsilon;
  return r;
}

}  // namespace tailgate
