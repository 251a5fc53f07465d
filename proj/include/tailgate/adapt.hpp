#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tailgate/circuit_derivatives.hpp"
#include "tailgate/parallel.hpp"

namespace tailgate {

struct GatePool {
  std::vector<Gate> gates;  // theta = 0 templates

  std::size_t size() const { return gates.size(); }
  bool empty() const { return gates.empty(); }
};

/// Interleaved reference: the lowest n_up spin-up (even) and n_down spin-down
/// (odd) qubits occupied.
inline std::set<int> reference_occupations(int n_orbitals, int n_electrons, int ms2 = 0) {
  if (n_orbitals < 0 || n_electrons < 0 || n_electrons > 2 * n_orbitals)
    throw_input("invalid electron count ", n_electrons, " for ", n_orbitals, " orbitals");
  if ((n_electrons + ms2) % 2 || std::abs(ms2) > n_electrons) throw_input("NELEC ", n_electrons, " and MS2 ", ms2, " inconsistent");
  const int n_up = (n_electrons + ms2) / 2, n_down = (n_electrons - ms2) / 2;
  if (n_up > n_orbitals || n_down > n_orbitals) throw_input("too many electrons of one spin");
  std::set<int> occ;
  for (int k = 0; k < n_up; ++k) occ.insert(2 * k);
  for (int k = 0; k < n_down; ++k) occ.insert(2 * k + 1);
  return occ;
}

/// All spin-conserving single and double excitations from the reference's
/// occupied qubits to its empty ones; singles first, each block in
/// lexicographic order of wires.
inline GatePool build_pool(int n_orbitals, int n_electrons, int ms2 = 0) {
  const auto occ_set = reference_occupations(n_orbitals, n_electrons, ms2);
  const int nq = 2 * n_orbitals;
  std::vector<int> occ(occ_set.begin(), occ_set.end()), virt;
  for (int q = 0; q < nq; ++q)
    if (!occ_set.count(q)) virt.push_back(q);
  GatePool pool;
  for (int i : occ)
    for (int a : virt)
      if (i % 2 == a % 2) pool.gates.push_back(Gate::single(std::min(i, a), std::max(i, a)));
  for (std::size_t x = 0; x < occ.size(); ++x)
    for (std::size_t y = x + 1; y < occ.size(); ++y)
      for (std::size_t u = 0; u < virt.size(); ++u)
        for (std::size_t v = u + 1; v < virt.size(); ++v) {
          const int i = occ[x], j = occ[y], a = virt[u], b = virt[v];
          if ((i % 2) + (j % 2) != (a % 2) + (b % 2)) continue;
          // Double gates rotate |lower pair occupied> into |upper pair occupied>.
          if (!(j < a)) continue;
          pool.gates.push_back(Gate::dbl(i, j, a, b));
        }
  return pool;
}

/// d/dtheta <psi|G(theta)^dag h G(theta)|psi> at theta = 0 for every pool
/// gate, i.e. 2 Re <h psi|A psi> with A the gate generator.
inline std::vector<double> pool_gradients(const StateVector& psi, const GatePool& pool, const CompiledPauliSum& h) {
  if (h.n_qubits() != psi.n_qubits()) throw_input("pool gradient: qubit count mismatch");
  const StateVector hpsi = apply_hamiltonian(h, psi);
  std::vector<double> out(pool.size());
  parallel_for(pool.size(), [&](std::size_t a) {
    StateVector t = psi;
    apply_generator(t.amplitudes(), gate_masks(pool.gates[a], psi.n_qubits()));
    out[a] = 2.0 * detail::re_inner(hpsi.amplitudes(), t.amplitudes());
  });
  return out;
}

struct Selection {
  std::size_t index = 0;
  double gradient = 0.0;  // magnitude
};

/// Pool gate with the largest |gradient|; ties go to the lowest index.
inline Selection select_next(const StateVector& psi, const GatePool& pool, const CompiledPauliSum& h) {
  if (pool.empty()) throw_input("select_next: empty gate pool");
  const auto g = pool_gradients(psi, pool, h);
  Selection best{0, std::abs(g[0])};
  for (std::size_t a = 1; a < g.size(); ++a)
    if (std::abs(g[a]) > best.gradient) best = {a, std::abs(g[a])};
  return best;
}

struct AdaptConfig {
  double selection_threshold = 1e-5;  // Hartree/radian
  std::size_t max_gates = 200;
  double vqe_learning_rate = 0.05;
  double vqe_grad_tol = 1e-5;
  std::size_t vqe_max_iters = 100000;
  // Gradient steps before switching to trust-region Newton on the exact
  // parameter Hessian (descent alone crawls near saddles).
  std::size_t vqe_descent_iters = 30;

  void validate() const {
    if (!(selection_threshold > 0) || max_gates == 0 || !(vqe_learning_rate > 0) || !(vqe_grad_tol > 0) ||
        vqe_max_iters == 0)
      throw_input("adapt configuration values must be positive");
  }
};

struct VqeResult {
  std::vector<double> theta;
  double energy = 0.0;
  double grad_max = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

/// Minimizer of g.p + p.H.p/2 subject to |p| <= radius, from the
/// eigendecomposition of H. Returns p and the predicted change.
inline std::pair<Eigen::VectorXd, double> trust_region_step(const Eigen::VectorXd& g, const Eigen::MatrixXd& hess,
                                                            double radius) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
  const Eigen::VectorXd& lam = es.eigenvalues();
  const Eigen::VectorXd gt = es.eigenvectors().transpose() * g;
  auto step_for = [&](double mu) { return Eigen::VectorXd(-gt.array() / (lam.array() + mu)); };
  const double lo0 = std::max(0.0, -lam[0]);
  Eigen::VectorXd pt;
  const double floor = 1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  if (lam[0] > floor && step_for(0.0).norm() <= radius) {
    pt = step_for(0.0);
  } else {
    double lo = lo0 + floor, hi = lo0 + g.norm() / radius + lam.cwiseAbs().maxCoeff() + 1.0;
    if (step_for(lo).norm() < radius) {
      // Hard case: fill the boundary along the lowest eigenvector.
      pt = step_for(lo);
      pt[0] += std::sqrt(std::max(0.0, radius * radius - pt.squaredNorm())) * (gt[0] > 0 ? -1.0 : 1.0);
    } else {
      for (int k = 0; k < 200 && hi - lo > 1e-14 * hi; ++k) {
        const double mid = 0.5 * (lo + hi);
        (step_for(mid).norm() > radius ? lo : hi) = mid;
      }
      pt = step_for(hi);
    }
  }
  const double pred = gt.dot(pt) + 0.5 * pt.dot(lam.cwiseProduct(pt));
  return {es.eigenvectors() * pt, pred};
}

}  // namespace detail

/// Steepest descent with Barzilai-Borwein step lengths (s.s / s.y from the
/// last accepted step, a rejected step is halved), then trust-region Newton
/// on the exact parameter Hessian if the gradient is still above tolerance.
inline VqeResult vqe_optimize(const Circuit& circuit, std::vector<double> theta, const CompiledPauliSum& h,
                              const AdaptConfig& cfg) {
  cfg.validate();
  if (theta.size() != circuit.n_params()) throw_input("theta has ", theta.size(), " entries, circuit ", circuit.n_params());
  VqeResult r;
  auto cur = value_and_gradient(circuit, theta, h);
  auto done = [&] { return cur.gradient.size() == 0 || cur.gradient.cwiseAbs().maxCoeff() < cfg.vqe_grad_tol; };
  double lr = cfg.vqe_learning_rate;
  std::size_t it = 0;
  const std::size_t descent_end = std::min(cfg.vqe_max_iters, cfg.vqe_descent_iters);
  for (; it < descent_end && !done(); ++it) {
    bool accepted = false;
    for (int tries = 0; tries < 60 && !accepted; ++tries) {
      std::vector<double> trial = theta;
      for (std::size_t k = 0; k < trial.size(); ++k) trial[k] -= lr * cur.gradient[static_cast<Eigen::Index>(k)];
      auto next = value_and_gradient(circuit, trial, h);
      if (next.value <= cur.value) {
        const Eigen::VectorXd step = -lr * cur.gradient;
        const Eigen::VectorXd dg = next.gradient - cur.gradient;
        const double sy = step.dot(dg);
        lr = sy > 0 ? std::clamp(step.squaredNorm() / sy, 1e-4, 1e3) : lr * 2.0;
        theta = std::move(trial);
        cur = std::move(next);
        accepted = true;
      } else {
        lr *= 0.5;
      }
    }
    if (!accepted) break;  // no descent possible at machine precision
  }
  double radius = 0.1;
  for (; it < cfg.vqe_max_iters && !done() && radius > 1e-12; ++it) {
    const Eigen::MatrixXd hess = param_hessian(circuit, theta, h);
    const auto [p, pred] = detail::trust_region_step(cur.gradient, hess, radius);
    std::vector<double> trial = theta;
    for (std::size_t k = 0; k < trial.size(); ++k) trial[k] += p[static_cast<Eigen::Index>(k)];
    auto next = value_and_gradient(circuit, trial, h);
    const double actual = next.value - cur.value;
    const double rho = pred < 0 ? actual / pred : -1.0;
    if (rho < 0.25) radius = 0.25 * p.norm();
    else if (rho > 0.75 && p.norm() > 0.99 * radius) radius = std::min(2.0 * radius, 1.0);
    if (rho > 0.1 && actual <= 0) {
      theta = std::move(trial);
      cur = std::move(next);
    }
  }
  r.theta = std::move(theta);
  r.energy = cur.value;
  r.grad_max = cur.gradient.size() ? cur.gradient.cwiseAbs().maxCoeff() : 0.0;
  r.converged = r.grad_max < cfg.vqe_grad_tol;
  r.iterations = it;
  return r;
}

inline VqeResult vqe_optimize(const Circuit& circuit, std::vector<double> theta, const PauliSum& h,
                              const AdaptConfig& cfg) {
  return vqe_optimize(circuit, std::move(theta), CompiledPauliSum(h), cfg);
}

struct AdaptStep {
  std::size_t pool_index = 0;
  double selection_gradient = 0.0;
  double energy = 0.0;
  std::size_t vqe_iterations = 0;
};

struct AdaptResult {
  Circuit circuit;  // theta* stored in the gates
  double energy = 0.0;
  double grad_max = 0.0;
  double final_selection_gradient = 0.0;
  bool converged = true;  // every VQE run met its tolerance
  std::string stop_reason;
  std::vector<AdaptStep> steps;
};

/// Adds the largest-gradient pool gate and re-optimizes all parameters,
/// until the best gradient drops below the threshold or max_gates is reached.
inline AdaptResult adapt_build(const PauliSum& h, const GatePool& pool, const std::set<int>& reference,
                               const AdaptConfig& cfg,
                               const std::function<void(const AdaptStep&)>& on_step = {}) {
  cfg.validate();
  if (pool.empty()) throw_input("adapt_build: empty gate pool");
  const CompiledPauliSum ch(h);
  AdaptResult r;
  r.circuit = Circuit{h.n_qubits(), reference, {}};
  r.circuit.validate();
  r.energy = expval(run_circuit(r.circuit), ch);
  while (true) {
    const auto sel = select_next(run_circuit(r.circuit), pool, ch);
    r.final_selection_gradient = sel.gradient;
    if (sel.gradient < cfg.selection_threshold) {
      r.stop_reason = "gradient below threshold";
      break;
    }
    if (r.circuit.n_params() >= cfg.max_gates) {
      r.stop_reason = "max_gates reached";
      break;
    }
    r.circuit.gates.push_back(pool.gates[sel.index]);
    auto theta = r.circuit.parameters();
    const auto v = vqe_optimize(r.circuit, theta, ch, cfg);
    r.circuit.set_parameters(v.theta);
    r.energy = v.energy;
    r.grad_max = v.grad_max;
    r.converged = r.converged && v.converged;
    r.steps.push_back({sel.index, sel.gradient, v.energy, v.iterations});
    if (on_step) on_step(r.steps.back());
  }
  return r;
}

}  // namespace tailgate
