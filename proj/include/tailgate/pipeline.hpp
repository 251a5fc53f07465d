#pragma once

#include <functional>
#include <string>

#include "tailgate/adapt.hpp"
#include "tailgate/energyderiv.hpp"
#include "tailgate/io.hpp"
#include "tailgate/normalmodes.hpp"
#include "tailgate/oracle.hpp"
#include "tailgate/tailgate.hpp"

// End-to-end stages shared by the command-line tool and the acceptance run.

namespace tailgate {

inline GatePool pool_for(const IntegralSet& ints) { return build_pool(ints.n_orbitals, ints.n_electrons, ints.ms2); }

inline std::set<int> reference_for(const IntegralSet& ints) {
  return reference_occupations(ints.n_orbitals, ints.n_electrons, ints.ms2);
}

inline json adapt_settings(const AdaptConfig& cfg) {
  return {{"selection_threshold", cfg.selection_threshold},
          {"max_gates", cfg.max_gates},
          {"vqe_learning_rate", cfg.vqe_learning_rate},
          {"vqe_grad_tol", cfg.vqe_grad_tol},
          {"vqe_max_iters", cfg.vqe_max_iters},
          {"vqe_descent_iters", cfg.vqe_descent_iters}};
}

/// Adaptive circuit for H(R0). With `with_oracle` the exact ground state is
/// computed for the fidelity report.
inline Checkpoint run_adapt(const HamiltonianGrid& grid, const AdaptConfig& cfg, bool with_oracle = true,
                            const std::function<void(const AdaptStep&)>& on_step = {}) {
  grid.check_invariants();
  const auto& ints = grid.base();
  const PauliSum h = assemble_hamiltonian(ints);
  const auto r = adapt_build(h, pool_for(ints), reference_for(ints), cfg, on_step);
  Checkpoint c;
  c.molecule = grid.molecule;
  c.grid_hash = grid_hash(grid);
  c.circuit.head = r.circuit;
  c.energy = r.energy;
  c.gradient_max = r.circuit.n_params() ? gradient(r.circuit, r.circuit.parameters(), h).cwiseAbs().maxCoeff() : 0.0;
  c.converged = r.converged;
  c.stop_reason = r.stop_reason;
  c.settings = adapt_settings(cfg);
  if (with_oracle) {
    const auto exact = exact_ground_state(h, molecular_sector(ints));
    c.exact_energy = exact.energy;
    c.fidelity = fidelity(exact.state, run_circuit(r.circuit));
  }
  return c;
}

inline Checkpoint run_tailgate(Checkpoint c, const HamiltonianGrid& grid, int order, double epsilon) {
  const auto derivs = build_derivative_set(grid, order);
  c.circuit = tailgate_circuit(c.circuit.head, pool_for(grid.base()), derivs, epsilon);
  c.tailgated = true;
  c.settings["epsilon"] = std::isinf(epsilon) ? json("inf") : json(epsilon);
  c.settings["order"] = order;
  return c;
}

/// Fidelity along the scan with the circuit re-optimized (warm start at its
/// stored parameters) at every sample.
inline std::vector<FidelityPoint> reoptimized_fidelity(const Circuit& circuit, const HamiltonianGrid& grid,
                                                       const std::vector<std::pair<double, PauliSum>>& hams,
                                                       const AdaptConfig& cfg) {
  const Sector s = molecular_sector(grid.base());
  return fidelity_scan(hams, s, [&](const PauliSum& h, double) {
    if (circuit.n_params() == 0) return std::pair{run_circuit(circuit), true};
    const auto v = vqe_optimize(circuit, circuit.parameters(), CompiledPauliSum(h), cfg);
    return std::pair{run_circuit(circuit, v.theta), v.converged};
  });
}

/// Finite-difference Hessian of the exact ground energy and its modes.
struct OracleModes {
  Eigen::MatrixXd hessian;
  ModeResult modes;
};

inline OracleModes oracle_modes(const HamiltonianGrid& grid, double drop_threshold = 50.0) {
  OracleModes o;
  o.hessian = fd_hessian(exact_energy_table(grid), grid.coordinate_count());
  o.modes = normal_modes(o.hessian, grid.base_geometry, drop_threshold);
  return o;
}

}  // namespace tailgate
