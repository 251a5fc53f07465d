#pragma once

#include <limits>
#include <random>
#include <string>
#include <vector>

#include "tailgate/grid.hpp"
#include "tailgate/io.hpp"
#include "tailgate/oracle.hpp"

// Property suite run by `validate`: oracle cross-checks on a grid plus the
// eigenvector-derivative identity on random matrices.

namespace tailgate {

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::string molecule;
  GaugeReport gauge;
  std::vector<Check> checks;

  bool passed() const {
    if (!gauge.ok()) return false;
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

inline Eigen::MatrixXcd random_hermitian(std::mt19937& rng, int d) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = cplx(g(rng), g(rng));
  return 0.5 * (m + m.adjoint());
}

struct EigvecDerivativeCheck {
  double max_deviation = 0.0;     // analytic vs phase-aligned 5-point FD
  double max_orthogonality = 0.0;  // |<v|dv>|
  int trials = 0;
};

/// Random families h + s d, eigenvector index cycling through the spectrum.
/// The FD step scales with gap / |d| around the eigenvalue (at most t_max):
/// the eigenvector varies on that scale, so a fixed step under-resolves
/// strongly coupled pairs.
inline EigvecDerivativeCheck eigvec_derivative_check(unsigned seed, int trials = 100, int dim = 8, double t_max = 1e-3) {
  std::mt19937 rng(seed);
  EigvecDerivativeCheck out;
  out.trials = trials;
  for (int trial = 0; trial < trials; ++trial) {
    const auto h = random_hermitian(rng, dim), d = random_hermitian(rng, dim);
    const Eigen::Index i = trial % dim;
    const auto dv = eigvec_derivative(h, d, i);
    const auto spec = dense_spectrum(h);
    const Eigen::VectorXcd v0 = spec.vectors.col(i);
    double gap = std::numeric_limits<double>::infinity();
    if (i > 0) gap = std::min(gap, spec.values[i] - spec.values[i - 1]);
    if (i + 1 < dim) gap = std::min(gap, spec.values[i + 1] - spec.values[i]);
    const double coupling = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(d).eigenvalues().cwiseAbs().maxCoeff();
    const double t = std::min(t_max, 1e-3 * gap / coupling);
    auto aligned = [&](double s) {
      Eigen::VectorXcd v = dense_spectrum(h + s * d).vectors.col(i);
      const cplx ov = v0.dot(v);
      return Eigen::VectorXcd(v * (std::conj(ov) / std::abs(ov)));
    };
    const Eigen::VectorXcd fd = (8.0 * (aligned(t) - aligned(-t)) - (aligned(2 * t) - aligned(-2 * t))) / (12 * t);
    out.max_deviation = std::max(out.max_deviation, (dv - fd).cwiseAbs().maxCoeff());
    out.max_orthogonality = std::max(out.max_orthogonality, std::abs(v0.dot(dv)));
  }
  return out;
}

/// Gauge check first; derivative-based checks only run on a clean grid.
inline ValidationReport validate_all(HamiltonianGrid& grid, unsigned seed) {
  ValidationReport r;
  r.molecule = grid.molecule;
  r.gauge = validate_grid(grid);
  if (!r.gauge.ok()) return r;
  const int n = grid.coordinate_count();

  const Eigen::MatrixXd fd = fd_hessian(exact_energy_table(grid), n);
  const Eigen::MatrixXd via = hessian_via_states(grid);
  const double d = (fd - 0.5 * (via + via.transpose())).cwiseAbs().maxCoeff();
  r.checks.push_back({"hessian: finite differences vs exact-state formula", d <= 1e-4, d, 1e-4, "Hartree/Bohr^2"});

  std::vector<int> coords(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
  const auto t1 = theorem1_check(grid, 2, coords, 3);
  double worst = 0.0, worst_abs = 0.0;
  bool estimated = false;
  std::string gaps;
  for (const auto& e : t1.entries) {
    if (e.asserted) worst_abs = std::max(worst_abs, e.difference);
    if (e.asserted && !std::isnan(e.combined_error) && e.combined_error > 0) {
      worst = std::max(worst, e.difference / e.combined_error);
      estimated = true;
    }
    if (e.order == 3) gaps += detail::concat(gaps.empty() ? "" : " ", e.difference);
  }
  if (estimated)
    r.checks.push_back({"truncated Hamiltonian: order-2 derivatives agree", t1.passed(), worst, 5.0,
                        "worst difference / stencil error; order-3 gaps: " + (gaps.empty() ? "n/a" : gaps)});
  else
    r.checks.push_back({"truncated Hamiltonian: order-2 derivatives agree", t1.passed(), worst_abs, 0.0,
                        "worst difference; no +-2h points, so no truncation estimate (roundoff bound only)"});

  double n1 = 0.0, n2 = 0.0;
  for (int c = 0; c < n; ++c) {
    n1 = std::max(n1, normalization_identity_check(grid, c, 1));
    n2 = std::max(n2, normalization_identity_check(grid, c, 2));
  }
  r.checks.push_back({"normalization: 2 Re<dpsi|psi> = 0", n1 <= 1e-6, n1, 1e-6, ""});
  r.checks.push_back({"normalization: second-order identity", n2 <= 1e-4, n2, 1e-4, ""});

  const auto ev = eigvec_derivative_check(seed);
  r.checks.push_back({"eigenvector derivatives vs finite differences", ev.max_deviation <= 1e-6, ev.max_deviation, 1e-6,
                      detail::concat(ev.trials, " random 8x8 families")});
  r.checks.push_back({"eigenvector derivative orthogonal to eigenvector", ev.max_orthogonality <= 1e-10,
                      ev.max_orthogonality, 1e-10, ""});
  return r;
}

inline json to_json(const ValidationReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"tolerance", c.tolerance},
                      {"detail", c.detail}});
  json violations = json::array();
  for (const auto& v : r.gauge.violations)
    violations.push_back({{"from", displacement_str(v.from)}, {"to", displacement_str(v.to)}, {"change", v.max_change}});
  return {{"molecule", r.molecule},
          {"passed", r.passed()},
          {"gauge", {{"ok", r.gauge.ok()}, {"bound", r.gauge.bound}, {"pairs_checked", r.gauge.pairs_checked},
                     {"violations", violations}}},
          {"checks", checks}};
}

}  // namespace tailgate
