#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "tailgate/grid.hpp"
#include "tailgate/parallel.hpp"
#include "tailgate/statevector.hpp"

namespace tailgate {

inline constexpr double kDegeneracyTolerance = 1e-8;

/// Computational-basis states with fixed spin-up and spin-down counts
/// (interleaved ordering: even qubits are spin up). An empty `basis`
/// with full=true stands for the whole register.
struct Sector {
  int n_qubits = 0;
  bool full = true;
  std::vector<std::uint64_t> basis;
  std::unordered_map<std::uint64_t, Eigen::Index> position;

  Eigen::Index dim() const { return full ? Eigen::Index{1} << n_qubits : static_cast<Eigen::Index>(basis.size()); }
  std::uint64_t state(Eigen::Index k) const { return full ? static_cast<std::uint64_t>(k) : basis[static_cast<std::size_t>(k)]; }
  std::optional<Eigen::Index> find(std::uint64_t b) const {
    if (full) return static_cast<Eigen::Index>(b);
    auto it = position.find(b);
    if (it == position.end()) return std::nullopt;
    return it->second;
  }
};

inline Sector full_space(int n_qubits) { return Sector{n_qubits, true, {}, {}}; }

inline Sector spin_sector(int n_qubits, int n_up, int n_down) {
  if (n_qubits % 2 || n_up < 0 || n_down < 0 || n_up > n_qubits / 2 || n_down > n_qubits / 2)
    throw_input("invalid sector: ", n_qubits, " qubits, ", n_up, " up, ", n_down, " down");
  Sector s{n_qubits, false, {}, {}};
  std::uint64_t up_mask = 0;
  for (int q = 0; q < n_qubits; q += 2) up_mask |= std::uint64_t{1} << (n_qubits - 1 - q);
  const std::uint64_t down_mask = ((std::uint64_t{1} << n_qubits) - 1) & ~up_mask;
  for (std::uint64_t b = 0; b < (std::uint64_t{1} << n_qubits); ++b)
    if (std::popcount(b & up_mask) == n_up && std::popcount(b & down_mask) == n_down) {
      s.position.emplace(b, static_cast<Eigen::Index>(s.basis.size()));
      s.basis.push_back(b);
    }
  return s;
}

/// Particle/Sz sector implied by an integral set (NELEC, MS2).
inline Sector molecular_sector(const IntegralSet& ints) {
  if ((ints.n_electrons + ints.ms2) % 2) throw_input("NELEC and MS2 have inconsistent parity");
  return spin_sector(2 * ints.n_orbitals, (ints.n_electrons + ints.ms2) / 2, (ints.n_electrons - ints.ms2) / 2);
}

/// Matrix of h restricted to the sector. Terms leaking out of the sector
/// raise an error because the restriction would not be exact.
inline Eigen::MatrixXcd sector_matrix(const PauliSum& h, const Sector& s) {
  if (h.n_qubits() != s.n_qubits) throw_input("sector has ", s.n_qubits, " qubits, operator ", h.n_qubits());
  const Eigen::Index d = s.dim();
  if (d > 8192) throw_input("sector dimension ", d, " too large for dense matrices");
  const CompiledPauliSum c(h);
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(d, d) * c.constant();
  // Single terms may leave the sector (XX and YY halves of a hop); only their sum must not.
  std::unordered_map<std::uint64_t, cplx> leak;
  for (Eigen::Index col = 0; col < d; ++col) {
    const std::uint64_t b = s.state(col);
    leak.clear();
    for (const auto& t : c.terms()) {
      const double sgn = (std::popcount(b & t.sign) & 1) ? -1.0 : 1.0;
      if (const auto row = s.find(b ^ t.flip))
        m(*row, col) += sgn * t.coeff;
      else
        leak[b ^ t.flip] += sgn * t.coeff;
    }
    for (const auto& [target, v] : leak)
      if (std::abs(v) > 1e-10) throw_input("operator does not conserve the requested sector");
  }
  return m;
}

inline StateVector embed(const Sector& s, const Eigen::VectorXcd& v) {
  StateVector out(s.n_qubits);
  for (Eigen::Index k = 0; k < v.size(); ++k) out[s.state(k)] = v[k];
  return out;
}

inline Eigen::VectorXcd restrict_to(const Sector& s, const StateVector& psi) {
  Eigen::VectorXcd v(s.dim());
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = psi[s.state(k)];
  return v;
}

/// Multiplies v by a global phase so its largest-magnitude entry is real positive.
inline void fix_phase(Eigen::VectorXcd& v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (std::abs(v[arg]) == 0) return;
  v *= std::conj(v[arg]) / std::abs(v[arg]);
  v[arg] = std::abs(v[arg]);
}

struct DenseSpectrum {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;  // columns, phase-fixed
};

/// Full spectrum of a Hermitian matrix; uses the real solver when the matrix is real.
inline DenseSpectrum dense_spectrum(const Eigen::MatrixXcd& m) {
  DenseSpectrum out;
  if (m.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.real());
    if (es.info() != Eigen::Success) throw_numerical("eigensolver failed");
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors().cast<cplx>();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
    if (es.info() != Eigen::Success) throw_numerical("eigensolver failed");
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
  }
  for (Eigen::Index k = 0; k < out.vectors.cols(); ++k) {
    Eigen::VectorXcd col = out.vectors.col(k);
    fix_phase(col);
    out.vectors.col(k) = col;
  }
  return out;
}

struct ExactEigenpair {
  double energy = 0.0;
  StateVector state;
  double gap = 0.0;
  double residual = 0.0;
};

namespace detail {

struct RitzGround {
  double energy = 0.0;
  double gap = 0.0;
  Eigen::VectorXcd vector;
};

/// Lanczos with full reorthogonalization. Stops once the lowest Ritz pair has
/// residual below 1e-10 and the second below 1e-6 (the gap is used only for
/// the degeneracy check).
template <typename MatVec>
RitzGround lanczos(MatVec&& apply, Eigen::Index dim, int max_iter = 500) {
  std::mt19937_64 rng(20240917);
  std::normal_distribution<double> g;
  std::vector<Eigen::VectorXcd> basis;
  Eigen::VectorXcd v(dim);
  for (auto& x : v) x = g(rng);
  v.normalize();
  std::vector<double> alpha, beta;
  Eigen::VectorXcd w(dim);
  const int cap = static_cast<int>(std::min<Eigen::Index>(max_iter, dim));
  for (int it = 0; it < cap; ++it) {
    basis.push_back(v);
    apply(v, w);
    alpha.push_back(v.dot(w).real());
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) w -= b.dot(w) * b;
    const double bnorm = w.norm();
    const int m = static_cast<int>(alpha.size());
    const bool exhausted = bnorm < 1e-12 || it + 1 == cap;
    if (m >= 2 && (m % 5 == 0 || exhausted)) {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
      for (int k = 0; k < m; ++k) {
        t(k, k) = alpha[static_cast<std::size_t>(k)];
        if (k + 1 < m) t(k, k + 1) = t(k + 1, k) = beta[static_cast<std::size_t>(k)];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
      const double r0 = std::abs(bnorm * es.eigenvectors()(m - 1, 0));
      const double r1 = std::abs(bnorm * es.eigenvectors()(m - 1, 1));
      if ((r0 < 1e-10 && r1 < 1e-6) || exhausted) {
        if (r0 >= 1e-9 && bnorm >= 1e-12) throw_numerical("Lanczos did not converge (residual ", r0, ")");
        RitzGround out;
        out.vector = Eigen::VectorXcd::Zero(dim);
        for (int k = 0; k < m; ++k) out.vector += es.eigenvectors()(k, 0) * basis[static_cast<std::size_t>(k)];
        out.vector.normalize();
        fix_phase(out.vector);
        out.energy = es.eigenvalues()[0];
        out.gap = es.eigenvalues()[1] - es.eigenvalues()[0];
        return out;
      }
    }
    beta.push_back(bnorm);
    v = w / bnorm;
  }
  throw_numerical("Lanczos did not converge");
}

inline ExactEigenpair lanczos_ground(const CompiledPauliSum& h, int n_qubits) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  auto mv = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { h.apply({x.data(), dim}, {y.data(), dim}); };
  const auto r = lanczos(mv, static_cast<Eigen::Index>(dim));
  ExactEigenpair out;
  out.energy = r.energy;
  out.gap = r.gap;
  Eigen::VectorXcd hx(r.vector.size());
  mv(r.vector, hx);
  out.residual = (hx - r.energy * r.vector).norm();
  out.state = StateVector(n_qubits, std::vector<cplx>(r.vector.data(), r.vector.data() + r.vector.size()));
  return out;
}

}  // namespace detail

/// Lowest eigenpair of h, optionally within a particle/Sz sector. Dense
/// diagonalization when the (sector) dimension allows, Lanczos otherwise.
inline ExactEigenpair exact_ground_state(const PauliSum& h, const std::optional<Sector>& sector = std::nullopt,
                                         double degeneracy_tol = kDegeneracyTolerance) {
  const Sector s = sector ? *sector : full_space(h.n_qubits());
  if (s.n_qubits > kDenseQubitCap) throw_input("exact_ground_state: ", s.n_qubits, " qubits above cap");
  ExactEigenpair out;
  if (s.dim() <= 512) {
    const Eigen::MatrixXcd m = sector_matrix(h, s);
    const auto spec = dense_spectrum(m);
    out.energy = spec.values[0];
    out.gap = spec.values.size() > 1 ? spec.values[1] - spec.values[0] : std::numeric_limits<double>::infinity();
    const Eigen::VectorXcd v = spec.vectors.col(0);
    out.residual = (m * v - out.energy * v).norm();
    out.state = embed(s, v);
  } else if (s.dim() <= 8192 && !s.full) {
    const Eigen::MatrixXcd m = sector_matrix(h, s);
    detail::RitzGround r;
    if (m.imag().cwiseAbs().maxCoeff() == 0.0) {
      const Eigen::MatrixXd mr = m.real();
      r = detail::lanczos([&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { y = mr * x; }, s.dim());
    } else {
      r = detail::lanczos([&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { y.noalias() = m * x; }, s.dim());
    }
    out.energy = r.energy;
    out.gap = r.gap;
    out.residual = (m * r.vector - r.energy * r.vector).norm();
    out.state = embed(s, r.vector);
  } else {
    out = detail::lanczos_ground(CompiledPauliSum(h), s.n_qubits);
  }
  if (out.gap < degeneracy_tol) throw_numerical("ground state degenerate within ", degeneracy_tol, " (gap ", out.gap, ")");
  if (out.residual > 1e-9) throw_numerical("eigenpair residual ", out.residual, " above 1e-9");
  return out;
}

/// Derivative of eigenvector i of h along dh (both Hermitian), in the gauge
/// where <v_i|dv_i> = 0. Sum over the other eigenvectors divided by the gaps.
inline Eigen::VectorXcd eigvec_derivative(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& dh, Eigen::Index i,
                                          double degeneracy_tol = kDegeneracyTolerance) {
  if (h.rows() != h.cols() || dh.rows() != h.rows() || dh.cols() != h.cols()) throw_input("eigvec_derivative: shape mismatch");
  if (i < 0 || i >= h.rows()) throw_input("eigvec_derivative: index out of range");
  const auto spec = dense_spectrum(h);
  const Eigen::VectorXcd vi = spec.vectors.col(i);
  const Eigen::VectorXcd dhv = dh * vi;
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(h.rows());
  for (Eigen::Index j = 0; j < h.rows(); ++j) {
    if (j == i) continue;
    const double gap = spec.values[i] - spec.values[j];
    if (std::abs(gap) < degeneracy_tol) throw_numerical("eigenvalue ", i, " degenerate with ", j, " (gap ", gap, ")");
    out += (spec.vectors.col(j).dot(dhv) / gap) * spec.vectors.col(j);
  }
  return out;
}

/// Sector-restricted ground-state derivative, embedded in the full register.
inline StateVector ground_state_derivative(const PauliSum& h, const PauliSum& dh, const Sector& s) {
  return embed(s, eigvec_derivative(sector_matrix(h, s), sector_matrix(dh, s), 0));
}

/// Exact ground energies at every grid point.
struct EnergyTable {
  double step = 0.0;
  std::map<Displacement, double> energies;

  double at(const Displacement& d) const {
    auto it = energies.find(d);
    if (it == energies.end()) throw_input("no energy at grid point ", displacement_str(d));
    return it->second;
  }
};

inline EnergyTable exact_energy_table(const HamiltonianGrid& grid) {
  EnergyTable t;
  t.step = grid.step;
  const Sector s = molecular_sector(grid.base());
  std::vector<const std::pair<const Displacement, IntegralSet>*> items;
  for (const auto& kv : grid.points) items.push_back(&kv);
  std::vector<double> e(items.size());
  parallel_for(items.size(), [&](std::size_t k) {
    e[k] = exact_ground_state(assemble_hamiltonian(items[k]->second), s).energy;
  });
  for (std::size_t k = 0; k < items.size(); ++k) t.energies.emplace(items[k]->first, e[k]);
  return t;
}

struct FdEstimate {
  double value = 0.0;
  /// Truncation error from step doubling, |D(h) - D(2h)| / 3; NaN when the
  /// doubled stencil is not on the grid.
  double truncation_error = std::numeric_limits<double>::quiet_NaN();
  /// Propagated rounding error of the sampled energies.
  double roundoff_error = 0.0;
  int accuracy_order = 2;

  double error() const { return (std::isnan(truncation_error) ? 0.0 : truncation_error) + roundoff_error; }
};

inline constexpr double kEnergyRoundoff = 1e-13;

/// Central finite-difference derivative of tabulated values along `coords`.
inline FdEstimate fd_derivative(const std::function<std::optional<double>(const Displacement&)>& value, double step,
                                const std::vector<int>& coords) {
  const auto apply = [&](const Stencil& st) -> std::optional<double> {
    double s = 0;
    for (const auto& [d, w] : st.points) {
      const auto v = value(d);
      if (!v) return std::nullopt;
      s += w * *v;
    }
    return s;
  };
  FdEstimate out;
  const Stencil st = central_stencil(coords, step);
  const auto v = apply(st);
  if (!v) throw_input("grid lacks the points for a derivative of order ", coords.size());
  out.value = *v;
  double wsum = 0, scale = 1;
  for (const auto& [d, w] : st.points) {
    wsum += std::abs(w);
    scale = std::max(scale, std::abs(*value(d)));
  }
  out.roundoff_error = wsum * kEnergyRoundoff * scale;
  if (!coords.empty())
    if (const auto v2 = apply(central_stencil(coords, step, 2))) out.truncation_error = std::abs(*v - *v2) / 3.0;
  return out;
}

inline FdEstimate fd_energy_derivative(const EnergyTable& t, const std::vector<int>& coords) {
  if (coords.size() > 4) throw_input("finite-difference order ", coords.size(), " above 4");
  return fd_derivative(
      [&](const Displacement& d) -> std::optional<double> {
        auto it = t.energies.find(d);
        if (it == t.energies.end()) return std::nullopt;
        return it->second;
      },
      t.step, coords);
}

/// Finite-difference Hessian of the exact ground energy.
inline Eigen::MatrixXd fd_hessian(const EnergyTable& t, int n_coords) {
  Eigen::MatrixXd h(n_coords, n_coords);
  for (int i = 0; i < n_coords; ++i)
    for (int j = i; j < n_coords; ++j) h(i, j) = h(j, i) = fd_energy_derivative(t, {i, j}).value;
  return h;
}

/// Second energy derivatives from exact states: <d2H> + 2 Re <psi|dH_i|d_j psi>.
inline Eigen::MatrixXd hessian_via_states(const HamiltonianGrid& grid) {
  const int n = grid.coordinate_count();
  const Sector s = molecular_sector(grid.base());
  const Eigen::MatrixXcd h0 = sector_matrix(assemble_hamiltonian(grid.base()), s);
  std::vector<Eigen::MatrixXcd> dh(static_cast<std::size_t>(n));
  parallel_for(dh.size(), [&](std::size_t i) {
    dh[i] = sector_matrix(hamiltonian_derivative(grid, {static_cast<int>(i)}), s);
  });
  const auto spec = dense_spectrum(h0);
  if (spec.values.size() > 1 && spec.values[1] - spec.values[0] < kDegeneracyTolerance)
    throw_numerical("ground state degenerate at the base geometry");
  const Eigen::VectorXcd psi = spec.vectors.col(0);
  std::vector<Eigen::VectorXcd> dpsi(static_cast<std::size_t>(n));
  parallel_for(dpsi.size(), [&](std::size_t j) { dpsi[j] = eigvec_derivative(h0, dh[j], 0); });
  Eigen::MatrixXd out(n, n);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) pairs.emplace_back(i, j);
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    const Eigen::MatrixXcd d2 = sector_matrix(hamiltonian_derivative(grid, {i, j}), s);
    out(i, j) = psi.dot(d2 * psi).real() +
                2.0 * psi.dot(dh[static_cast<std::size_t>(i)] * dpsi[static_cast<std::size_t>(j)]).real();
  });
  return out;
}

inline double second_derivative_via_states(const HamiltonianGrid& grid, int i, int j) {
  const Sector s = molecular_sector(grid.base());
  const PauliSum h0 = assemble_hamiltonian(grid.base());
  const auto gs = exact_ground_state(h0, s);
  const auto dpsi = ground_state_derivative(h0, hamiltonian_derivative(grid, {j}), s);
  const auto dhi = hamiltonian_derivative(grid, {i});
  const auto d2 = hamiltonian_derivative(grid, {i, j});
  StateVector tmp(s.n_qubits);
  const CompiledPauliSum cdhi(dhi);
  cdhi.apply(dpsi.amplitudes(), tmp.amplitudes());
  return expval(gs.state, d2) + 2.0 * inner(gs.state, tmp).real();
}

struct Theorem1Entry {
  int order = 0;
  std::vector<int> coords;
  double exact = 0.0;      // derivative of E(R)
  double truncated = 0.0;  // derivative of <phi0(R)|H(R)|phi0(R)>, phi0 from H_{n-1}
  double difference = 0.0;
  double combined_error = std::numeric_limits<double>::quiet_NaN();
  bool asserted = false;  // p <= n
  bool within = false;    // difference <= 5 * combined_error
};

struct Theorem1Report {
  int n = 0;
  std::vector<Theorem1Entry> entries;
  bool passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return !e.asserted || e.within; });
  }
};

/// Compares derivatives at R0 of the exact energy E(R) with those of
/// <phi0(R)|H(R)|phi0(R)>, where phi0(R) is the ground state of the Taylor
/// Hamiltonian H_{n-1}(R). Orders p <= n are asserted; order n+1 is only
/// reported. Diagonal coordinate tuples (i, ..., i) are used.
inline Theorem1Report theorem1_check(const HamiltonianGrid& grid, int n, const std::vector<int>& coordinates,
                                     int max_order) {
  if (n < 1 || n > 3) throw_input("theorem1_check supports n = 1..3");
  const Sector s = molecular_sector(grid.base());
  const double h = grid.step;
  const PauliSum h0 = assemble_hamiltonian(grid.base());

  // Taylor coefficients; first derivatives use the fourth-order stencil when +-2h exists.
  std::map<int, PauliSum> d1;
  std::map<std::pair<int, int>, PauliSum> d2;
  for (int c : coordinates) {
    if (grid.has({{c, 2}}) && grid.has({{c, -2}})) {
      std::vector<std::pair<double, PauliSum>> parts;
      for (auto [k, w] : {std::pair{2, -1.0}, {1, 8.0}, {-1, -8.0}, {-2, 1.0}})
        parts.emplace_back(w / (12 * h), assemble_hamiltonian(grid.at({{c, k}})));
      d1.emplace(c, linear_combine(parts));
    } else {
      d1.emplace(c, hamiltonian_derivative(grid, {c}));
    }
    if (n >= 3) d2.emplace(std::pair{c, c}, hamiltonian_derivative(grid, {c, c}));
  }
  const auto taylor = [&](int c, double x) {
    std::vector<std::pair<double, PauliSum>> parts{{1.0, h0}};
    if (n >= 2) parts.emplace_back(x, d1.at(c));
    if (n >= 3) parts.emplace_back(0.5 * x * x, d2.at({c, c}));
    return linear_combine(parts);
  };

  Theorem1Report report;
  report.n = n;
  std::map<Displacement, double> exact_e, trunc_e;
  std::mutex mtx;
  for (int c : coordinates) {
    std::vector<Displacement> needed;
    for (const auto& [d, hset] : grid.points)
      if (d.size() <= 1 && (d.empty() || d.begin()->first == c)) needed.push_back(d);
    std::vector<double> ev(needed.size()), tv(needed.size());
    parallel_for(needed.size(), [&](std::size_t k) {
      const auto& d = needed[k];
      const PauliSum hr = assemble_hamiltonian(grid.at(d));
      ev[k] = exact_ground_state(hr, s).energy;
      const double x = d.empty() ? 0.0 : d.begin()->second * h;
      const auto phi = exact_ground_state(taylor(c, x), s);
      tv[k] = expval(phi.state, hr);
    });
    for (std::size_t k = 0; k < needed.size(); ++k) {
      exact_e[needed[k]] = ev[k];
      trunc_e[needed[k]] = tv[k];
    }
    for (int p = 1; p <= max_order; ++p) {
      const std::vector<int> coords(static_cast<std::size_t>(p), c);
      const auto lookup = [](const std::map<Displacement, double>& m) {
        return [&m](const Displacement& d) -> std::optional<double> {
          auto it = m.find(d);
          if (it == m.end()) return std::nullopt;
          return it->second;
        };
      };
      if (!grid.supports(central_stencil(coords, h))) continue;
      Theorem1Entry e;
      e.order = p;
      e.coords = coords;
      const auto fe = fd_derivative(lookup(exact_e), h, coords);
      const auto ft = fd_derivative(lookup(trunc_e), h, coords);
      e.exact = fe.value;
      e.truncated = ft.value;
      e.difference = std::abs(fe.value - ft.value);
      if (!std::isnan(fe.truncation_error) && !std::isnan(ft.truncation_error)) e.combined_error = fe.error() + ft.error();
      e.asserted = p <= n;
      e.within = !std::isnan(e.combined_error) ? e.difference <= 5.0 * e.combined_error
                                                : e.difference <= 5.0 * (fe.roundoff_error + ft.roundoff_error);
      report.entries.push_back(e);
    }
  }
  return report;
}

/// Normalization identities of a phase-aligned state family sampled at
/// offsets -h, 0, +h: k = 1 returns |2 Re<dpsi|psi>|, k = 2 returns
/// |2 Re<d2psi|psi> + 2 <dpsi|dpsi>|.
inline double normalization_identity_check(std::vector<Eigen::VectorXcd> states, double h, int k, bool align = true) {
  if (states.size() != 3) throw_input("normalization check needs states at -h, 0, +h");
  if (k != 1 && k != 2) throw_input("normalization check supports k = 1, 2");
  if (align)
    for (std::size_t m : {0u, 2u}) {
      const cplx ov = states[1].dot(states[m]);
      if (std::abs(ov) > 0) states[m] *= std::conj(ov) / std::abs(ov);
    }
  const Eigen::VectorXcd d1 = (states[2] - states[0]) / (2 * h);
  if (k == 1) return std::abs(2.0 * d1.dot(states[1]).real());
  const Eigen::VectorXcd d2 = (states[2] - 2.0 * states[1] + states[0]) / (h * h);
  return std::abs(2.0 * d2.dot(states[1]).real() + 2.0 * d1.squaredNorm());
}

/// Grid version: exact ground states along coordinate c.
inline double normalization_identity_check(const HamiltonianGrid& grid, int c, int k) {
  const Sector s = molecular_sector(grid.base());
  std::vector<Eigen::VectorXcd> states;
  for (int off : {-1, 0, 1}) {
    Displacement d;
    if (off) d[c] = off;
    states.push_back(restrict_to(s, exact_ground_state(assemble_hamiltonian(grid.at(d)), s).state));
  }
  return normalization_identity_check(states, grid.step, k);
}

struct FidelityPoint {
  double delta = 0.0;
  double fidelity = 0.0;
  double derivative = 0.0;
  bool flagged = false;
};

/// Hamiltonians along a displacement direction. Uses the grid's scan samples
/// in [delta_min, delta_max] when present, otherwise a second-order Taylor
/// expansion about R0 along `direction` at `steps` evenly spaced deltas.
inline std::vector<std::pair<double, PauliSum>> scan_hamiltonians(const HamiltonianGrid& grid, double delta_min,
                                                                  double delta_max, int steps,
                                                                  const Eigen::VectorXd& direction = {}) {
  if (!(delta_max >= delta_min) || steps < 1) throw_input("invalid delta range");
  std::vector<std::pair<double, PauliSum>> out;
  if (!grid.scan.empty() && direction.size() == 0) {
    for (const auto& sp : grid.scan)
      if (sp.delta >= delta_min - 1e-9 && sp.delta <= delta_max + 1e-9)
        out.emplace_back(sp.delta, assemble_hamiltonian(sp.integrals));
    if (out.empty()) throw_input("no scan samples in [", delta_min, ", ", delta_max, "]");
    return out;
  }
  const Eigen::VectorXd dir = direction.size() ? direction : grid.scan_direction;
  if (dir.size() != grid.coordinate_count()) throw_input("scan direction must have ", grid.coordinate_count(), " entries");
  const PauliSum h0 = assemble_hamiltonian(grid.base());
  std::vector<std::pair<double, PauliSum>> first;
  std::vector<std::pair<double, PauliSum>> second;
  for (int i = 0; i < dir.size(); ++i) {
    if (dir[i] == 0) continue;
    first.emplace_back(dir[i], hamiltonian_derivative(grid, {i}));
    for (int j = 0; j < dir.size(); ++j)
      if (dir[j] != 0) second.emplace_back(0.5 * dir[i] * dir[j], hamiltonian_derivative(grid, {i, j}));
  }
  const PauliSum g1 = first.empty() ? PauliSum(h0.n_qubits()) : linear_combine(first);
  const PauliSum g2 = second.empty() ? PauliSum(h0.n_qubits()) : linear_combine(second);
  for (int k = 0; k < steps; ++k) {
    const double delta = steps == 1 ? delta_min : delta_min + (delta_max - delta_min) * k / (steps - 1);
    out.emplace_back(delta, linear_combine({{1.0, h0}, {delta, g1}, {delta * delta, g2}}));
  }
  return out;
}

/// Fidelity derivative over the samples: central differences inside,
/// one-sided at the two ends.
inline void fill_fidelity_derivatives(std::vector<FidelityPoint>& pts) {
  const std::size_t n = pts.size();
  if (n < 2) return;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = k == 0 ? 0 : k - 1, hi = k + 1 == n ? n - 1 : k + 1;
    pts[k].derivative = (pts[hi].fidelity - pts[lo].fidelity) / (pts[hi].delta - pts[lo].delta);
  }
}

/// prepare(h, delta) returns the approximate state at that sample and a
/// convergence flag; fidelity is taken against the exact sector ground state.
inline std::vector<FidelityPoint> fidelity_scan(
    const std::vector<std::pair<double, PauliSum>>& hams, const Sector& s,
    const std::function<std::pair<StateVector, bool>(const PauliSum&, double)>& prepare) {
  std::vector<FidelityPoint> pts(hams.size());
  parallel_for(hams.size(), [&](std::size_t k) {
    const auto& [delta, h] = hams[k];
    const auto exact = exact_ground_state(h, s);
    const auto [state, ok] = prepare(h, delta);
    pts[k] = {delta, fidelity(exact.state, state), 0.0, !ok};
  });
  fill_fidelity_derivatives(pts);
  return pts;
}

}  // namespace tailgate
