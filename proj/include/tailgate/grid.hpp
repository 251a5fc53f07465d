#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "tailgate/error.hpp"
#include "tailgate/integrals.hpp"
#include "tailgate/jordan_wigner.hpp"
#include "tailgate/parallel.hpp"

namespace tailgate {

struct Atom {
  std::string symbol;
  double mass_amu = 0.0;
  Eigen::Vector3d position_bohr = Eigen::Vector3d::Zero();
};

struct Geometry {
  std::vector<Atom> atoms;

  int coordinate_count() const { return 3 * static_cast<int>(atoms.size()); }

  /// Flattened coordinates (x0, y0, z0, x1, ...).
  Eigen::VectorXd coordinates() const {
    Eigen::VectorXd r(coordinate_count());
    for (std::size_t a = 0; a < atoms.size(); ++a) r.segment<3>(3 * static_cast<Eigen::Index>(a)) = atoms[a].position_bohr;
    return r;
  }

  /// Per-coordinate masses (each atomic mass repeated three times).
  Eigen::VectorXd coordinate_masses() const {
    Eigen::VectorXd m(coordinate_count());
    for (std::size_t a = 0; a < atoms.size(); ++a) m.segment<3>(3 * static_cast<Eigen::Index>(a)).setConstant(atoms[a].mass_amu);
    return m;
  }

  void validate() const {
    if (atoms.empty()) throw_input("geometry has no atoms");
    for (const auto& a : atoms)
      if (!(a.mass_amu > 0)) throw_input("atom ", a.symbol, " has nonpositive mass ", a.mass_amu);
  }
};

/// Standard atomic weights (amu) for masses omitted from a manifest.
inline double standard_atomic_weight(const std::string& symbol) {
  static const std::map<std::string, double> table{
      {"H", 1.008},   {"He", 4.0026}, {"Li", 6.94},   {"Be", 9.0122}, {"B", 10.81},   {"C", 12.011},
      {"N", 14.007},  {"O", 15.999},  {"F", 18.998},  {"Ne", 20.180}, {"Na", 22.990}, {"Mg", 24.305},
      {"Al", 26.982}, {"Si", 28.085}, {"P", 30.974},  {"S", 32.06},   {"Cl", 35.45},  {"Ar", 39.948}};
  auto it = table.find(symbol);
  if (it == table.end()) throw_input("no standard atomic weight for element '", symbol, "'");
  return it->second;
}

/// Grid displacement: coordinate (0-based) -> signed number of unit steps.
using Displacement = std::map<int, int>;

/// Manifest labels are lists of signed 1-based coordinate indices; repeats add up.
inline Displacement displacement_from_label(const std::vector<int>& label, int n_coords) {
  Displacement d;
  for (int s : label) {
    if (s == 0 || std::abs(s) > n_coords)
      throw_input("label entry ", s, " is not a signed 1-based coordinate index (N = ", n_coords, ")");
    d[std::abs(s) - 1] += s > 0 ? 1 : -1;
  }
  std::erase_if(d, [](const auto& kv) { return kv.second == 0; });
  return d;
}

inline std::vector<int> label_from_displacement(const Displacement& d) {
  std::vector<int> label;
  for (auto [c, n] : d)
    for (int k = 0; k < std::abs(n); ++k) label.push_back(n > 0 ? c + 1 : -(c + 1));
  return label;
}

inline std::string displacement_str(const Displacement& d) {
  if (d.empty()) return "{}";
  std::string s = "{";
  bool first = true;
  for (int v : label_from_displacement(d)) {
    s += (first ? "" : ",") + std::string(v > 0 ? "+" : "-") + std::to_string(std::abs(v) - 1);
    first = false;
  }
  return s + "}";
}

/// Weighted grid points whose combination approximates a partial derivative.
struct Stencil {
  std::vector<std::pair<Displacement, double>> points;
  int order = 0;
};

namespace detail {

/// Central 1-D stencils in units of the step, accuracy O(h^2).
inline std::vector<std::pair<int, double>> central_1d(int order) {
  switch (order) {
    case 0: return {{0, 1.0}};
    case 1: return {{1, 0.5}, {-1, -0.5}};
    case 2: return {{1, 1.0}, {0, -2.0}, {-1, 1.0}};
    case 3: return {{2, 0.5}, {1, -1.0}, {-1, 1.0}, {-2, -0.5}};
    case 4: return {{2, 1.0}, {1, -4.0}, {0, 6.0}, {-1, -4.0}, {-2, 1.0}};
    default: throw_input("central stencil of order ", order, " not supported (max 4)");
  }
}

}  // namespace detail

/// Tensor product of central stencils; `coords` lists the differentiated
/// coordinates with repetition, e.g. {i} or {i, j} or {i, i, i}. `spacing`
/// multiplies the step (2 gives the step-doubled stencil).
inline Stencil central_stencil(std::vector<int> coords, double step, int spacing = 1) {
  std::map<int, int> orders;
  for (int c : coords) ++orders[c];
  std::map<Displacement, double> acc{{Displacement{}, 1.0}};
  for (auto [c, k] : orders) {
    std::map<Displacement, double> next;
    for (const auto& [d, w] : acc)
      for (auto [off, w1] : detail::central_1d(k)) {
        Displacement nd = d;
        if (off != 0) nd[c] = off * spacing;
        next[nd] += w * w1;
      }
    acc = std::move(next);
  }
  Stencil s;
  s.order = static_cast<int>(coords.size());
  const double scale = std::pow(step * spacing, -s.order);
  for (const auto& [d, w] : acc)
    if (w != 0.0) s.points.emplace_back(d, w * scale);
  return s;
}

struct ScanPoint {
  double delta = 0.0;
  IntegralSet integrals;
};

/// Integral sets at displaced geometries around a base point R0.
struct HamiltonianGrid {
  std::string molecule;
  Geometry base_geometry;
  double step = 5e-3;
  std::map<Displacement, IntegralSet> points;
  Eigen::VectorXd scan_direction;
  std::vector<ScanPoint> scan;
  bool gauge_checked = false;
  bool gauge_ok = true;
  bool gauge_override = false;

  int coordinate_count() const { return base_geometry.coordinate_count(); }
  const IntegralSet& base() const { return at({}); }

  bool has(const Displacement& d) const { return points.count(d) > 0; }

  const IntegralSet& at(const Displacement& d) const {
    auto it = points.find(d);
    if (it == points.end()) throw_input("grid point ", displacement_str(d), " missing");
    return it->second;
  }

  bool supports(const Stencil& s) const {
    for (const auto& [d, w] : s.points)
      if (!has(d)) return false;
    return true;
  }

  void check_invariants() const {
    if (!has({})) throw_input("base geometry absent from grid");
    const auto& b = base();
    for (const auto& [d, ints] : points)
      if (!ints.same_shape(b))
        throw_input("grid point ", displacement_str(d), " has inconsistent orbital/electron counts");
    for (const auto& sp : scan)
      if (!sp.integrals.same_shape(b)) throw_input("scan point ", sp.delta, " has inconsistent orbital/electron counts");
  }
};

/// Loads a JSON manifest plus the FCIDUMP file of every listed point.
inline HamiltonianGrid load_grid(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream in(manifest_path);
  if (!in) throw_input("cannot open manifest '", manifest_path, "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw_input(manifest_path, ": invalid JSON: ", e.what());
  }
  const fs::path dir = fs::path(manifest_path).parent_path();

  HamiltonianGrid grid;
  try {
    grid.molecule = j.value("molecule", "");
    for (const auto& a : j.at("atoms")) {
      Atom atom;
      atom.symbol = a.at("symbol").get<std::string>();
      atom.mass_amu = a.contains("mass_amu") ? a.at("mass_amu").get<double>() : standard_atomic_weight(atom.symbol);
      const auto xyz = a.at("xyz_bohr").get<std::vector<double>>();
      if (xyz.size() != 3) throw_input(manifest_path, ": xyz_bohr must have 3 entries");
      atom.position_bohr = Eigen::Vector3d(xyz[0], xyz[1], xyz[2]);
      grid.base_geometry.atoms.push_back(atom);
    }
    grid.base_geometry.validate();
    grid.step = j.at("step_bohr").get<double>();
    if (!(grid.step > 0)) throw_input(manifest_path, ": step_bohr must be positive");

    const int n = grid.coordinate_count();
    std::vector<std::pair<Displacement, std::string>> entries;
    for (const auto& p : j.at("points"))
      entries.emplace_back(displacement_from_label(p.at("label").get<std::vector<int>>(), n),
                           (dir / p.at("file").get<std::string>()).string());
    std::vector<IntegralSet> parsed(entries.size());
    parallel_for(entries.size(), [&](std::size_t k) { parsed[k] = parse_fcidump(entries[k].second); });
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (grid.points.count(entries[k].first))
        throw_input(manifest_path, ": duplicate label ", displacement_str(entries[k].first));
      grid.points.emplace(entries[k].first, std::move(parsed[k]));
    }

    if (j.contains("scan")) {
      const auto& s = j.at("scan");
      const auto dirv = s.at("direction").get<std::vector<double>>();
      if (static_cast<int>(dirv.size()) != n) throw_input(manifest_path, ": scan direction must have ", n, " entries");
      grid.scan_direction = Eigen::Map<const Eigen::VectorXd>(dirv.data(), n);
      const auto& pts = s.at("points");
      grid.scan.resize(pts.size());
      parallel_for(pts.size(), [&](std::size_t k) {
        grid.scan[k].delta = pts[k].at("delta").get<double>();
        grid.scan[k].integrals = parse_fcidump((dir / pts[k].at("file").get<std::string>()).string());
      });
    }
  } catch (const nlohmann::json::exception& e) {
    throw_input(manifest_path, ": ", e.what());
  }
  grid.check_invariants();
  return grid;
}

struct GaugeViolation {
  Displacement from;
  Displacement to;
  double max_change = 0.0;
};

struct GaugeReport {
  double bound = 0.0;
  std::size_t pairs_checked = 0;
  std::vector<GaugeViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Flags adjacent grid points (one unit step apart) whose integrals jump by
/// more than continuity_bound * h. Marks the grid unusable on violation.
inline GaugeReport validate_grid(HamiltonianGrid& grid, double continuity_bound = 10.0) {
  GaugeReport report;
  report.bound = continuity_bound;
  const double limit = continuity_bound * grid.step;
  for (const auto& [d, ints] : grid.points)
    for (int c = 0; c < grid.coordinate_count(); ++c) {
      Displacement nb = d;
      if (++nb[c] == 0) nb.erase(c);
      auto it = grid.points.find(nb);
      if (it == grid.points.end()) continue;
      ++report.pairs_checked;
      const double change = ints.max_abs_diff(it->second);
      if (change > limit) report.violations.push_back({d, nb, change});
    }
  grid.gauge_checked = true;
  grid.gauge_ok = report.ok();
  return report;
}

/// Finite-difference derivative of the integral coefficients, units Hartree/Bohr^order.
inline IntegralSet coeff_derivative(const HamiltonianGrid& grid, const std::vector<int>& coords) {
  if (coords.size() > 4) throw_input("derivative order ", coords.size(), " not supported");
  for (int c : coords)
    if (c < 0 || c >= grid.coordinate_count()) throw_input("coordinate ", c, " out of range");
  if (grid.gauge_checked && !grid.gauge_ok && !grid.gauge_override)
    throw_input("grid failed gauge validation; derivatives disabled unless overridden");
  if (coords.empty()) return grid.base();
  const Stencil st = central_stencil(coords, grid.step);
  if (!grid.supports(st)) {
    for (const auto& [d, w] : st.points)
      if (!grid.has(d)) throw_input("missing stencil point ", displacement_str(d), " for derivative");
  }
  IntegralSet out = grid.base();
  out.core_energy = 0.0;
  out.h1.setZero();
  std::fill(out.h2.begin(), out.h2.end(), 0.0);
  for (const auto& [d, w] : st.points) {
    const auto& f = grid.at(d);
    out.core_energy += w * f.core_energy;
    out.h1 += w * f.h1;
    for (std::size_t k = 0; k < out.h2.size(); ++k) out.h2[k] += w * f.h2[k];
  }
  return out;
}

inline PauliSum hamiltonian_derivative(const HamiltonianGrid& grid, const std::vector<int>& coords) {
  return assemble_hamiltonian(coeff_derivative(grid, coords));
}

/// Builds a grid in memory from a smooth integral family f(R) sampled at
/// the given displacements (used for synthetic Hamiltonian families).
template <typename Family>
HamiltonianGrid make_grid(const Geometry& geometry, double step, const std::vector<Displacement>& displacements,
                          Family&& family) {
  HamiltonianGrid g;
  g.base_geometry = geometry;
  g.step = step;
  const int n = geometry.coordinate_count();
  for (const auto& d : displacements) {
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(n);
    for (auto [c, k] : d) delta[c] = k * step;
    g.points.emplace(d, family(delta));
  }
  g.check_invariants();
  return g;
}

/// All displacements needed for first and second derivatives in every
/// coordinate; `extended` adds +-2h along each axis.
inline std::vector<Displacement> hessian_displacements(int n, bool extended = false) {
  std::vector<Displacement> out{{}};
  for (int i = 0; i < n; ++i) {
    out.push_back({{i, 1}});
    out.push_back({{i, -1}});
    if (extended) {
      out.push_back({{i, 2}});
      out.push_back({{i, -2}});
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int si : {1, -1})
        for (int sj : {1, -1}) out.push_back({{i, si}, {j, sj}});
  return out;
}

/// The same grid seen with step k*h: keeps the points whose unit counts are
/// all multiples of k. `step` must be a positive integer multiple of grid.step.
inline HamiltonianGrid with_step(const HamiltonianGrid& grid, double step) {
  const double ratio = step / grid.step;
  const long k = std::lround(ratio);
  if (!(step > 0) || k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-9 * ratio)
    throw_input("finite-difference step ", step, " is not a positive multiple of the grid step ", grid.step);
  if (k == 1) return grid;
  HamiltonianGrid out;
  out.molecule = grid.molecule;
  out.base_geometry = grid.base_geometry;
  out.step = grid.step * static_cast<double>(k);
  out.scan_direction = grid.scan_direction;
  out.scan = grid.scan;
  for (const auto& [d, ints] : grid.points) {
    Displacement coarse;
    bool keep = true;
    for (auto [c, n] : d) {
      if (n % k != 0) keep = false;
      coarse[c] = static_cast<int>(n / k);
    }
    if (keep) out.points.emplace(coarse, ints);
  }
  out.check_invariants();
  return out;
}

}  // namespace tailgate
