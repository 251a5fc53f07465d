#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tailgate/error.hpp"

namespace tailgate {

/// Spin-free molecular integrals with two-electron integrals in chemist
/// notation (pq|rs), stored densely as n^4 values.
struct IntegralSet {
  int n_orbitals = 0;
  int n_electrons = 0;
  int ms2 = 0;
  double core_energy = 0.0;
  Eigen::MatrixXd h1;
  std::vector<double> h2;

  IntegralSet() = default;
  IntegralSet(int norb, int nelec, int ms2_ = 0)
      : n_orbitals(norb), n_electrons(nelec), ms2(ms2_), h1(Eigen::MatrixXd::Zero(norb, norb)),
        h2(static_cast<std::size_t>(norb) * norb * norb * norb, 0.0) {}

  std::size_t index(int p, int q, int r, int s) const {
    const std::size_t n = n_orbitals;
    return ((static_cast<std::size_t>(p) * n + q) * n + r) * n + s;
  }
  double& eri(int p, int q, int r, int s) { return h2[index(p, q, r, s)]; }
  double eri(int p, int q, int r, int s) const { return h2[index(p, q, r, s)]; }

  /// The eight index permutations sharing a value for real orbitals.
  static std::array<std::array<int, 4>, 8> permutations(int p, int q, int r, int s) {
    return {{{p, q, r, s}, {q, p, r, s}, {p, q, s, r}, {q, p, s, r},
             {r, s, p, q}, {s, r, p, q}, {r, s, q, p}, {s, r, q, p}}};
  }

  void set_eri_symmetric(int p, int q, int r, int s, double v) {
    for (const auto& t : permutations(p, q, r, s)) eri(t[0], t[1], t[2], t[3]) = v;
  }

  bool same_shape(const IntegralSet& o) const {
    return n_orbitals == o.n_orbitals && n_electrons == o.n_electrons;
  }

  /// Largest absolute difference over core energy, h1 and h2.
  double max_abs_diff(const IntegralSet& o) const {
    double d = std::abs(core_energy - o.core_energy);
    if (n_orbitals > 0) d = std::max(d, (h1 - o.h1).cwiseAbs().maxCoeff());
    for (std::size_t k = 0; k < h2.size(); ++k) d = std::max(d, std::abs(h2[k] - o.h2[k]));
    return d;
  }

  /// Throws InputError when h1 or h2 breaks the real-orbital symmetries.
  void check_symmetry(double tol = 1e-10) const {
    const int n = n_orbitals;
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        if (std::abs(h1(p, q) - h1(q, p)) > tol)
          throw_input("h1 not symmetric at (", p, ",", q, ")");
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        for (int r = 0; r < n; ++r)
          for (int s = 0; s < n; ++s) {
            const double v = eri(p, q, r, s);
            for (const auto& t : permutations(p, q, r, s))
              if (std::abs(eri(t[0], t[1], t[2], t[3]) - v) > tol)
                throw_input("h2 permutation symmetry broken at (", p, q, r, s, ")");
          }
  }
};

/// a*x + b*y applied entrywise; shapes must agree.
inline IntegralSet axpby(double a, const IntegralSet& x, double b, const IntegralSet& y) {
  if (!x.same_shape(y)) throw_input("integral sets differ in orbital/electron count");
  IntegralSet out = x;
  out.core_energy = a * x.core_energy + b * y.core_energy;
  out.h1 = a * x.h1 + b * y.h1;
  for (std::size_t k = 0; k < out.h2.size(); ++k) out.h2[k] = a * x.h2[k] + b * y.h2[k];
  return out;
}

namespace detail {

inline bool read_header_int(const std::string& header, const std::string& key, int& value) {
  // Keys may be glued to punctuation: "NORB=   2,NELEC= 2,MS2=0,"
  std::size_t pos = 0;
  while ((pos = header.find(key, pos)) != std::string::npos) {
    const bool boundary = pos == 0 || !std::isalnum(static_cast<unsigned char>(header[pos - 1]));
    std::size_t eq = pos + key.size();
    while (eq < header.size() && header[eq] == ' ') ++eq;
    if (boundary && eq < header.size() && header[eq] == '=') {
      std::istringstream iss(header.substr(eq + 1));
      if (iss >> value) return true;
      return false;
    }
    pos += key.size();
  }
  return false;
}

}  // namespace detail

/// Reads an FCIDUMP file (1-based indices; "i j 0 0" one-electron;
/// "0 0 0 0" core energy) and fills every permutation of each entry.
inline IntegralSet parse_fcidump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_input("cannot open FCIDUMP '", path, "'");

  std::string header, line;
  int line_no = 0;
  bool closed = false;
  while (std::getline(in, line)) {
    ++line_no;
    header += line;
    header += ' ';
    std::string upper;
    for (char c : line) upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (upper.find("&END") != std::string::npos || upper.find('/') != std::string::npos) {
      closed = true;
      break;
    }
  }
  for (auto& c : header) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (!closed || header.find("&FCI") == std::string::npos)
    throw_input(path, ": malformed FCIDUMP header (missing &FCI ... &END)");
  int norb = 0, nelec = 0, ms2 = 0;
  if (!detail::read_header_int(header, "NORB", norb) || norb <= 0)
    throw_input(path, ": malformed header, NORB missing or invalid");
  if (!detail::read_header_int(header, "NELEC", nelec) || nelec < 0)
    throw_input(path, ": malformed header, NELEC missing or invalid");
  detail::read_header_int(header, "MS2", ms2);

  IntegralSet ints(norb, nelec, ms2);
  // Tracks which entries have been assigned so conflicting duplicates are caught.
  std::vector<char> seen_h2(ints.h2.size(), 0);
  Eigen::MatrixXi seen_h1 = Eigen::MatrixXi::Zero(norb, norb);
  bool seen_core = false;
  constexpr double dup_tol = 1e-10;

  auto conflict = [&](double old_v, double new_v) { return std::abs(old_v - new_v) > dup_tol; };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream iss(line);
    double v;
    int i, j, k, l;
    if (!(iss >> v >> i >> j >> k >> l))
      throw_input(path, ":", line_no, ": expected 'value i j k l'");
    for (int idx : {i, j, k, l})
      if (idx < 0 || idx > norb) throw_input(path, ":", line_no, ": orbital index ", idx, " out of range 0..", norb);
    if (i == 0 && j == 0 && k == 0 && l == 0) {
      if (seen_core && conflict(ints.core_energy, v))
        throw_input(path, ":", line_no, ": conflicting duplicate core energy");
      ints.core_energy = v;
      seen_core = true;
    } else if (k == 0 && l == 0) {
      if (i == 0 || j == 0) throw_input(path, ":", line_no, ": invalid one-electron indices");
      const int p = i - 1, q = j - 1;
      if (seen_h1(p, q) && conflict(ints.h1(p, q), v))
        throw_input(path, ":", line_no, ": conflicting duplicate one-electron entry");
      ints.h1(p, q) = ints.h1(q, p) = v;
      seen_h1(p, q) = seen_h1(q, p) = 1;
    } else if (i == 0 || j == 0 || k == 0 || l == 0) {
      // Orbital energies ("e i 0 0 0") carry no Hamiltonian information.
      if (j == 0 && k == 0 && l == 0) continue;
      throw_input(path, ":", line_no, ": invalid index pattern");
    } else {
      const int p = i - 1, q = j - 1, r = k - 1, s = l - 1;
      const std::size_t at = ints.index(p, q, r, s);
      if (seen_h2[at] && conflict(ints.h2[at], v))
        throw_input(path, ":", line_no, ": conflicting duplicate two-electron entry (", i, j, k, l, ")");
      for (const auto& t : IntegralSet::permutations(p, q, r, s)) {
        const std::size_t a = ints.index(t[0], t[1], t[2], t[3]);
        ints.h2[a] = v;
        seen_h2[a] = 1;
      }
    }
  }
  return ints;
}

/// Writes an FCIDUMP with unique (permutation-reduced) entries.
inline void write_fcidump(const IntegralSet& ints, const std::string& path, double tol = 1e-15) {
  std::ofstream out(path);
  if (!out) throw_input("cannot write FCIDUMP '", path, "'");
  const int n = ints.n_orbitals;
  out << " &FCI NORB=" << n << ",NELEC=" << ints.n_electrons << ",MS2=" << ints.ms2 << ",\n &END\n";
  out.precision(17);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q <= p; ++q)
      for (int r = 0; r < n; ++r)
        for (int s = 0; s <= r; ++s) {
          if (p * (p + 1) / 2 + q < r * (r + 1) / 2 + s) continue;
          const double v = ints.eri(p, q, r, s);
          if (std::abs(v) > tol) out << v << ' ' << p + 1 << ' ' << q + 1 << ' ' << r + 1 << ' ' << s + 1 << '\n';
        }
  for (int p = 0; p < n; ++p)
    for (int q = 0; q <= p; ++q)
      if (std::abs(ints.h1(p, q)) > tol) out << ints.h1(p, q) << ' ' << p + 1 << ' ' << q + 1 << " 0 0\n";
  out << ints.core_energy << " 0 0 0 0\n";
}

}  // namespace tailgate
