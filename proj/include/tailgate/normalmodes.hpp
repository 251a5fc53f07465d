#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "tailgate/error.hpp"
#include "tailgate/grid.hpp"

namespace tailgate {

namespace codata2018 {
inline constexpr double hartree_joule = 4.3597447222071e-18;
inline constexpr double bohr_meter = 5.29177210903e-11;
inline constexpr double amu_kg = 1.66053906660e-27;
inline constexpr double light_speed = 299792458.0;  // m/s
}  // namespace codata2018

/// cm^-1 per sqrt(Hartree / (amu Bohr^2)); 5140.49 to six figures.
inline double wavenumber_conversion() {
  using namespace codata2018;
  static const double c =
      std::sqrt(hartree_joule / (amu_kg * bohr_meter * bohr_meter)) / (2.0 * std::numbers::pi * light_speed * 100.0);
  return c;
}

/// H_ij / sqrt(m_i m_j), masses in amu per Cartesian coordinate.
inline Eigen::MatrixXd mass_weight(const Eigen::MatrixXd& hess, const Eigen::VectorXd& masses) {
  if (hess.rows() != hess.cols() || hess.rows() != masses.size())
    throw_input("Hessian is ", hess.rows(), "x", hess.cols(), " but there are ", masses.size(), " coordinate masses");
  for (Eigen::Index i = 0; i < masses.size(); ++i)
    if (!(masses[i] > 0)) throw_input("nonpositive mass for coordinate ", i);
  const Eigen::VectorXd s = masses.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd mw = s.asDiagonal() * hess * s.asDiagonal();
  return 0.5 * (mw + mw.transpose());
}

inline Eigen::MatrixXd mass_weight(const Eigen::MatrixXd& hess, const Geometry& geometry) {
  if (hess.rows() != geometry.coordinate_count())
    throw_input("Hessian dimension ", hess.rows(), " does not match 3 x ", geometry.atoms.size(), " atoms");
  return mass_weight(hess, geometry.coordinate_masses());
}

struct ModeResult {
  std::vector<double> frequencies;  // cm^-1, descending; negative for negative curvature
  std::vector<bool> imaginary;
  std::size_t dropped_modes = 0;
  Eigen::MatrixXd eigenvectors;  // mass-weighted, one column per kept mode
  std::vector<double> dropped;   // frequencies of the dropped modes
};

/// Harmonic wavenumbers of a mass-weighted Hessian. Modes below
/// drop_threshold in magnitude are treated as translations or rotations.
inline ModeResult frequencies(const Eigen::MatrixXd& mw, double drop_threshold = 50.0) {
  if (mw.rows() != mw.cols()) throw_input("mass-weighted Hessian must be square");
  const double scale = std::max(1.0, mw.cwiseAbs().maxCoeff());
  if ((mw - mw.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw_input("mass-weighted Hessian is not symmetric");
  ModeResult r;
  if (mw.rows() == 0) return r;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mw);
  const double c = wavenumber_conversion();
  std::vector<std::pair<double, Eigen::Index>> kept;
  for (Eigen::Index k = 0; k < mw.rows(); ++k) {
    const double lam = es.eigenvalues()[k];
    const double nu = std::copysign(c * std::sqrt(std::abs(lam)), lam);
    if (std::abs(nu) < drop_threshold) {
      r.dropped.push_back(nu);
      ++r.dropped_modes;
    } else {
      kept.emplace_back(nu, k);
    }
  }
  std::sort(kept.begin(), kept.end(), [](auto& a, auto& b) { return a.first > b.first; });
  r.eigenvectors.resize(mw.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) {
    r.frequencies.push_back(kept[k].first);
    r.imaginary.push_back(kept[k].first < 0);
    r.eigenvectors.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(kept[k].second);
  }
  return r;
}

inline ModeResult normal_modes(const Eigen::MatrixXd& hess, const Geometry& geometry, double drop_threshold = 50.0) {
  return frequencies(mass_weight(hess, geometry), drop_threshold);
}

}  // namespace tailgate
