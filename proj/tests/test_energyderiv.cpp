#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "tailgate/pipeline.hpp"
#include "test_util.hpp"

using namespace tailgate;

namespace {

const HamiltonianGrid& h2_grid() {
  static const HamiltonianGrid g = load_grid(testutil::data_path("h2/manifest.json"));
  return g;
}

const HamiltonianGrid& h3p_grid() {
  static const HamiltonianGrid g = load_grid(testutil::data_path("h3p/manifest.json"));
  return g;
}

AdaptConfig tight() {
  AdaptConfig cfg;
  cfg.vqe_grad_tol = 1e-10;
  return cfg;
}

const Circuit& h2_head() {
  static const Circuit c = run_adapt(h2_grid(), tight(), false).circuit.head;
  return c;
}

const Circuit& h3p_head() {
  static const Circuit c = run_adapt(h3p_grid(), tight(), false).circuit.head;
  return c;
}

HamiltonianGrid constant_grid() {
  testutil::SmoothFamily f(4, 3, 2);
  auto base = f(Eigen::VectorXd::Zero(3));
  return make_grid(testutil::single_atom(), 0.01, hessian_displacements(3), [&](const Eigen::VectorXd&) { return base; });
}

}  // namespace

TEST(SolveResponse, IdentityGivesNegatedRhs) {
  Eigen::MatrixXd rhs(3, 2);
  rhs << 1, 2, 3, 4, 5, 6;
  const auto r = solve_response(Eigen::MatrixXd::Identity(3, 3), rhs);
  EXPECT_LT((r.dtheta_dR + rhs).norm(), 1e-14);
  EXPECT_EQ(r.rank, 3);
  EXPECT_LT(r.residuals.maxCoeff(), 1e-14);
}

TEST(SolveResponse, SingularWithRhsInRange) {
  std::mt19937 rng(3);
  std::normal_distribution<double> n;
  Eigen::MatrixXd u(5, 3);
  for (int i = 0; i < 15; ++i) u.data()[i] = n(rng);
  const Eigen::MatrixXd a = u * u.transpose();  // rank 3
  Eigen::MatrixXd x(5, 2);
  for (int i = 0; i < 10; ++i) x.data()[i] = n(rng);
  const Eigen::MatrixXd rhs = a * x;
  const auto r = solve_response(a, rhs);
  EXPECT_EQ(r.rank, 3);
  EXPECT_LT(r.residuals.maxCoeff(), 1e-10);
  // Minimum norm: no component in the null space.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  for (int k = 0; k < 2; ++k) EXPECT_LT((es.eigenvectors().col(k).transpose() * r.dtheta_dR).norm(), 1e-10);
}

TEST(SolveResponse, EmptyParameterSpace) {
  const auto r = solve_response(Eigen::MatrixXd(0, 0), Eigen::MatrixXd(0, 4));
  EXPECT_EQ(r.dtheta_dR.rows(), 0);
  EXPECT_EQ(r.dtheta_dR.cols(), 4);
  EXPECT_EQ(r.residuals.size(), 4);
  EXPECT_EQ(r.residuals.norm(), 0.0);
  EXPECT_THROW(solve_response(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd(3, 1)), InputError);
}

TEST(EnergyGradient, ConstantGridIsZero) {
  const auto g = constant_grid();
  Circuit c{6, {0, 1}, {Gate::dbl(0, 1, 2, 3, 0.3)}};
  EXPECT_LT(energy_gradient(c, g).norm(), 1e-9);
}

TEST(EnergyGradient, VanishesAtTheExactEquilibrium) {
  const auto g = load_grid(testutil::data_path("h2_eq/manifest.json"));
  const auto head = run_adapt(g, tight(), false).circuit.head;
  EXPECT_LT(energy_gradient(head, g).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(EnergyGradient, ExactStateMatchesFiniteDifferences) {
  int compared = 0;
  for (const auto* grid : {&h2_grid(), &h3p_grid()}) {
    const auto gs = exact_ground_state(assemble_hamiltonian(grid->base()), molecular_sector(grid->base()));
    const auto g = energy_gradient(gs.state, *grid);
    const auto table = exact_energy_table(*grid);
    for (int i = 0; i < grid->coordinate_count(); ++i) {
      const auto fd = fd_energy_derivative(table, {i});
      // The operator derivative carries its own stencil error; estimate it
      // from the fixed-state expectation along the same stencils.
      const auto fixed = fd_derivative(
          [&](const Displacement& d) -> std::optional<double> {
            if (!grid->points.count(d)) return std::nullopt;
            return expval(gs.state, assemble_hamiltonian(grid->points.at(d)));
          },
          grid->step, {i});
      EXPECT_NEAR(fixed.value, g[i], 1e-10);
      // Only grids with +-2h points give a truncation estimate.
      if (std::isnan(fd.truncation_error) || std::isnan(fixed.truncation_error)) continue;
      ++compared;
      EXPECT_NEAR(g[i], fd.value, 5 * (fd.error() + fixed.error()) + 1e-8) << grid->molecule << " coordinate " << i;
    }
  }
  EXPECT_EQ(compared, h2_grid().coordinate_count());
}

TEST(MixedGradient, MatchesFiniteDifferencesInTheta) {
  const auto& grid = h3p_grid();
  Circuit c = h3p_head();
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  auto theta = c.parameters();
  for (auto& t : theta) t += u(rng);
  for (int coord : {1, 4, 7}) {
    const auto mg = mixed_gradient(c, theta, grid, coord);
    const PauliSum dh = hamiltonian_derivative(grid, {coord});
    const double t = 1e-4;
    for (std::size_t a = 0; a < theta.size(); ++a) {
      auto p = theta, m = theta;
      p[a] += t;
      m[a] -= t;
      const double fd = (expval(run_circuit(c, p), dh) - expval(run_circuit(c, m), dh)) / (2 * t);
      EXPECT_NEAR(mg[static_cast<Eigen::Index>(a)], fd, 1e-7);
    }
  }
  const auto zero = mixed_gradient(Circuit{6, {0, 1}, {Gate::single(0, 2, 0.1)}}, std::vector<double>{0.1},
                                   constant_grid(), 0);
  EXPECT_LT(zero.norm(), 1e-9);
}

TEST(Response, MatchesReoptimizationOnH2) {
  const auto& grid = h2_grid();
  const Circuit& c = h2_head();
  const auto theta = c.parameters();
  const PauliSum h0 = assemble_hamiltonian(grid.base());
  const Eigen::MatrixXd a = param_hessian(c, theta, h0);
  Eigen::MatrixXd b(static_cast<Eigen::Index>(theta.size()), grid.coordinate_count());
  for (int i = 0; i < grid.coordinate_count(); ++i) b.col(i) = mixed_gradient(c, theta, grid, i);
  const auto resp = solve_response(a, b);
  for (int i = 0; i < grid.coordinate_count(); ++i) {
    auto reopt = [&](int sign) {
      const PauliSum h = assemble_hamiltonian(grid.at({{i, sign}}));
      return vqe_optimize(c, theta, CompiledPauliSum(h), tight()).theta;
    };
    const auto tp = reopt(1), tm = reopt(-1);
    for (std::size_t k = 0; k < theta.size(); ++k)
      EXPECT_NEAR(resp.dtheta_dR(static_cast<Eigen::Index>(k), i), (tp[k] - tm[k]) / (2 * grid.step), 1e-4)
          << "coordinate " << i;
  }
}

TEST(Hessian, ConstantGridIsZero) {
  const auto g = constant_grid();
  Circuit c{6, {0, 1}, {Gate::dbl(0, 1, 2, 3, 0.3), Gate::single(0, 2, -0.1)}};
  const auto h = hessian(c, g);
  EXPECT_LT(h.matrix.cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(h.matrix.rows(), 3);
}

TEST(Hessian, H2MatchesFiniteDifferenceOracle) {
  const auto& grid = h2_grid();
  const auto h = hessian(h2_head(), grid);
  const Eigen::MatrixXd fd = fd_hessian(exact_energy_table(grid), grid.coordinate_count());
  EXPECT_LT((h.matrix - fd).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_EQ(h.matrix, h.matrix.transpose());
  EXPECT_LE(h.asymmetry, 1e-10);
  EXPECT_EQ(h.n_params, 1u);
  EXPECT_EQ(h.response_rank, 1);
  EXPECT_EQ(h.circuit_hash.size(), 16u);
}

TEST(Hessian, ExactManifoldReproducesStateFormula) {
  // The one-gate H2 circuit spans the exact ground state at every geometry,
  // so the response formula must agree with the exact-state formula.
  const auto& grid = h2_grid();
  const auto h = hessian(h2_head(), grid);
  const Eigen::MatrixXd via = hessian_via_states(grid);
  EXPECT_LT((h.matrix - 0.5 * (via + via.transpose())).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Hessian, InvariantUnderTailReordering) {
  const auto& grid = h3p_grid();
  auto t = tailgate_circuit(h3p_head(), pool_for(grid.base()), build_derivative_set(grid, 2), 1e-5);
  ASSERT_GE(t.tail.size(), 2u);
  const auto ref = hessian(t, grid).matrix;
  std::mt19937 rng(1);
  for (int k = 0; k < 3; ++k) {
    auto p = t;
    if (k == 0) std::reverse(p.tail.begin(), p.tail.end());
    else std::shuffle(p.tail.begin(), p.tail.end(), rng);
    EXPECT_LT((hessian(p, grid).matrix - ref).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Hessian, ZeroGradientTailGateChangesLittle) {
  // Singles in H2 couple sigma_g and sigma_u orbitals: zero screening
  // gradient against H and every first derivative.
  const auto& grid = h2_grid();
  const auto pool = pool_for(grid.base());
  const auto report = screen_gates(h2_head(), pool, build_derivative_set(grid, 2), 0.0);
  const double eps = 1e-5;
  TailgatedCircuit t;
  t.head = h2_head();
  const auto base = hessian(t, grid).matrix;
  for (const auto& s : report.gates) {
    if (s.gate.kind != GateKind::Single) continue;
    ASSERT_LT(s.max_gradient, eps) << s.gate.str();
    auto with = t;
    with.tail.push_back(s.gate);
    EXPECT_LT((hessian(with, grid).matrix - base).cwiseAbs().maxCoeff(), 10 * eps) << s.gate.str();
  }
}

TEST(Hessian, TailgatingChangesH3pHessian) {
  const auto& grid = h3p_grid();
  const auto derivs = build_derivative_set(grid, 2);
  TailgatedCircuit plain;
  plain.head = h3p_head();
  const auto t = tailgate_circuit(h3p_head(), pool_for(grid.base()), derivs, 1e-5);
  const Eigen::MatrixXd fd = fd_hessian(exact_energy_table(grid), grid.coordinate_count());
  const double err_plain = (hessian(plain, grid).matrix - fd).cwiseAbs().maxCoeff();
  const double err_tail = (hessian(t, grid).matrix - fd).cwiseAbs().maxCoeff();
  EXPECT_LT(err_tail, err_plain);
  EXPECT_LT(err_tail, 1e-4);
}
