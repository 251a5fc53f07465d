#include <gtest/gtest.h>

#include <bit>
#include <numbers>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "tailgate/circuit_derivatives.hpp"
#include "tailgate/jordan_wigner.hpp"
#include "test_util.hpp"

using namespace tailgate;
using testutil::cplx;

TEST(PrepareReference, QubitZeroIsLeftmost) {
  const auto s = prepare_reference(4, {0, 1});
  EXPECT_EQ(s[0b1100], cplx(1, 0));
  EXPECT_NEAR(s.norm(), 1.0, 1e-15);
  const auto e = prepare_reference(2, {});
  EXPECT_EQ(e[0], cplx(1, 0));
  EXPECT_THROW(prepare_reference(2, {2}), InputError);
}

TEST(ApplyGate, ZeroAngleIsIdentity) {
  std::mt19937 rng(2);
  const auto s = testutil::random_state(rng, 4);
  for (const auto& g : {Gate::single(0, 3), Gate::dbl(0, 1, 2, 3)}) {
    const auto out = apply_gate(s, g);
    for (std::size_t i = 0; i < s.dim(); ++i) EXPECT_EQ(out[i], s[i]);
  }
}

TEST(ApplyGate, DoubleAtPiSwapsConfigurations) {
  const auto out = apply_gate(prepare_reference(4, {0, 1}), Gate::dbl(0, 1, 2, 3, std::numbers::pi));
  EXPECT_NEAR(std::abs(out[0b0011] + 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(out[0b1100]), 0.0, 1e-15);
}

TEST(ApplyGate, SingleMatchesMatrixExponential) {
  // Generator on span{|10>, |01>}: A|10> = -1/2 |01>, A|01> = +1/2 |10>.
  Eigen::Matrix4d gen = Eigen::Matrix4d::Zero();
  gen(0b01, 0b10) = -0.5;
  gen(0b10, 0b01) = 0.5;
  for (double theta : {0.3, -1.1, 2.7}) {
    const Eigen::Matrix4d u = (theta * gen).exp();
    const auto out = apply_gate(prepare_reference(2, {0}), Gate::single(0, 1, theta));
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(out[i].real(), u(i, 0b10), 1e-14);
    EXPECT_NEAR(out[0b10].real(), std::cos(theta / 2), 1e-14);
    EXPECT_NEAR(out[0b01].real(), -std::sin(theta / 2), 1e-14);
  }
}

TEST(ApplyGate, WireValidation) {
  StateVector s(3);
  EXPECT_THROW(apply_gate(s, Gate::single(1, 0)), InputError);
  EXPECT_THROW(apply_gate(s, Gate::single(0, 3)), InputError);
  EXPECT_THROW(apply_gate(s, Gate{GateKind::Double, {0, 1}, 0.0}), InputError);
}

TEST(ApplyGate, PreservesNormAndParticleNumber) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = testutil::random_circuit(rng, 6, 3, 8);
    const auto s = run_circuit(c);
    EXPECT_NEAR(s.norm(), 1.0, 1e-12);
    for (std::size_t i = 0; i < s.dim(); ++i)
      if (std::abs(s[i]) > 1e-14) ASSERT_EQ(std::popcount(i), 3);
  }
}

TEST(ApplyGate, InverseByNegatedAngle) {
  std::mt19937 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = testutil::random_state(rng, 5);
    auto g = testutil::random_circuit(rng, 5, 2, 2).gates[trial % 2];
    auto back = g;
    back.theta = -g.theta;
    const auto out = apply_gate(apply_gate(s, g), back);
    for (std::size_t i = 0; i < s.dim(); ++i) ASSERT_LT(std::abs(out[i] - s[i]), 1e-12);
  }
}

TEST(Expval, SingleQubitCases) {
  PauliSum z(1);
  z.add(PauliString::parse("Z0"), 1.0);
  EXPECT_DOUBLE_EQ(expval(prepare_reference(1, {}), z), 1.0);
  StateVector plus(1, {cplx(std::sqrt(0.5), 0), cplx(std::sqrt(0.5), 0)});
  EXPECT_NEAR(expval(plus, z), 0.0, 1e-15);
  EXPECT_THROW(expval(StateVector(2), z), InputError);
}

TEST(Expval, HartreeFockEnergyOfH2) {
  const auto ints = parse_fcidump(testutil::data_path("h2/base.fcidump"));
  const auto h = assemble_hamiltonian(ints);
  // Closed shell: E = E_core + 2 h_00 + (00|00)
  const double e_hf = ints.core_energy + 2 * ints.h1(0, 0) + ints.eri(0, 0, 0, 0);
  EXPECT_NEAR(expval(prepare_reference(4, {0, 1}), h), e_hf, 1e-12);
  EXPECT_NEAR(e_hf, -1.116714325062551, 1e-10);
}

TEST(Expval, InvariantUnderZeroAngleGates) {
  std::mt19937 rng(8);
  const auto h = testutil::random_pauli_sum(rng, 5, 30);
  auto c = testutil::random_circuit(rng, 5, 2, 6);
  const double before = expval(run_circuit(c), h);
  c.gates.push_back(Gate::single(0, 4));
  c.gates.push_back(Gate::dbl(0, 1, 2, 3));
  EXPECT_EQ(expval(run_circuit(c), h), before);
}

TEST(Fidelity, BasicCases) {
  std::mt19937 rng(9);
  const auto v = testutil::random_state(rng, 3);
  EXPECT_NEAR(fidelity(v, v), 1.0, 1e-14);
  EXPECT_EQ(fidelity(prepare_reference(2, {0}), prepare_reference(2, {1})), 0.0);
  EXPECT_THROW(fidelity(StateVector(2), StateVector(3)), InputError);
}

TEST(Gradient, ConstantObservableIsZero) {
  std::mt19937 rng(10);
  const auto c = testutil::random_circuit(rng, 4, 2, 5);
  const auto g = gradient(c, c.parameters(), PauliSum(4, 3.0));
  EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Gradient, StationaryAtZeroForSingleGate) {
  // <Z0> = cos(theta) on Single(0,1)|10>; derivative -sin(theta) vanishes at 0.
  Circuit c{2, {0}, {Gate::single(0, 1)}};
  PauliSum z(2);
  z.add(PauliString::parse("Z0"), 1.0);
  const std::vector<double> t0{0.0};
  EXPECT_NEAR(gradient(c, t0, z)[0], 0.0, 1e-15);
  const std::vector<double> t1{0.7};
  EXPECT_NEAR(expval(run_circuit(c, t1), z), -std::cos(0.7), 1e-14);
  EXPECT_NEAR(gradient(c, t1, z)[0], std::sin(0.7), 1e-14);
}

TEST(Gradient, LengthMismatch) {
  Circuit c{2, {0}, {Gate::single(0, 1)}};
  const std::vector<double> t{0.1, 0.2};
  EXPECT_THROW(gradient(c, t, PauliSum(2)), InputError);
}

namespace {

double energy_at(const Circuit& c, std::vector<double> t, const PauliSum& h) { return expval(run_circuit(c, t), h); }

}  // namespace

TEST(Gradient, MatchesFiniteDifferences) {
  std::mt19937 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = testutil::random_circuit(rng, 4, 2, 3 + trial % 4);
    const auto h = testutil::random_pauli_sum(rng, 4, 12);
    const auto theta = c.parameters();
    const auto g = gradient(c, theta, h);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      auto f = [&](double x) {
        auto t = theta;
        t[k] = x;
        return energy_at(c, t, h);
      };
      ASSERT_NEAR(g[static_cast<Eigen::Index>(k)], testutil::central_diff(f, theta[k], 1e-4), 1e-7);
    }
  }
}

TEST(ParamHessian, ConstantObservableIsZero) {
  std::mt19937 rng(14);
  const auto c = testutil::random_circuit(rng, 4, 2, 4);
  EXPECT_LT(param_hessian(c, c.parameters(), PauliSum(4, -1.0)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ParamHessian, SingleGateClosedForm) {
  // <Z0>(theta) = -cos(theta) from |10> -> second derivative cos(theta).
  Circuit c{2, {0}, {Gate::single(0, 1)}};
  PauliSum z(2);
  z.add(PauliString::parse("Z0"), 1.0);
  for (double t : {0.0, 0.4, 2.0}) {
    const std::vector<double> th{t};
    EXPECT_NEAR(param_hessian(c, th, z)(0, 0), std::cos(t), 1e-14);
  }
}

TEST(ParamHessian, MatchesFiniteDifferencesAndIsSymmetric) {
  std::mt19937 rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = testutil::random_circuit(rng, 4, 2, 2 + trial % 4);
    const auto h = testutil::random_pauli_sum(rng, 4, 12);
    const auto theta = c.parameters();
    const auto hess = param_hessian(c, theta, h);
    ASSERT_LT((hess - hess.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    const double step = 1e-3;
    for (std::size_t a = 0; a < theta.size(); ++a)
      for (std::size_t b = 0; b < theta.size(); ++b) {
        auto shifted = [&](double da, double db) {
          auto t = theta;
          t[a] += da;
          t[b] += db;
          return energy_at(c, t, h);
        };
        const double fd = (shifted(step, step) - shifted(step, -step) - shifted(-step, step) + shifted(-step, -step)) /
                          (4 * step * step);
        ASSERT_NEAR(hess(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), fd, 1e-5);
      }
  }
}
