#include <gtest/gtest.h>

#include "tailgate/checks.hpp"
#include "test_util.hpp"

using namespace tailgate;

TEST(EigvecDerivativeCheck, PassesAcrossSeeds) {
  for (unsigned seed : {1u, 7u, 35u, 99u, 12345u}) {
    const auto r = eigvec_derivative_check(seed);
    EXPECT_EQ(r.trials, 100);
    EXPECT_LT(r.max_deviation, 1e-6) << "seed " << seed;
    EXPECT_LT(r.max_orthogonality, 1e-10) << "seed " << seed;
  }
}

TEST(ValidateAll, CleanH2GridPasses) {
  auto g = load_grid(testutil::data_path("h2/manifest.json"));
  const auto r = validate_all(g, 3);
  EXPECT_TRUE(r.gauge.ok());
  EXPECT_EQ(r.checks.size(), 6u);
  for (const auto& c : r.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.value;
  EXPECT_TRUE(r.passed());
  const auto j = to_json(r);
  EXPECT_TRUE(j.at("passed").get<bool>());
}

TEST(ValidateAll, SignFlipStopsAtTheGauge) {
  auto g = load_grid(testutil::data_path("h2/manifest.json"));
  auto& bad = g.points.at({{2, 1}});
  bad.h1.row(1) *= -1.0;
  bad.h1.col(1) *= -1.0;
  bad.h1(1, 1) *= -1.0;
  const auto r = validate_all(g, 3);
  EXPECT_FALSE(r.gauge.ok());
  EXPECT_TRUE(r.checks.empty());
  EXPECT_FALSE(r.passed());
  EXPECT_THROW(hamiltonian_derivative(g, {2}), InputError);
}
