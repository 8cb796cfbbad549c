#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rbsde_lab/rbsde.hpp"

using namespace rbsde_lab;

namespace {

ObstacleSpec free_terminal(const Lattice& lat, std::function<double(double)> xi) {
  ObstacleSpec obs;
  obs.lower = Barrier::absent(lat.steps());
  obs.upper = Barrier::absent(lat.steps());
  obs.terminal.resize(static_cast<std::size_t>(2 * lat.steps() + 1));
  for (int j = -lat.steps(); j <= lat.steps(); ++j)
    obs.terminal[static_cast<std::size_t>(j + lat.steps())] = xi(lat.value(lat.steps(), j));
  return obs;
}

}  // namespace

TEST(Rbsde, ExponentialMomentClosedForm) {
  for (double c : {1.0, 1.25, 2.0}) {
    Lattice lat(1.0, 16, ControlSet({0.09}), c);
    const auto obs = free_terminal(lat, [](double b) { return std::exp(b); });
    const auto sol = solve_rbsde(lat, Policy(lat, 0), generator_zero(), obs);
    const double a = 0.09, dt = lat.dt(), dx = lat.dx();
    const double factor = 1.0 + a * dt / (dx * dx) * (std::cosh(dx) - 1.0);
    EXPECT_NEAR(sol.y(0, 0), std::pow(factor, 16), 1e-13) << c;
  }
}

TEST(Rbsde, AffineDriverTelescopes) {
  Lattice lat(1.0, 20, ControlSet({0.5}));
  const auto obs = free_terminal(lat, [](double) { return 1.0; });
  const double r = 0.3;
  const auto sol = solve_rbsde(lat, Policy(lat, 0), generator_affine_y(r), obs);
  EXPECT_NEAR(sol.y(0, 0), std::pow(1.0 + r * lat.dt(), 20), 1e-13);
}

TEST(Rbsde, ZIsCentralDifference) {
  Lattice lat(1.0, 6, ControlSet({0.25, 1.0}), 1.2);
  const auto obs = free_terminal(lat, [](double b) { return b * b * b; });
  for (std::uint32_t k = 0; k < 2; ++k) {
    const auto sol = solve_rbsde(lat, Policy(lat, k), generator_zero(), obs);
    for (int j = -5; j <= 5; ++j)
      EXPECT_NEAR(sol.z(5, j), (sol.y(6, j + 1) - sol.y(6, j - 1)) / (2 * lat.dx()), 1e-12);
  }
}

TEST(Rbsde, MatchesBruteForceOptimalStopping) {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 12; ++rep) {
    const int n = 2 + rep % 3;  // N <= 4
    auto inst = oracle::random_instance(rng, n, 2);
    for (std::uint32_t k = 0; k < 2; ++k) {
      const Policy pol(inst.lat, k);
      const auto sol = solve_rbsde(inst.lat, pol, inst.gen, inst.obs);
      const double brute = oracle::brute_force_stopping(inst.lat, inst.gen, inst.obs, pol);
      EXPECT_NEAR(sol.y(0, 0), brute, 1e-12) << inst.label << " N=" << n;
    }
  }
}

TEST(Rbsde, MatchesDirectRecursionNodewise) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 8; ++rep) {
    auto inst = oracle::random_instance(rng, 10 + rep, 3);
    const auto pol = sample_policies(inst.lat, 1, 100 + rep).front();
    const auto sol = solve_rbsde(inst.lat, pol, inst.gen, inst.obs);
    const auto ref = oracle::reflected(inst.lat, inst.gen, inst.obs, pol);
    for (int i = 0; i <= inst.lat.steps(); ++i)
      for (int j = -i; j <= i; ++j) EXPECT_NEAR(sol.y(i, j), ref[i][j + i], 1e-12);
  }
}

TEST(Rbsde, SkorokhodAndDomination) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    auto inst = oracle::random_instance(rng, 16, 2);
    const auto pol = sample_policies(inst.lat, 1, rep).front();
    const auto sol = solve_rbsde(inst.lat, pol, inst.gen, inst.obs);
    for (int i = 0; i < inst.lat.steps(); ++i)
      for (int j = -i; j <= i; ++j) {
        const double l = *inst.obs.lower.at(i, j);
        EXPECT_GE(sol.y(i, j), l);
        EXPECT_GE(sol.dk_minus(i, j), 0.0);
        EXPECT_EQ(sol.dk_plus(i, j), 0.0);
        EXPECT_EQ((sol.y(i, j) - l) * sol.dk_minus(i, j), 0.0);
      }
  }
}

TEST(Rbsde, SnellEnvelopeAgreesForZeroDriver) {
  std::mt19937_64 rng(5);
  auto inst = oracle::random_instance(rng, 20, 2);
  const Policy pol(inst.lat, 1);
  const auto sol = solve_rbsde(inst.lat, pol, generator_zero(), inst.obs);
  const auto snell = snell_envelope(inst.lat, pol, inst.obs);
  for (std::size_t q = 0; q < snell.size(); ++q) EXPECT_NEAR(sol.y.values()[q], snell.values()[q], 1e-14);
}

TEST(Rbsde, GuardViolation) {
  Lattice lat(1.0, 4, ControlSet({1.0}));
  const auto obs = free_terminal(lat, [](double) { return 1.0; });
  EXPECT_THROW(solve_rbsde(lat, Policy(lat, 0), generator_affine_y(4.0), obs), GuardViolation);
  EXPECT_NO_THROW(solve_rbsde(lat, Policy(lat, 0), generator_affine_y(3.9), obs));
}

TEST(Rbsde, MonotoneSchemeCheck) {
  Lattice lat(1.0, 4, ControlSet({0.25, 1.0}));
  EXPECT_TRUE(monotone_scheme(lat, generator_zero()));
  const Generator steep("steep", [](double, double, double, double z, double) { return 3.0 * z; }, 0.0, 3.0);
  EXPECT_FALSE(monotone_scheme(lat, steep));
}

TEST(Rbsde, DoublyReflectedStaysBetweenBarriers) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 10; ++rep) {
    auto inst = oracle::random_instance(rng, 12, 2, true);
    const auto pol = sample_policies(inst.lat, 1, rep).front();
    const auto sol = solve_drbsde_fixed(inst.lat, pol, inst.gen, inst.obs);
    for (int i = 0; i <= inst.lat.steps(); ++i)
      for (int j = -i; j <= i; ++j) {
        EXPECT_GE(sol.y(i, j), *inst.obs.lower.at(i, j) - 1e-15);
        EXPECT_LE(sol.y(i, j), *inst.obs.upper.at(i, j) + 1e-15);
        if (i < inst.lat.steps()) {
          EXPECT_EQ(sol.dk_minus(i, j) * sol.dk_plus(i, j), 0.0);
          EXPECT_EQ(sol.dk(i, j), sol.dk_minus(i, j) - sol.dk_plus(i, j));
        }
      }
    EXPECT_THROW(solve_rbsde(inst.lat, pol, inst.gen, inst.obs), std::invalid_argument);
  }
}

TEST(Rbsde, InfiniteUpperIsBitIdentical) {
  std::mt19937_64 rng(17);
  auto inst = oracle::random_instance(rng, 15, 3);
  const auto pol = sample_policies(inst.lat, 1, 3).front();
  const auto a = solve_rbsde(inst.lat, pol, inst.gen, inst.obs);
  const auto b = solve_drbsde_fixed(inst.lat, pol, inst.gen, inst.obs);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.dk, b.dk);
}

TEST(Obstacle, ValidationErrors) {
  Lattice lat(1.0, 3, ControlSet({1.0}));
  EXPECT_THROW(make_obstacle(lat, [](double, double) { return 1.0; }, {}, [](double) { return 0.0; }),
               std::invalid_argument);
  EXPECT_THROW(make_obstacle(lat, [](double, double) { return 1.0; }, [](double, double) { return 0.0; }),
               std::invalid_argument);
  const auto ok = make_obstacle(lat, [](double, double) { return 0.0; }, [](double, double) { return 1.0; },
                                [](double) { return 0.5; });
  EXPECT_TRUE(ok.has_upper());
  EXPECT_EQ(ok.xi(3, -3), 0.5);
  Barrier b = Barrier::absent(3);
  EXPECT_TRUE(b.empty());
  EXPECT_FALSE(b.at(1, 0).has_value());
}
