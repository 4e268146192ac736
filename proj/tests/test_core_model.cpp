#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "asep/core_model.hpp"

using namespace asep;

TEST(LatticeConfig, SizeAndAccess) {
  EXPECT_THROW(LatticeConfig(1), DomainError);
  LatticeConfig eta(std::vector<std::uint8_t>{1, 0, 1, 1});
  EXPECT_EQ(eta.size(), 4u);
  EXPECT_EQ(eta.site(1), 1);
  EXPECT_EQ(eta.site(2), 0);
  EXPECT_EQ(eta.particle_count(), 3);
  eta.swap_bond(0);
  EXPECT_EQ(eta.occupations()[0], 0);
  EXPECT_EQ(eta.occupations()[1], 1);
  eta.flip(3);
  EXPECT_EQ(eta.particle_count(), 2);
  EXPECT_THROW(eta.set(0, 2), DomainError);
  EXPECT_THROW(LatticeConfig(std::vector<std::uint8_t>{0, 3}), DomainError);
}

TEST(ReservoirDensities, DirectSubstitution) {
  const auto a = reservoir_densities(BoundaryRates{2, 1, 2, 1});
  EXPECT_DOUBLE_EQ(a.rho_minus, 0.5);
  EXPECT_DOUBLE_EQ(a.rho_plus, 0.5);
  const auto b = reservoir_densities(BoundaryRates{3, 4, 1, 1});
  EXPECT_DOUBLE_EQ(b.rho_minus, 0.75);
  EXPECT_DOUBLE_EQ(b.rho_plus, 0.2);
  EXPECT_THROW(reservoir_densities(BoundaryRates{0, 1, 0, 1}), DomainError);
}

TEST(ReservoirDensities, BreakpointIsLeftClosed) {
  const RateSchedule s({{0.0, BoundaryRates{2, 1, 2, 1}}, {1.0, BoundaryRates{6, 1, 2, 1}}}, 2.0);
  EXPECT_DOUBLE_EQ(reservoir_densities(s, 0.999).rho_minus, 0.5);
  EXPECT_DOUBLE_EQ(reservoir_densities(s, 1.0).rho_minus, 0.75);
  EXPECT_DOUBLE_EQ(reservoir_densities(s, 2.0).rho_minus, 0.75);
  try {
    reservoir_densities(s, 2.5);
    FAIL() << "expected OutOfRangeError";
  } catch (const OutOfRangeError& e) {
    EXPECT_NE(std::string(e.what()).find("2.5"), std::string::npos);
  }
  EXPECT_THROW(reservoir_densities(s, -0.1), OutOfRangeError);
}

TEST(ReservoirDensities, RandomPositiveRatesLandInUnitInterval) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(1e-6, 1e3);
  for (int k = 0; k < 1000; ++k) {
    const auto r = reservoir_densities(BoundaryRates{u(gen), u(gen), u(gen), u(gen)});
    EXPECT_GE(r.rho_minus, 0.0);
    EXPECT_LE(r.rho_minus, 1.0);
    EXPECT_GE(r.rho_plus, 0.0);
    EXPECT_LE(r.rho_plus, 1.0);
  }
}

TEST(RateSchedule, Validation) {
  using I = RateSchedule::Interval;
  const BoundaryRates r{1, 1, 1, 1};
  EXPECT_THROW(RateSchedule({}), DomainError);
  EXPECT_THROW(RateSchedule({I{0.5, r}}), DomainError);
  EXPECT_THROW(RateSchedule({I{0.0, r}, I{1.0, r}, I{1.0, r}}), DomainError);
  EXPECT_THROW(RateSchedule({I{0.0, BoundaryRates{-1, 1, 1, 1}}}), DomainError);
  EXPECT_THROW(RateSchedule({I{0.0, BoundaryRates{NAN, 1, 1, 1}}}), DomainError);
  EXPECT_THROW(RateSchedule({I{0.0, r}, I{1.0, r}}, 1.0), DomainError);
  const RateSchedule s({I{0.0, r}, I{1.0, BoundaryRates{0, 1, 1, 1}}}, 3.0);
  EXPECT_EQ(s.next_breakpoint(0.0), 1.0);
  EXPECT_EQ(s.next_breakpoint(1.0), 3.0);
  EXPECT_NO_THROW(s.require_positive(0.5));
  EXPECT_THROW(s.require_positive(2.0), DomainError);
  EXPECT_THROW(s.require_positive(4.0), OutOfRangeError);
}

TEST(LiggettRates, DirectSubstitution) {
  auto check = [](double p, double s, double rm, double rp, BoundaryRates want) {
    const auto got = liggett_rates(p, s, rm, rp).rates_at(0.0);
    EXPECT_NEAR(got.alpha, want.alpha, 1e-15);
    EXPECT_NEAR(got.beta, want.beta, 1e-15);
    EXPECT_NEAR(got.gamma, want.gamma, 1e-15);
    EXPECT_NEAR(got.delta, want.delta, 1e-15);
  };
  check(1, 1, 0.5, 0.5, {1.0, 1.0, 0.5, 0.5});
  check(1, 2, 1.0, 0.0, {3, 3, 0, 0});
  check(2, 1, 0.3, 0.8, {0.9, 0.6, 0.7, 0.8});
  EXPECT_THROW(liggett_rates(1, 1, 1.5, 0.5), DomainError);
  EXPECT_THROW(liggett_rates(1, 1, 0.5, -0.1), DomainError);
  EXPECT_THROW(liggett_rates(0, 1, 0.5, 0.5), DomainError);
}

TEST(LiggettRates, DensitiesApproachTargetsForLargeSigma) {
  const double p = 1.0, s = 1e6;
  const auto r = reservoir_densities(liggett_rates(p, s, 0.3, 0.8), 0.0);
  const double want_minus = 0.3 * (p + s) / ((p + s) * 0.3 + s * 0.7);
  EXPECT_DOUBLE_EQ(r.rho_minus, want_minus);
  EXPECT_NEAR(r.rho_minus, 0.3, 1e-4);
  EXPECT_NEAR(r.rho_plus, 0.8, 1e-4);
}

// Bernoulli(rho) is an invariant measure of the unaccelerated generator with
// the Liggett boundary rates: check pi Q = 0 on the full state space.
TEST(LiggettRates, BernoulliIsStationaryForSmallLattice) {
  const int n = 3, states = 1 << n;
  for (double p : {1.0, 2.5}) {
    for (double sigma : {0.5, 1.0, 3.0}) {
      for (double rho : {0.2, 0.5, 0.7}) {
        const auto r = liggett_rates(p, sigma, rho, rho).rates_at(0.0);
        std::vector<double> pi(states), flow(states, 0.0);
        auto bit = [](int x, int i) { return (x >> i) & 1; };
        for (int x = 0; x < states; ++x) {
          double w = 1.0;
          for (int i = 0; i < n; ++i) w *= bit(x, i) ? rho : 1.0 - rho;
          pi[x] = w;
        }
        auto move = [&](int x, int y, double rate) {
          flow[x] -= pi[x] * rate;
          flow[y] += pi[x] * rate;
        };
        for (int x = 0; x < states; ++x) {
          for (int i = 0; i + 1 < n; ++i) {
            const int a = bit(x, i), b = bit(x, i + 1);
            const int y = x ^ (1 << i) ^ (1 << (i + 1));
            if (a == 1 && b == 0) move(x, y, sigma + p);
            if (a == 0 && b == 1) move(x, y, sigma);
          }
          move(x, x ^ 1, bit(x, 0) ? r.gamma : r.alpha);
          move(x, x ^ (1 << (n - 1)), bit(x, n - 1) ? r.beta : r.delta);
        }
        for (int x = 0; x < states; ++x) EXPECT_NEAR(flow[x], 0.0, 1e-12) << "p=" << p << " sigma=" << sigma;
      }
    }
  }
}

TEST(ScalingPlan, StrictExponents) {
  const auto plan = ScalingPlan::strict(1024, 1.0 / 7.0);
  EXPECT_NEAR(plan.sigma, std::pow(1024.0, 6.0 / 7.0), 1e-9);
  EXPECT_NEAR(plan.sigma, 380.41, 0.01);
  EXPECT_EQ(plan.K, 141u);
  EXPECT_DOUBLE_EQ(plan.sigma_tilde, 1024.0);
  EXPECT_TRUE(validate_scaling(plan).pass);
  // 128^(5/7) = 32 exactly in real arithmetic
  EXPECT_EQ(ScalingPlan::strict(128, 1.0 / 7.0).K, 32u);
  EXPECT_DOUBLE_EQ(ScalingPlan::strict(64, 1.0 / 7.0, 0.5).sigma_tilde, 8.0);
}

TEST(ScalingPlan, BlockTooLargeIsHardError) {
  EXPECT_THROW(validate_scaling(ScalingPlan::exploratory(100, 10, 10, 60)), DomainError);
  EXPECT_THROW(validate_scaling(ScalingPlan::exploratory(100, 10, 10, 50)), DomainError);
  EXPECT_NO_THROW(validate_scaling(ScalingPlan::exploratory(100, 10, 10, 49)));
}

TEST(ScalingPlan, AdvisoryFlags) {
  const auto rep = validate_scaling(ScalingPlan::exploratory(256, 16, 256, 64));
  EXPECT_TRUE(rep.pass);
  EXPECT_NEAR(rep.ratios[2].value, 4096.0 / 262144.0, 1e-15);
  EXPECT_FALSE(rep.ratios[2].flagged);
  EXPECT_GT(rep.ratios[0].value, 1.0);
  EXPECT_TRUE(rep.ratios[0].flagged);
  EXPECT_TRUE(rep.any_flagged());
}

TEST(ScalingPlan, StrictKappaRange) {
  EXPECT_FALSE(validate_scaling(ScalingPlan::strict(512, 0.3)).pass);
  EXPECT_FALSE(validate_scaling(ScalingPlan::strict(512, 0.0)).pass);
  EXPECT_TRUE(validate_scaling(ScalingPlan::strict(512, 0.1)).pass);
}

TEST(ScalingPlan, StrictValidationMonotoneInN) {
  for (double kappa : {0.05, 1.0 / 7.0, 0.2, 0.27}) {
    bool passed = false;
    for (std::size_t n = 16; n <= (1u << 16); n *= 2) {
      const auto plan = ScalingPlan::strict(n, kappa);
      if (2 * plan.K >= plan.N) continue;
      const bool pass = validate_scaling(plan).pass;
      if (passed) { EXPECT_TRUE(pass) << "kappa=" << kappa << " N=" << n; }
      passed = passed || pass;
    }
  }
}

TEST(ScalingPlan, ExploratoryValidation) {
  EXPECT_THROW(ScalingPlan::exploratory(1, 1, 1, 1), DomainError);
  EXPECT_THROW(ScalingPlan::exploratory(10, -1, 1, 1), DomainError);
  EXPECT_THROW(ScalingPlan::exploratory(10, 1, 0, 1), DomainError);
  EXPECT_THROW(ScalingPlan::exploratory(10, 1, 1, 0), DomainError);
  EXPECT_NO_THROW(ScalingPlan::exploratory(10, 0, 1, 1));
}
