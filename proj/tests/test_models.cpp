#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mixsl/models.hpp"

using namespace mixsl;

namespace {

// tests/oracles/maxwellian_moments.py: n0(r) erf(8 / sqrt(2 Ti(r)))
struct DensitySample {
  double r, rho;
};
constexpr DensitySample kDensity[] = {{0.0, 1.1614642706197436},
                                      {3.3, 1.141311026666251},
                                      {7.25, 0.99234597323968077},
                                      {10.0, 0.88200795065100534},
                                      {14.5, 0.84785262487918909}};

}  // namespace

TEST(Profiles, NormalizationAtReferenceRadius) {
  const auto s = build_profiles();
  EXPECT_DOUBLE_EQ(s.r_p, 7.25);
  EXPECT_DOUBLE_EQ(s.ti(s.r_p), 1.0);
  EXPECT_DOUBLE_EQ(s.te(s.r_p), 1.0);
  EXPECT_DOUBLE_EQ(s.n0(s.r_p), s.n0.c);
  EXPECT_NEAR(s.n0.c, 0.99234597323968201, 1e-12);
  EXPECT_NEAR(s.ti(0.0), 1.4917660431972268, 1e-13);
  EXPECT_NEAR(s.ti(10.0), 0.68224009161808369, 1e-13);
}

TEST(Profiles, DensityIntegratesToRadialExtent) {
  const auto s = build_profiles();
  EXPECT_NEAR(simpson(s.n0, 0.0, 14.5, 4000), 14.5, 1e-8);
}

TEST(Profiles, MonotoneDecreasing) {
  const auto s = build_profiles();
  for (double r = 0.0; r <= 14.5; r += 0.25) {
    EXPECT_LT(s.n0.derivative(r), 0.0);
    EXPECT_LT(s.ti.derivative(r), 0.0);
    EXPECT_GT(f_eq(s, r, 7.9), 0.0);
  }
}

TEST(Profiles, RejectsBadWidths) {
  ProfileParams p;
  p.delta_r_ti = 0.0;
  EXPECT_THROW(build_profiles(p), ConfigError);
}

TEST(DkBackground, TrapezoidMomentMatchesOracle) {
  const auto s = build_profiles();
  const Axis z = Axis::periodic("z", 0.0, 1.0, 5);
  const Axis v = Axis::bounded("v", -8.0, 8.0, 65);
  for (const auto& d : kDensity) {
    const Grid g({Axis::bounded("x", d.r, d.r + 1.0, 5), Axis::bounded("y", 0.0, 1.0, 5), z, v});
    const auto b = dk_background(g, s);
    EXPECT_NEAR(b.rho0(0, 0), d.rho, 1e-6) << d.r;
    EXPECT_DOUBLE_EQ(b.te(0, 0), s.te(d.r));
  }
}

TEST(InitItg, ZeroEpsilonIsEquilibrium) {
  const auto s = build_profiles();
  ItgParams p;
  p.epsilon = 0.0;
  const Grid g = itg_grid(p, 8, 8, 5, 7);
  const Field f = init_itg(g, s, p);
  const Field eq = equilibrium_itg(g, s);
  for (std::size_t k = 0; k < f.size(); ++k) EXPECT_EQ(f[k], eq[k]);
}

TEST(InitItg, PeakFactorAndZeroZMean) {
  const auto s = build_profiles();
  ItgParams p;
  EXPECT_DOUBLE_EQ(itg_perturbation_width(s), 8.0);
  const Grid g({Axis::bounded("x", -7.25, 7.25, 5), Axis::bounded("y", -7.25, 7.25, 5),
                Axis::periodic("z", 0.0, p.length, 8), Axis::bounded("v", -8.0, 8.0, 7)});
  const Field f = init_itg(g, s, p);
  const Field eq = equilibrium_itg(g, s);
  EXPECT_NEAR(f(4, 2, 0, 3) / eq(4, 2, 0, 3), 1.0 + p.epsilon, 1e-15);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t iv = 0; iv < 7; ++iv) {
        double mean = 0.0;
        for (std::size_t iz = 0; iz < 8; ++iz) mean += f(i, j, iz, iv) - eq(i, j, iz, iv);
        EXPECT_NEAR(mean / 8.0, 0.0, 1e-12);
        for (std::size_t iz = 0; iz < 8; ++iz) EXPECT_GE(f(i, j, iz, iv), 0.0);
      }
}

TEST(DShapeMap, BoundarySamples) {
  const Vec2 a = dshape::map(1.0, 0.0);
  const Vec2 b = dshape::map(1.0, 0.25);
  EXPECT_NEAR(a.x, 2.31, 1e-12);
  EXPECT_NEAR(a.y, 0.0, 1e-12);
  EXPECT_NEAR(b.x, 1.44624, 1e-12);
  EXPECT_NEAR(b.y, 1.0126, 1e-12);
  EXPECT_NEAR(xi2_of_point(2.31, 0.0), 0.0, 1e-12);
  EXPECT_NEAR(xi2_of_point(1.44624, 1.0126), 0.25, 1e-12);
  EXPECT_NEAR(xi_of_point(2.31, 0.0).xi1, 1.0, 1e-12);
}

TEST(DShapeMap, InverseRoundTrip) {
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> u1(-2.0, 1.0), u2(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const double xi1 = u1(rng), xi2 = u2(rng);
    const Vec2 p = dshape::map(xi1, xi2);
    const auto back = xi_of_point(p.x, p.y);
    EXPECT_NEAR(back.xi1, xi1, 1e-8);
    const double d = std::abs(back.xi2 - xi2);
    EXPECT_LT(std::min(d, 1.0 - d), 1e-8);
  }
}

TEST(PerturbGc, Examples) {
  const Grid g = dshape_grid(30, 55);
  const auto st = dshape_steady_state(g);
  const auto& dom = *st.domain;

  PerturbParams off;
  off.epsilon = 1e-300;
  const Field same = perturb_gc(st.rho_bar0, st.phi0, dom, off);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(same[k], st.rho_bar0[k]);

  const PerturbParams p;
  const Field r = perturb_gc(st.rho_bar0, st.phi0, dom, p);
  double num = 0.0, den = 0.0;
  bool touched = false;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!dom.is_interior(k)) {
      EXPECT_EQ(r[k], st.rho_bar0[k]);
      continue;
    }
    num += std::abs(r[k] - st.rho_bar0[k]);
    den += std::abs(st.rho_bar0[k]);
    touched = touched || r[k] != st.rho_bar0[k];
    EXPECT_GE(r[k] * st.rho_bar0[k], 0.0);
  }
  EXPECT_TRUE(touched);
  EXPECT_LE(num / den, p.epsilon);

  // |phi0 - phi_p| = 1 gives a factor exp(-2e4)
  Field far = st.phi0;
  for (std::size_t k = 0; k < g.size(); ++k) far[k] = p.phi_p + 1.0;
  const Field r2 = perturb_gc(st.rho_bar0, far, dom, p);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(r2[k], st.rho_bar0[k]);
}

TEST(SteadyState, DensityIsExpOfPotential) {
  const auto st = dshape_steady_state(dshape_grid(30, 55));
  for (std::size_t k = 0; k < st.phi0.size(); ++k)
    if (st.domain->is_interior(k)) EXPECT_DOUBLE_EQ(st.rho_bar0[k], std::exp(-st.phi0[k]) - 1.0);
}
