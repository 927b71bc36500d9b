#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "mixsl/geometry.hpp"
#include "mixsl/transport.hpp"

using namespace mixsl;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> sampled(std::size_t n, double shift) {
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i)
    f[i] = std::sin(kTwoPi * (static_cast<double>(i) / static_cast<double>(n) - shift));
  return f;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
  return e;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

const std::vector<double> kUnit{1.0};

}  // namespace

TEST(SlAdvect1d, IntegerShiftIsExactPermutation) {
  const std::size_t n = 20;
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = std::cos(0.9 * static_cast<double>(i * i));
  const double dx = 0.05;
  const auto g = sl_advect_1d(f, kUnit, 3.0 * dx, dx, LineFill::wrap());
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(g[i], f[(i + n - 3) % n]);
}

TEST(SlAdvect1d, ZeroSpeedIsIdentity) {
  const auto f = sampled(16, 0.1);
  const std::vector<double> a(16, 0.0);
  EXPECT_EQ(sl_advect_1d(f, a, 0.7, 1.0 / 16, LineFill::wrap()), f);
}

TEST(SlAdvect1d, TranslatedSineConverges) {
  std::vector<double> errs;
  for (std::size_t n : {32u, 64u, 128u, 256u}) {
    const auto g = sl_advect_1d(sampled(n, 0.0), kUnit, 0.37, 1.0 / static_cast<double>(n), LineFill::wrap());
    errs.push_back(max_abs_diff(g, sampled(n, 0.37)));
  }
  for (std::size_t k = 1; k < errs.size(); ++k) EXPECT_GE(std::log2(errs[k - 1] / errs[k]), 2.8) << k;
}

TEST(SlAdvect1d, FootTooFarOnBoundedLine) {
  const auto f = sampled(10, 0.0);
  EXPECT_THROW(sl_advect_1d(f, kUnit, 20.0, 1.0, LineFill::constant(0.0, 0.0)), ConfigError);
}

TEST(SlAdvect1d, InflowTakesFillValue) {
  const std::vector<double> f(10, 1.0);
  const auto g = sl_advect_1d(f, kUnit, 2.5, 1.0, LineFill::constant(7.0, -1.0));
  EXPECT_EQ(g[0], 7.0);
  EXPECT_EQ(g[1], 7.0);
  EXPECT_EQ(g[2], 7.0);
  EXPECT_EQ(g[9], 1.0);
}

TEST(FdRhs1d, ConstantFieldHasZeroRhs) {
  const std::vector<double> f(12, 4.0);
  for (double r : fd_rhs_1d(f, std::vector<double>{2.5}, 0.1, LineFill::wrap())) EXPECT_NEAR(r, 0.0, 1e-12);
}

TEST(FdRhs1d, SineConvergesAtFifthOrder) {
  std::vector<double> errs;
  for (std::size_t n : {64u, 128u, 256u}) {
    const auto r = fd_rhs_1d(sampled(n, 0.0), kUnit, 1.0 / static_cast<double>(n), LineFill::wrap());
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      e = std::max(e, std::abs(r[i] + kTwoPi * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n))));
    errs.push_back(e);
  }
  for (std::size_t k = 1; k < errs.size(); ++k) EXPECT_GE(std::log2(errs[k - 1] / errs[k]), 4.5) << k;
}

TEST(FdRhs1d, NegativeSpeedMirrorsPositive) {
  const std::size_t n = 24;
  std::vector<double> f(n), m(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = std::exp(std::sin(0.7 * static_cast<double>(i))) + (i == 5 ? 2.0 : 0.0);
  // x -> -x on a periodic line maps node i to node (n - i) mod n
  for (std::size_t i = 0; i < n; ++i) m[(n - i) % n] = f[i];
  for (auto form : {FluxForm::kInterfaceSpeed, FluxForm::kUpwindProduct, FluxForm::kLaxFriedrichs}) {
    const auto rp = fd_rhs_1d(f, std::vector<double>{1.0}, 0.1, LineFill::wrap(), form);
    const auto rm = fd_rhs_1d(m, std::vector<double>{-1.0}, 0.1, LineFill::wrap(), form);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(rm[(n - i) % n], rp[i], 1e-12) << to_string(form);
  }
}

TEST(Rk4, ZeroRhsIsIdentity) {
  std::vector<double> y{1.0, -2.0, 3.5};
  const auto y0 = y;
  rk4_step(y, [](const std::vector<double>&, std::vector<double>& out) { std::fill(out.begin(), out.end(), 0.0); }, 0.3);
  EXPECT_EQ(y, y0);
}

TEST(Rk4, ExponentialGrowth) {
  std::vector<double> y{2.0};
  rk4_step(y, [](const std::vector<double>& v, std::vector<double>& out) { out[0] = v[0]; }, 0.1);
  EXPECT_LT(std::abs(y[0] / (2.0 * std::exp(0.1)) - 1.0), 1e-7);
}

TEST(FdAdvect1d, MassConservedOverHundredSteps) {
  const std::size_t n = 64;
  std::vector<double> f = sampled(n, 0.0);
  for (double& v : f) v += 2.0;
  const double m0 = sum(f);
  for (int s = 0; s < 100; ++s) fd_advect_1d(f, kUnit, 0.4 / n, 1.0 / n, LineFill::wrap(), FluxForm::kInterfaceSpeed);
  EXPECT_LE(std::abs(sum(f) - m0), 1e-12 * std::abs(m0));
}

TEST(FdAdvect1d, CflViolationThrows) {
  std::vector<double> f(16, 1.0);
  EXPECT_THROW(fd_advect_1d(f, kUnit, 0.1, 1.0 / 16, LineFill::wrap(), FluxForm::kInterfaceSpeed), CflError);
}

TEST(StrangDk, ZeroSpeedsIsIdentity) {
  // f independent of z, so the v∥ z-advection is also still
  const Axis a = Axis::periodic("a", 0, 1, 6);
  const Grid g({a, a, a, Axis::bounded("v", -1, 1, 7)});
  Field f(g);
  for (std::size_t k = 0; k < f.size(); ++k) {
    const auto idx = g.unflatten(k);
    f[k] = std::sin(0.3 * static_cast<double>(idx[0] + 7 * idx[1] + 31 * idx[3]));
  }
  const VelocityField u{std::vector<double>(216, 0.0), std::vector<double>(216, 0.0), std::vector<double>(216, 0.0)};
  const auto plane = Advection2D::box(Grid({a, a}));
  for (auto m : {Method::kSemiLagrangian, Method::kFiniteDifference}) {
    Field w = f;
    strang_step_dk(w, u, 0.05, plane, {m}, [](Vec2, std::size_t) { return 0.0; });
    for (std::size_t k = 0; k < w.size(); ++k) EXPECT_NEAR(w[k], f[k], 1e-14);
  }
}

TEST(StrangDk, PureZTranslationPerVSlice) {
  const std::size_t nz = 8, nv = 7;
  const Grid g({Axis::periodic("x", 0, 1, 5), Axis::periodic("y", 0, 1, 5), Axis::periodic("z", 0, 8, nz),
                Axis::bounded("v", -3, 3, nv)});
  Field f(g);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = std::cos(0.37 * static_cast<double>(k % 97));
  VelocityField u{std::vector<double>(25 * nz, 0.0), std::vector<double>(25 * nz, 0.0),
                  std::vector<double>(25 * nz, 0.0)};
  const auto plane = Advection2D::box(Grid({g.axis(0), g.axis(1)}));
  Field w = f;
  // dz = 1 and dt = 2: each z half step moves slice v by v nodes
  strang_step_dk(w, u, 2.0, plane, {Method::kSemiLagrangian}, [](Vec2, std::size_t) { return 0.0; });
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t iz = 0; iz < nz; ++iz)
        for (std::size_t iv = 0; iv < nv; ++iv) {
          const auto shift = 2 * (static_cast<std::ptrdiff_t>(iv) - 3);
          const std::size_t src = g.axis(2).resolve(static_cast<std::ptrdiff_t>(iz) - shift);
          EXPECT_NEAR(w(i, j, iz, iv), f(i, j, src, iv), 1e-14);
        }
}

TEST(StrangDk, RejectsBadShapes) {
  const Axis a = Axis::periodic("a", 0, 1, 5);
  Field bad(Grid({a, a, a}));
  Field few(Grid({a, a, a, Axis::bounded("v", -1, 1, 5)}));
  VelocityField u;
  const auto plane = Advection2D::box(Grid({a, a}));
  EXPECT_THROW(strang_step_dk(bad, u, 0.1, plane, {}, [](Vec2, std::size_t) { return 0.0; }), ConfigError);
  EXPECT_THROW(strang_step_dk(few, u, 0.1, plane, {}, [](Vec2, std::size_t) { return 0.0; }), ConfigError);
}

TEST(Advection2D, RotatingBlobOnDiskAt128) {
  const std::size_t n = 128;
  const Grid g({Axis::bounded("x", -1, 1, n), Axis::bounded("y", -1, 1, n)});
  const auto dom = make_domain(Disk{{0.0, 0.0}, 0.95}, g, 3);
  const auto adv = Advection2D::embedded(dom);
  std::vector<double> ux(g.size()), uy(g.size()), f(g.size()), f0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double x = g.axis(0).coord(i), y = g.axis(1).coord(j);
      const std::size_t k = i * n + j;
      ux[k] = -y;
      uy[k] = x;
      const double r2 = (x - 0.45) * (x - 0.45) + y * y;
      f[k] = dom.is_interior(k) ? std::exp(-r2 / (2.0 * 0.1 * 0.1)) : 0.0;
    }
  f0 = f;
  const double period = kTwoPi;
  const auto steps = static_cast<std::size_t>(std::ceil(period / adv.max_dt(ux, uy, 0.5)));
  const double dt = period / static_cast<double>(steps);
  double lo = 0.0, hi = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    adv.fd_step(f, ux, uy, dt);
    for (double v : f) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  double l1 = 0.0, l1_0 = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    l1 += std::abs(f[k] - f0[k]);
    l1_0 += std::abs(f0[k]);
  }
  EXPECT_LT(l1 / l1_0, 0.05);
  EXPECT_GE(lo, -0.01);
  EXPECT_LE(hi, 1.0 + 0.01);
  EXPECT_NEAR(sum(f), sum(f0), 1e-12 * sum(f0));
}

TEST(CheckSwitch, StrictThreshold) {
  const double h = 0.1, h3 = h * h * h;
  EXPECT_TRUE(check_switch(1.0, 1.0 + 2.0 * h3, h));
  EXPECT_FALSE(check_switch(1.0, 1.0 + 0.5 * h3, h));
  EXPECT_FALSE(check_switch(0.0, h3, h));
  EXPECT_TRUE(check_switch(1.0, 1.0 - 2.0 * h3, h));
}

TEST(PhaseSwitch, LatchesOnceAndChangesDt) {
  PhaseSwitch s(0.1, 4.0, 1.0);
  EXPECT_EQ(s.dt(), 4.0);
  EXPECT_FALSE(s.observe(1.0));
  EXPECT_FALSE(s.observe(1.0 + 1e-4));
  EXPECT_TRUE(s.observe(1.0 + 1e-2));
  EXPECT_EQ(s.phase(), Phase::kNonlinearFD);
  EXPECT_EQ(s.dt(), 1.0);
  EXPECT_FALSE(s.observe(1.0));
  EXPECT_FALSE(s.observe(5.0));
  EXPECT_EQ(s.phase(), Phase::kNonlinearFD);
  EXPECT_EQ(s.switches(), 1);
}
