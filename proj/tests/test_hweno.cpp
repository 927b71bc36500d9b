#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "mixsl/hweno.hpp"

using namespace mixsl::hweno;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> sine_line(std::size_t n) {
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = std::sin(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
  return f;
}

// Periodic window u_{i-4..i+4} around node i.
std::array<double, kFluxWindow> window_at(const std::vector<double>& u, std::size_t i, std::ptrdiff_t shift) {
  const auto n = static_cast<std::ptrdiff_t>(u.size());
  std::array<double, kFluxWindow> w{};
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(kFluxWindow); ++k) {
    const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + k - 4 + shift;
    w[static_cast<std::size_t>(k)] = u[static_cast<std::size_t>(((j % n) + n) % n)];
  }
  return w;
}

double order(double e_coarse, double e_fine) { return std::log2(e_coarse / e_fine); }

}  // namespace

TEST(Derivative4th, ConstantGivesZero) {
  const std::vector<double> f(9, 3.5);
  for (double d : derivative_4th(f, 0.1)) EXPECT_EQ(d, 0.0);
}

TEST(Derivative4th, LinearGivesOne) {
  std::vector<double> ext(14);
  for (std::size_t i = 0; i < ext.size(); ++i) ext[i] = 0.25 * static_cast<double>(i);
  for (double d : derivative_4th(ext, 2, 0.25)) EXPECT_NEAR(d, 1.0, 1e-14);
}

TEST(Derivative4th, QuarticIsExact) {
  std::vector<double> ext(12);
  for (std::size_t i = 0; i < ext.size(); ++i) ext[i] = std::pow(0.5 * static_cast<double>(i) - 1.0, 4);
  const auto d = derivative_4th(ext, 2, 0.5);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double x = 0.5 * static_cast<double>(i + 2) - 1.0;
    EXPECT_NEAR(d[i], 4.0 * x * x * x, 1e-11);
  }
}

TEST(Derivative4th, SineConvergesAtFourthOrder) {
  std::vector<double> errs;
  for (std::size_t n : {32u, 64u, 128u}) {
    const double dx = 1.0 / static_cast<double>(n);
    const auto d = derivative_4th(sine_line(n), dx);
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      e = std::max(e, std::abs(d[i] - kTwoPi * std::cos(kTwoPi * static_cast<double>(i) * dx)));
    errs.push_back(e);
  }
  for (std::size_t k = 1; k < errs.size(); ++k) {
    EXPECT_GE(order(errs[k - 1], errs[k]), 3.9);
    EXPECT_LE(order(errs[k - 1], errs[k]), 4.1);
  }
}

TEST(Derivative4th, TooShortThrows) {
  const std::vector<double> f(4, 1.0);
  EXPECT_THROW(derivative_4th(f, 1.0), std::invalid_argument);
}

TEST(SlInterpolate, ConstantData) {
  for (double t : {0.0, 0.3, 0.77, 1.0})
    EXPECT_DOUBLE_EQ(sl_interpolate({5.0, 5.0, 0.0, 0.0, 0.2, t}), 5.0);
}

TEST(SlInterpolate, LinearData) {
  const double dx = 0.1;
  EXPECT_NEAR(sl_interpolate({0.0, 1.0, 1.0 / dx, 1.0 / dx, dx, 0.5}), 0.5, 1e-15);
}

TEST(SlInterpolate, EndpointsAreExact) {
  const SlKernelInput a{0.3, -1.7, 4.0, -9.0, 0.5, 0.0};
  SlKernelInput b = a;
  b.theta = 1.0;
  EXPECT_EQ(sl_interpolate(a), 0.3);
  EXPECT_EQ(sl_interpolate(b), -1.7);
}

TEST(SlInterpolate, CubicMatchesSymbolicOracle) {
  // tests/oracles/sl_kernel_cubic.py
  const auto r = sl_interpolate_detail({0.0, 1.0, 0.0, 3.0, 1.0, 0.5});
  EXPECT_DOUBLE_EQ(r.h_left, 0.25);
  EXPECT_DOUBLE_EQ(r.h_right, 0.0);
  EXPECT_DOUBLE_EQ(r.beta_left, 16.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.beta_right, 55.0 / 3.0);
  EXPECT_NEAR(r.w_left, 0.92197498849090134329, 1e-15);
  EXPECT_NEAR(r.value, 0.23049374712272533582, 1e-15);
}

TEST(SlInterpolate, WeightsCollapseTowardSmootherSide) {
  const auto r = sl_interpolate_detail({0.0, 1.0, 1.0, 4000.0, 1.0, 0.5});
  ASSERT_GT(r.beta_right, 1e6 * r.beta_left);
  EXPECT_GT(std::max(r.w_left, r.w_right), 0.99);
  EXPECT_GT(r.w_left, 0.99);
  EXPECT_NEAR(r.w_left + r.w_right, 1.0, 1e-15);
}

TEST(FluxMinus, ConstantWindow) {
  std::array<double, kFluxWindow> w{};
  w.fill(2.25);
  const auto d = flux_minus_detail(w.data() + 4);
  EXPECT_DOUBLE_EQ(d.value, 2.25);
  for (double h : d.candidates) EXPECT_DOUBLE_EQ(h, 2.25);
  for (double b : d.beta) EXPECT_EQ(b, 0.0);
  EXPECT_NEAR(d.weights[0], 1.0 / 9.0, 1e-15);
  EXPECT_DOUBLE_EQ(flux_plus(std::span<const double, kFluxWindow>(w)), 2.25);
}

TEST(FluxMinus, LinearWindowGivesMidpoint) {
  std::array<double, kFluxWindow> w{};
  const double i = 7.0;
  for (std::size_t k = 0; k < kFluxWindow; ++k) w[k] = i - 4.0 + static_cast<double>(k);
  const auto d = flux_minus_detail(w.data() + 4);
  for (double h : d.candidates) EXPECT_NEAR(h, i + 0.5, 1e-13);
  EXPECT_NEAR(d.value, i + 0.5, 1e-13);
  // plus window u_{i-3..i+5} on the same line
  for (std::size_t k = 0; k < kFluxWindow; ++k) w[k] = i - 3.0 + static_cast<double>(k);
  EXPECT_NEAR(flux_plus(std::span<const double, kFluxWindow>(w)), i + 0.5, 1e-13);
}

TEST(FluxMinus, QuadraticReproduced) {
  std::array<double, kFluxWindow> w{};
  for (std::size_t k = 0; k < kFluxWindow; ++k) {
    const double x = static_cast<double>(k) - 4.0;
    w[k] = 1.0 + 0.3 * x - 0.7 * x * x;
  }
  const auto d = flux_minus_detail(w.data() + 4);
  // h with unit-cell averages equal to u: h(x) = u(x) + 0.7/12, at x = 1/2
  const double s = 1.0 + 0.7 / 12.0 + 0.15 - 0.175;
  EXPECT_NEAR(d.candidates[0], s, 1e-13);
  EXPECT_NEAR(d.candidates[1], s, 1e-13);
  EXPECT_NEAR(d.candidates[2], s, 1e-13);
  EXPECT_NEAR(d.value, s, 1e-13);
  double wsum = 0.0;
  for (double x : d.weights) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
    wsum += x;
  }
  EXPECT_NEAR(wsum, 1.0, 1e-15);
}

TEST(FluxPlus, IsMirrorOfMinusBitForBit) {
  std::array<double, kFluxWindow> w{}, rev{};
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t k = 0; k < kFluxWindow; ++k) {
      w[k] = std::sin(1.3 * static_cast<double>(k * k) + trial) + (k == 5 && trial % 3 == 0 ? 4.0 : 0.0);
      rev[kFluxWindow - 1 - k] = w[k];
    }
    EXPECT_EQ(flux_plus(std::span<const double, kFluxWindow>(w)),
              flux_minus(std::span<const double, kFluxWindow>(rev)));
  }
}

TEST(FluxMinus, FluxDifferenceConvergesAtFifthOrder) {
  std::vector<double> errs;
  for (std::size_t n : {32u, 64u, 128u, 256u}) {
    const double dx = 1.0 / static_cast<double>(n);
    const auto u = sine_line(n);
    std::vector<double> f(n);
    for (std::size_t i = 0; i < n; ++i) f[i] = flux_minus(std::span<const double, kFluxWindow>(window_at(u, i, 0)));
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double df = (f[i] - f[(i + n - 1) % n]) / dx;
      e = std::max(e, std::abs(df - kTwoPi * std::cos(kTwoPi * static_cast<double>(i) * dx)));
    }
    errs.push_back(e);
  }
  for (std::size_t k = 1; k < errs.size(); ++k) EXPECT_GE(order(errs[k - 1], errs[k]), 4.5) << "level " << k;
}
