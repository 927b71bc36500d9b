#pragma once

// Hermite-WENO kernels on uniform 1D data:
//  * third-order interpolation inside a cell from two values and two
//    derivatives (semi-Lagrangian evaluation at characteristic feet);
//  * fifth-order flux reconstruction for conservative finite differences.

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace mixsl::hweno {

inline constexpr double kEpsilon = 1e-6;

/// Fourth-order centred first derivative from f[i-2..i+2].
inline double derivative_4th_at(double fm2, double fm1, double fp1, double fp2, double dx) {
  return (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * dx);
}

/// Derivative of a periodic line.
inline std::vector<double> derivative_4th(std::span<const double> f, double dx) {
  const std::size_t n = f.size();
  if (n < 5) throw std::invalid_argument("derivative_4th needs at least 5 points");
  std::vector<double> d(n);
  auto at = [&](std::ptrdiff_t i) {
    const auto m = static_cast<std::ptrdiff_t>(n);
    return f[static_cast<std::size_t>(((i % m) + m) % m)];
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::ptrdiff_t>(i);
    d[i] = derivative_4th_at(at(k - 2), at(k - 1), at(k + 1), at(k + 2), dx);
  }
  return d;
}

/// Derivative of the interior of a padded line: `ext` holds `pad` (>= 2)
/// boundary-filled values on each side of the n interior points.
inline std::vector<double> derivative_4th(std::span<const double> ext, std::size_t pad, double dx) {
  if (pad < 2 || ext.size() < 2 * pad + 1)
    throw std::invalid_argument("derivative_4th: padded line too short");
  const std::size_t n = ext.size() - 2 * pad;
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i + pad;
    d[i] = derivative_4th_at(ext[c - 2], ext[c - 1], ext[c + 1], ext[c + 2], dx);
  }
  return d;
}

struct SlKernelInput {
  double f_left = 0.0;    // f_i
  double f_right = 0.0;   // f_{i+1}
  double fp_left = 0.0;   // f'_i
  double fp_right = 0.0;  // f'_{i+1}
  double dx = 1.0;
  double theta = 0.0;     // x = x_i + theta*dx, theta in [0, 1]
};

struct SlKernelResult {
  double value;
  double h_left, h_right;
  double beta_left, beta_right;
  double w_left, w_right;
};

inline SlKernelResult sl_interpolate_detail(const SlKernelInput& in) {
  const double df = in.f_right - in.f_left;
  const double q = in.theta * (in.theta - 1.0);  // (x-x_i)(x-x_{i+1})/dx^2
  const double curv_l = df - in.dx * in.fp_left;
  const double curv_r = in.dx * in.fp_right - df;
  const double lin = in.f_left + df * in.theta;
  const double hl = lin + curv_l * q;
  const double hr = lin + curv_r * q;
  const double bl = df * df + (13.0 / 3.0) * curv_l * curv_l;
  const double br = df * df + (13.0 / 3.0) * curv_r * curv_r;
  const double al = (1.0 - in.theta) / ((kEpsilon + bl) * (kEpsilon + bl));
  const double ar = in.theta / ((kEpsilon + br) * (kEpsilon + br));
  const double wl = al / (al + ar);
  const double wr = 1.0 - wl;
  return {wl * hl + wr * hr, hl, hr, bl, br, wl, wr};
}

inline double sl_interpolate(const SlKernelInput& in) { return sl_interpolate_detail(in).value; }

/// Sixth-order centred interface value at x_{k+1/2} from u[k-2..k+3];
/// `c` indexes u_k.
inline double interface_6th(const double* u, std::ptrdiff_t c) {
  return ((u[c + 3] + u[c - 2]) - 8.0 * (u[c + 2] + u[c - 1]) + 37.0 * (u[c + 1] + u[c])) / 60.0;
}

/// Number of points in a flux window: u_{i-4} .. u_{i+4}. The outer pair
/// feeds the sixth-order interface derivatives at i-3/2 and i+3/2.
inline constexpr std::size_t kFluxWindow = 9;

struct FluxDetail {
  double value;
  std::array<double, 3> candidates;  // h_l, h_c, h_r at x_{i+1/2}
  std::array<double, 3> beta;
  std::array<double, 3> weights;
};

/// Left-biased reconstruction f^-_{i+1/2}; `u` points at u_i inside a
/// buffer that is valid on [u-4, u+4].
inline FluxDetail flux_minus_detail(const double* u) {
  const double gl = interface_6th(u, -2);  // G'_{i-3/2}
  const double gr = interface_6th(u, 1);   // G'_{i+3/2}
  const double um = u[-1], u0 = u[0], up = u[1];

  const double hl = -2.0 * um + 2.0 * u0 + gl;
  const double hc = (-um + 5.0 * u0 + 2.0 * up) / 6.0;
  const double hr = (u0 + 5.0 * up - 2.0 * gr) / 4.0;

  const double l1 = u0 - um, l2 = -3.0 * um + u0 + 2.0 * gl;
  const double c1 = u0 - um, c2 = um - 2.0 * u0 + up;
  const double r1 = up - u0, r2 = u0 - 3.0 * up + 2.0 * gr;
  const double bl = l1 * l1 + 3.0 * l1 * l2 + (75.0 / 16.0) * l2 * l2;
  const double bc = c1 * c1 + 2.0 * c1 * c2 + (25.0 / 12.0) * c2 * c2;
  const double br = r1 * r1 + (39.0 / 16.0) * r2 * r2;

  const double al = (1.0 / 9.0) / ((kEpsilon + bl) * (kEpsilon + bl));
  const double ac = (4.0 / 9.0) / ((kEpsilon + bc) * (kEpsilon + bc));
  const double ar = (4.0 / 9.0) / ((kEpsilon + br) * (kEpsilon + br));
  const double s = al + ac + ar;
  const double wl = al / s, wc = ac / s, wr = ar / s;
  return {wl * hl + wc * hc + wr * hr, {hl, hc, hr}, {bl, bc, br}, {wl, wc, wr}};
}

inline double flux_minus(const double* u) { return flux_minus_detail(u).value; }

/// Right-biased reconstruction f^+_{i+1/2}, the mirror image of flux_minus
/// about x_{i+1/2}; `u` points at u_i, valid on [u-3, u+5].
inline double flux_plus(const double* u) {
  std::array<double, kFluxWindow> r{};
  for (std::size_t k = 0; k < kFluxWindow; ++k) r[k] = u[5 - static_cast<std::ptrdiff_t>(k)];
  return flux_minus(r.data() + 4);
}

/// Window forms: `window` is exactly kFluxWindow values, u_{i-4..i+4} for
/// the minus side and u_{i-3..i+5} for the plus side.
inline double flux_minus(std::span<const double, kFluxWindow> window) {
  return flux_minus(window.data() + 4);
}
inline double flux_plus(std::span<const double, kFluxWindow> window) {
  return flux_plus(window.data() + 3);
}

}  // namespace mixsl::hweno
