#pragma once

// Scenario data: D-shape steady state and its streamline perturbation for
// the guiding-center runs, radial profiles and the perturbed local
// Maxwellian for the drift-kinetic ITG run.

#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mixsl/elliptic.hpp"
#include "mixsl/errors.hpp"
#include "mixsl/geometry.hpp"
#include "mixsl/grid.hpp"

namespace mixsl {

struct ProfileParams {
  double r_min = 0.0;
  double r_max = 14.5;
  double kappa_n0 = 0.055;
  double kappa_ti = 0.27586;
  double kappa_te = 0.27586;
  double delta_r_n0 = 2.9;
  double delta_r_ti = 1.45;
  double delta_r_te = 1.45;
};

/// P(r) = C exp(-kappa dr tanh((r - r_p)/dr)).
struct Profile {
  double kappa = 0.0;
  double width = 1.0;
  double r_p = 0.0;
  double c = 1.0;

  double operator()(double r) const { return c * std::exp(-kappa * width * std::tanh((r - r_p) / width)); }
  double derivative(double r) const {
    const double t = std::tanh((r - r_p) / width);
    return -(*this)(r)*kappa * (1.0 - t * t);
  }
};

struct ProfileSet {
  ProfileParams params;
  double r_p = 0.0;
  Profile n0, ti, te;
};

/// Composite Simpson rule on [a, b] with `intervals` (even) subintervals.
template <class F>
double simpson(F&& f, double a, double b, std::size_t intervals = 20000) {
  if (intervals % 2) ++intervals;
  const double h = (b - a) / static_cast<double>(intervals);
  CompensatedSum s;
  s.add(f(a));
  s.add(f(b));
  for (std::size_t k = 1; k < intervals; ++k)
    s.add((k % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(k)));
  return s.value() * h / 3.0;
}

inline ProfileSet build_profiles(const ProfileParams& p = {}) {
  if (!(p.delta_r_n0 > 0.0 && p.delta_r_ti > 0.0 && p.delta_r_te > 0.0))
    throw ConfigError("profile widths must be positive");
  if (!(p.r_max > p.r_min)) throw ConfigError("profile radial extent must satisfy r_min < r_max");
  ProfileSet s;
  s.params = p;
  s.r_p = 0.5 * (p.r_min + p.r_max);
  s.n0 = {p.kappa_n0, p.delta_r_n0, s.r_p, 1.0};
  s.ti = {p.kappa_ti, p.delta_r_ti, s.r_p, 1.0};
  s.te = {p.kappa_te, p.delta_r_te, s.r_p, 1.0};
  const double integral = simpson(s.n0, p.r_min, p.r_max);
  s.n0.c = (p.r_max - p.r_min) / integral;
  return s;
}

/// Local Maxwellian n0/sqrt(2 pi Ti) exp(-v^2 / (2 Ti)).
inline double f_eq(const ProfileSet& s, double r, double v) {
  const double t = s.ti(r);
  return s.n0(r) / std::sqrt(2.0 * std::numbers::pi * t) * std::exp(-v * v / (2.0 * t));
}

struct ItgParams {
  double epsilon = 1e-6;
  int m = 5;
  int n = 1;
  double length = 1506.759067;
  double v_max = 8.0;
  double box_half_width = 15.5;
};

/// Radial width of the initial perturbation, 4 dr_n0 / dr_Ti.
inline double itg_perturbation_width(const ProfileSet& s) {
  return 4.0 * s.params.delta_r_n0 / s.params.delta_r_ti;
}

/// 4D grid (x, y, z, v) for the ITG run.
inline Grid itg_grid(const ItgParams& p, std::size_t nx, std::size_t ny, std::size_t nz,
                     std::size_t nv) {
  return Grid({Axis::bounded("x", -p.box_half_width, p.box_half_width, nx),
               Axis::bounded("y", -p.box_half_width, p.box_half_width, ny),
               Axis::periodic("z", 0.0, p.length, nz),
               Axis::bounded("v", -p.v_max, p.v_max, nv)});
}

/// f = f_eq (1 + eps exp(-(r - r_p)^2 / dr) cos(2 pi n z / L + m theta)).
inline Field init_itg(const Grid& g, const ProfileSet& s, const ItgParams& p) {
  if (g.dim() != 4) throw ConfigError("init_itg needs a 4D grid");
  Field f(g, 0.0);
  const double dr = itg_perturbation_width(s);
  const std::size_t nx = g.n(0), ny = g.n(1), nz = g.n(2), nv = g.n(3);
  std::size_t flat = 0;
  for (std::size_t i = 0; i < nx; ++i) {
    const double x = g.axis(0).coord(static_cast<std::ptrdiff_t>(i));
    for (std::size_t j = 0; j < ny; ++j) {
      const double y = g.axis(1).coord(static_cast<std::ptrdiff_t>(j));
      const double r = std::hypot(x, y);
      const double theta = std::atan2(y, x);
      const double radial = std::exp(-(r - s.r_p) * (r - s.r_p) / dr);
      for (std::size_t iz = 0; iz < nz; ++iz) {
        const double z = g.axis(2).coord(static_cast<std::ptrdiff_t>(iz));
        const double mode = std::cos(2.0 * std::numbers::pi * p.n * z / p.length + p.m * theta);
        const double factor = 1.0 + p.epsilon * radial * mode;
        for (std::size_t iv = 0; iv < nv; ++iv, ++flat) {
          const double v = g.axis(3).coord(static_cast<std::ptrdiff_t>(iv));
          f[flat] = f_eq(s, r, v) * factor;
        }
      }
    }
  }
  return f;
}

/// f_eq on the 4D grid (no perturbation).
inline Field equilibrium_itg(const Grid& g, const ProfileSet& s) {
  ItgParams p;
  p.epsilon = 0.0;
  p.length = g.axis(2).length();
  return init_itg(g, s, p);
}

/// Plane fields for the quasi-neutrality equation: rho0 = discrete ∫ f_eq dv
/// (trapezoid in v) so that the equilibrium has zero potential, and Te(r).
struct DkBackground {
  Field rho0;
  Field te;
};

inline DkBackground dk_background(const Grid& g, const ProfileSet& s) {
  const Grid plane({g.axis(0), g.axis(1)});
  DkBackground b{Field(plane, 0.0), Field(plane, 0.0)};
  const auto w = default_weights(g.axis(3));
  for (std::size_t i = 0; i < plane.n(0); ++i)
    for (std::size_t j = 0; j < plane.n(1); ++j) {
      const double r = std::hypot(plane.axis(0).coord(static_cast<std::ptrdiff_t>(i)),
                                  plane.axis(1).coord(static_cast<std::ptrdiff_t>(j)));
      CompensatedSum m;
      for (std::size_t iv = 0; iv < g.n(3); ++iv)
        m.add(w[iv] * f_eq(s, r, g.axis(3).coord(static_cast<std::ptrdiff_t>(iv))));
      b.rho0[i * plane.n(1) + j] = m.value();
      b.te[i * plane.n(1) + j] = s.te(r);
    }
  return b;
}

// ---------------------------------------------------------------- D-shape

/// Default guiding-center box around the D-shape.
inline Grid dshape_grid(std::size_t nx, std::size_t ny) {
  return Grid({Axis::bounded("x", 1.0, 2.4, nx), Axis::bounded("y", -1.1, 1.1, ny)});
}

struct CurvilinearPoint {
  double xi1 = 0.0;
  double xi2 = 0.0;
};

/// Inverts the D-shape map at (x, y) by 2D Newton in (s, t) with s the
/// minor radius and t = 2 pi xi2, seeded from the elliptic polar angle.
inline CurvilinearPoint xi_of_point(double x, double y) {
  const double dx = x - dshape::kCenterX;
  const double dy = y / dshape::kElongation;
  double t = std::atan2(dy, dx);
  double s = std::hypot(dx, dy);
  if (s == 0.0) return {dshape::kXi1Min, 0.0};
  const double delta = dshape::delta();
  for (int it = 0; it < 50; ++it) {
    const double psi = t + delta * std::sin(t);
    const double dpsi = 1.0 + delta * std::cos(t);
    const double rx = dshape::kCenterX + s * std::cos(psi) - x;
    const double ry = dshape::kElongation * s * std::sin(t) - y;
    if (std::max(std::abs(rx), std::abs(ry)) <= 1e-14) {
      double xi2 = t / (2.0 * std::numbers::pi);
      xi2 -= std::floor(xi2);
      if (xi2 >= 1.0) xi2 = 0.0;
      return {(((s - dshape::kOffset) / dshape::kSlope) + 1.0) / 2.0, xi2};
    }
    // Jacobian of (x, y) with respect to (s, t).
    const double a = std::cos(psi), b = -s * std::sin(psi) * dpsi;
    const double c = dshape::kElongation * std::sin(t), d = dshape::kElongation * s * std::cos(t);
    const double det = a * d - b * c;
    if (det == 0.0) break;
    s -= (d * rx - b * ry) / det;
    t -= (-c * rx + a * ry) / det;
  }
  throw GeometryError("D-shape inversion did not converge at (" + std::to_string(x) + ", " +
                      std::to_string(y) + ")");
}

inline double xi2_of_point(double x, double y) { return xi_of_point(x, y).xi2; }

struct SteadyState {
  std::shared_ptr<const EmbeddedDomain> domain;
  Field phi0;      // extended to ghosts and band
  Field rho_bar0;  // e^{-phi0} - 1 on interior, ghosts and band, 0 beyond
  NewtonResult newton;
};

inline constexpr int kTransportBand = 3;

/// rho_bar(phi) = e^{-phi} - 1 wherever phi was extended, 0 elsewhere.
inline Field density_from_potential(const EmbeddedDomain& dom, const Field& phi) {
  Field rho(phi.grid(), 0.0);
  for (std::size_t k = 0; k < rho.size(); ++k)
    if (dom.layer(k) <= dom.band_depth()) rho[k] = std::exp(-phi[k]) - 1.0;
  return rho;
}

/// Newton solve of the nonlinear steady state on the D-shape, rho0 = B = 1.
inline SteadyState dshape_steady_state(const Grid& grid, const NewtonOptions& opt = {},
                                       const Field* initial = nullptr) {
  SteadyState st;
  st.domain = std::make_shared<const EmbeddedDomain>(make_domain(DShape{}, grid, kTransportBand));
  const Field a(grid, 1.0);
  st.newton = solve_newton_steady(st.domain, a, 1.0, opt, initial);
  st.phi0 = st.newton.phi;
  st.rho_bar0 = density_from_potential(*st.domain, st.phi0);
  return st;
}

struct PerturbParams {
  double epsilon = 0.1;
  int k = 5;
  double phi_p = -0.1;
};

/// rho_bar0 (1 + eps cos(2 pi k xi2) exp(-2 |phi0 - phi_p|^2 / eps^4)) on
/// interior nodes; other nodes keep rho_bar0.
inline Field perturb_gc(const Field& rho_bar0, const Field& phi0, const EmbeddedDomain& dom,
                        const PerturbParams& p) {
  Field out = rho_bar0;
  const double e4 = std::pow(p.epsilon, 4);
  for (std::size_t i = 0; i < dom.nx(); ++i)
    for (std::size_t j = 0; j < dom.ny(); ++j) {
      const std::size_t f = dom.flat(i, j);
      if (!dom.is_interior(f)) continue;
      const Vec2 x = dom.position(i, j);
      const double dphi = phi0[f] - p.phi_p;
      const double gauss = std::exp(-2.0 * dphi * dphi / e4);
      if (gauss == 0.0) continue;
      const double xi2 = xi2_of_point(x.x, x.y);
      out[f] = rho_bar0[f] * (1.0 + p.epsilon * std::cos(2.0 * std::numbers::pi * p.k * xi2) * gauss);
    }
  return out;
}

}  // namespace mixsl
