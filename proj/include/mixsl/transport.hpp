#pragma once

// Advection steppers: backward semi-Lagrangian with Hermite-WENO
// interpolation, conservative finite differences with RK4, the Strang
// sweep of the drift-kinetic model and the SL -> FD phase switch.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mixsl/errors.hpp"
#include "mixsl/geometry.hpp"
#include "mixsl/grid.hpp"
#include "mixsl/hweno.hpp"
#include "mixsl/parallel.hpp"

namespace mixsl {

/// How the conservative scheme turns reconstructed values into face fluxes.
enum class FluxForm {
  kInterfaceSpeed,  // a_{i+1/2} * f^{-/+}(f), upwind by sign of a_{i+1/2}
  kUpwindProduct,   // f^{-/+}(a f), upwind by sign of a_{i+1/2}
  kLaxFriedrichs,   // f^-((a+α)f/2) + f^+((a-α)f/2), α local max |a|
};

enum class Method { kSemiLagrangian, kFiniteDifference };
enum class Phase { kLinearSL, kNonlinearFD };

inline const char* to_string(FluxForm f) {
  switch (f) {
    case FluxForm::kInterfaceSpeed: return "interface-speed";
    case FluxForm::kUpwindProduct: return "upwind-product";
    case FluxForm::kLaxFriedrichs: return "lax-friedrichs";
  }
  return "?";
}
inline const char* to_string(Phase p) { return p == Phase::kLinearSL ? "SL" : "FD"; }

/// What lies beyond the ends of a 1D line.
struct LineFill {
  bool periodic = true;
  double left = 0.0;
  double right = 0.0;

  static LineFill wrap() { return {true, 0.0, 0.0}; }
  static LineFill constant(double left, double right) { return {false, left, right}; }
};

namespace detail {

inline constexpr std::ptrdiff_t kFdPad = 5;  // window reaches i-4 .. i+5

inline double speed_at(std::span<const double> a, std::size_t i) {
  return a.size() == 1 ? a[0] : a[i];
}

/// Flux at x_{i+1/2}; `f` and `a` point at node i of buffers valid on
/// [i-4, i+5].
inline double face_flux(const double* f, const double* a, FluxForm form) {
  const double af = 0.5 * (a[0] + a[1]);
  switch (form) {
    case FluxForm::kInterfaceSpeed:
      return af >= 0.0 ? af * hweno::flux_minus(f) : af * hweno::flux_plus(f);
    case FluxForm::kUpwindProduct: {
      std::array<double, 10> g{};
      for (std::ptrdiff_t k = -4; k <= 5; ++k) g[static_cast<std::size_t>(k + 4)] = a[k] * f[k];
      return af >= 0.0 ? hweno::flux_minus(g.data() + 4) : hweno::flux_plus(g.data() + 4);
    }
    case FluxForm::kLaxFriedrichs: {
      double alpha = 0.0;
      for (std::ptrdiff_t k = -4; k <= 5; ++k) alpha = std::max(alpha, std::abs(a[k]));
      std::array<double, 10> gp{}, gm{};
      for (std::ptrdiff_t k = -4; k <= 5; ++k) {
        const auto s = static_cast<std::size_t>(k + 4);
        gp[s] = 0.5 * (a[k] + alpha) * f[k];
        gm[s] = 0.5 * (a[k] - alpha) * f[k];
      }
      return hweno::flux_minus(gp.data() + 4) + hweno::flux_plus(gm.data() + 4);
    }
  }
  return 0.0;
}

/// Copies a line into `ext` with kFdPad ghost values on each side.
template <class Get>
void gather_padded(std::vector<double>& ext, std::size_t n, const LineFill& fill, Get&& get) {
  const auto pad = static_cast<std::size_t>(kFdPad);
  ext.resize(n + 2 * pad);
  for (std::size_t i = 0; i < n; ++i) ext[i + pad] = get(i);
  for (std::size_t k = 0; k < pad; ++k) {
    ext[pad - 1 - k] = fill.periodic ? get((n - 1 - k % n) % n) : fill.left;
    ext[pad + n + k] = fill.periodic ? get(k % n) : fill.right;
  }
}

/// rhs_i = -(F_{i+1/2} - F_{i-1/2})/dx on a padded line. Bounded lines carry
/// no flux through their two end faces.
inline void fd_line(const std::vector<double>& fext, const std::vector<double>& aext,
                    std::size_t n, bool periodic, double dx, FluxForm form, std::span<double> out) {
  const auto pad = static_cast<std::size_t>(kFdPad);
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t faces = periodic ? n : n - 1;
  for (std::size_t i = 0; i < faces; ++i) {
    const double flux = face_flux(fext.data() + pad + i, aext.data() + pad + i, form) / dx;
    out[i] -= flux;
    out[(i + 1) % n] += flux;
  }
}

}  // namespace detail

/// -d(a f)/dx by conservative HWENO differences. `a` holds node speeds (or a
/// single constant); interface speeds are neighbour averages.
inline std::vector<double> fd_rhs_1d(std::span<const double> f, std::span<const double> a,
                                     double dx, const LineFill& fill,
                                     FluxForm form = FluxForm::kInterfaceSpeed) {
  const std::size_t n = f.size();
  if (n < 5) throw ConfigError("fd_rhs_1d needs at least 5 points");
  if (a.size() != 1 && a.size() != n) throw std::invalid_argument("speed size mismatch");
  std::vector<double> fext, aext, out(n);
  detail::gather_padded(fext, n, fill, [&](std::size_t i) { return f[i]; });
  LineFill afill = fill;
  if (!fill.periodic) afill = LineFill::constant(detail::speed_at(a, 0), detail::speed_at(a, n - 1));
  detail::gather_padded(aext, n, afill, [&](std::size_t i) { return detail::speed_at(a, i); });
  detail::fd_line(fext, aext, n, fill.periodic, dx, form, out);
  return out;
}

/// Throws CflError when dt * max_speed / spacing exceeds cfl.
inline void check_cfl(double dt, double max_speed, double spacing, double cfl,
                      const std::string& what = "advection") {
  if (dt * max_speed > cfl * spacing * (1.0 + 1e-12))
    throw CflError(what + ": time step " + std::to_string(dt) + " exceeds the CFL bound " +
                   std::to_string(cfl * spacing / max_speed) + "; reduce dt");
}

/// Classical four-stage Runge-Kutta step; rhs(y, out) fills out = dy/dt.
template <class Rhs>
void rk4_step(std::vector<double>& y, Rhs&& rhs, double dt) {
  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  rhs(std::as_const(y), k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
  rhs(std::as_const(tmp), k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
  rhs(std::as_const(tmp), k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * k3[i];
  rhs(std::as_const(tmp), k4);
  for (std::size_t i = 0; i < n; ++i)
    y[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
}

/// One FD/RK4 step of f_t + (a f)_x = 0 on a line.
inline void fd_advect_1d(std::vector<double>& f, std::span<const double> a, double dt, double dx,
                         const LineFill& fill, FluxForm form, double cfl = 0.5) {
  double amax = 0.0;
  for (double v : a) amax = std::max(amax, std::abs(v));
  check_cfl(dt, amax, dx, cfl);
  rk4_step(
      f,
      [&](const std::vector<double>& y, std::vector<double>& out) {
        out = fd_rhs_1d(y, a, dx, fill, form);
      },
      dt);
}

namespace detail {

/// Speed at fractional index u by linear interpolation (wrap or clamp).
/// Feet within round-off of a node land on it, so integer shifts are exact.
inline double snap_to_node(double u) {
  const double r = std::round(u);
  return std::abs(u - r) <= 1e-12 * std::max(1.0, std::abs(u)) ? r : u;
}

inline double speed_at_index(std::span<const double> a, double u, bool periodic) {
  if (a.size() == 1) return a[0];
  const auto n = static_cast<std::ptrdiff_t>(a.size());
  if (!periodic) u = std::clamp(u, 0.0, static_cast<double>(n - 1));
  const double fl = std::floor(u);
  const double t = u - fl;
  auto at = [&](std::ptrdiff_t i) {
    if (periodic) return a[static_cast<std::size_t>(((i % n) + n) % n)];
    return a[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, n - 1))];
  };
  const auto i = static_cast<std::ptrdiff_t>(fl);
  return (1.0 - t) * at(i) + t * at(i + 1);
}

}  // namespace detail

/// Backward semi-Lagrangian step of f_t + a f_x = 0 on a line of spacing dx.
/// Feet are traced in index units by the midpoint predictor-corrector and
/// evaluated with the two-quadratic Hermite-WENO interpolant.
inline std::vector<double> sl_advect_1d(std::span<const double> f, std::span<const double> a,
                                        double dt, double dx, const LineFill& fill) {
  const std::size_t n = f.size();
  if (n < 5) throw ConfigError("sl_advect_1d needs at least 5 points");
  if (a.size() != 1 && a.size() != n) throw std::invalid_argument("speed size mismatch");
  std::vector<double> d;
  if (fill.periodic) {
    d = hweno::derivative_4th(f, dx);
  } else {
    std::vector<double> ext(n + 4);
    ext[0] = ext[1] = fill.left;
    ext[n + 2] = ext[n + 3] = fill.right;
    std::copy(f.begin(), f.end(), ext.begin() + 2);
    d = hweno::derivative_4th(std::span<const double>(ext), 2, dx);
  }
  const auto N = static_cast<double>(n);
  const double span = fill.periodic ? N : N - 1.0;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i);
    const double c = dt / dx;
    double foot;
    if (a.size() == 1) {
      foot = x - c * a[0];
    } else {
      const double pred = x - c * a[i];
      foot = x - c * detail::speed_at_index(a, 0.5 * (x + pred), fill.periodic);
    }
    if (std::abs(foot - x) > span)
      throw ConfigError("semi-Lagrangian foot lies more than one domain length away; reduce dt");
    if (!fill.periodic && foot < 0.0) {
      out[i] = fill.left;
      continue;
    }
    if (!fill.periodic && foot > N - 1.0) {
      out[i] = fill.right;
      continue;
    }
    foot = detail::snap_to_node(foot);
    double cell = std::floor(foot);
    double theta = foot - cell;
    auto k = static_cast<std::ptrdiff_t>(cell);
    if (fill.periodic) {
      const auto m = static_cast<std::ptrdiff_t>(n);
      k = ((k % m) + m) % m;
    } else if (k >= static_cast<std::ptrdiff_t>(n) - 1) {
      k = static_cast<std::ptrdiff_t>(n) - 2;
      theta = 1.0;
    }
    if (theta == 0.0) {
      out[i] = f[static_cast<std::size_t>(k)];
      continue;
    }
    const auto l = static_cast<std::size_t>(k);
    const auto r = (l + 1) % n;
    out[i] = hweno::sl_interpolate({f[l], f[r], d[l], d[r], dx, theta});
  }
  return out;
}

/// 2D advection by a node-valued velocity field on one plane. Only
/// `active` nodes are updated; other nodes keep whatever (equilibrium) fill
/// the caller stored there. Faces with an inactive side carry no flux, so
/// the FD update conserves Σ_active f exactly.
class Advection2D {
 public:
  Advection2D() = default;
  Advection2D(Grid plane, std::vector<std::uint8_t> active, FluxForm form = FluxForm::kInterfaceSpeed,
              std::shared_ptr<const ShapeQuery> shape = nullptr)
      : grid_(std::move(plane)), active_(std::move(active)), form_(form), shape_(std::move(shape)) {
    if (grid_.dim() != 2) throw ConfigError("Advection2D needs a 2D grid");
    if (active_.empty()) active_.assign(grid_.size(), 1);
    if (active_.size() != grid_.size()) throw std::invalid_argument("active mask size mismatch");
  }

  /// Whole periodic or bounded box, every node active.
  static Advection2D box(Grid plane, FluxForm form = FluxForm::kInterfaceSpeed) {
    return Advection2D(std::move(plane), {}, form);
  }

  /// Interior nodes of an embedded domain.
  static Advection2D embedded(const EmbeddedDomain& dom, FluxForm form = FluxForm::kInterfaceSpeed) {
    const auto m = dom.interior_mask();
    return Advection2D(dom.grid(), std::vector<std::uint8_t>(m.begin(), m.end()), form,
                       std::make_shared<const ShapeQuery>(dom.query()));
  }

  const Grid& grid() const { return grid_; }
  std::span<const std::uint8_t> active() const { return active_; }
  FluxForm flux_form() const { return form_; }
  void set_flux_form(FluxForm f) { form_ = f; }

  /// Largest stable FD step for the given velocities.
  double max_dt(std::span<const double> ux, std::span<const double> uy, double cfl) const {
    double sx = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < active_.size(); ++k) {
      if (!active_[k]) continue;
      sx = std::max(sx, std::abs(ux[k]));
      sy = std::max(sy, std::abs(uy[k]));
    }
    const double rate = sx / grid_.spacing(0) + sy / grid_.spacing(1);
    return rate > 0.0 ? cfl / rate : std::numeric_limits<double>::infinity();
  }

  void check_cfl(std::span<const double> ux, std::span<const double> uy, double dt,
                 double cfl) const {
    const double lim = max_dt(ux, uy, cfl);
    if (dt > lim * (1.0 + 1e-12))
      throw CflError("2D advection: time step " + std::to_string(dt) + " exceeds the CFL bound " +
                     std::to_string(lim) + "; reduce dt");
  }

  /// out = -∂x(Ux f) - ∂y(Uy f) on active nodes, 0 elsewhere.
  void fd_rhs(std::span<const double> f, std::span<const double> ux, std::span<const double> uy,
              std::span<double> out) const {
    const std::size_t nx = grid_.n(0), ny = grid_.n(1);
    std::fill(out.begin(), out.end(), 0.0);
    // x-direction lines (fixed j); writes touch column j only.
    parallel_for(ny, [&](std::size_t j0, std::size_t j1) {
      std::vector<double> fe, ae;
      for (std::size_t j = j0; j < j1; ++j) sweep(f, ux, 0, j, fe, ae, out, nx, ny);
    });
    parallel_for(nx, [&](std::size_t i0, std::size_t i1) {
      std::vector<double> fe, ae;
      for (std::size_t i = i0; i < i1; ++i) sweep(f, uy, 1, i, fe, ae, out, nx, ny);
    });
  }

  /// One RK4 step (velocities frozen); throws CflError above `cfl`.
  void fd_step(std::vector<double>& f, std::span<const double> ux, std::span<const double> uy,
               double dt, double cfl = 0.5) const {
    check_cfl(ux, uy, dt, cfl);
    rk4_step(
        f,
        [&](const std::vector<double>& y, std::vector<double>& out) { fd_rhs(y, ux, uy, out); },
        dt);
  }

  /// Backward SL step tracing 2D feet; `fill(Vec2)` gives the value at feet
  /// outside the domain (or the grid box).
  template <class Fill>
  void sl_step(std::vector<double>& f, std::span<const double> ux, std::span<const double> uy,
               double dt, Fill&& fill) const {
    const std::size_t nx = grid_.n(0), ny = grid_.n(1);
    const Axis& ax = grid_.axis(0);
    const Axis& ay = grid_.axis(1);
    const double dx = ax.spacing(), dy = ay.spacing();
    std::vector<double> out(f);
    parallel_for(nx, [&](std::size_t i0, std::size_t i1) {
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = 0; j < ny; ++j) {
          const std::size_t node = i * ny + j;
          if (!active_[node]) continue;
          const double u = static_cast<double>(i), v = static_cast<double>(j);
          const double pu = u - dt * ux[node] / dx;
          const double pv = v - dt * uy[node] / dy;
          const double mu = 0.5 * (u + pu), mv = 0.5 * (v + pv);
          const double fu = detail::snap_to_node(u - dt * bilinear(ux, mu, mv) / dx);
          const double fv = detail::snap_to_node(v - dt * bilinear(uy, mu, mv) / dy);
          out[node] = evaluate(f, fu, fv, fill);
        }
      }
    });
    f = std::move(out);
  }

  /// Tensor Hermite-WENO interpolation of a plane at fractional indices
  /// (u, v); falls back to `fill` outside the box or the domain.
  template <class Fill>
  double evaluate(std::span<const double> f, double u, double v, Fill&& fill) const {
    const Axis& ax = grid_.axis(0);
    const Axis& ay = grid_.axis(1);
    const Vec2 x{ax.min() + u * ax.spacing(), ay.min() + v * ay.spacing()};
    const double nxm = static_cast<double>(grid_.n(0) - 1);
    const double nym = static_cast<double>(grid_.n(1) - 1);
    if ((!ax.is_periodic() && (u < 0.0 || u > nxm)) || (!ay.is_periodic() && (v < 0.0 || v > nym)))
      return fill(x);
    if (shape_ && !shape_->inside(x)) return fill(x);
    auto cell = [](double w, const Axis& a, double& theta) {
      double c = std::floor(w);
      theta = w - c;
      auto k = static_cast<std::ptrdiff_t>(c);
      if (!a.is_periodic() && k >= static_cast<std::ptrdiff_t>(a.n()) - 1) {
        k = static_cast<std::ptrdiff_t>(a.n()) - 2;
        theta = 1.0;
      }
      return k;
    };
    double tx = 0.0, ty = 0.0;
    const auto ci = cell(u, ax, tx);
    const auto cj = cell(v, ay, ty);
    const std::size_t ny = grid_.n(1);
    auto at = [&](std::ptrdiff_t i, std::ptrdiff_t j) { return f[ax.resolve(i) * ny + ay.resolve(j)]; };
    const double dx = ax.spacing(), dy = ay.spacing();
    auto interp_x = [&](std::ptrdiff_t j) {
      const double f0 = at(ci, j), f1 = at(ci + 1, j);
      if (tx == 0.0) return f0;
      const double d0 = hweno::derivative_4th_at(at(ci - 2, j), at(ci - 1, j), f1, at(ci + 2, j), dx);
      const double d1 = hweno::derivative_4th_at(at(ci - 1, j), f0, at(ci + 2, j), at(ci + 3, j), dx);
      return hweno::sl_interpolate({f0, f1, d0, d1, dx, tx});
    };
    if (ty == 0.0) return interp_x(cj);
    std::array<double, 6> g{};
    for (std::ptrdiff_t r = 0; r < 6; ++r) g[static_cast<std::size_t>(r)] = interp_x(cj - 2 + r);
    const double d0 = hweno::derivative_4th_at(g[0], g[1], g[3], g[4], dy);
    const double d1 = hweno::derivative_4th_at(g[1], g[2], g[4], g[5], dy);
    return hweno::sl_interpolate({g[2], g[3], d0, d1, dy, ty});
  }

  /// Bilinear interpolation of a node array at fractional indices.
  double bilinear(std::span<const double> a, double u, double v) const {
    const Axis& ax = grid_.axis(0);
    const Axis& ay = grid_.axis(1);
    if (!ax.is_periodic()) u = std::clamp(u, 0.0, static_cast<double>(ax.n() - 1));
    if (!ay.is_periodic()) v = std::clamp(v, 0.0, static_cast<double>(ay.n() - 1));
    const double fu = std::floor(u), fv = std::floor(v);
    const double tu = u - fu, tv = v - fv;
    const auto i = static_cast<std::ptrdiff_t>(fu), j = static_cast<std::ptrdiff_t>(fv);
    const std::size_t ny = grid_.n(1);
    auto at = [&](std::ptrdiff_t p, std::ptrdiff_t q) { return a[ax.resolve(p) * ny + ay.resolve(q)]; };
    return (1.0 - tu) * ((1.0 - tv) * at(i, j) + tv * at(i, j + 1)) +
           tu * ((1.0 - tv) * at(i + 1, j) + tv * at(i + 1, j + 1));
  }

 private:
  void sweep(std::span<const double> f, std::span<const double> a, std::size_t axis,
             std::size_t fixed, std::vector<double>& fe, std::vector<double>& ae,
             std::span<double> out, std::size_t nx, std::size_t ny) const {
    const Axis& line_axis = grid_.axis(axis);
    const std::size_t n = axis == 0 ? nx : ny;
    auto idx = [&](std::ptrdiff_t k) {
      const std::size_t r = line_axis.resolve(k);
      return axis == 0 ? r * ny + fixed : fixed * ny + r;
    };
    const auto pad = detail::kFdPad;
    fe.resize(n + 2 * static_cast<std::size_t>(pad));
    ae.resize(fe.size());
    for (std::ptrdiff_t k = -pad; k < static_cast<std::ptrdiff_t>(n) + pad; ++k) {
      fe[static_cast<std::size_t>(k + pad)] = f[idx(k)];
      ae[static_cast<std::size_t>(k + pad)] = a[idx(k)];
    }
    const double h = line_axis.spacing();
    const std::size_t faces = line_axis.is_periodic() ? n : n - 1;
    for (std::size_t k = 0; k < faces; ++k) {
      const std::size_t left = idx(static_cast<std::ptrdiff_t>(k));
      const std::size_t right = idx(static_cast<std::ptrdiff_t>(k) + 1);
      if (!active_[left] || !active_[right]) continue;
      const auto p = static_cast<std::size_t>(pad) + k;
      const double flux = detail::face_flux(fe.data() + p, ae.data() + p, form_) / h;
      out[left] -= flux;
      out[right] += flux;
    }
  }

  Grid grid_;
  std::vector<std::uint8_t> active_;
  FluxForm form_ = FluxForm::kInterfaceSpeed;
  std::shared_ptr<const ShapeQuery> shape_;
};

/// True iff |mass_now - mass_prev| > h^3 (strict).
inline bool check_switch(double mass_prev, double mass_now, double h) {
  return std::abs(mass_now - mass_prev) > h * h * h;
}

/// Linear-SL / nonlinear-FD latch fed with one total mass per step.
class PhaseSwitch {
 public:
  PhaseSwitch(double h, double dt_sl, double dt_fd, Phase initial = Phase::kLinearSL)
      : h_(h), dt_sl_(dt_sl), dt_fd_(dt_fd), phase_(initial) {}

  Phase phase() const { return phase_; }
  double dt() const { return phase_ == Phase::kLinearSL ? dt_sl_ : dt_fd_; }
  double h() const { return h_; }
  int switches() const { return switches_; }
  const std::array<std::optional<double>, 2>& mass_history() const { return history_; }

  /// Records a mass sample; returns true when this sample flips SL -> FD.
  bool observe(double mass) {
    history_[0] = history_[1];
    history_[1] = mass;
    if (phase_ == Phase::kNonlinearFD || !history_[0]) return false;
    if (!check_switch(*history_[0], mass, h_)) return false;
    phase_ = Phase::kNonlinearFD;
    ++switches_;
    return true;
  }

  void restore(Phase phase, std::array<std::optional<double>, 2> history, int switches) {
    phase_ = phase;
    history_ = history;
    switches_ = switches;
  }

 private:
  double h_;
  double dt_sl_, dt_fd_;
  Phase phase_;
  std::array<std::optional<double>, 2> history_{};
  int switches_ = 0;
};

/// Velocities for one drift-kinetic step, on the (x, y, z) grid with z
/// fastest: U = (ux, uy) in the plane and E∥ for the v-advection.
struct VelocityField {
  std::vector<double> ux, uy, epar;
  double time = 0.0;
};

struct DkStepOptions {
  Method method = Method::kSemiLagrangian;
  FluxForm flux_form = FluxForm::kInterfaceSpeed;
  double cfl = 0.5;
};

/// Strang step for f(x, y, z, v): v/2, z/2, x⊥, z/2, v/2. Inactive plane
/// nodes are left alone (they hold the equilibrium). `fill(Vec2, iv)` is the
/// inflow value for 2D SL feet leaving the domain.
template <class Fill>
void strang_step_dk(Field& f, const VelocityField& u, double dt, const Advection2D& plane,
                    const DkStepOptions& opt, Fill&& fill) {
  const Grid& g = f.grid();
  if (g.dim() != 4) throw ConfigError("drift-kinetic step needs a 4D field");
  const std::size_t nx = g.n(0), ny = g.n(1), nz = g.n(2), nv = g.n(3);
  if (nv < 7) throw ConfigError("drift-kinetic step needs at least 7 v nodes");
  const Axis& az = g.axis(2);
  const Axis& av = g.axis(3);
  const auto active = plane.active();
  const bool fd = opt.method == Method::kFiniteDifference;
  auto& data = f.values();

  auto v_flow = [&](double h) {
    if (fd) {
      double emax = 0.0;
      for (std::size_t k = 0; k < nx * ny; ++k)
        if (active[k])
          for (std::size_t iz = 0; iz < nz; ++iz) emax = std::max(emax, std::abs(u.epar[k * nz + iz]));
      check_cfl(h, emax, av.spacing(), opt.cfl, "v-advection");
    }
    // The two v-end nodes are boundary nodes: they keep their value and
    // exchange no flux, so the trapezoid sum in v is conserved by FD.
    const std::size_t ni = nv - 2;
    parallel_for(nx * ny, [&](std::size_t b, std::size_t e) {
      std::vector<double> line(ni);
      for (std::size_t k = b; k < e; ++k) {
        if (!active[k]) continue;
        for (std::size_t iz = 0; iz < nz; ++iz) {
          double* p = data.data() + (k * nz + iz) * nv;
          std::copy(p + 1, p + 1 + ni, line.begin());
          const LineFill ends = LineFill::constant(p[0], p[nv - 1]);
          const double a = u.epar[k * nz + iz];
          const std::span<const double> sa(&a, 1);
          if (fd) {
            rk4_step(
                line,
                [&](const std::vector<double>& y, std::vector<double>& out) {
                  out = fd_rhs_1d(y, sa, av.spacing(), ends, opt.flux_form);
                },
                h);
          } else {
            line = sl_advect_1d(line, sa, h, av.spacing(), ends);
          }
          std::copy(line.begin(), line.end(), p + 1);
        }
      }
    });
  };

  auto z_flow = [&](double h) {
    if (fd) {
      const double vmax = std::max(std::abs(av.min()), std::abs(av.max()));
      check_cfl(h, vmax, az.spacing(), opt.cfl, "z-advection");
    }
    parallel_for(nx * ny, [&](std::size_t b, std::size_t e) {
      std::vector<double> line(nz);
      for (std::size_t k = b; k < e; ++k) {
        if (!active[k]) continue;
        for (std::size_t iv = 0; iv < nv; ++iv) {
          const double a = av.coord(static_cast<std::ptrdiff_t>(iv));
          const std::span<const double> sa(&a, 1);
          for (std::size_t iz = 0; iz < nz; ++iz) line[iz] = data[(k * nz + iz) * nv + iv];
          if (fd) {
            rk4_step(
                line,
                [&](const std::vector<double>& y, std::vector<double>& out) {
                  out = fd_rhs_1d(y, sa, az.spacing(), LineFill::wrap(), opt.flux_form);
                },
                h);
          } else {
            line = sl_advect_1d(line, sa, h, az.spacing(), LineFill::wrap());
          }
          for (std::size_t iz = 0; iz < nz; ++iz) data[(k * nz + iz) * nv + iv] = line[iz];
        }
      }
    });
  };

  auto xy_flow = [&](double h) {
    std::vector<std::vector<double>> ux(nz, std::vector<double>(nx * ny));
    std::vector<std::vector<double>> uy(nz, std::vector<double>(nx * ny));
    for (std::size_t k = 0; k < nx * ny; ++k)
      for (std::size_t iz = 0; iz < nz; ++iz) {
        ux[iz][k] = u.ux[k * nz + iz];
        uy[iz][k] = u.uy[k * nz + iz];
      }
    if (fd)
      for (std::size_t iz = 0; iz < nz; ++iz) plane.check_cfl(ux[iz], uy[iz], h, opt.cfl);
    // The plane sweeps parallelize internally over lines.
    std::vector<double> buf(nx * ny);
    for (std::size_t iz = 0; iz < nz; ++iz) {
      for (std::size_t iv = 0; iv < nv; ++iv) {
        for (std::size_t k = 0; k < nx * ny; ++k) buf[k] = data[(k * nz + iz) * nv + iv];
        if (fd) {
          rk4_step(
              buf,
              [&](const std::vector<double>& y, std::vector<double>& out) {
                plane.fd_rhs(y, ux[iz], uy[iz], out);
              },
              h);
        } else {
          plane.sl_step(buf, ux[iz], uy[iz], h, [&](Vec2 x) { return fill(x, iv); });
        }
        for (std::size_t k = 0; k < nx * ny; ++k)
          if (active[k]) data[(k * nz + iz) * nv + iv] = buf[k];
      }
    }
  };

  v_flow(0.5 * dt);
  z_flow(0.5 * dt);
  xy_flow(dt);
  z_flow(0.5 * dt);
  v_flow(0.5 * dt);
}

}  // namespace mixsl
