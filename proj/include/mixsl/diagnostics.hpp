#pragma once

// Conserved quantities, relative errors and the instability amplitude, plus
// the time-series CSV.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixsl/errors.hpp"
#include "mixsl/grid.hpp"
#include "mixsl/transport.hpp"

namespace mixsl {

struct Conserved {
  double mass = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double entropy = 0.0;
  double energy = 0.0;
};

inline double entropy_density(double f) { return f == 0.0 ? 0.0 : f * std::log(std::abs(f)); }

/// Mass, L1, L2, entropy and energy of f(x, y, z, v) over the interior
/// plane nodes. energy = ∫ (f - f_M) v^2 + ∫ phi (rho - rho0) with rho the
/// v-moment of f; f_M is a 4D field, phi a 3D (x, y, z) field and rho0 a
/// plane field.
inline Conserved conserved_dk(const Field& f, const Field& phi, const Field& f_m, const Field& rho0,
                              std::span<const std::uint8_t> plane_mask) {
  const Grid& g = f.grid();
  const Quadrature q(g, plane_mask);
  Conserved c;
  c.mass = q.integrate(f.data());
  c.l1 = q.sum(f.data(), [](double v) { return std::abs(v); });
  c.l2 = std::sqrt(q.sum(f.data(), [](double v) { return v * v; }));
  c.entropy = q.sum(f.data(), entropy_density);

  const std::size_t nx = g.n(0), ny = g.n(1), nz = g.n(2), nv = g.n(3);
  const auto wv = default_weights(g.axis(3));
  const double cell = g.spacing(0) * g.spacing(1) * g.spacing(2);
  CompensatedSum kinetic, field;
  for (std::size_t p = 0; p < nx * ny; ++p) {
    if (!plane_mask[p]) continue;
    for (std::size_t iz = 0; iz < nz; ++iz) {
      CompensatedSum rho;
      const std::size_t base = (p * nz + iz) * nv;
      for (std::size_t iv = 0; iv < nv; ++iv) {
        const double v = g.axis(3).coord(static_cast<std::ptrdiff_t>(iv));
        kinetic.add(cell * wv[iv] * (f[base + iv] - f_m[base + iv]) * v * v);
        rho.add(wv[iv] * f[base + iv]);
      }
      field.add(cell * phi[p * nz + iz] * (rho.value() - rho0[p]));
    }
  }
  c.energy = kinetic.value() + field.value();
  return c;
}

/// Guiding-center quantities over interior nodes; energy = ∫ rho_bar phi.
inline Conserved conserved_gc(const Field& rho_bar, const Field& phi,
                              std::span<const std::uint8_t> mask) {
  const Quadrature q(rho_bar.grid(), mask);
  Conserved c;
  c.mass = q.integrate(rho_bar.data());
  c.l1 = q.sum(rho_bar.data(), [](double v) { return std::abs(v); });
  c.l2 = std::sqrt(q.sum(rho_bar.data(), [](double v) { return v * v; }));
  c.entropy = q.sum(rho_bar.data(), entropy_density);
  std::vector<double> prod(rho_bar.size());
  for (std::size_t k = 0; k < prod.size(); ++k) prod[k] = rho_bar[k] * phi[k];
  c.energy = q.integrate(prod);
  return c;
}

/// ||u_t - u_0||_1 / ||u_0||_1 over the nodes flagged in `mask` (2D fields).
inline double relative_error(const Field& ut, const Field& u0, std::span<const std::uint8_t> mask) {
  CompensatedSum num, den;
  for (std::size_t k = 0; k < u0.size(); ++k) {
    if (!mask.empty() && !mask[k]) continue;
    num.add(std::abs(ut[k] - u0[k]));
    den.add(std::abs(u0[k]));
  }
  if (!(den.value() > 0.0)) throw SolverError("relative error: reference has zero L1 norm");
  return num.value() / den.value();
}

/// sqrt(∫∫ phi^2 r_p dtheta dz) over the cylinder r = r_p: phi(x, y, z)
/// sampled bilinearly at n_theta equi-angular points per z-slice.
inline double phi_amplitude(const Field& phi, double r_p, std::size_t n_theta = 256) {
  const Grid& g = phi.grid();
  if (g.dim() != 3) throw ConfigError("phi_amplitude needs a 3D potential");
  const Axis& ax = g.axis(0);
  const Axis& ay = g.axis(1);
  const std::size_t ny = g.n(1), nz = g.n(2);
  const double dtheta = 2.0 * std::numbers::pi / static_cast<double>(n_theta);
  CompensatedSum s;
  for (std::size_t k = 0; k < n_theta; ++k) {
    const double th = dtheta * static_cast<double>(k);
    const double u = (r_p * std::cos(th) - ax.min()) / ax.spacing();
    const double v = (r_p * std::sin(th) - ay.min()) / ay.spacing();
    const double fu = std::floor(u), fv = std::floor(v);
    const double tu = u - fu, tv = v - fv;
    const auto i = static_cast<std::ptrdiff_t>(fu), j = static_cast<std::ptrdiff_t>(fv);
    auto node = [&](std::ptrdiff_t a, std::ptrdiff_t b) { return ax.resolve(a) * ny + ay.resolve(b); };
    const std::size_t n00 = node(i, j), n01 = node(i, j + 1), n10 = node(i + 1, j), n11 = node(i + 1, j + 1);
    for (std::size_t iz = 0; iz < nz; ++iz) {
      const double val = (1.0 - tu) * ((1.0 - tv) * phi[n00 * nz + iz] + tv * phi[n01 * nz + iz]) +
                         tu * ((1.0 - tv) * phi[n10 * nz + iz] + tv * phi[n11 * nz + iz]);
      s.add(val * val);
    }
  }
  return std::sqrt(s.value() * r_p * dtheta * g.spacing(2));
}

struct DiagnosticsRecord {
  double time = 0.0;
  double mass = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double entropy = 0.0;
  double energy = 0.0;
  std::optional<double> relerr_phi;
  std::optional<double> relerr_rho;
  std::optional<double> phi_amplitude;
  Phase phase = Phase::kLinearSL;
};

inline constexpr const char* kDiagnosticsHeader =
    "time,mass,l1,l2,entropy,energy,relerr_phi,relerr_rho,phi_amplitude,phase";

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_row(const DiagnosticsRecord& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  return format_real(r.time) + ',' + format_real(r.mass) + ',' + format_real(r.l1) + ',' +
         format_real(r.l2) + ',' + format_real(r.entropy) + ',' + format_real(r.energy) + ',' +
         opt(r.relerr_phi) + ',' + opt(r.relerr_rho) + ',' + opt(r.phi_amplitude) + ',' +
         to_string(r.phase);
}

/// Appends rows to a CSV, writing the header when the file is new.
class DiagnosticsWriter {
 public:
  DiagnosticsWriter() = default;
  DiagnosticsWriter(const std::string& path, bool append) : path_(path) {
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) throw IoError("cannot open diagnostics file: " + path);
    if (!append) out_ << kDiagnosticsHeader << '\n';
  }

  void write(const DiagnosticsRecord& r) {
    out_ << format_row(r) << '\n';
    out_.flush();
    if (!out_) throw IoError("failed writing diagnostics: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace mixsl
